//! Fixtures shared by the benchmarks in `benches/`.

use epinet::models::{EpidemicModel, EpidemicParams, Family};

pub const BETA: f64 = 2e-4;
pub const GAMMA: f64 = 0.032;
pub const MU: f64 = 0.015;

/// Catalog model with the reference parameter set.
pub fn model(family: Family) -> EpidemicModel {
    let base = EpidemicParams::new(BETA, GAMMA, MU);
    let params = match family {
        Family::Seis | Family::Seir => base.with_epsilon(0.016),
        Family::Msir => base.with_delta(0.05),
        Family::SirVaccA | Family::SirVaccR => base.with_p(0.8),
        Family::SirVaccS => base.with_rho(0.02),
        Family::Sir => base,
    };
    EpidemicModel::new(family, params).expect("reference parameters are valid")
}

/// Initial state `(700, 200, 70)` padded with zeros.
pub fn initial_state(m: &EpidemicModel) -> Vec<f64> {
    let mut x = vec![700.0, 200.0, 70.0];
    x.resize(m.n(), 0.0);
    x
}

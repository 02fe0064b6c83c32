//! The epidemic model catalog and its lowering onto ring networks.
//!
//! State orders are fixed per family so that every flow runs between ring
//! neighbours:
//!
//! | family       | order          | ring flows                              |
//! |--------------|----------------|-----------------------------------------|
//! | `SIR`        | S, I, R        | S→I `βIS`, I→R `γI`                     |
//! | `SEIS`       | S, E, I        | S→E `βIS`, E→I `εE`, I→S `γI` (wrap)    |
//! | `MSIR`       | M, S, I, R     | M→S `δM`, S→I `βIS`, I→R `γI`           |
//! | `SEIR`       | S, E, I, R     | S→E `βIS`, E→I `εE`, I→R `γI`           |
//! | `SIR_VACC_A` | S, I, R, A     | S→I `βIS`, I→R `γI`                     |
//! | `SIR_VACC_R` | S, I, R        | S→I `βIS`, I→R `γI`                     |
//! | `SIR_VACC_S` | S, I, R, A     | S→I `βIS`, I→R `γI`, S→A `ρS` (wrap)    |
//!
//! Every flow is conserving (`ℓ = 1`), unused directions declare `ℓ = 1`, and
//! every state dies at `θ_i(s) = μs`. The inflow `B` is broadcast to all input
//! channels; the channel gains route it (`κ_S = 1 − P`, `κ_A = P`, ...).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::comparison::ComparisonFn;
use crate::error::{Error, Result};
use crate::network::{BalancedNetwork, Coupling, InputSignal, RateFunction, Transfer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "SIR")]
    Sir,
    #[serde(rename = "SEIS")]
    Seis,
    #[serde(rename = "MSIR")]
    Msir,
    #[serde(rename = "SEIR")]
    Seir,
    /// Newborn vaccination into a separate immune class `A`.
    #[serde(rename = "SIR_VACC_A")]
    SirVaccA,
    /// Newborn vaccination straight into `R`.
    #[serde(rename = "SIR_VACC_R")]
    SirVaccR,
    /// Continuous vaccination of susceptibles at rate `ρ`.
    #[serde(rename = "SIR_VACC_S")]
    SirVaccS,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Sir,
        Family::Seis,
        Family::Msir,
        Family::Seir,
        Family::SirVaccA,
        Family::SirVaccR,
        Family::SirVaccS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Sir => "SIR",
            Family::Seis => "SEIS",
            Family::Msir => "MSIR",
            Family::Seir => "SEIR",
            Family::SirVaccA => "SIR_VACC_A",
            Family::SirVaccR => "SIR_VACC_R",
            Family::SirVaccS => "SIR_VACC_S",
        }
    }

    pub fn parse(name: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name().eq_ignore_ascii_case(name))
    }

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Family::Sir | Family::SirVaccR => &["S", "I", "R"],
            Family::Seis => &["S", "E", "I"],
            Family::Msir => &["M", "S", "I", "R"],
            Family::Seir => &["S", "E", "I", "R"],
            Family::SirVaccA | Family::SirVaccS => &["S", "I", "R", "A"],
        }
    }

    /// Indices of the infected compartments.
    pub fn infected(self) -> &'static [usize] {
        match self {
            Family::Sir | Family::SirVaccA | Family::SirVaccR | Family::SirVaccS => &[1],
            Family::Seis | Family::Seir => &[1, 2],
            Family::Msir => &[2],
        }
    }

    pub fn susceptible(self) -> usize {
        match self {
            Family::Msir => 1,
            _ => 0,
        }
    }

    /// Whether the bifurcation point carries the incubation factor.
    pub fn has_incubation(self) -> bool {
        matches!(self, Family::Seis | Family::Seir)
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Family::Sir => &[],
            Family::Seis | Family::Seir => &["epsilon"],
            Family::Msir => &["delta"],
            Family::SirVaccA | Family::SirVaccR => &["p"],
            Family::SirVaccS => &["rho"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rate parameters. Units: `beta` per population per time, the others per
/// time; `p` is a fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct EpidemicParams {
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

impl EpidemicParams {
    pub fn new(beta: f64, gamma: f64, mu: f64) -> Self {
        EpidemicParams {
            beta,
            gamma,
            mu,
            ..Default::default()
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = Some(rho);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "beta" => Some(self.beta),
            "gamma" => Some(self.gamma),
            "mu" => Some(self.mu),
            "epsilon" => self.epsilon,
            "delta" => self.delta,
            "p" => self.p,
            "rho" => self.rho,
            _ => None,
        }
    }

    /// Sets a named parameter; unknown names are rejected.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "beta" => self.beta = value,
            "gamma" => self.gamma = value,
            "mu" => self.mu = value,
            "epsilon" => self.epsilon = Some(value),
            "delta" => self.delta = Some(value),
            "p" => self.p = Some(value),
            "rho" => self.rho = Some(value),
            other => {
                return Err(Error::InvalidParameter {
                    field: other.to_string(),
                    reason: "unknown parameter".into(),
                })
            }
        }
        Ok(())
    }
}

pub const PARAM_NAMES: [&str; 7] = ["beta", "gamma", "mu", "epsilon", "delta", "p", "rho"];

/// Scalar newborn/immigration rate `B(t) ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Inflow {
    Constant { value: f64 },
    PiecewiseConstant { breakpoints: Vec<f64>, levels: Vec<f64> },
}

impl Inflow {
    pub fn constant(value: f64) -> Self {
        Inflow::Constant { value }
    }

    pub fn sup(&self) -> f64 {
        match self {
            Inflow::Constant { value } => *value,
            Inflow::PiecewiseConstant { levels, .. } => levels.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Inflow::Constant { value } => Some(*value),
            Inflow::PiecewiseConstant { .. } => None,
        }
    }

    /// Broadcasts `B(t)` to `channels` identical input channels.
    pub fn to_signal(&self, channels: usize) -> Result<InputSignal> {
        match self {
            Inflow::Constant { value } => InputSignal::constant(vec![*value; channels]),
            Inflow::PiecewiseConstant { breakpoints, levels } => {
                InputSignal::piecewise(breakpoints.clone(), levels.iter().map(|v| vec![*v; channels]).collect())
            }
        }
    }
}

/// A validated catalog entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpidemicModel {
    pub family: Family,
    pub params: EpidemicParams,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field: field.to_string(),
            reason: format!("must be finite and > 0, got {v}"),
        })
    }
}

impl EpidemicModel {
    pub fn new(family: Family, params: EpidemicParams) -> Result<Self> {
        positive("beta", params.beta)?;
        positive("gamma", params.gamma)?;
        positive("mu", params.mu)?;
        let required = family.required();
        for (name, value) in [
            ("epsilon", params.epsilon),
            ("delta", params.delta),
            ("p", params.p),
            ("rho", params.rho),
        ] {
            match (required.contains(&name), value) {
                (true, None) => return Err(Error::MissingParameter(name.to_string())),
                (false, Some(_)) => {
                    return Err(Error::InvalidParameter {
                        field: name.to_string(),
                        reason: format!("not a parameter of the {family} model"),
                    })
                }
                (true, Some(v)) if name == "p" => {
                    if !(v.is_finite() && (0.0..1.0).contains(&v)) {
                        return Err(Error::InvalidParameter {
                            field: "p".into(),
                            reason: format!("vaccination fraction must lie in [0, 1), got {v}"),
                        });
                    }
                }
                (true, Some(v)) => positive(name, v)?,
                (false, None) => {}
            }
        }
        Ok(EpidemicModel { family, params })
    }

    pub fn sir(beta: f64, gamma: f64, mu: f64) -> Result<Self> {
        Self::new(Family::Sir, EpidemicParams::new(beta, gamma, mu))
    }

    pub fn n(&self) -> usize {
        self.family.labels().len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.family.labels().iter().map(|s| s.to_string()).collect()
    }

    pub fn epsilon(&self) -> f64 {
        self.params.epsilon.unwrap_or(f64::NAN)
    }

    pub fn delta(&self) -> f64 {
        self.params.delta.unwrap_or(f64::NAN)
    }

    /// Vaccination fraction; zero for families without one.
    pub fn p(&self) -> f64 {
        self.params.p.unwrap_or(0.0)
    }

    pub fn rho(&self) -> f64 {
        self.params.rho.unwrap_or(0.0)
    }

    /// The part of `B` that enters the susceptible class.
    pub fn effective_inflow(&self, b: f64) -> f64 {
        match self.family {
            Family::SirVaccA | Family::SirVaccR => b * (1.0 - self.p()),
            _ => b,
        }
    }

    pub fn input_signal(&self, inflow: &Inflow) -> Result<InputSignal> {
        inflow.to_signal(self.n())
    }

    /// Lowers the model onto a ring network.
    pub fn lower(&self) -> BalancedNetwork {
        let EpidemicParams { beta, gamma, mu, .. } = self.params;
        let n = self.n();
        let mut couplings: Vec<Coupling> = (0..n)
            .map(|_| Coupling {
                forward: Transfer::none(1.0),
                backward: Transfer::none(1.0),
            })
            .collect();
        let mut kappa = vec![ComparisonFn::Zero; n];
        kappa[0] = ComparisonFn::Linear(1.0);

        let mut flow = |edge: usize, rate: RateFunction| couplings[edge].forward = Transfer::conserving(rate);
        match self.family {
            Family::Sir => {
                flow(0, RateFunction::bilinear(beta, 0, 1));
                flow(1, RateFunction::linear(gamma, 1));
            }
            Family::Seis => {
                flow(0, RateFunction::bilinear(beta, 0, 2));
                flow(1, RateFunction::linear(self.epsilon(), 1));
                flow(2, RateFunction::linear(gamma, 2));
            }
            Family::Msir => {
                flow(0, RateFunction::linear(self.delta(), 0));
                flow(1, RateFunction::bilinear(beta, 1, 2));
                flow(2, RateFunction::linear(gamma, 2));
            }
            Family::Seir => {
                flow(0, RateFunction::bilinear(beta, 0, 2));
                flow(1, RateFunction::linear(self.epsilon(), 1));
                flow(2, RateFunction::linear(gamma, 2));
            }
            Family::SirVaccA | Family::SirVaccR | Family::SirVaccS => {
                flow(0, RateFunction::bilinear(beta, 0, 1));
                flow(1, RateFunction::linear(gamma, 1));
            }
        }
        match self.family {
            Family::SirVaccA => {
                kappa[0] = ComparisonFn::Linear(1.0 - self.p());
                kappa[3] = linear_or_zero(self.p());
            }
            Family::SirVaccR => {
                kappa[0] = ComparisonFn::Linear(1.0 - self.p());
                kappa[2] = linear_or_zero(self.p());
            }
            Family::SirVaccS => {
                // Coupling 3 joins A (node 3) and S (node 0); S→A runs backward.
                couplings[3].backward = Transfer::conserving(RateFunction::linear(self.rho(), 0));
            }
            _ => {}
        }
        BalancedNetwork::new(self.labels(), couplings, vec![ComparisonFn::Linear(mu); n], kappa)
            .expect("catalog lowering is well formed")
    }
}

fn linear_or_zero(c: f64) -> ComparisonFn {
    if c == 0.0 {
        ComparisonFn::Zero
    } else {
        ComparisonFn::Linear(c)
    }
}

/// The `(E, I)` part of SEIS with `S` frozen at `s_sharp`, split with a
/// parameter `a ∈ (0, 1)`:
///
/// `ℓ_{1,2} = βS♯/(a(γ+μ))`, `ℓ_{2,1} = ε/(a(ε+μ))`,
/// `θ_E = (1−a)(ε+μ)s`, `θ_I = (1−a)(γ+μ)s`.
///
/// Both couplings of the two-node ring carry the same gain pair, so the cycle
/// product is one and only the pair product matters.
pub fn seis_ei_subsystem(params: &EpidemicParams, s_sharp: f64, a: f64) -> Result<BalancedNetwork> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter {
            field: "a".into(),
            reason: format!("split parameter must lie in (0, 1), got {a}"),
        });
    }
    let eps = params
        .epsilon
        .ok_or_else(|| Error::MissingParameter("epsilon".into()))?;
    let EpidemicParams { beta, gamma, mu, .. } = *params;
    let ell_ie = eps / (a * (eps + mu)); // ℓ_{2,1}: I produced from E
    let ell_ei = beta * s_sharp / (a * (gamma + mu)); // ℓ_{1,2}: E produced from I
    let e_to_i = Transfer::new(
        RateFunction::linear(a * (eps + mu), 0),
        RateFunction::linear(eps, 0),
        ell_ie,
    );
    let i_to_e = Transfer::new(
        RateFunction::linear(a * (gamma + mu), 1),
        RateFunction::linear(beta * s_sharp, 1),
        ell_ei,
    );
    BalancedNetwork::new(
        vec!["E".into(), "I".into()],
        vec![
            Coupling {
                forward: e_to_i,
                backward: i_to_e,
            },
            Coupling {
                forward: Transfer::none(ell_ei),
                backward: Transfer::none(ell_ie),
            },
        ],
        vec![
            ComparisonFn::Linear((1.0 - a) * (eps + mu)),
            ComparisonFn::Linear((1.0 - a) * (gamma + mu)),
        ],
        vec![ComparisonFn::Zero, ComparisonFn::Zero],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{validate_gain_bounds, validate_positivity, SampleBox, SampleSpec};

    fn reference() -> EpidemicParams {
        EpidemicParams::new(0.0002, 0.032, 0.015)
    }

    #[test]
    fn parameter_validation() {
        assert!(EpidemicModel::new(Family::Sir, reference()).is_ok());
        assert!(matches!(
            EpidemicModel::new(Family::Sir, EpidemicParams::new(-1.0, 0.032, 0.015)),
            Err(Error::InvalidParameter { ref field, .. }) if field == "beta"
        ));
        assert_eq!(
            EpidemicModel::new(Family::Seis, reference()).unwrap_err(),
            Error::MissingParameter("epsilon".into())
        );
        assert!(EpidemicModel::new(Family::SirVaccA, reference().with_p(1.0)).is_err());
        assert!(EpidemicModel::new(Family::SirVaccA, reference().with_p(0.0)).is_ok());
        assert!(EpidemicModel::new(Family::Sir, reference().with_rho(0.1)).is_err());
    }

    #[test]
    fn seis_closes_the_ring_and_sir_does_not() {
        let seis = EpidemicModel::new(Family::Seis, reference().with_epsilon(0.016))
            .unwrap()
            .lower();
        let wrap = &seis.couplings()[2].forward;
        assert!(!wrap.consumption.is_zero() && !wrap.production.is_zero());
        let sir = EpidemicModel::sir(0.0002, 0.032, 0.015).unwrap().lower();
        let wrap = &sir.couplings()[2];
        assert!(wrap.forward.production.is_zero() && wrap.backward.production.is_zero());
    }

    #[test]
    fn vaccination_a_routes_input() {
        let m = EpidemicModel::new(Family::SirVaccA, reference().with_p(0.8)).unwrap();
        let net = m.lower();
        assert_eq!(net.n(), 4);
        let f = net.vector_field(&[0.0; 4], &[12.0; 4]).unwrap();
        assert!((f[0] - 12.0 * 0.2).abs() < 1e-12);
        assert!((f[3] - 12.0 * 0.8).abs() < 1e-12);
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn every_lowering_passes_structural_checks() {
        for family in Family::ALL {
            let params = match family {
                Family::Seis | Family::Seir => reference().with_epsilon(0.016),
                Family::Msir => reference().with_delta(0.05),
                Family::SirVaccA | Family::SirVaccR => reference().with_p(0.5),
                Family::SirVaccS => reference().with_rho(0.02),
                Family::Sir => reference(),
            };
            let net = EpidemicModel::new(family, params).unwrap().lower();
            let spec = SampleSpec::new(200, SampleBox::uniform(net.n(), 1000.0));
            let pos = validate_positivity(&net, &spec).unwrap();
            assert!(pos.passed && pos.exact == Some(true), "{family}: {pos:?}");
            let gains = validate_gain_bounds(&net, &spec).unwrap();
            assert!(gains.passed && gains.exact == Some(true), "{family}: {gains:?}");
        }
    }

    #[test]
    fn ei_subsystem_bounds_hold() {
        let p = reference().with_epsilon(0.016);
        let h = (p.gamma + p.mu) * (0.016 + p.mu) / (p.beta * 0.016);
        let net = seis_ei_subsystem(&p, 0.25 * h, 0.5).unwrap();
        let spec = SampleSpec::new(1000, SampleBox::uniform(2, 500.0));
        let rep = validate_gain_bounds(&net, &spec).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(seis_ei_subsystem(&p, h, 1.0).is_err());
    }
}

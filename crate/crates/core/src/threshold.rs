//! Bifurcation points, input thresholds, reproduction numbers and equilibria.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use crate::comparison::ominus;
use crate::comparison::ComparisonFn;
use crate::error::{Error, Result};
use crate::models::{seis_ei_subsystem, EpidemicModel, EpidemicParams, Family};
use crate::network::InputSignal;
use crate::simulate::{integrate, SimConfig};

/// Default split parameter for the SEIS/SEIR `V_L` monitor.
pub const DEFAULT_SPLIT: f64 = 0.95;

/// `H`: the susceptible level at which the infected compartments stop
/// growing.
pub fn bifurcation_point(model: &EpidemicModel) -> f64 {
    let EpidemicParams { beta, gamma, mu, .. } = model.params;
    if model.family.has_incubation() {
        let eps = model.epsilon();
        (gamma + mu) * (eps + mu) / (beta * eps)
    } else {
        (gamma + mu) / beta
    }
}

/// Decay coefficient of the `U` aggregate.
fn alpha_u_coef(model: &EpidemicModel) -> f64 {
    match model.family {
        Family::SirVaccS => model.rho() + model.params.mu,
        _ => model.params.mu,
    }
}

/// Input coefficient of the `U` aggregate, per unit of raw `B`.
fn sigma_u_coef(model: &EpidemicModel) -> f64 {
    match model.family {
        Family::SirVaccA | Family::SirVaccR => 1.0 - model.p(),
        _ => 1.0,
    }
}

/// `Q`: eradication is guaranteed when the effective inflow stays below it.
/// For newborn vaccination the comparison is against `B(1−P)`.
pub fn input_threshold(model: &EpidemicModel) -> f64 {
    alpha_u_coef(model) * bifurcation_point(model)
}

/// The threshold expressed on raw `B`: `lim_{s→H−} σ_U⊖(α_U(s))`.
pub fn input_threshold_raw(model: &EpidemicModel) -> Result<f64> {
    let part = partition_ul(model)?;
    threshold_from_supply(&part.alpha_u, &part.sigma_u, bifurcation_point(model))
}

/// `lim_{s→H−} σ⊖(α(s))`; exact at `s = H` for linear descriptors, and at
/// `H(1 − 1e−9)` otherwise.
pub fn threshold_from_supply(alpha: &ComparisonFn, sigma: &ComparisonFn, h: f64) -> Result<f64> {
    let both_linear = alpha.linear_coef().is_some() && sigma.linear_coef().is_some();
    let s = if both_linear { h } else { h * (1.0 - 1e-9) };
    ominus(sigma, alpha.eval(s))
}

/// `R₀ = S_dfe/H`, the disease-free susceptible level relative to `H`.
pub fn reproduction_number(model: &EpidemicModel, b: f64) -> f64 {
    disease_free(model, b)[model.family.susceptible()] / bifurcation_point(model)
}

pub fn disease_free(model: &EpidemicModel, b: f64) -> Vec<f64> {
    let mu = model.params.mu;
    match model.family {
        Family::Sir | Family::Seis => vec![b / mu, 0.0, 0.0],
        Family::Seir => vec![b / mu, 0.0, 0.0, 0.0],
        Family::Msir => {
            let d = model.delta();
            vec![b / (d + mu), d * b / (mu * (d + mu)), 0.0, 0.0]
        }
        Family::SirVaccA => {
            let p = model.p();
            vec![b * (1.0 - p) / mu, 0.0, 0.0, b * p / mu]
        }
        Family::SirVaccR => {
            let p = model.p();
            vec![b * (1.0 - p) / mu, 0.0, b * p / mu]
        }
        Family::SirVaccS => {
            let rho = model.rho();
            vec![b / (rho + mu), 0.0, 0.0, rho * b / (mu * (rho + mu))]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndemicStatus {
    /// `R₀ < 1`.
    Absent,
    /// `R₀ = 1`: coincides with the disease-free point.
    Coincident,
    ClosedForm,
    Numeric {
        iterations: usize,
        residual: f64,
    },
    /// Root finding failed; the equilibrium is omitted.
    NotConverged {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibria {
    pub disease_free: Vec<f64>,
    pub endemic: Option<Vec<f64>>,
    pub status: EndemicStatus,
}

const R0_UNIT_TOL: f64 = 1e-12;
const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 200;

pub fn equilibria(model: &EpidemicModel, b: f64) -> Result<Equilibria> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::InvalidParameter {
            field: "B".into(),
            reason: format!("inflow must be finite and nonnegative, got {b}"),
        });
    }
    let dfe = disease_free(model, b);
    let r0 = reproduction_number(model, b);
    if (r0 - 1.0).abs() <= R0_UNIT_TOL {
        return Ok(Equilibria {
            endemic: Some(dfe.clone()),
            disease_free: dfe,
            status: EndemicStatus::Coincident,
        });
    }
    if r0 < 1.0 {
        return Ok(Equilibria {
            disease_free: dfe,
            endemic: None,
            status: EndemicStatus::Absent,
        });
    }
    if let Some(x) = endemic_closed_form(model, b, r0) {
        return Ok(Equilibria {
            disease_free: dfe,
            endemic: Some(x),
            status: EndemicStatus::ClosedForm,
        });
    }
    let (endemic, status) = match endemic_numeric(model, b, &dfe) {
        Ok((x, iterations, residual)) => (Some(x), EndemicStatus::Numeric { iterations, residual }),
        Err(reason) => (None, EndemicStatus::NotConverged { reason }),
    };
    Ok(Equilibria {
        disease_free: dfe,
        endemic,
        status,
    })
}

fn endemic_closed_form(model: &EpidemicModel, b: f64, r0: f64) -> Option<Vec<f64>> {
    let EpidemicParams { beta, gamma, mu, .. } = model.params;
    let h = bifurcation_point(model);
    match model.family {
        Family::Sir => Some(vec![h, mu * (r0 - 1.0) / beta, gamma * (r0 - 1.0) / beta]),
        Family::SirVaccA => {
            let i = mu * (r0 - 1.0) / beta;
            Some(vec![h, i, gamma * i / mu, b * model.p() / mu])
        }
        Family::SirVaccR => {
            let i = mu * (r0 - 1.0) / beta;
            Some(vec![h, i, (gamma * i + b * model.p()) / mu])
        }
        Family::SirVaccS => {
            let rho = model.rho();
            let i = (rho + mu) * (r0 - 1.0) / beta;
            Some(vec![h, i, gamma * i / mu, rho * h / mu])
        }
        Family::Seis | Family::Msir | Family::Seir => None,
    }
}

fn residual(model: &EpidemicModel, b: f64, x: &[f64]) -> Vec<f64> {
    let net = model.lower();
    net.vector_field(x, &vec![b; model.n()]).expect("dimensions match")
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// The residual multiplied by `1 + 1/‖x − r‖²` for a known root `r`, so that
/// Newton cannot converge back to `r` (deflation).
fn deflated(model: &EpidemicModel, b: f64, x: &[f64], known: Option<&[f64]>) -> Vec<f64> {
    let mut f = residual(model, b, x);
    if let Some(r) = known {
        let d2: f64 = x.iter().zip(r).map(|(a, c)| (a - c) * (a - c)).sum();
        let m = 1.0 + 1.0 / d2;
        f.iter_mut().for_each(|v| *v *= m);
    }
    f
}

/// Damped Newton with a finite-difference Jacobian, optionally deflating a
/// known root. Convergence is judged on the undeflated residual.
fn newton(
    model: &EpidemicModel,
    b: f64,
    start: &[f64],
    known: Option<&[f64]>,
) -> std::result::Result<(Vec<f64>, usize, f64), String> {
    let n = start.len();
    let mut x = start.to_vec();
    let mut f = deflated(model, b, &x, known);
    let scale = max_abs(start).max(1.0);
    for iter in 0..NEWTON_MAX_ITER {
        let raw = max_abs(&residual(model, b, &x));
        if raw <= NEWTON_TOL {
            return Ok((x, iter, raw));
        }
        let norm = max_abs(&f);
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fp = deflated(model, b, &xp, known);
            let fm = deflated(model, b, &xm, known);
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(n, f.iter().map(|v| -v));
        let Some(dx) = jac.lu().solve(&rhs) else {
            return Err(format!("singular Jacobian at iteration {iter}"));
        };
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + step * d).collect();
            let ft = deflated(model, b, &trial, known);
            if max_abs(&ft) < norm || step < 1e-6 {
                x = trial;
                f = ft;
                break;
            }
            step *= 0.5;
        }
        if max_abs(&x) > 1e6 * scale {
            return Err("iterates diverged".into());
        }
    }
    Err(format!("no convergence within {NEWTON_MAX_ITER} iterations"))
}

fn is_endemic(model: &EpidemicModel, x: &[f64], dfe: &[f64]) -> bool {
    let scale = max_abs(dfe).max(1.0);
    x.iter().all(|v| *v >= -1e-9 * scale) && model.family.infected().iter().any(|&i| x[i] > 1e-6 * scale)
}

/// Deflated Newton from a sequence of starting points: the perturbed
/// disease-free point, a point with the susceptible class at `H` and the rest
/// of `B/μ` spread over the other classes, and finally a state relaxed along
/// the flow. Close to `R₀ = 1` the first start stalls next to the deflated
/// root, which is why the later ones exist.
fn endemic_numeric(model: &EpidemicModel, b: f64, dfe: &[f64]) -> std::result::Result<(Vec<f64>, usize, f64), String> {
    let n = model.n();
    let mut perturbed = dfe.to_vec();
    perturbed[model.family.infected()[0]] += 1.0;

    let s_idx = model.family.susceptible();
    let h = bifurcation_point(model);
    let mut balanced = dfe.to_vec();
    let rest = (b / model.params.mu - h - dfe.iter().take(s_idx).sum::<f64>()).max(0.0);
    balanced[s_idx] = h;
    for v in balanced.iter_mut().skip(s_idx + 1) {
        *v = rest / (n - s_idx - 1) as f64;
    }

    let mut last_err = String::new();
    for start in [perturbed.clone(), balanced] {
        match newton(model, b, &start, Some(dfe)) {
            Ok(found) if is_endemic(model, &found.0, dfe) => return check_total(model, b, found),
            Ok(_) => last_err = "root finder returned a point without infection".into(),
            Err(e) => last_err = e,
        }
    }
    let net = model.lower();
    let input = InputSignal::constant(vec![b; n]).map_err(|e| e.to_string())?;
    let horizon = 20.0 / model.params.mu;
    let traj = integrate(
        &net,
        &perturbed,
        &input,
        &SimConfig::rk4(horizon, 0.05).with_stride(1000),
    )
    .map_err(|e| e.to_string())?;
    match newton(model, b, traj.last_state(), Some(dfe)) {
        Ok(found) if is_endemic(model, &found.0, dfe) => check_total(model, b, found),
        Ok(_) => Err(last_err),
        Err(e) => Err(format!("{last_err}; after relaxation: {e}")),
    }
}

fn check_total(
    model: &EpidemicModel,
    b: f64,
    found: (Vec<f64>, usize, f64),
) -> std::result::Result<(Vec<f64>, usize, f64), String> {
    let total: f64 = found.0.iter().sum();
    let expected = b / model.params.mu;
    if (total - expected).abs() > 1e-8 * expected.max(1.0) {
        return Err(format!("equilibrium total {total} differs from B/μ = {expected}"));
    }
    Ok(found)
}

/// Index sets and linear weights of the `U`/`L` split.
#[derive(Debug, Clone, Serialize)]
pub struct Partition {
    /// 1-based indices.
    pub u_set: Vec<usize>,
    pub l_set: Vec<usize>,
    /// Length `n`, zero outside `U`.
    pub vu_weights: Vec<f64>,
    /// Length `n`, zero outside `L`.
    pub vl_weights: Vec<f64>,
    pub alpha_u: ComparisonFn,
    pub sigma_u: ComparisonFn,
    /// Split parameter used for `V_L`, when it depends on one.
    pub split: Option<f64>,
}

impl Partition {
    pub fn v_u(&self, x: &[f64]) -> f64 {
        self.vu_weights.iter().zip(x).map(|(l, v)| l * v).sum()
    }

    pub fn v_l(&self, x: &[f64]) -> f64 {
        self.vl_weights.iter().zip(x).map(|(l, v)| l * v).sum()
    }

    /// 0-based `L` indices.
    pub fn l_indices(&self) -> Vec<usize> {
        self.l_set.iter().map(|i| i - 1).collect()
    }
}

pub fn partition_ul(model: &EpidemicModel) -> Result<Partition> {
    partition_ul_with(model, DEFAULT_SPLIT)
}

/// As [`partition_ul`] with an explicit split `a ∈ (0, 1)`.
pub fn partition_ul_with(model: &EpidemicModel, a: f64) -> Result<Partition> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter {
            field: "a".into(),
            reason: format!("split parameter must lie in (0, 1), got {a}"),
        });
    }
    let n = model.n();
    let indicator = |set: &[usize]| -> Vec<f64> { (1..=n).map(|i| if set.contains(&i) { 1.0 } else { 0.0 }).collect() };
    let alpha_u = ComparisonFn::Linear(alpha_u_coef(model));
    let sigma_u = ComparisonFn::Linear(sigma_u_coef(model));
    let (u_set, l_set, vl_weights, split) = match model.family {
        Family::Sir => (vec![1, 2], vec![2], indicator(&[2]), None),
        Family::SirVaccA | Family::SirVaccR | Family::SirVaccS => (vec![1], vec![2], indicator(&[2]), None),
        Family::Msir => (vec![1, 2, 3, 4], vec![3], indicator(&[3]), None),
        Family::Seis => {
            let h = bifurcation_point(model);
            let sub = seis_ei_subsystem(&model.params, a * a * h, a)?;
            let lambda = crate::certificate::synthesize_lambda(&sub, 2)?;
            (vec![1, 2, 3], vec![2, 3], vec![0.0, lambda[0], lambda[1]], Some(a))
        }
        Family::Seir => {
            let EpidemicParams { beta, gamma, mu, .. } = model.params;
            let eps = model.epsilon();
            let h = bifurcation_point(model);
            let b = 0.5 * (1.0 + a);
            let w = vec![0.0, 1.0, b * (eps + mu) / eps, beta * (b - a) * h / (2.0 * gamma)];
            (vec![1, 2, 3, 4], vec![2, 3, 4], w, Some(a))
        }
    };
    Ok(Partition {
        vu_weights: indicator(&u_set),
        u_set,
        l_set,
        vl_weights,
        alpha_u,
        sigma_u,
        split,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub family: Family,
    pub params: EpidemicParams,
    pub labels: Vec<String>,
    pub b: f64,
    /// Inflow entering the susceptible class.
    pub b_effective: f64,
    pub h: f64,
    /// Threshold on the effective inflow.
    pub q: f64,
    /// Threshold on the raw inflow `B`.
    pub q_inflow: f64,
    pub r0: f64,
    pub eradication_guaranteed: bool,
    pub disease_free: Vec<f64>,
    pub endemic: Option<Vec<f64>>,
    pub endemic_status: EndemicStatus,
    pub partition: Partition,
}

pub fn threshold_report(model: &EpidemicModel, b: f64) -> Result<ThresholdReport> {
    let eq = equilibria(model, b)?;
    let q = input_threshold(model);
    let b_effective = model.effective_inflow(b);
    Ok(ThresholdReport {
        family: model.family,
        params: model.params,
        labels: model.labels(),
        b,
        b_effective,
        h: bifurcation_point(model),
        q,
        q_inflow: input_threshold_raw(model)?,
        r0: reproduction_number(model, b),
        eradication_guaranteed: b_effective < q,
        disease_free: eq.disease_free,
        endemic: eq.endemic,
        endemic_status: eq.status,
        partition: partition_ul(model)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sir() -> EpidemicModel {
        EpidemicModel::sir(0.0002, 0.032, 0.015).unwrap()
    }

    #[test]
    fn sir_numbers() {
        let m = sir();
        assert_relative_eq!(bifurcation_point(&m), 235.0, max_relative = 1e-12);
        assert_relative_eq!(input_threshold(&m), 3.525, max_relative = 1e-12);
        assert!((reproduction_number(&m, 12.0) - 3.4043).abs() < 5e-5);
        assert!((reproduction_number(&m, 3.0) - 0.8511).abs() < 5e-5);
        let eq = equilibria(&m, 12.0).unwrap();
        assert_eq!(eq.disease_free, vec![800.0, 0.0, 0.0]);
        let e = eq.endemic.unwrap();
        assert_relative_eq!(e.iter().sum::<f64>(), 800.0, max_relative = 1e-12);
        assert!(equilibria(&m, 3.0).unwrap().endemic.is_none());
    }

    #[test]
    fn unit_r0_coincides() {
        let m = sir();
        let eq = equilibria(&m, input_threshold(&m)).unwrap();
        assert_eq!(eq.status, EndemicStatus::Coincident);
        assert_eq!(eq.endemic.as_ref(), Some(&eq.disease_free));
    }

    #[test]
    fn numeric_endemic_is_a_root() {
        let m = EpidemicModel::new(
            Family::Seis,
            EpidemicParams::new(0.0002, 0.032, 0.015).with_epsilon(0.016),
        )
        .unwrap();
        let eq = equilibria(&m, 12.0).unwrap();
        let x = eq.endemic.expect("endemic point");
        assert!(matches!(eq.status, EndemicStatus::Numeric { .. }));
        assert!(max_abs(&residual(&m, 12.0, &x)) < 1e-9);
        assert_relative_eq!(x[0], bifurcation_point(&m), max_relative = 1e-9);
    }

    #[test]
    fn raw_threshold_for_vaccination() {
        let m = EpidemicModel::new(Family::SirVaccA, EpidemicParams::new(0.0002, 0.032, 0.015).with_p(0.8)).unwrap();
        assert_relative_eq!(input_threshold(&m), 3.525, max_relative = 1e-12);
        assert_relative_eq!(input_threshold_raw(&m).unwrap(), 3.525 / 0.2, max_relative = 1e-12);
    }

    #[test]
    fn seis_weight_closed_form() {
        let m = EpidemicModel::new(
            Family::Seis,
            EpidemicParams::new(0.0002, 0.032, 0.015).with_epsilon(0.016),
        )
        .unwrap();
        let p = partition_ul_with(&m, 0.8).unwrap();
        assert_relative_eq!(p.vl_weights[2], 0.8 * (0.016 + 0.015) / 0.016, max_relative = 1e-12);
    }

    #[test]
    fn bad_split_rejected() {
        assert!(partition_ul_with(&sir(), 1.0).is_err());
    }
}

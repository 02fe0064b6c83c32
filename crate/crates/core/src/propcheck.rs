//! Trajectory-level checks of the eradication and persistence claims.
//!
//! Each check simulates, measures, and returns a three-valued verdict
//! together with the quantities it measured and the tolerances it used.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{seis_ei_subsystem, EpidemicModel, Family, Inflow};
use crate::network::SampleSpec;
use crate::simulate::{detect_convergence, detect_convergence_with, integrate, integrate_from, SimConfig, Trajectory};
use crate::threshold::{bifurcation_point, equilibria, input_threshold, partition_ul, partition_ul_with, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub claim: &'static str,
    pub family: Family,
    pub inflow_sup: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub measured: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub note: String,
}

impl CheckReport {
    fn new(claim: &'static str, model: &EpidemicModel, inflow_sup: f64) -> Self {
        CheckReport {
            claim,
            family: model.family,
            inflow_sup,
            threshold: input_threshold(model),
            verdict: Verdict::Inconclusive,
            measured: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            note: String::new(),
        }
    }

    fn measure(&mut self, key: &str, v: f64) {
        self.measured.insert(key.to_string(), v);
    }

    fn tolerance(&mut self, key: &str, v: f64) {
        self.tolerances.insert(key.to_string(), v);
    }

    fn finish(mut self, verdict: Verdict, note: impl Into<String>) -> Self {
        self.verdict = verdict;
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOptions {
    pub sim: SimConfig,
    /// Continuation stops once the horizon reaches this time.
    pub max_horizon: f64,
    /// Trailing fraction of the horizon used for limit checks.
    pub window_frac: f64,
    /// Absolute tolerance for limits at zero.
    pub zero_atol: f64,
    /// Relative tolerance for nonzero limits.
    pub rel_tol: f64,
    /// Relative distance to the threshold treated as a boundary case.
    pub boundary_band: f64,
    /// Relative tolerance of the subsequence test on the endemic level.
    pub subsequence_tol: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            sim: SimConfig::default(),
            max_horizon: 16000.0,
            window_frac: 0.1,
            zero_atol: 1e-3,
            rel_tol: 0.005,
            boundary_band: 0.01,
            subsequence_tol: 0.02,
            samples: 2000,
            seed: 0x5eed,
        }
    }
}

/// Simulates a catalog model and fills the `V_U`/`V_L` columns.
pub fn simulate_model(model: &EpidemicModel, x0: &[f64], inflow: &Inflow, cfg: &SimConfig) -> Result<Trajectory> {
    let net = model.lower();
    let w = model.input_signal(inflow)?;
    let mut traj = integrate(&net, x0, &w, cfg)?;
    let part = partition_ul(model)?;
    traj.attach_observables(&part.vu_weights, &part.vl_weights);
    Ok(traj)
}

/// Simulates, doubling the horizon until `done` holds or the cap is hit.
fn simulate_until(
    model: &EpidemicModel,
    x0: &[f64],
    inflow: &Inflow,
    opts: &CheckOptions,
    done: impl Fn(&Trajectory) -> bool,
) -> Result<(Trajectory, bool)> {
    let net = model.lower();
    let w = model.input_signal(inflow)?;
    let part = partition_ul(model)?;
    let mut traj = integrate(&net, x0, &w, &opts.sim)?;
    traj.attach_observables(&part.vu_weights, &part.vl_weights);
    loop {
        if done(&traj) {
            return Ok((traj, true));
        }
        let t = traj.t_end();
        if t >= opts.max_horizon {
            return Ok((traj, false));
        }
        let cfg = SimConfig {
            t_end: (2.0 * t).min(opts.max_horizon),
            ..opts.sim
        };
        let mut more = integrate_from(&net, traj.last_state(), t, &w, &cfg)?;
        more.attach_observables(&part.vu_weights, &part.vl_weights);
        traj.extend(more);
    }
}

fn window(traj: &Trajectory, opts: &CheckOptions) -> f64 {
    opts.window_frac * traj.t_end()
}

fn check_state(model: &EpidemicModel, x0: &[f64]) -> Result<()> {
    if x0.len() != model.n() {
        return Err(Error::Dimension {
            what: "initial state",
            expected: model.n(),
            got: x0.len(),
        });
    }
    Ok(())
}

fn l_norm(part: &Partition, x: &[f64]) -> f64 {
    part.l_indices().iter().map(|&i| x[i].abs()).fold(0.0, f64::max)
}

/// Eradication below the threshold, persistence above it.
pub fn check_threshold_dichotomy(
    model: &EpidemicModel,
    inflow: &Inflow,
    x0: &[f64],
    opts: &CheckOptions,
) -> Result<CheckReport> {
    check_state(model, x0)?;
    let sup = model.effective_inflow(inflow.sup());
    let q = input_threshold(model);
    let part = partition_ul(model)?;
    let l = part.l_indices();
    let mut rep = CheckReport::new("threshold_dichotomy", model, sup);
    rep.tolerance("boundary_band", opts.boundary_band);
    if ((sup - q) / q).abs() < opts.boundary_band {
        return Ok(rep.finish(Verdict::Inconclusive, "input within the boundary band around Q"));
    }

    if sup < q {
        rep.claim = "eradication";
        rep.tolerance("zero_atol", opts.zero_atol);
        let zeros = vec![0.0; l.len()];
        let (traj, ok) = simulate_until(model, x0, inflow, opts, |tr| {
            detect_convergence(tr, &l, &zeros, opts.zero_atol, window(tr, opts)).converged
        })?;
        let conv = detect_convergence(&traj, &l, &zeros, opts.zero_atol, window(&traj, opts));
        rep.measure("horizon", traj.t_end());
        rep.measure("final_l_norm", l_norm(&part, traj.last_state()));
        if let Some(t) = conv.since {
            rep.measure("converged_since", t);
        }
        if ok {
            return Ok(rep.finish(Verdict::Pass, "x_L converged to zero"));
        }
        // Distinguish slow decay from persistence on the last window.
        let t_mid = traj.t_end() - window(&traj, opts);
        let mid = traj.state_at(t_mid).map(|x| l_norm(&part, &x)).unwrap_or(f64::NAN);
        let end = l_norm(&part, traj.last_state());
        rep.measure("window_start_l_norm", mid);
        return Ok(if end < mid {
            rep.finish(Verdict::Inconclusive, "x_L still decaying at the horizon cap")
        } else {
            rep.finish(Verdict::Fail, "x_L did not decay below the threshold")
        });
    }

    rep.claim = "persistence";
    let Some(b) = inflow.constant_value() else {
        return Ok(rep.finish(Verdict::Skipped, "persistence is only claimed for constant inflow"));
    };
    if l.iter().all(|&i| x0[i] == 0.0) {
        return Ok(rep.finish(Verdict::Skipped, "requires an infected initial state"));
    }
    let trailing_min = |tr: &Trajectory| {
        let t_from = tr.t_end() - window(tr, opts);
        tr.times
            .iter()
            .zip(&tr.states)
            .filter(|(t, _)| **t >= t_from)
            .map(|(_, x)| l_norm(&part, x))
            .fold(f64::INFINITY, f64::min)
    };

    // SIR-type families also sample I at t = 2^k and compare with the
    // endemic level.
    let sir_type = matches!(
        model.family,
        Family::Sir | Family::SirVaccA | Family::SirVaccR | Family::SirVaccS
    );
    let i_idx = model.family.infected()[0];
    let target = if sir_type {
        let eq = equilibria(model, b)?;
        match eq.endemic.map(|e| e[i_idx]) {
            Some(v) => Some(v),
            None => return Ok(rep.finish(Verdict::Fail, "no endemic equilibrium above the threshold")),
        }
    } else {
        None
    };
    let samples = |tr: &Trajectory| -> Vec<(f64, f64)> {
        let Some(target) = target else { return Vec::new() };
        (0..)
            .map(|k| (1u64 << k) as f64)
            .take_while(|t| *t <= tr.t_end())
            .filter_map(|t| tr.state_at(t).map(|x| (t, (x[i_idx] - target).abs() / target)))
            .collect()
    };
    let subsequence_ok = |tr: &Trajectory| match samples(tr).last() {
        Some((_, d)) => *d <= opts.subsequence_tol,
        None => target.is_none(),
    };

    let (traj, ok) = simulate_until(model, x0, inflow, opts, |tr| {
        trailing_min(tr) > opts.zero_atol && subsequence_ok(tr)
    })?;
    rep.measure("horizon", traj.t_end());
    rep.measure("trailing_min_l_norm", trailing_min(&traj));
    rep.tolerance("zero_atol", opts.zero_atol);
    if trailing_min(&traj) <= opts.zero_atol {
        // Near the threshold x_L recovers slowly from a deep trough.
        let t_mid = traj.t_end() - window(&traj, opts);
        let mid = traj.state_at(t_mid).map(|x| l_norm(&part, &x)).unwrap_or(f64::NAN);
        let end = l_norm(&part, traj.last_state());
        rep.measure("window_start_l_norm", mid);
        return Ok(if end > mid {
            rep.finish(Verdict::Inconclusive, "x_L still recovering at the horizon cap")
        } else {
            rep.finish(Verdict::Fail, "x_L approached zero above the threshold")
        });
    }
    if let Some(target) = target {
        rep.tolerance("subsequence_tol", opts.subsequence_tol);
        rep.measure("endemic_i", target);
        let s = samples(&traj);
        let Some(&(t, dist)) = s.last() else {
            return Ok(rep.finish(Verdict::Inconclusive, "horizon shorter than one sample"));
        };
        rep.measure("subsequence_t", t);
        rep.measure("subsequence_rel_dist", dist);
        if !ok {
            let approaching = s.len() >= 2 && dist < s[s.len() - 2].1;
            return Ok(if approaching {
                rep.finish(
                    Verdict::Inconclusive,
                    "sampled I still approaching the endemic level at the horizon cap",
                )
            } else {
                rep.finish(Verdict::Fail, "sampled I did not approach the endemic level")
            });
        }
    }
    Ok(rep.finish(Verdict::Pass, "x_L stays away from zero"))
}

/// Below the threshold `V_U` eventually stays below `H − ε`.
pub fn check_vu_ultimate_bound(
    model: &EpidemicModel,
    inflow: &Inflow,
    x0: &[f64],
    opts: &CheckOptions,
) -> Result<CheckReport> {
    check_state(model, x0)?;
    let sup = model.effective_inflow(inflow.sup());
    let q = input_threshold(model);
    let h = bifurcation_point(model);
    let mut rep = CheckReport::new("vu_ultimate_bound", model, sup);
    if sup >= q {
        return Ok(rep.finish(Verdict::Skipped, "precondition sup B < Q fails"));
    }
    let trailing_max = |tr: &Trajectory| {
        let from = tr.t_end() - window(tr, opts);
        tr.times
            .iter()
            .zip(&tr.v_u)
            .filter(|(t, _)| **t >= from)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (traj, ok) = simulate_until(model, x0, inflow, opts, |tr| trailing_max(tr) < h)?;
    let eps = h - trailing_max(&traj);
    rep.measure("h", h);
    rep.measure("epsilon", eps);
    rep.measure("horizon", traj.t_end());
    if !ok {
        return Ok(rep.finish(
            Verdict::Inconclusive,
            "V_U not below H on the trailing window; extend the horizon",
        ));
    }
    // Entry time into the slightly relaxed level H − 0.99ε, which V_U
    // crosses transversally rather than asymptotically.
    let bound = h - 0.99 * eps;
    let t_entry = match traj.v_u.iter().rposition(|v| *v > bound) {
        Some(k) if k + 1 < traj.len() => traj.times[k + 1],
        Some(_) => traj.t_end(),
        None => 0.0,
    };
    rep.measure("t_entry", t_entry);
    Ok(rep.finish(Verdict::Pass, format!("V_U ≤ H − {eps:.6} after t = {t_entry:.3}")))
}

/// Sampled sign checks of `dV_L/dt`: decrease where `V_U ≤ aH`, and for the
/// families with a known unstable side, increase at `S = 1.1H`.
pub fn check_vl_decrease_in_region(model: &EpidemicModel, a: f64, opts: &CheckOptions) -> Result<CheckReport> {
    let part = partition_ul_with(model, a)?;
    let h = bifurcation_point(model);
    let net = model.lower();
    let n = model.n();
    let zero_w = vec![0.0; n];
    let l = part.l_indices();
    let mut rep = CheckReport::new("vl_regional_decrease", model, f64::NAN);
    rep.measure("a", a);

    let spec = SampleSpec::new(opts.samples, crate::network::SampleBox::uniform(n, a * h)).with_seed(opts.seed);
    let mut rng = spec.rng();
    let mut worst_decrease = f64::NEG_INFINITY;
    let mut facet_worst = 0.0f64;
    let mut accepted = 0usize;
    while accepted < opts.samples {
        let mut x = spec.region.sample(&mut rng);
        // Every tenth sample lies on the facet x_L = 0.
        let on_facet = accepted % 10 == 9;
        if on_facet {
            for &i in &l {
                x[i] = 0.0;
            }
        }
        let vu = part.v_u(&x);
        if vu > a * h {
            // Rescale the U-part into the region instead of discarding.
            let f = rng.random::<f64>() * a * h / vu;
            for &i in &part.u_set {
                x[i - 1] *= f;
            }
        }
        accepted += 1;
        let d = net.weighted_derivative(&part.vl_weights, &x, &zero_w)?;
        let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if l_norm(&part, &x) == 0.0 {
            facet_worst = facet_worst.max(d.abs() / scale);
        } else if d >= 0.0 {
            rep.measure("samples", accepted as f64);
            rep.measure("offending_derivative", d);
            return Ok(rep.finish(Verdict::Fail, format!("dV_L/dt = {d:e} ≥ 0 at {x:?}")));
        } else {
            worst_decrease = worst_decrease.max(d / (scale * l_norm(&part, &x)));
        }
    }
    rep.measure("samples", accepted as f64);
    rep.measure("worst_scaled_decrease", worst_decrease);
    rep.measure("facet_max_abs", facet_worst);
    rep.tolerance("facet_abs", 1e-12);
    if facet_worst > 1e-12 {
        return Ok(rep.finish(Verdict::Fail, "dV_L/dt nonzero on x_L = 0"));
    }

    // Unstable side with S frozen above H.
    let s_hi = 1.1 * h;
    let weights: Option<Vec<f64>> = match model.family {
        Family::Seis => {
            let sub = seis_ei_subsystem(&model.params, s_hi, a)?;
            let lam = crate::certificate::synthesize_lambda(&sub, 2)?;
            Some(vec![0.0, lam[0], lam[1]])
        }
        Family::Sir | Family::Msir | Family::SirVaccA | Family::SirVaccR | Family::SirVaccS => {
            Some(part.vl_weights.clone())
        }
        Family::Seir => None,
    };
    if let Some(weights) = weights {
        let s_idx = model.family.susceptible();
        let mut worst_growth = f64::INFINITY;
        for _ in 0..opts.samples {
            let mut x = vec![0.0; n];
            x[s_idx] = s_hi;
            for &i in &l {
                x[i] = rng.random::<f64>() * h;
            }
            if l_norm(&part, &x) == 0.0 {
                continue;
            }
            // Only the L-rows matter; S is held fixed.
            let d = net.weighted_derivative(&weights, &x, &zero_w)?;
            if d <= 0.0 {
                return Ok(rep.finish(Verdict::Fail, format!("dV_L/dt = {d:e} ≤ 0 at S = 1.1H, {x:?}")));
            }
            worst_growth = worst_growth.min(d);
        }
        rep.measure("unstable_side_min_growth", worst_growth);
    }
    Ok(rep.finish(Verdict::Pass, "sign conditions hold on all samples"))
}

/// Below the threshold the full state converges to the disease-free point.
pub fn check_disease_free_limit(model: &EpidemicModel, b: f64, x0: &[f64], opts: &CheckOptions) -> Result<CheckReport> {
    check_state(model, x0)?;
    let sup = model.effective_inflow(b);
    let q = input_threshold(model);
    let mut rep = CheckReport::new("disease_free_limit", model, sup);
    if sup >= q {
        return Ok(rep.finish(Verdict::Skipped, "precondition B below Q fails"));
    }
    let target = equilibria(model, b)?.disease_free;
    let tols: Vec<f64> = target
        .iter()
        .map(|v| {
            if *v == 0.0 {
                opts.zero_atol
            } else {
                opts.rel_tol * v.abs()
            }
        })
        .collect();
    rep.tolerance("rel_tol", opts.rel_tol);
    rep.tolerance("zero_atol", opts.zero_atol);
    let all: Vec<usize> = (0..model.n()).collect();
    let (traj, ok) = simulate_until(model, x0, &Inflow::constant(b), opts, |tr| {
        detect_convergence_with(tr, &all, &target, &tols, window(tr, opts)).converged
    })?;
    rep.measure("horizon", traj.t_end());
    let last = traj.last_state();
    let worst = target
        .iter()
        .zip(last)
        .zip(&tols)
        .map(|((t, x), tol)| (x - t).abs() / tol)
        .fold(0.0f64, f64::max);
    rep.measure("worst_tolerance_ratio", worst);
    Ok(if ok {
        rep.finish(Verdict::Pass, format!("converged to {target:?}"))
    } else {
        rep.finish(Verdict::Inconclusive, "not converged within the horizon cap")
    })
}

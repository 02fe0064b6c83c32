//! Integration on the nonnegative orthant.
//!
//! Two schemes: classical RK4 with a fixed step and Dormand–Prince 5(4) with
//! step-size control. Both align steps to input breakpoints, project small
//! negative excursions back to zero and reject steps whose excursion exceeds
//! the absolute tolerance.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BalancedNetwork, InputSignal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Rk4,
    Rk45 { rtol: f64, atol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    /// Fixed step for RK4, initial step for RK45.
    pub dt: f64,
    pub method: Method,
    pub record_stride: usize,
    /// Largest negative excursion that is projected instead of rejected.
    pub projection_tol: f64,
}

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_STRIDE: usize = 10;
pub const DEFAULT_PROJECTION_TOL: f64 = 1e-9;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_end: 2000.0,
            dt: DEFAULT_DT,
            method: Method::Rk4,
            record_stride: DEFAULT_STRIDE,
            projection_tol: DEFAULT_PROJECTION_TOL,
        }
    }
}

impl SimConfig {
    pub fn rk4(t_end: f64, dt: f64) -> Self {
        SimConfig {
            t_end,
            dt,
            ..Default::default()
        }
    }

    pub fn rk45(t_end: f64, rtol: f64, atol: f64) -> Self {
        SimConfig {
            t_end,
            dt: DEFAULT_DT,
            method: Method::Rk45 { rtol, atol },
            record_stride: 1,
            projection_tol: atol,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SimConfig(m));
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= self.t_end) {
            return bad(format!("dt must lie in (0, t_end], got {}", self.dt));
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        if !(self.projection_tol > 0.0) {
            return bad("projection_tol must be positive".into());
        }
        if let Method::Rk45 { rtol, atol } = self.method {
            if !(rtol > 0.0 && atol > 0.0) {
                return bad(format!("tolerances must be positive, got rtol={rtol}, atol={atol}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub component: usize,
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Convergence {
    pub converged: bool,
    /// Earliest recorded time after which every listed component stays
    /// within tolerance.
    pub since: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Peak(Peak),
    Converged { components: Vec<usize>, t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Total population `N = Σ x_i`.
    pub n_total: Vec<f64>,
    pub v_u: Vec<f64>,
    pub v_l: Vec<f64>,
    pub events: Vec<Event>,
    /// Largest negative excursion that was projected to zero.
    pub max_projection: f64,
    pub steps: usize,
    pub rejected: usize,
}

fn weighted(weights: &[f64], x: &[f64]) -> f64 {
    weights.iter().zip(x).map(|(l, v)| l * v).sum()
}

impl Trajectory {
    fn new(labels: Vec<String>) -> Self {
        Trajectory {
            labels,
            times: Vec::new(),
            states: Vec::new(),
            n_total: Vec::new(),
            v_u: Vec::new(),
            v_l: Vec::new(),
            events: Vec::new(),
            max_projection: 0.0,
            steps: 0,
            rejected: 0,
        }
    }

    fn push(&mut self, t: f64, x: &[f64]) {
        self.times.push(t);
        self.n_total.push(x.iter().sum());
        self.v_u.push(f64::NAN);
        self.v_l.push(f64::NAN);
        self.states.push(x.to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|x| x[i]).collect()
    }

    /// Fills the `V_U`/`V_L` columns from linear weights.
    pub fn attach_observables(&mut self, vu_weights: &[f64], vl_weights: &[f64]) {
        for (k, x) in self.states.iter().enumerate() {
            self.v_u[k] = weighted(vu_weights, x);
            self.v_l[k] = weighted(vl_weights, x);
        }
    }

    /// Linear interpolation of the recorded states at time `t`.
    pub fn state_at(&self, t: f64) -> Option<Vec<f64>> {
        if self.is_empty() || t < self.times[0] || t > self.t_end() {
            return None;
        }
        let k = self.times.partition_point(|s| *s < t);
        if self.times[k] == t || k == 0 {
            return Some(self.states[k].clone());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let a = (t - t0) / (t1 - t0);
        Some(
            self.states[k - 1]
                .iter()
                .zip(&self.states[k])
                .map(|(u, v)| u + a * (v - u))
                .collect(),
        )
    }

    /// Appends a continuation whose first sample repeats our last one.
    pub fn extend(&mut self, mut more: Trajectory) {
        let skip = usize::from(!self.is_empty() && more.times.first() == self.times.last());
        self.times.extend(more.times.drain(skip..));
        self.states.extend(more.states.drain(skip..));
        self.n_total.extend(more.n_total.drain(skip..));
        self.v_u.extend(more.v_u.drain(skip..));
        self.v_l.extend(more.v_l.drain(skip..));
        self.events.extend(more.events);
        self.max_projection = self.max_projection.max(more.max_projection);
        self.steps += more.steps;
        self.rejected += more.rejected;
    }

    /// CSV with header `t,<labels>,N,V_U,V_L`, 17 significant digits.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        write!(out, "t")?;
        for l in &self.labels {
            write!(out, ",{l}")?;
        }
        writeln!(out, ",N,V_U,V_L")?;
        for k in 0..self.len() {
            write!(out, "{:.16e}", self.times[k])?;
            for v in &self.states[k] {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(
                out,
                ",{:.16e},{:.16e},{:.16e}",
                self.n_total[k], self.v_u[k], self.v_l[k]
            )?;
        }
        Ok(())
    }
}

struct Workspace {
    w: Vec<f64>,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    next: Vec<f64>,
    err: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            w: vec![0.0; n],
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            next: vec![0.0; n],
            err: vec![0.0; n],
        }
    }
}

struct Rhs<'a> {
    net: &'a BalancedNetwork,
    input: &'a InputSignal,
}

impl Rhs<'_> {
    /// Piecewise-constant inputs are read at the step start so that a step
    /// ending on a breakpoint never sees the next level.
    fn eval(&self, t_stage: f64, t_step: f64, x: &[f64], w: &mut [f64], out: &mut [f64]) -> Result<()> {
        let t = if self.input.is_piecewise_constant() {
            t_step
        } else {
            t_stage
        };
        self.input.eval_into(t, w)?;
        self.net.vector_field_into(x, w, out);
        Ok(())
    }
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn rk4_step(rhs: &Rhs, t: f64, h: f64, x: &[f64], ws: &mut Workspace) -> Result<()> {
    let n = x.len();
    let Workspace { w, k, tmp, next, .. } = ws;
    rhs.eval(t, t, x, w, &mut k[0])?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k[0][i];
    }
    rhs.eval(t + 0.5 * h, t, tmp, w, &mut k[1])?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k[1][i];
    }
    rhs.eval(t + 0.5 * h, t, tmp, w, &mut k[2])?;
    for i in 0..n {
        tmp[i] = x[i] + h * k[2][i];
    }
    rhs.eval(t + h, t, tmp, w, &mut k[3])?;
    for i in 0..n {
        next[i] = x[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
    Ok(())
}

/// One Dormand–Prince step; returns the scaled error norm.
fn dp_step(rhs: &Rhs, t: f64, h: f64, x: &[f64], rtol: f64, atol: f64, ws: &mut Workspace) -> Result<f64> {
    let n = x.len();
    let Workspace { w, k, tmp, next, err } = ws;
    rhs.eval(t, t, x, w, &mut k[0])?;
    for s in 1..7 {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, a) in DP_A[s].iter().enumerate().take(s) {
                acc += a * k[j][i];
            }
            tmp[i] = x[i] + h * acc;
        }
        let (done, rest) = k.split_at_mut(s);
        let _ = done;
        rhs.eval(t + DP_C[s] * h, t, tmp, w, &mut rest[0])?;
    }
    // Stage 7 is evaluated at the fifth-order solution (FSAL), which is tmp.
    next.copy_from_slice(tmp);
    let mut norm = 0.0f64;
    for i in 0..n {
        let mut e = 0.0;
        for s in 0..7 {
            e += DP_E[s] * k[s][i];
        }
        err[i] = h * e;
        let scale = atol + rtol * x[i].abs().max(next[i].abs());
        norm = norm.max((err[i] / scale).abs());
    }
    debug_assert!({
        let mut ok = true;
        for i in 0..n {
            let mut acc = 0.0;
            for s in 0..7 {
                acc += DP_B[s] * k[s][i];
            }
            ok &= (x[i] + h * acc - next[i]).abs() <= 1e-9 * (1.0 + next[i].abs());
        }
        ok
    });
    Ok(norm)
}

/// Integrates `ẋ = f(x, w(t))` from `x0` on `[0, cfg.t_end]`.
pub fn integrate(net: &BalancedNetwork, x0: &[f64], w: &InputSignal, cfg: &SimConfig) -> Result<Trajectory> {
    integrate_from(net, x0, 0.0, w, cfg)
}

/// Integrates from `t0` to `cfg.t_end` (absolute time).
pub fn integrate_from(
    net: &BalancedNetwork,
    x0: &[f64],
    t0: f64,
    w: &InputSignal,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let n = net.n();
    if x0.len() != n {
        return Err(Error::Dimension {
            what: "initial state",
            expected: n,
            got: x0.len(),
        });
    }
    if w.channels() != n {
        return Err(Error::Dimension {
            what: "input channels",
            expected: n,
            got: w.channels(),
        });
    }
    if let Some((i, v)) = x0.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter {
            field: format!("x0[{i}]"),
            reason: format!("initial state must be finite and nonnegative, got {v}"),
        });
    }
    if !(t0 >= 0.0 && t0 < cfg.t_end) {
        return Err(Error::SimConfig(format!("start time {t0} must lie in [0, t_end)")));
    }

    let rhs = Rhs { net, input: w };
    let mut ws = Workspace::new(n);
    let mut traj = Trajectory::new(net.labels().to_vec());
    let mut x = x0.to_vec();
    let mut t = t0;
    traj.push(t, &x);

    let min_step = 1e-12 * cfg.t_end;
    let mut segment_ends: Vec<f64> = w
        .breakpoints()
        .iter()
        .copied()
        .filter(|b| *b > t0 && *b < cfg.t_end)
        .collect();
    segment_ends.push(cfg.t_end);

    let mut h_adapt = cfg.dt;
    let h_max = 100.0 * cfg.dt;
    let mut since_record = 0usize;

    for &seg_end in &segment_ends {
        // Fixed steps count from an anchor so that recorded times do not drift.
        let mut anchor = t;
        let mut count = 0u64;
        while t < seg_end {
            let nominal = match cfg.method {
                Method::Rk4 => cfg.dt,
                Method::Rk45 { .. } => h_adapt,
            };
            let mut h = nominal;
            loop {
                // Absorb slivers so that no step shorter than a rounding error remains.
                let last = seg_end - t <= h * (1.0 + 1e-6);
                if last {
                    h = seg_end - t;
                }
                if h < min_step {
                    return Err(Error::Integration {
                        t,
                        reason: format!("step size {h:e} fell below {min_step:e}"),
                    });
                }
                let accepted_err = match cfg.method {
                    Method::Rk4 => {
                        rk4_step(&rhs, t, h, &x, &mut ws)?;
                        None
                    }
                    Method::Rk45 { rtol, atol } => {
                        let err = dp_step(&rhs, t, h, &x, rtol, atol, &mut ws)?;
                        if !(err <= 1.0) {
                            traj.rejected += 1;
                            let factor = if err.is_finite() {
                                (0.9 * err.powf(-0.2)).max(0.2)
                            } else {
                                0.2
                            };
                            h *= factor;
                            continue;
                        }
                        Some(err)
                    }
                };
                if ws.next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Integration {
                        t,
                        reason: "state became non-finite".into(),
                    });
                }
                let worst = ws.next.iter().copied().fold(0.0f64, f64::min);
                if worst < -cfg.projection_tol {
                    traj.rejected += 1;
                    h *= 0.5;
                    continue;
                }
                if worst < 0.0 {
                    traj.max_projection = traj.max_projection.max(-worst);
                    for v in ws.next.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
                x.copy_from_slice(&ws.next);
                t = if last {
                    seg_end
                } else if matches!(cfg.method, Method::Rk4) && h == nominal {
                    count += 1;
                    anchor + count as f64 * h
                } else {
                    anchor = t + h;
                    count = 0;
                    anchor
                };
                traj.steps += 1;
                if let Some(err) = accepted_err {
                    let grow = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    // Keep the pre-clip step when a breakpoint shortened this one.
                    let base = if last { nominal.max(h) } else { h };
                    h_adapt = (base * grow).min(h_max);
                }
                break;
            }
            since_record += 1;
            if since_record >= cfg.record_stride {
                since_record = 0;
                traj.push(t, &x);
            }
        }
    }
    if traj.t_end() < t {
        traj.push(t, &x);
    }
    Ok(traj)
}

/// First interior local maximum of component `i` that exceeds both endpoint
/// values of the trajectory.
pub fn detect_peak(traj: &Trajectory, i: usize) -> Option<Peak> {
    if traj.len() < 3 {
        return None;
    }
    let v = traj.component(i);
    let (first, last) = (v[0], v[v.len() - 1]);
    (1..v.len() - 1)
        .find(|&k| v[k] > v[k - 1] && v[k] >= v[k + 1] && v[k] > first && v[k] > last)
        .map(|k| Peak {
            component: i,
            t: traj.times[k],
            value: v[k],
        })
}

/// Whether every listed component stays within `atol` of its target over
/// the trailing `window`.
pub fn detect_convergence(
    traj: &Trajectory,
    components: &[usize],
    target: &[f64],
    atol: f64,
    window: f64,
) -> Convergence {
    let tols = vec![atol; components.len()];
    detect_convergence_with(traj, components, target, &tols, window)
}

/// Per-component tolerances; `target[k]` and `tols[k]` belong to
/// `components[k]`.
pub fn detect_convergence_with(
    traj: &Trajectory,
    components: &[usize],
    target: &[f64],
    tols: &[f64],
    window: f64,
) -> Convergence {
    let inside = |x: &[f64]| {
        components
            .iter()
            .zip(target)
            .zip(tols)
            .all(|((&i, &c), &tol)| (x[i] - c).abs() <= tol)
    };
    let Some(last_out) = (0..traj.len()).rev().find(|&k| !inside(&traj.states[k])) else {
        return Convergence {
            converged: !traj.is_empty(),
            since: traj.times.first().copied(),
        };
    };
    if last_out + 1 == traj.len() {
        return Convergence {
            converged: false,
            since: None,
        };
    }
    let since = traj.times[last_out + 1];
    Convergence {
        converged: traj.t_end() - since >= window,
        since: Some(since),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::EpidemicModel;

    fn sir() -> BalancedNetwork {
        EpidemicModel::sir(0.0002, 0.032, 0.015).unwrap().lower()
    }

    #[test]
    fn origin_stays_at_origin() {
        let traj = integrate(&sir(), &[0.0; 3], &InputSignal::zero(3), &SimConfig::rk4(50.0, 0.01)).unwrap();
        assert!(traj.states.iter().all(|x| x.iter().all(|v| *v == 0.0)));
        assert_eq!(traj.times[0], 0.0);
        assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(traj.t_end(), 50.0);
        assert_eq!(traj.len(), 501);
    }

    #[test]
    fn exponential_decay_is_accurate() {
        // Pure death: ẋ = −μx.
        let net = sir();
        let w = InputSignal::zero(3);
        let x0 = [100.0, 0.0, 0.0];
        for cfg in [SimConfig::rk4(100.0, 0.01), SimConfig::rk45(100.0, 1e-10, 1e-10)] {
            let traj = integrate(&net, &x0, &w, &cfg).unwrap();
            let exact = 100.0 * (-0.015f64 * 100.0).exp();
            assert!((traj.last_state()[0] - exact).abs() < 1e-7, "{:?}", cfg.method);
        }
    }

    #[test]
    fn steps_land_on_breakpoints() {
        let w = InputSignal::piecewise(vec![0.105, 1.0], vec![vec![1.0; 3], vec![0.0; 3], vec![2.0; 3]]).unwrap();
        let cfg = SimConfig::rk4(2.0, 0.01).with_stride(1);
        let traj = integrate(&sir(), &[0.0; 3], &w, &cfg).unwrap();
        assert!(traj.times.contains(&0.105));
        assert!(traj.times.contains(&1.0));
        // S(t) = (1/μ)(1 − e^{−μt}) up to the first breakpoint.
        let k = traj.times.iter().position(|t| *t == 0.105).unwrap();
        let exact = (1.0 - (-0.015f64 * 0.105).exp()) / 0.015;
        assert!((traj.states[k][0] - exact).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(SimConfig::rk4(1.0, 2.0).validate().is_err());
        assert!(SimConfig::rk4(1.0, 0.1).with_stride(0).validate().is_err());
        assert!(SimConfig::rk45(1.0, 0.0, 1e-9).validate().is_err());
        let err = integrate(
            &sir(),
            &[-1.0, 0.0, 0.0],
            &InputSignal::zero(3),
            &SimConfig::rk4(1.0, 0.1),
        );
        assert!(err.is_err());
    }

    #[test]
    fn peak_detection() {
        let mut traj = Trajectory::new(vec!["x".into()]);
        for (t, v) in [(0.0, 1.0), (1.0, 3.0), (2.0, 2.0), (3.0, 0.5)] {
            traj.push(t, &[v]);
        }
        assert_eq!(detect_peak(&traj, 0).unwrap().t, 1.0);
        let mut flat = Trajectory::new(vec!["x".into()]);
        for t in 0..5 {
            flat.push(t as f64, &[2.0]);
        }
        assert!(detect_peak(&flat, 0).is_none());
        let conv = detect_convergence(&flat, &[0], &[2.0], 1e-9, 4.0);
        assert!(conv.converged);
        assert_eq!(conv.since, Some(0.0));
    }

    #[test]
    fn convergence_needs_full_window() {
        let mut traj = Trajectory::new(vec!["x".into()]);
        for t in 0..10 {
            traj.push(t as f64, &[if t < 7 { 1.0 } else { 0.0 }]);
        }
        let c = detect_convergence(&traj, &[0], &[0.0], 1e-3, 2.0);
        assert!(c.converged);
        assert_eq!(c.since, Some(7.0));
        assert!(!detect_convergence(&traj, &[0], &[0.0], 1e-3, 3.0).converged);
    }

    #[test]
    fn csv_layout() {
        let mut traj = integrate(
            &sir(),
            &[1.0, 2.0, 3.0],
            &InputSignal::zero(3),
            &SimConfig::rk4(0.1, 0.01),
        )
        .unwrap();
        traj.attach_observables(&[1.0, 1.0, 0.0], &[0.0, 1.0, 0.0]);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,S,I,R,N,V_U,V_L");
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first, vec![0.0, 1.0, 2.0, 3.0, 6.0, 3.0, 2.0]);
    }

    #[test]
    fn continuation_matches_single_run() {
        let net = sir();
        let w = InputSignal::constant(vec![3.0; 3]).unwrap();
        let x0 = [700.0, 200.0, 70.0];
        let full = integrate(&net, &x0, &w, &SimConfig::rk4(20.0, 0.01)).unwrap();
        let mut part = integrate(&net, &x0, &w, &SimConfig::rk4(10.0, 0.01)).unwrap();
        let rest = integrate_from(&net, part.last_state(), 10.0, &w, &SimConfig::rk4(20.0, 0.01)).unwrap();
        part.extend(rest);
        assert_eq!(part.len(), full.len());
        for (a, b) in part.last_state().iter().zip(full.last_state()) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0));
        }
    }
}

//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the console.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use epinet::certificate::{check_smallgain, sample_dissipation_inequality, StabilityClass};
use epinet::models::{EpidemicModel, EpidemicParams, Family, Inflow};
use epinet::network::{check_facet_field, validate_gain_bounds, BalancedNetwork, Direction, SampleBox, SampleSpec};
use epinet::propcheck::{check_threshold_dichotomy, simulate_model, CheckOptions, Verdict};
use epinet::simulate::{detect_convergence, detect_peak, SimConfig, Trajectory};
use epinet::threshold::{bifurcation_point, equilibria, input_threshold, reproduction_number};
use tempfile::TempDir;

const BETA: f64 = 0.0002;
const GAMMA: f64 = 0.032;
const MU: f64 = 0.015;
const X0: [f64; 3] = [700.0, 200.0, 70.0];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn base() -> EpidemicParams {
    EpidemicParams::new(BETA, GAMMA, MU)
}

fn catalog(family: Family) -> EpidemicModel {
    let p = match family {
        Family::Seis | Family::Seir => base().with_epsilon(0.016),
        Family::Msir => base().with_delta(0.05),
        Family::SirVaccA | Family::SirVaccR => base().with_p(0.8),
        Family::SirVaccS => base().with_rho(0.02),
        Family::Sir => base(),
    };
    EpidemicModel::new(family, p).unwrap()
}

fn default_state(m: &EpidemicModel) -> Vec<f64> {
    match m.family {
        Family::Msir => vec![50.0, 700.0, 200.0, 70.0],
        Family::Seir => vec![700.0, 10.0, 200.0, 70.0],
        _ => {
            let mut x = X0.to_vec();
            x.resize(m.n(), 0.0);
            x
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration, what: &str) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took <= budget, || {
        format!("{what} took {took:.2?}, budget {budget:.0?}")
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Incubation rate with `H(ε) = target`, by bisection (H falls as ε grows).
fn epsilon_for(target_h: f64) -> f64 {
    let h = |eps: f64| (GAMMA + MU) * (eps + MU) / (BETA * eps);
    let (mut lo, mut hi) = (1e-6, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > target_h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_1() -> Outcome {
    let sir = catalog(Family::Sir);
    let h = bifurcation_point(&sir);
    let q = input_threshold(&sir);
    ensure(rel(h, 235.0) <= 1e-12, || format!("H = {h}"))?;
    ensure(rel(q, 3.525) <= 1e-12, || format!("μH = {q}"))?;
    let eps = epsilon_for(455.3);
    let seis = EpidemicModel::new(Family::Seis, base().with_epsilon(eps)).unwrap();
    let q_seis = input_threshold(&seis);
    // Three significant figures.
    ensure(format!("{q_seis:.2}") == "6.83", || format!("SEIS μH = {q_seis}"))?;
    Ok(format!("H = {h}, μH = {q}; SEIS ε = {eps:.6}, μH = {q_seis:.4}"))
}

fn criterion_2() -> Outcome {
    let sir = catalog(Family::Sir);
    let seis = catalog(Family::Seis);
    let cases = [
        ("SIR B=12", reproduction_number(&sir, 12.0), 3.4043),
        ("SIR B=3", reproduction_number(&sir, 3.0), 0.8511),
        ("SEIS B=12", reproduction_number(&seis, 12.0), 1.757),
        ("SEIS B=3", reproduction_number(&seis, 3.0), 0.4393),
    ];
    let mut parts = Vec::new();
    for (name, got, want) in cases {
        ensure((got - want).abs() < 5e-5, || {
            format!("{name}: R0 = {got}, expected {want}")
        })?;
        parts.push(format!("{name} {got:.4}"));
    }
    Ok(parts.join(", "))
}

fn criterion_3() -> Outcome {
    let m = catalog(Family::Sir);
    let cfg = SimConfig::rk4(2000.0, 0.01);

    let start = Instant::now();
    let low = simulate_model(&m, &X0, &Inflow::constant(3.0), &cfg).map_err(|e| e.to_string())?;
    within_budget(start, Duration::from_secs(5), "B=3 run")?;
    let peak = detect_peak(&low, 1).ok_or("no I peak at B=3")?;
    let conv = detect_convergence(&low, &[1], &[0.0], 1e-3, 100.0);
    ensure(conv.converged, || format!("I(t_end) = {}", low.last_state()[1]))?;
    ensure(conv.since.unwrap() > peak.t, || "convergence precedes the peak".into())?;
    let n_end = *low.n_total.last().unwrap();
    ensure(rel(n_end, 200.0) <= 0.005, || format!("N(t_end) = {n_end}"))?;

    let start = Instant::now();
    let high = simulate_model(&m, &X0, &Inflow::constant(12.0), &cfg).map_err(|e| e.to_string())?;
    within_budget(start, Duration::from_secs(5), "B=12 run")?;
    let end = high.last_state();
    for (got, want) in end.iter().zip([235.0, 180.32, 384.69]) {
        ensure(rel(*got, want) <= 0.01, || format!("B=12 end state {end:?}"))?;
    }
    Ok(format!(
        "B=3 peak I = {:.1} at t = {:.1}, I < 1e-3 from t = {:.1}, N = {n_end:.3}; B=12 end [{:.3}, {:.3}, {:.3}]",
        peak.value,
        peak.t,
        conv.since.unwrap(),
        end[0],
        end[1],
        end[2]
    ))
}

fn criterion_4() -> Outcome {
    let mut flips = 0;
    for family in Family::ALL {
        let m = catalog(family);
        let net = m.lower();
        let cert = check_smallgain(&net).map_err(|e| e.to_string())?;
        ensure(cert.class == StabilityClass::Iss, || {
            format!("{family}: {:?}", cert.class)
        })?;
        ensure(cert.lambda.iter().all(|l| *l == 1.0), || {
            format!("{family}: λ = {:?}", cert.lambda)
        })?;
        for edge in 0..net.n() {
            for dir in [Direction::Forward, Direction::Backward] {
                let (fwd, bwd) = net.couplings()[edge].gains(edge).map_err(|e| e.to_string())?;
                // Scale one side so the pair product is exactly 1 + 1e-6.
                let gain = match dir {
                    Direction::Forward => (1.0 + 1e-6) / bwd,
                    Direction::Backward => (1.0 + 1e-6) / fwd,
                };
                let bumped = net.with_gain(edge, dir, gain).map_err(|e| e.to_string())?;
                let c = check_smallgain(&bumped).map_err(|e| e.to_string())?;
                ensure(c.class == StabilityClass::NotCertified, || {
                    format!("{family}: edge {edge} {dir:?} bump left {:?}", c.class)
                })?;
                flips += 1;
            }
        }
    }
    Ok(format!(
        "7 models ISS with λ ≡ 1; {flips}/{flips} single-pair bumps flip to NotCertified"
    ))
}

fn criterion_5() -> Outcome {
    let b = 12.0;
    let mut worst = 0.0f64;
    for family in Family::ALL {
        let m = catalog(family);
        let x0 = default_state(&m);
        let n0: f64 = x0.iter().sum();
        let start = Instant::now();
        let traj =
            simulate_model(&m, &x0, &Inflow::constant(b), &SimConfig::rk4(2000.0, 0.01)).map_err(|e| e.to_string())?;
        within_budget(start, Duration::from_secs(5), family.name())?;
        for (t, n) in traj.times.iter().zip(&traj.n_total) {
            let exact = b / MU + (n0 - b / MU) * (-MU * t).exp();
            let err = rel(*n, exact);
            worst = worst.max(err);
            ensure(err < 1e-6, || format!("{family}: N({t}) = {n}, exact {exact}"))?;
        }
    }
    Ok(format!("all 7 models, worst relative error {worst:.2e}"))
}

/// Inflows as multiples of Q, all outside the boundary band.
const B_FACTORS: [f64; 5] = [0.3, 0.7, 0.95, 1.05, 2.0];

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let opts = CheckOptions::default();
    let mut cells = 0;
    for family in [Family::Sir, Family::Seis] {
        let m = catalog(family);
        let q = input_threshold(&m);
        let h = bifurcation_point(&m);
        let states: Vec<Vec<f64>> = [
            X0.to_vec(),
            vec![100.0, 10.0, 0.0],
            vec![1500.0, 1.0, 0.0],
            vec![0.5 * h, 300.0, 300.0],
            vec![h, 0.1, 0.1],
        ]
        .into_iter()
        .map(|mut x| {
            if family == Family::Seis {
                // S, E, I: keep infection present in both E and I.
                x[2] = x[2].max(1.0);
            }
            x
        })
        .collect();
        let mut eradicated_at = BTreeMap::new();
        for (fi, f) in B_FACTORS.iter().enumerate() {
            for (si, x0) in states.iter().enumerate() {
                let b = f * q;
                let rep = check_threshold_dichotomy(&m, &Inflow::constant(b), x0, &opts).map_err(|e| e.to_string())?;
                let want = if b < q { "eradication" } else { "persistence" };
                ensure(rep.claim == want && rep.verdict == Verdict::Pass, || {
                    format!(
                        "{family} B = {b:.4} x0 #{si}: {} {:?} ({})",
                        rep.claim, rep.verdict, rep.note
                    )
                })?;
                if b < q {
                    eradicated_at.insert((si, fi), rep.measured.get("horizon").copied().unwrap_or(f64::NAN));
                }
                cells += 1;
            }
        }
        // Lower inflow never needs a longer horizon to eradicate.
        for si in 0..states.len() {
            let horizons: Vec<f64> = (0..3).map(|fi| eradicated_at[&(si, fi)]).collect();
            ensure(horizons.windows(2).all(|w| w[0] <= w[1]), || {
                format!("{family} x0 #{si}: horizons {horizons:?} not monotone in B")
            })?;
        }
    }

    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let grid = sweep_boundary(&dir, "vacc_newborn_grid.toml", |b, p| {
        // B(1−P) = μH, one cell = (ΔB, ΔP) = (1, 0.05).
        let p_star = 1.0 - MU * 235.0 / b;
        let b_star = MU * 235.0 / (1.0 - p);
        let near = (p - p_star).abs() <= 0.05 || (b - b_star).abs() <= 1.0;
        (b * (1.0 - p) < MU * 235.0, near)
    })?;
    let rho = sweep_boundary(&dir, "vacc_continuous.toml", |rho, _| {
        let star = 12.0 / 235.0 - MU;
        (rho > star, (rho - star).abs() <= 0.005)
    })?;
    within_budget(start, Duration::from_secs(60), "criterion 6")?;
    Ok(format!(
        "{cells} SIR/SEIS cells agree with sign(B − Q); (B, P) sweep {grid}; ρ sweep {rho}"
    ))
}

/// Runs a sweep through the binary and checks every cell farther than one
/// grid step from the analytic boundary against `side`.
fn sweep_boundary(dir: &TempDir, cfg: &str, side: impl Fn(f64, f64) -> (bool, bool)) -> Outcome {
    let out_dir = dir.path().join(cfg);
    let out = common::run("sweep", &common::config(cfg), &out_dir, &[]);
    ensure(out.status.success(), || {
        format!("{cfg}: {}", String::from_utf8_lossy(&out.stderr))
    })?;
    let (header, rows) = common::read_csv(&out_dir.join("sweep.csv"));
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let (cv, cv2, cc, co) = (col("value"), col("value2"), col("claim"), col("observed"));
    let (mut far, mut near) = (0, 0);
    for r in rows.iter().filter(|r| r[cc] == "eradication") {
        let v: f64 = r[cv].parse().unwrap();
        let v2: f64 = r[cv2].parse().unwrap_or(f64::NAN);
        let (eradicates, is_near) = side(v, v2);
        if is_near {
            near += 1;
            continue;
        }
        far += 1;
        let want = if eradicates { "eradicate" } else { "persist" };
        ensure(r[co] == want, || {
            format!("{cfg}: cell ({v}, {v2}) observed {}, expected {want}", r[co])
        })?;
    }
    Ok(format!("{far} cells match, {near} within one cell of the boundary"))
}

/// Explicit Euler with the raw vector field, recorded on the same grid as a
/// default-stride RK4 run.
fn euler(net: &BalancedNetwork, x0: &[f64], b: f64, t_end: f64, dt: f64, record_every: f64) -> Vec<(f64, Vec<f64>)> {
    let n = net.n();
    let w = vec![b; n];
    let steps = (t_end / dt).round() as usize;
    let per_record = (record_every / dt).round() as usize;
    let mut x = x0.to_vec();
    let mut f = vec![0.0; n];
    let mut out = vec![(0.0, x.clone())];
    for k in 1..=steps {
        net.vector_field_into(&x, &w, &mut f);
        for (xi, fi) in x.iter_mut().zip(&f) {
            *xi = (*xi + dt * fi).max(0.0);
        }
        if k % per_record == 0 {
            out.push((k as f64 * dt, x.clone()));
        }
    }
    out
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let runs = [
        (Family::Sir, 12.0),
        (Family::Sir, 3.0),
        (Family::Seis, 12.0),
        (Family::Seis, 3.0),
    ];
    let mut worst = 0.0f64;
    for (family, b) in runs {
        let m = catalog(family);
        let rk: Trajectory =
            simulate_model(&m, &X0, &Inflow::constant(b), &SimConfig::rk4(2000.0, 0.01)).map_err(|e| e.to_string())?;
        let reference = euler(&m.lower(), &X0, b, 2000.0, 1e-4, 0.1);
        ensure(reference.len() == rk.len(), || {
            format!("{} Euler vs {} RK4 samples", reference.len(), rk.len())
        })?;
        for ((t, xe), (tr, xr)) in reference.iter().zip(rk.times.iter().zip(&rk.states)) {
            ensure((t - tr).abs() < 1e-9, || format!("sample times {t} vs {tr}"))?;
            let scale = xe.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let diff = xe.iter().zip(xr).fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
            let err = diff / scale;
            worst = worst.max(err);
            ensure(err < 1e-3, || format!("{family} B={b} t={t}: relative gap {err:.3e}"))?;
        }
    }
    within_budget(start, Duration::from_secs(120), "criterion 7")?;
    Ok(format!("4 reference runs, worst ‖Δ‖∞/‖x‖∞ = {worst:.2e}"))
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for family in Family::ALL {
        let m = catalog(family);
        let net = m.lower();
        for b in [1.0, 3.0, 8.0, 12.0, 20.0, 50.0] {
            let eq = equilibria(&m, b).map_err(|e| e.to_string())?;
            for x in std::iter::once(&eq.disease_free).chain(eq.endemic.as_ref()) {
                let f = net.vector_field(x, &vec![b; m.n()]).map_err(|e| e.to_string())?;
                let r = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                worst = worst.max(r);
                count += 1;
                ensure(r < 1e-9, || format!("{family} B={b}: residual {r:e} at {x:?}"))?;
            }
        }
    }
    Ok(format!("{count} equilibria, worst residual {worst:.2e}"))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let samples = 10_000;
    for (k, family) in Family::ALL.into_iter().enumerate() {
        let m = catalog(family);
        let net = m.lower();
        let n = m.n();
        let spec = SampleSpec::new(samples, SampleBox::uniform(n, 2000.0)).with_seed(1000 + k as u64);
        if let Some((x, w, node, v)) = check_facet_field(&net, &spec, &vec![50.0; n]).map_err(|e| e.to_string())? {
            return Err(format!("{family}: ẋ_{node} = {v} on facet at x = {x:?}, w = {w:?}"));
        }
        let gains = validate_gain_bounds(&net, &spec).map_err(|e| e.to_string())?;
        ensure(gains.passed, || {
            format!("{family}: gain bound violated: {:?}", gains.violation)
        })?;
        let cert = check_smallgain(&net).map_err(|e| e.to_string())?;
        let supply = cert.supply.as_ref().ok_or("no supply rates")?;
        let rep = sample_dissipation_inequality(&net, &cert.lambda, supply, &spec, &SampleBox::uniform(n, 50.0), true)
            .map_err(|e| e.to_string())?;
        ensure(rep.samples == samples && rep.violations == 0, || {
            format!("{family}: {rep:?}")
        })?;
    }
    within_budget(start, Duration::from_secs(30), "criterion 9")?;
    Ok(format!(
        "7 models × {samples} samples: facets, gain bounds and dissipation hold"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("threshold reproduction", criterion_1),
        ("reproduction numbers", criterion_2),
        ("trajectory-level behaviour", criterion_3),
        ("certificate suite", criterion_4),
        ("exact total-population dynamics", criterion_5),
        ("threshold dichotomy property suite", criterion_6),
        ("RK4 against fine Euler", criterion_7),
        ("equilibrium residuals", criterion_8),
        ("sampled invariants", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {} PASS [{name}] ({took:.2?}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL [{name}] ({took:.2?}): {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

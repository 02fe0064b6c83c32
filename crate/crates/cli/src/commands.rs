use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use epinet::certificate::{check_smallgain, check_weight_consistency, sample_dissipation_inequality};
use epinet::config::{parse_config, RunConfig, SweepParameter, System};
use epinet::models::{EpidemicModel, Family, Inflow};
use epinet::network::{validate_gain_bounds, validate_positivity, SampleBox, SampleSpec};
use epinet::propcheck::{check_threshold_dichotomy, simulate_model, CheckOptions, Verdict};
use epinet::simulate::{detect_convergence, detect_peak, integrate, Event, Trajectory};
use epinet::threshold::{input_threshold, partition_ul, reproduction_number, threshold_report};
use epinet::Error;
use log::{debug, info};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::svg;
use crate::Common;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type CmdResult = Result<ExitCode, Failure>;

fn config_failure(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

fn runtime_failure(error: anyhow::Error) -> Failure {
    Failure { code: 3, error }
}

/// Integration problems are runtime failures; everything else the library
/// reports stems from the document.
fn classify(e: Error) -> Failure {
    match e {
        Error::Integration { .. } | Error::NegativeInput { .. } => runtime_failure(e.into()),
        other => config_failure(other.into()),
    }
}

fn load(c: &Common) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(&c.config)
        .with_context(|| format!("cannot read {}", c.config.display()))
        .map_err(config_failure)?;
    let cfg =
        parse_config(&text).map_err(|e| config_failure(anyhow!(e).context(format!("in {}", c.config.display()))))?;
    debug!("parsed {}", c.config.display());
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(runtime_failure)?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(runtime_failure)?;
    info!("wrote {}", path.display());
    Ok(())
}

fn print_json(value: &impl Serialize) -> Result<String, Failure> {
    let text = serde_json::to_string_pretty(value)
        .context("serializing report")
        .map_err(runtime_failure)?;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Ok(()) => Ok(text),
        // A closed pipe downstream is not an error for a report printer.
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(text),
        Err(e) => Err(runtime_failure(anyhow!(e).context("writing to stdout"))),
    }
}

fn require_model(cfg: &RunConfig, what: &str) -> Result<EpidemicModel, Failure> {
    match &cfg.system {
        System::Model(m) => Ok(*m),
        System::Network(_) => Err(config_failure(anyhow!("{what} needs a [model] section"))),
    }
}

fn system_name(cfg: &RunConfig) -> String {
    match &cfg.system {
        System::Model(m) => m.family.name().to_string(),
        System::Network(_) => "network".to_string(),
    }
}

#[derive(Serialize)]
struct SimulationSummary {
    kind: &'static str,
    system: String,
    labels: Vec<String>,
    t_end: f64,
    samples: usize,
    steps: usize,
    rejected: usize,
    max_projection: f64,
    final_state: Vec<f64>,
    final_total: f64,
    events: Vec<Event>,
    files: Vec<String>,
}

pub fn simulate(c: &Common) -> CmdResult {
    let cfg = load(c)?;
    let x0 = cfg
        .x0
        .clone()
        .ok_or_else(|| config_failure(anyhow!("`initial.x0` is required for simulate")))?;
    let mut traj: Trajectory = match &cfg.system {
        System::Model(m) => {
            let inflow = cfg.inflow.clone().unwrap_or(Inflow::constant(0.0));
            simulate_model(m, &x0, &inflow, &cfg.sim).map_err(classify)?
        }
        System::Network(net) => {
            let mut traj = integrate(net, &x0, &cfg.input, &cfg.sim).map_err(classify)?;
            let cert = check_smallgain(net).map_err(classify)?;
            if cert.is_certified() {
                // V_L has no meaning for a raw network; the column stays NaN.
                traj.attach_observables(&cert.lambda, &vec![f64::NAN; net.n()]);
            }
            traj
        }
    };
    for i in 0..traj.labels.len() {
        if let Some(p) = detect_peak(&traj, i) {
            traj.events.push(Event::Peak(p));
        }
    }
    if let (System::Model(m), Some(inflow)) = (&cfg.system, &cfg.inflow) {
        let part = partition_ul(m).map_err(classify)?;
        if m.effective_inflow(inflow.sup()) < input_threshold(m) {
            let l = part.l_indices();
            let conv = detect_convergence(&traj, &l, &vec![0.0; l.len()], 1e-3, 0.1 * traj.t_end());
            if let (true, Some(t)) = (conv.converged, conv.since) {
                traj.events.push(Event::Converged { components: l, t });
            }
        }
    }

    let mut csv = Vec::new();
    traj.write_csv(&mut csv)
        .context("formatting CSV")
        .map_err(runtime_failure)?;
    write_file(&c.out, "trajectory.csv", &csv)?;
    let title = format!("{} trajectory", system_name(&cfg));
    write_file(&c.out, "trajectory.svg", svg::line_plot(&traj, &title).as_bytes())?;

    let summary = SimulationSummary {
        kind: "simulation",
        system: system_name(&cfg),
        labels: traj.labels.clone(),
        t_end: traj.t_end(),
        samples: traj.len(),
        steps: traj.steps,
        rejected: traj.rejected,
        max_projection: traj.max_projection,
        final_state: traj.last_state().to_vec(),
        final_total: *traj.n_total.last().unwrap_or(&0.0),
        events: traj.events.clone(),
        files: vec!["trajectory.csv".into(), "trajectory.svg".into(), "summary.json".into()],
    };
    let text = print_json(&summary)?;
    write_file(&c.out, "summary.json", text.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

const CERTIFY_SAMPLES: usize = 2000;

pub fn certify(c: &Common) -> CmdResult {
    let cfg = load(c)?;
    let net = cfg.system.network();
    let n = net.n();
    let cert = check_smallgain(&net).map_err(classify)?;
    let region = match &cfg.x0 {
        Some(x0) => SampleBox::around(x0),
        None => SampleBox::uniform(n, 1000.0),
    };
    let spec = SampleSpec::new(CERTIFY_SAMPLES, region).with_seed(c.seed);
    let positivity = validate_positivity(&net, &spec).map_err(classify)?;
    let gains = validate_gain_bounds(&net, &spec).map_err(classify)?;
    let input_upper = match (&cfg.inflow, cfg.input.sup()) {
        (Some(b), _) => b.sup().max(1.0),
        (None, Some(w)) => w.iter().copied().fold(1.0, f64::max),
        (None, None) => 1.0,
    };
    let (weights, dissipation) = match &cert.supply {
        Some(supply) if cert.is_certified() => {
            let w = check_weight_consistency(&net, &cert.lambda, &spec).map_err(classify)?;
            let broadcast = matches!(cfg.system, System::Model(_));
            let d = sample_dissipation_inequality(
                &net,
                &cert.lambda,
                supply,
                &spec,
                &SampleBox::uniform(n, 10.0 * input_upper),
                broadcast,
            )
            .map_err(classify)?;
            (Some(json!({ "violation": w })), Some(d))
        }
        _ => (None, None),
    };
    let report = json!({
        "kind": "certificate",
        "system": system_name(&cfg),
        "labels": net.labels(),
        "seed": c.seed,
        "certificate": cert,
        "checks": {
            "positivity": positivity,
            "gain_bounds": gains,
            "weight_consistency": weights,
            "dissipation": dissipation,
        },
    });
    print_json(&report)?;
    Ok(if cert.is_certified() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

/// Smallest grid value for which `eradicates` holds.
fn smallest(grid: &[f64], eradicates: impl Fn(f64) -> bool) -> Option<f64> {
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.into_iter().find(|v| eradicates(*v))
}

pub fn thresholds(c: &Common) -> CmdResult {
    let cfg = load(c)?;
    let model = require_model(&cfg, "thresholds")?;
    let b = cfg
        .inflow
        .as_ref()
        .and_then(Inflow::constant_value)
        .ok_or_else(|| config_failure(anyhow!("thresholds needs a constant inflow `input.b`")))?;
    let report = threshold_report(&model, b).map_err(classify)?;
    let q = report.q;

    let p_scan = match &cfg.p_grid {
        None => None,
        Some(grid) => {
            if !matches!(model.family, Family::SirVaccA | Family::SirVaccR) {
                return Err(config_failure(anyhow!(
                    "`thresholds.p_grid` applies to newborn vaccination models only"
                )));
            }
            let p = smallest(grid, |p| b * (1.0 - p) < q);
            Some(json!({ "grid_points": grid.len(), "smallest_eradicating_p": p }))
        }
    };
    let rho_scan = match &cfg.rho_grid {
        None => None,
        Some(grid) => {
            if model.family != Family::SirVaccS {
                return Err(config_failure(anyhow!(
                    "`thresholds.rho_grid` applies to the continuous vaccination model only"
                )));
            }
            let h = report.h;
            let mu = model.params.mu;
            let rho = smallest(grid, |rho| b < (rho + mu) * h);
            Some(json!({ "grid_points": grid.len(), "smallest_eradicating_rho": rho }))
        }
    };
    let mut value = serde_json::to_value(&report)
        .context("serializing report")
        .map_err(runtime_failure)?;
    let obj = value.as_object_mut().expect("report is an object");
    obj.insert("kind".into(), json!("thresholds"));
    obj.insert("p_scan".into(), json!(p_scan));
    obj.insert("rho_scan".into(), json!(rho_scan));
    print_json(&value)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, PartialEq)]
struct SweepRow {
    value: f64,
    value2: Option<f64>,
    initial: usize,
    claim: String,
    predicted: String,
    observed: String,
}

fn eradication_row(model: &EpidemicModel, b: f64, x0: &[f64], opts: &CheckOptions) -> Result<(String, String), Error> {
    let q = input_threshold(model);
    let eff = model.effective_inflow(b);
    let predicted = if ((eff - q) / q).abs() < opts.boundary_band {
        "boundary"
    } else if eff < q {
        "eradicate"
    } else {
        "persist"
    };
    // Run the simulation check on the side the prediction does not pick, too:
    // a check at the band edge uses the band-free threshold comparison.
    let unbanded = CheckOptions {
        boundary_band: 0.0,
        ..opts.clone()
    };
    let rep = check_threshold_dichotomy(model, &Inflow::constant(b), x0, &unbanded)?;
    let observed = match (rep.claim, rep.verdict) {
        ("eradication", Verdict::Pass) | ("persistence", Verdict::Fail) => "eradicate",
        ("persistence", Verdict::Pass) | ("eradication", Verdict::Fail) => "persist",
        _ => "inconclusive",
    };
    Ok((predicted.to_string(), observed.to_string()))
}

struct GridPoint {
    value: f64,
    value2: Option<f64>,
    model: EpidemicModel,
    b: f64,
}

fn param_name(p: &SweepParameter) -> String {
    match p {
        SweepParameter::Inflow => "B".to_string(),
        SweepParameter::Param(n) => n.clone(),
    }
}

fn resolve_point(
    base: &EpidemicModel,
    fixed_b: Option<f64>,
    axes: &[(&SweepParameter, f64)],
    (value, value2): (f64, Option<f64>),
) -> Result<GridPoint, Failure> {
    let mut params = base.params;
    let mut b = fixed_b;
    for &(p, v) in axes {
        match p {
            SweepParameter::Inflow => {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(config_failure(anyhow!("sweep value B = {v} must be nonnegative")));
                }
                b = Some(v);
            }
            SweepParameter::Param(name) => {
                params.set(name, v).map_err(classify)?;
            }
        }
    }
    let label = axes
        .iter()
        .map(|(p, v)| format!("{} = {v}", param_name(p)))
        .collect::<Vec<_>>()
        .join(", ");
    let model = EpidemicModel::new(base.family, params)
        .map_err(|e| config_failure(anyhow!(e).context(format!("sweep point {label}"))))?;
    let b = b.ok_or_else(|| config_failure(anyhow!("parameter sweeps need a constant inflow `input.b`")))?;
    Ok(GridPoint {
        value,
        value2,
        model,
        b,
    })
}

pub fn sweep(c: &Common) -> CmdResult {
    let cfg = load(c)?;
    let base = require_model(&cfg, "sweep")?;
    let spec = cfg
        .sweep
        .clone()
        .ok_or_else(|| config_failure(anyhow!("missing [sweep] section")))?;
    let fixed_b = cfg.inflow.as_ref().and_then(Inflow::constant_value);

    // Resolve every grid point up front so that invalid values fail early.
    let mut points = Vec::new();
    for &v in &spec.values {
        match &spec.second {
            None => points.push(resolve_point(&base, fixed_b, &[(&spec.parameter, v)], (v, None))?),
            Some((p2, values2)) => {
                for &v2 in values2 {
                    let axes = [(&spec.parameter, v), (p2, v2)];
                    points.push(resolve_point(&base, fixed_b, &axes, (v, Some(v2)))?);
                }
            }
        }
    }

    let opts = CheckOptions {
        sim: cfg.sim,
        max_horizon: cfg.sim.t_end.max(CheckOptions::default().max_horizon),
        seed: c.seed,
        ..CheckOptions::default()
    };
    let cells: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.initial.len()).map(move |i| (p, i)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.jobs)
        .build()
        .context("building worker pool")
        .map_err(runtime_failure)?;
    info!(
        "sweeping {} cells on {} threads",
        cells.len(),
        pool.current_num_threads()
    );
    let rows: Vec<Result<Vec<SweepRow>, Error>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(p, i)| {
                let GridPoint {
                    value,
                    value2,
                    model,
                    b,
                } = &points[p];
                let mut rows = Vec::new();
                for claim in &spec.claims {
                    let (predicted, observed) = match claim.as_str() {
                        "r0" => {
                            let r0 = reproduction_number(model, *b);
                            let side = if r0 >= 1.0 { "endemic" } else { "disease_free" };
                            (format!("{r0:.16e}"), side.to_string())
                        }
                        _ => eradication_row(model, *b, &spec.initial[i], &opts)?,
                    };
                    rows.push(SweepRow {
                        value: *value,
                        value2: *value2,
                        initial: i,
                        claim: claim.clone(),
                        predicted,
                        observed,
                    });
                }
                Ok(rows)
            })
            .collect()
    });
    let mut all = Vec::new();
    for r in rows {
        all.extend(r.map_err(classify)?);
    }

    let pname = param_name(&spec.parameter);
    let pname2 = spec.second.as_ref().map(|(p, _)| param_name(p)).unwrap_or_default();
    let mut csv = Vec::new();
    writeln!(
        csv,
        "parameter,value,parameter2,value2,initial,claim,predicted,observed"
    )
    .expect("in-memory write");
    for r in &all {
        let v2 = r.value2.map(|v| format!("{v:.16e}")).unwrap_or_default();
        writeln!(
            csv,
            "{pname},{:.16e},{pname2},{v2},{},{},{},{}",
            r.value, r.initial, r.claim, r.predicted, r.observed
        )
        .expect("in-memory write");
    }
    write_file(&c.out, "sweep.csv", &csv)?;

    let erad: Vec<&SweepRow> = all.iter().filter(|r| r.claim == "eradication").collect();
    let agree = erad.iter().filter(|r| r.predicted == r.observed).count();
    let boundary = erad.iter().filter(|r| r.predicted == "boundary").count();
    let inconclusive = erad.iter().filter(|r| r.observed == "inconclusive").count();
    let disagreements: Vec<_> = erad
        .iter()
        .filter(|r| r.predicted != "boundary" && r.observed != "inconclusive" && r.predicted != r.observed)
        .map(|r| {
            json!({
                "value": r.value,
                "value2": r.value2,
                "initial": r.initial,
                "predicted": r.predicted,
                "observed": r.observed,
            })
        })
        .collect();
    let summary = json!({
        "kind": "sweep",
        "system": base.family.name(),
        "parameter": pname,
        "parameter2": spec.second.as_ref().map(|_| pname2.clone()),
        "points": points.len(),
        "initial_states": spec.initial.len(),
        "rows": all.len(),
        "eradication": {
            "cells": erad.len(),
            "agree": agree,
            "boundary": boundary,
            "inconclusive": inconclusive,
            "disagreements": disagreements,
        },
        "files": ["sweep.csv", "summary.json"],
    });
    let text = print_json(&summary)?;
    write_file(&c.out, "summary.json", text.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

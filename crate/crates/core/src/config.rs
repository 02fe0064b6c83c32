//! TOML run documents.
//!
//! A document describes either a catalog model (`[model]`) or a raw network
//! (`[network]`), plus optional `[initial]`, `[input]`, `[sim]`, `[sweep]` and
//! `[thresholds]` sections. Unknown keys are rejected and every error names
//! the offending field path.
//!
//! ```toml
//! [model]
//! family = "SIR"
//! beta = 2e-4
//! gamma = 0.032
//! mu = 0.015
//!
//! [initial]
//! x0 = [700, 200, 70]
//!
//! [input]
//! b = 3.0
//! ```

use serde::Deserialize;

use crate::comparison::ComparisonFn;
use crate::error::{Error, Result};
use crate::models::{EpidemicModel, EpidemicParams, Family, Inflow, PARAM_NAMES};
use crate::network::{BalancedNetwork, Coupling, InputSignal, RateFunction, Transfer};
use crate::simulate::{Method, SimConfig, DEFAULT_DT, DEFAULT_PROJECTION_TOL, DEFAULT_STRIDE};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub model: Option<ModelSection>,
    pub network: Option<NetworkSection>,
    pub initial: Option<InitialSection>,
    pub input: Option<InputSection>,
    pub sim: Option<SimSection>,
    pub sweep: Option<SweepSection>,
    pub thresholds: Option<ThresholdsSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: String,
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    #[serde(alias = "P")]
    pub p: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    /// Constant scalar inflow.
    #[serde(alias = "B")]
    pub b: Option<f64>,
    pub breakpoints: Option<Vec<f64>>,
    pub levels: Option<Vec<f64>>,
    /// Per-channel constant input (raw networks).
    pub w: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub method: Option<String>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub record_stride: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `"B"` or a model parameter name.
    pub parameter: String,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
    /// Initial states; defaults to `[initial].x0`.
    pub initial: Option<Vec<Vec<f64>>>,
    /// Claims evaluated per point: `eradication`, `r0`.
    pub claims: Option<Vec<String>>,
    /// Optional second axis; the grid is the product of both.
    pub second: Option<SweepAxisSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxisSection {
    pub parameter: String,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsSection {
    /// Vaccination fractions to scan for the smallest eradicating `P`.
    pub p_grid: Option<GridSection>,
    /// Vaccination rates to scan for the smallest eradicating `ρ`.
    pub rho_grid: Option<GridSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub labels: Vec<String>,
    pub dissipation: Vec<FnSpec>,
    pub input_gains: Option<Vec<FnSpec>>,
    pub couplings: Vec<CouplingSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FnSpec {
    Zero,
    Linear { coef: f64 },
    Power { coef: f64, exponent: f64 },
    Saturating { gain: f64, half: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSpec {
    Zero,
    Linear { coef: f64, var: String },
    Bilinear { coef: f64, var: String, partner: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSpec {
    pub consumption: Option<RateSpec>,
    pub production: Option<RateSpec>,
    /// Same rate for both sides; overrides `consumption`/`production`.
    pub rate: Option<RateSpec>,
    pub gain: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub forward: Option<TransferSpec>,
    pub backward: Option<TransferSpec>,
}

/// What a document describes.
#[derive(Debug, Clone)]
pub enum System {
    Model(EpidemicModel),
    Network(BalancedNetwork),
}

impl System {
    pub fn network(&self) -> BalancedNetwork {
        match self {
            System::Model(m) => m.lower(),
            System::Network(n) => n.clone(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            System::Model(m) => m.n(),
            System::Network(n) => n.n(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepParameter {
    Inflow,
    Param(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Second axis; the inner loop of the grid.
    pub second: Option<(SweepParameter, Vec<f64>)>,
    pub initial: Vec<Vec<f64>>,
    pub claims: Vec<String>,
}

pub const SWEEP_CLAIMS: [&str; 2] = ["eradication", "r0"];

/// A validated document.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: System,
    pub x0: Option<Vec<f64>>,
    /// Scalar inflow for catalog models.
    pub inflow: Option<Inflow>,
    /// Input signal sized for the network.
    pub input: InputSignal,
    pub sim: SimConfig,
    pub sweep: Option<SweepSpec>,
    pub p_grid: Option<Vec<f64>>,
    pub rho_grid: Option<Vec<f64>>,
}

fn cfg_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Deserializes a document, reporting the path of the first bad field.
pub fn parse_document(text: &str) -> Result<ConfigDoc> {
    let de = toml::de::Deserializer::parse(text).map_err(|e| cfg_err("<document>", e.message().to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        cfg_err(
            if path == "." { "<document>".to_string() } else { path },
            e.inner().message().to_string(),
        )
    })
}

pub fn model_from_config(text: &str) -> Result<EpidemicModel> {
    let doc = parse_document(text)?;
    let section = doc.model.ok_or_else(|| cfg_err("model", "missing [model] section"))?;
    model_from_section(&section)
}

pub fn model_from_section(s: &ModelSection) -> Result<EpidemicModel> {
    let family = Family::parse(&s.family).ok_or_else(|| {
        let known: Vec<&str> = Family::ALL.iter().map(|f| f.name()).collect();
        cfg_err(
            "model.family",
            format!("unknown family `{}`; expected one of {}", s.family, known.join(", ")),
        )
    })?;
    let params = EpidemicParams {
        beta: s.beta,
        gamma: s.gamma,
        mu: s.mu,
        epsilon: s.epsilon,
        delta: s.delta,
        p: s.p,
        rho: s.rho,
    };
    EpidemicModel::new(family, params).map_err(|e| match e {
        Error::InvalidParameter { field, reason } => cfg_err(format!("model.{field}"), reason),
        Error::MissingParameter(field) => cfg_err(format!("model.{field}"), format!("required for {family}")),
        other => other,
    })
}

fn comparison(spec: &FnSpec) -> ComparisonFn {
    match *spec {
        FnSpec::Zero => ComparisonFn::Zero,
        FnSpec::Linear { coef } => ComparisonFn::Linear(coef),
        FnSpec::Power { coef, exponent } => ComparisonFn::Power { coef, exponent },
        FnSpec::Saturating { gain, half } => ComparisonFn::Saturating { gain, half },
    }
}

fn network_from_section(s: &NetworkSection) -> Result<BalancedNetwork> {
    let index = |path: &str, label: &str| -> Result<usize> {
        s.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| cfg_err(path, format!("unknown state label `{label}`")))
    };
    let rate = |path: &str, spec: &RateSpec| -> Result<RateFunction> {
        Ok(match spec {
            RateSpec::Zero => RateFunction::Zero,
            RateSpec::Linear { coef, var } => RateFunction::linear(*coef, index(&format!("{path}.var"), var)?),
            RateSpec::Bilinear { coef, var, partner } => RateFunction::bilinear(
                *coef,
                index(&format!("{path}.var"), var)?,
                index(&format!("{path}.partner"), partner)?,
            ),
        })
    };
    let transfer = |path: String, spec: &Option<TransferSpec>| -> Result<Transfer> {
        let Some(t) = spec else {
            return Ok(Transfer::undeclared());
        };
        let (consumption, production) = match &t.rate {
            Some(r) => {
                let f = rate(&format!("{path}.rate"), r)?;
                (f.clone(), f)
            }
            None => (
                t.consumption
                    .as_ref()
                    .map(|r| rate(&format!("{path}.consumption"), r))
                    .transpose()?
                    .unwrap_or(RateFunction::Zero),
                t.production
                    .as_ref()
                    .map(|r| rate(&format!("{path}.production"), r))
                    .transpose()?
                    .unwrap_or(RateFunction::Zero),
            ),
        };
        Ok(Transfer {
            consumption,
            production,
            gain: t.gain,
        })
    };
    let couplings = s
        .couplings
        .iter()
        .enumerate()
        .map(|(e, c)| {
            Ok(Coupling {
                forward: transfer(format!("network.couplings[{e}].forward"), &c.forward)?,
                backward: transfer(format!("network.couplings[{e}].backward"), &c.backward)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = s.labels.len();
    let kappa = match &s.input_gains {
        Some(k) => k.iter().map(comparison).collect(),
        None => vec![ComparisonFn::Zero; n],
    };
    BalancedNetwork::new(
        s.labels.clone(),
        couplings,
        s.dissipation.iter().map(comparison).collect(),
        kappa,
    )
    .map_err(|e| cfg_err("network", e.to_string()))
}

fn sweep_parameter(path: &str, name: &str, system: &System) -> Result<SweepParameter> {
    if name.eq_ignore_ascii_case("b") {
        Ok(SweepParameter::Inflow)
    } else if PARAM_NAMES.contains(&name) {
        if !matches!(system, System::Model(_)) {
            return Err(cfg_err(path, "parameter sweeps need a [model]"));
        }
        Ok(SweepParameter::Param(name.to_string()))
    } else {
        Err(cfg_err(
            path,
            format!(
                "unknown parameter `{name}`; expected B or one of {}",
                PARAM_NAMES.join(", ")
            ),
        ))
    }
}

fn grid(path: &str, g: &GridSection) -> Result<Vec<f64>> {
    match (&g.values, g.start, g.stop, g.step) {
        (Some(v), None, None, None) => {
            if v.is_empty() {
                return Err(cfg_err(format!("{path}.values"), "grid is empty"));
            }
            Ok(v.clone())
        }
        (None, Some(start), Some(stop), Some(step)) => {
            if !(step > 0.0 && stop >= start) {
                return Err(cfg_err(path, "need step > 0 and stop ≥ start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize;
            // Rounding keeps grid values such as 0.0365 free of accumulated noise.
            Ok((0..=count)
                .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                .collect())
        }
        _ => Err(cfg_err(path, "give either `values` or all of `start`, `stop`, `step`")),
    }
}

fn sim_from_section(s: Option<&SimSection>) -> Result<SimConfig> {
    let Some(s) = s else {
        return Ok(SimConfig::default());
    };
    let method = match s.method.as_deref().unwrap_or("rk4") {
        "rk4" => {
            if s.rtol.is_some() || s.atol.is_some() {
                return Err(cfg_err("sim.rtol", "tolerances apply to method = \"rk45\" only"));
            }
            Method::Rk4
        }
        "rk45" => Method::Rk45 {
            rtol: s.rtol.unwrap_or(1e-8),
            atol: s.atol.unwrap_or(1e-9),
        },
        other => {
            return Err(cfg_err(
                "sim.method",
                format!("unknown method `{other}`; expected rk4 or rk45"),
            ))
        }
    };
    let cfg = SimConfig {
        t_end: s.t_end.unwrap_or(SimConfig::default().t_end),
        dt: s.dt.unwrap_or(DEFAULT_DT),
        method,
        record_stride: s.record_stride.unwrap_or(match method {
            Method::Rk4 => DEFAULT_STRIDE,
            Method::Rk45 { .. } => 1,
        }),
        projection_tol: match method {
            Method::Rk4 => DEFAULT_PROJECTION_TOL,
            Method::Rk45 { atol, .. } => atol,
        },
    };
    cfg.validate().map_err(|e| cfg_err("sim", e.to_string()))?;
    Ok(cfg)
}

fn inflow_from_section(s: &InputSection) -> Result<Option<Inflow>> {
    match (s.b, &s.breakpoints, &s.levels) {
        (None, None, None) => Ok(None),
        (Some(b), None, None) => {
            if !(b.is_finite() && b >= 0.0) {
                return Err(cfg_err(
                    "input.b",
                    format!("inflow must be finite and nonnegative, got {b}"),
                ));
            }
            Ok(Some(Inflow::constant(b)))
        }
        (None, Some(bp), Some(levels)) => {
            // Validate through the signal constructor.
            InputSignal::piecewise(bp.clone(), levels.iter().map(|v| vec![*v]).collect())
                .map_err(|e| cfg_err("input.levels", e.to_string()))?;
            Ok(Some(Inflow::PiecewiseConstant {
                breakpoints: bp.clone(),
                levels: levels.clone(),
            }))
        }
        _ => Err(cfg_err("input", "give either `b` or both `breakpoints` and `levels`")),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc = parse_document(text)?;
    let system = match (&doc.model, &doc.network) {
        (Some(m), None) => System::Model(model_from_section(m)?),
        (None, Some(n)) => System::Network(network_from_section(n)?),
        (Some(_), Some(_)) => return Err(cfg_err("network", "give either [model] or [network], not both")),
        (None, None) => return Err(cfg_err("model", "missing [model] or [network] section")),
    };
    let n = system.n();

    let x0 = match &doc.initial {
        Some(init) => {
            if init.x0.len() != n {
                return Err(cfg_err(
                    "initial.x0",
                    format!("expected {n} values, got {}", init.x0.len()),
                ));
            }
            if let Some(v) = init.x0.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(cfg_err(
                    "initial.x0",
                    format!("states must be finite and nonnegative, got {v}"),
                ));
            }
            Some(init.x0.clone())
        }
        None => None,
    };

    let inflow = match &doc.input {
        Some(s) => inflow_from_section(s)?,
        None => None,
    };
    let per_channel = doc.input.as_ref().and_then(|s| s.w.clone());
    let input = match (&system, &inflow, per_channel) {
        (System::Model(_), _, Some(_)) => {
            return Err(cfg_err("input.w", "catalog models take the scalar inflow `b`"));
        }
        (_, Some(_), Some(_)) => return Err(cfg_err("input.w", "give either `w` or the scalar inflow")),
        (_, None, Some(w)) => {
            if w.len() != n {
                return Err(cfg_err("input.w", format!("expected {n} values, got {}", w.len())));
            }
            InputSignal::constant(w).map_err(|e| cfg_err("input.w", e.to_string()))?
        }
        (_, Some(b), None) => b.to_signal(n)?,
        (_, None, None) => InputSignal::zero(n),
    };

    let sim = sim_from_section(doc.sim.as_ref())?;

    let sweep = match &doc.sweep {
        None => None,
        Some(s) => {
            let parameter = sweep_parameter("sweep.parameter", &s.parameter, &system)?;
            let values = grid(
                "sweep",
                &GridSection {
                    values: s.values.clone(),
                    start: s.start,
                    stop: s.stop,
                    step: s.step,
                },
            )?;
            let second = match &s.second {
                None => None,
                Some(ax) => {
                    let p2 = sweep_parameter("sweep.second.parameter", &ax.parameter, &system)?;
                    if p2 == parameter {
                        return Err(cfg_err("sweep.second.parameter", "both axes sweep the same parameter"));
                    }
                    let v2 = grid(
                        "sweep.second",
                        &GridSection {
                            values: ax.values.clone(),
                            start: ax.start,
                            stop: ax.stop,
                            step: ax.step,
                        },
                    )?;
                    Some((p2, v2))
                }
            };
            let initial = match (&s.initial, &x0) {
                (Some(list), _) => {
                    for (k, x) in list.iter().enumerate() {
                        if x.len() != n || x.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                            return Err(cfg_err(
                                format!("sweep.initial[{k}]"),
                                format!("expected {n} finite nonnegative values"),
                            ));
                        }
                    }
                    list.clone()
                }
                (None, Some(x)) => vec![x.clone()],
                (None, None) => return Err(cfg_err("sweep.initial", "no initial states (set [initial].x0)")),
            };
            let claims = s
                .claims
                .clone()
                .unwrap_or_else(|| SWEEP_CLAIMS.iter().map(|c| c.to_string()).collect());
            if let Some(c) = claims.iter().find(|c| !SWEEP_CLAIMS.contains(&c.as_str())) {
                return Err(cfg_err("sweep.claims", format!("unknown claim `{c}`")));
            }
            Some(SweepSpec {
                parameter,
                values,
                second,
                initial,
                claims,
            })
        }
    };

    let (p_grid, rho_grid) = match &doc.thresholds {
        Some(t) => (
            t.p_grid.as_ref().map(|g| grid("thresholds.p_grid", g)).transpose()?,
            t.rho_grid
                .as_ref()
                .map(|g| grid("thresholds.rho_grid", g))
                .transpose()?,
        ),
        None => (None, None),
    };

    Ok(RunConfig {
        system,
        x0,
        inflow,
        input,
        sim,
        sweep,
        p_grid,
        rho_grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIR: &str = r#"
[model]
family = "SIR"
beta = 2e-4
gamma = 0.032
mu = 0.015
"#;

    fn path_of(e: Error) -> String {
        match e {
            Error::Config { path, .. } => path,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_sir() {
        let m = model_from_config(SIR).unwrap();
        assert_eq!(m.family, Family::Sir);
        assert_eq!(m.params.beta, 2e-4);
    }

    #[test]
    fn negative_beta_names_field() {
        let doc = SIR.replace("beta = 2e-4", "beta = -1");
        assert_eq!(path_of(model_from_config(&doc).unwrap_err()), "model.beta");
    }

    #[test]
    fn unknown_field_and_family() {
        let doc = format!("{SIR}zeta = 1\n");
        assert_eq!(path_of(model_from_config(&doc).unwrap_err()), "model.zeta");
        let doc = SIR.replace("\"SIR\"", "\"SIS\"");
        assert_eq!(path_of(model_from_config(&doc).unwrap_err()), "model.family");
        let doc = format!("{SIR}[initial]\nx0 = [1, 2, 3]\ny0 = 1\n");
        assert_eq!(path_of(parse_config(&doc).unwrap_err()), "initial.y0");
    }

    #[test]
    fn missing_epsilon() {
        let doc = SIR.replace("\"SIR\"", "\"SEIS\"");
        assert_eq!(path_of(model_from_config(&doc).unwrap_err()), "model.epsilon");
    }

    #[test]
    fn wrong_type_has_path() {
        let doc = SIR.replace("mu = 0.015", "mu = \"fast\"");
        assert_eq!(path_of(model_from_config(&doc).unwrap_err()), "model.mu");
    }

    #[test]
    fn full_run_document() {
        let doc = format!(
            "{SIR}[initial]\nx0 = [700, 200, 70]\n[input]\nb = 3.0\n[sim]\nt_end = 100\n\
             [sweep]\nparameter = \"B\"\nstart = 1.0\nstop = 3.0\nstep = 0.5\n"
        );
        let cfg = parse_config(&doc).unwrap();
        assert_eq!(cfg.sim.t_end, 100.0);
        assert_eq!(cfg.inflow, Some(Inflow::constant(3.0)));
        let sweep = cfg.sweep.unwrap();
        assert_eq!(sweep.values, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(sweep.initial, vec![vec![700.0, 200.0, 70.0]]);
    }

    #[test]
    fn raw_network() {
        let doc = r#"
[network]
labels = ["x", "y"]
dissipation = [{ kind = "linear", coef = 0.1 }, { kind = "linear", coef = 0.2 }]
input_gains = [{ kind = "linear", coef = 1.0 }, { kind = "zero" }]

[[network.couplings]]
forward = { rate = { kind = "linear", coef = 0.5, var = "x" }, gain = 1.0 }
backward = { gain = 1.0 }

[[network.couplings]]
forward = { gain = 1.0 }
backward = { gain = 1.0 }

[input]
w = [1.0, 0.0]
"#;
        let cfg = parse_config(doc).unwrap();
        let net = cfg.system.network();
        let f = net.vector_field(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((f[0] - (1.0 - 0.1 - 0.5)).abs() < 1e-15);
        assert!((f[1] - (0.5 - 0.2)).abs() < 1e-15);

        let bad = doc.replace("var = \"x\"", "var = \"z\"");
        assert_eq!(
            path_of(parse_config(&bad).unwrap_err()),
            "network.couplings[0].forward.rate.var"
        );
    }
}

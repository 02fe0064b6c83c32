//! Cyclic small-gain test and weighted-sum Lyapunov synthesis.
//!
//! For a [`BalancedNetwork`] with declared gains, the test checks
//!
//! - every length-one cycle: `ℓ_{i,i+1}·ℓ_{i+1,i} ≤ 1`;
//! - the length-`n` cycle: some anchor `k` with
//!   `ℓ_{k,k+1}ℓ_{k+1,k} ≤ Π_i ℓ_{i,i+1}/ℓ_{i+1,i} ≤ 1/(ℓ_{k,k+1}ℓ_{k+1,k})`.
//!
//! When both hold, `V(x) = Σ λ_i x_i` with weights chained around the ring
//! from the anchor satisfies `V̇ ≤ −α(V) + σ(|w|)`, and the class of the
//! dissipation terms decides between iISS, Strong iISS and ISS.

use serde::Serialize;

use crate::comparison::{ComparisonClass, ComparisonFn};
use crate::error::{Error, Result};
use crate::network::{wrap, BalancedNetwork, Direction, SampleBox, SampleSpec};

/// Substitute for a zero gain bound inside the cycle product.
pub const ZERO_GAIN_SUBSTITUTE: f64 = 1e-9;

/// Relative slack on the gain-product inequalities.
pub const GAIN_PRODUCT_RTOL: f64 = 1e-12;

/// Largest network accepted by the level-set grid minimizer.
pub const LEVEL_SET_MAX_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum StabilityClass {
    NotCertified,
    #[serde(rename = "iISS")]
    IntegralIss,
    #[serde(rename = "StrongiISS")]
    StrongIntegralIss,
    #[serde(rename = "ISS")]
    Iss,
}

impl StabilityClass {
    pub fn is_certified(self) -> bool {
        self != StabilityClass::NotCertified
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleOneCheck {
    /// 1-based node index `i` of the pair `(i, i+1)`.
    pub i: usize,
    pub product: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleNCheck {
    /// `Π_i ℓ_{i,i+1}/ℓ_{i+1,i}`, evaluated with any zero substitution.
    pub product: f64,
    /// Every 1-based `k` satisfying the two-sided bound.
    pub admissible: Vec<usize>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainSubstitution {
    pub edge: usize,
    pub direction: Direction,
    pub declared: f64,
    pub used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Failure {
    CycleOne { pairs: Vec<usize> },
    CycleN { product: f64 },
    DissipationNotClassP { index: usize },
}

/// Decay rate `α` of the weighted-sum Lyapunov function.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayRate {
    /// `α(s) = coef·s`
    Linear { coef: f64 },
    /// `α(s) = θ_1(s/λ_1)` for a single state.
    Scalar { dissipation: ComparisonFn, weight: f64 },
    /// `α(s) ≈ min {Σ θ_i(x_i) : Σ λ_i x_i = s}` on a simplex grid. The grid
    /// minimum is an upper estimate of the exact minimum.
    LevelSetGrid {
        dissipation: Vec<ComparisonFn>,
        lambda: Vec<f64>,
        resolution: usize,
    },
}

impl DecayRate {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            DecayRate::Linear { coef } => coef * s,
            DecayRate::Scalar { dissipation, weight } => dissipation.eval(s / weight),
            DecayRate::LevelSetGrid {
                dissipation,
                lambda,
                resolution,
            } => level_set_min(dissipation, lambda, *resolution, s),
        }
    }
}

/// Input supply `σ(s) = Σ κ_i(s)`.
#[derive(Debug, Clone, Serialize)]
pub struct InputSupply {
    pub gains: Vec<ComparisonFn>,
}

impl InputSupply {
    pub fn eval(&self, s: f64) -> f64 {
        self.gains.iter().map(|k| k.eval(s)).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SupplyRates {
    pub alpha: DecayRate,
    pub sigma: InputSupply,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityCertificate {
    pub class: StabilityClass,
    /// Weights of `V(x) = Σ λ_i x_i`; empty when not certified.
    pub lambda: Vec<f64>,
    /// 1-based anchor index (smallest admissible).
    pub anchor_k: Option<usize>,
    pub cycle_one: Vec<CycleOneCheck>,
    pub cycle_n: CycleNCheck,
    pub substitutions: Vec<GainSubstitution>,
    pub dissipation_class: ComparisonClass,
    pub failure: Option<Failure>,
    pub supply: Option<SupplyRates>,
}

impl StabilityCertificate {
    pub fn is_certified(&self) -> bool {
        self.class.is_certified()
    }
}

fn le(a: f64, b: f64) -> bool {
    a <= b + GAIN_PRODUCT_RTOL * b.abs()
}

/// Declared gains `(forward, backward)` per edge with at most one zero
/// replaced by [`ZERO_GAIN_SUBSTITUTE`].
type EffectiveGains = (Vec<(f64, f64)>, Vec<GainSubstitution>);

fn effective_gains(net: &BalancedNetwork) -> Result<EffectiveGains> {
    let mut gains = net
        .couplings()
        .iter()
        .enumerate()
        .map(|(e, c)| c.gains(e))
        .collect::<Result<Vec<_>>>()?;
    let zeros: Vec<(usize, Direction)> = gains
        .iter()
        .enumerate()
        .flat_map(|(e, (f, b))| {
            let mut z = Vec::new();
            if *f == 0.0 {
                z.push((e, Direction::Forward));
            }
            if *b == 0.0 {
                z.push((e, Direction::Backward));
            }
            z
        })
        .collect();
    if zeros.len() > 1 {
        return Err(Error::MultipleZeroGains { count: zeros.len() });
    }
    let mut subs = Vec::new();
    for (e, dir) in zeros {
        match dir {
            Direction::Forward => gains[e].0 = ZERO_GAIN_SUBSTITUTE,
            Direction::Backward => gains[e].1 = ZERO_GAIN_SUBSTITUTE,
        }
        subs.push(GainSubstitution {
            edge: e,
            direction: dir,
            declared: 0.0,
            used: ZERO_GAIN_SUBSTITUTE,
        });
    }
    Ok((gains, subs))
}

/// Chains the weights around the ring starting after the anchor edge
/// (0-based), `λ_{a+1} = 1`, `λ_{i+1} = λ_i·sqrt(ℓ_{i,i+1}/ℓ_{i+1,i})`.
fn chain_weights(gains: &[(f64, f64)], anchor: usize) -> std::result::Result<Vec<f64>, (usize, Direction)> {
    let n = gains.len();
    let start = wrap(anchor as isize + 1, n);
    let mut lambda = vec![0.0; n];
    lambda[start] = 1.0;
    for step in 0..n.saturating_sub(1) {
        let e = wrap((start + step) as isize, n);
        let (fwd, bwd) = gains[e];
        if fwd == 0.0 {
            return Err((e, Direction::Forward));
        }
        if bwd == 0.0 {
            return Err((e, Direction::Backward));
        }
        lambda[wrap(e as isize + 1, n)] = lambda[e] * (bwd / fwd).sqrt();
    }
    Ok(lambda)
}

/// Runs the cyclic small-gain test and, on success, synthesizes the weights
/// and supply rates.
pub fn check_smallgain(net: &BalancedNetwork) -> Result<StabilityCertificate> {
    let n = net.n();
    let (gains, substitutions) = effective_gains(net)?;

    let cycle_one: Vec<CycleOneCheck> = gains
        .iter()
        .enumerate()
        .map(|(e, (f, b))| {
            let product = f * b;
            CycleOneCheck {
                i: e + 1,
                product,
                holds: le(product, 1.0),
            }
        })
        .collect();

    let product: f64 = gains.iter().map(|(f, b)| b / f).product();
    let admissible: Vec<usize> = gains
        .iter()
        .enumerate()
        .filter(|(_, (f, b))| {
            let c = f * b;
            le(c, product) && le(product * c, 1.0)
        })
        .map(|(e, _)| e + 1)
        .collect();
    let cycle_n = CycleNCheck {
        product,
        holds: !admissible.is_empty(),
        admissible,
    };

    let dissipation_class = net
        .dissipation()
        .iter()
        .map(ComparisonFn::class)
        .min()
        .unwrap_or(ComparisonClass::Unclassified);

    let failed_pairs: Vec<usize> = cycle_one.iter().filter(|c| !c.holds).map(|c| c.i).collect();
    let failure = if !failed_pairs.is_empty() {
        Some(Failure::CycleOne { pairs: failed_pairs })
    } else if !cycle_n.holds {
        Some(Failure::CycleN { product })
    } else {
        net.dissipation()
            .iter()
            .position(|t| !t.class().is_class_p())
            .map(|index| Failure::DissipationNotClassP { index })
    };

    if failure.is_some() {
        return Ok(StabilityCertificate {
            class: StabilityClass::NotCertified,
            lambda: Vec::new(),
            anchor_k: None,
            cycle_one,
            cycle_n,
            substitutions,
            dissipation_class,
            failure,
            supply: None,
        });
    }

    let anchor_k = cycle_n.admissible[0];
    let lambda = chain_weights(&gains, anchor_k - 1).map_err(|(edge, dir)| Error::ZeroGainInProduct {
        edge,
        direction: dir.as_str(),
    })?;
    debug_assert_eq!(lambda.len(), n);
    let supply = synthesize_supply_rates(net, &lambda, &LevelSetOptions::default())?;

    let class = match dissipation_class {
        ComparisonClass::KInf => StabilityClass::Iss,
        ComparisonClass::K => StabilityClass::StrongIntegralIss,
        _ => StabilityClass::IntegralIss,
    };
    Ok(StabilityCertificate {
        class,
        lambda,
        anchor_k: Some(anchor_k),
        cycle_one,
        cycle_n,
        substitutions,
        dissipation_class,
        failure: None,
        supply: Some(supply),
    })
}

/// Weights from the declared gains for a given 1-based anchor.
///
/// Unlike [`check_smallgain`] no zero substitution happens here: a zero gain
/// inside the product is reported so the caller can decide on a bound.
pub fn synthesize_lambda(net: &BalancedNetwork, anchor_k: usize) -> Result<Vec<f64>> {
    let n = net.n();
    if anchor_k == 0 || anchor_k > n {
        return Err(Error::AnchorOutOfRange { anchor: anchor_k, n });
    }
    let gains = net
        .couplings()
        .iter()
        .enumerate()
        .map(|(e, c)| c.gains(e))
        .collect::<Result<Vec<_>>>()?;
    chain_weights(&gains, anchor_k - 1).map_err(|(edge, dir)| Error::ZeroGainInProduct {
        edge,
        direction: dir.as_str(),
    })
}

/// `V(x) = Σ λ_i x_i`.
pub fn lyapunov_value(lambda: &[f64], x: &[f64]) -> Result<f64> {
    if lambda.len() != x.len() {
        return Err(Error::Dimension {
            what: "state",
            expected: lambda.len(),
            got: x.len(),
        });
    }
    Ok(lambda.iter().zip(x).map(|(l, v)| l * v).sum())
}

#[derive(Debug, Clone, Default)]
pub struct LevelSetOptions {
    /// Grid points per simplex dimension; `None` picks a size-dependent
    /// default (200 up to four states, fewer beyond).
    pub resolution: Option<usize>,
}

fn default_resolution(n: usize) -> usize {
    match n {
        0..=4 => 200,
        5 => 40,
        _ => 20,
    }
}

/// Builds `α` and `σ` for the weighted sum with weights `lambda`.
pub fn synthesize_supply_rates(net: &BalancedNetwork, lambda: &[f64], opts: &LevelSetOptions) -> Result<SupplyRates> {
    let n = net.n();
    if lambda.len() != n {
        return Err(Error::Dimension {
            what: "weights",
            expected: n,
            got: lambda.len(),
        });
    }
    if let Some(index) = net.dissipation().iter().position(|t| !t.class().is_class_p()) {
        return Err(Error::DissipationNotClassP { index });
    }
    let sigma = InputSupply {
        gains: net.input_gains().to_vec(),
    };
    let coefs: Option<Vec<f64>> = net.dissipation().iter().map(ComparisonFn::linear_coef).collect();
    let alpha = if let Some(coefs) = coefs {
        let coef = coefs
            .iter()
            .zip(lambda)
            .map(|(c, l)| c / l)
            .fold(f64::INFINITY, f64::min);
        DecayRate::Linear { coef }
    } else if n == 1 {
        DecayRate::Scalar {
            dissipation: net.dissipation()[0].clone(),
            weight: lambda[0],
        }
    } else {
        if n > LEVEL_SET_MAX_DIM {
            return Err(Error::LevelSetDimension {
                n,
                max: LEVEL_SET_MAX_DIM,
            });
        }
        DecayRate::LevelSetGrid {
            dissipation: net.dissipation().to_vec(),
            lambda: lambda.to_vec(),
            resolution: opts.resolution.unwrap_or_else(|| default_resolution(n)).max(2),
        }
    };
    Ok(SupplyRates { alpha, sigma })
}

/// Grid minimum of `Σ θ_i(x_i)` over `{x ≥ 0 : Σ λ_i x_i = s}`.
fn level_set_min(theta: &[ComparisonFn], lambda: &[f64], resolution: usize, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let m = resolution - 1;
    let mut parts = vec![0usize; theta.len()];
    let mut best = f64::INFINITY;
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        idx: usize,
        remaining: usize,
        parts: &mut [usize],
        theta: &[ComparisonFn],
        lambda: &[f64],
        m: usize,
        s: f64,
        best: &mut f64,
    ) {
        if idx + 1 == parts.len() {
            parts[idx] = remaining;
            let total: f64 = parts
                .iter()
                .enumerate()
                .map(|(i, &p)| theta[i].eval(s * (p as f64 / m as f64) / lambda[i]))
                .sum();
            if total < *best {
                *best = total;
            }
            return;
        }
        for p in 0..=remaining {
            parts[idx] = p;
            recurse(idx + 1, remaining - p, parts, theta, lambda, m, s, best);
        }
    }
    recurse(0, m, &mut parts, theta, lambda, m, s, &mut best);
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightViolation {
    pub edge: usize,
    pub direction: Direction,
    pub x: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Sampled check of the per-edge weighted bounds
/// `λ_{i+1}σ_{i+1,i} ≤ λ_i η_{i+1,i}` and `λ_i σ_{i,i+1} ≤ λ_{i+1} η_{i,i+1}`.
pub fn check_weight_consistency(
    net: &BalancedNetwork,
    lambda: &[f64],
    spec: &SampleSpec,
) -> Result<Option<WeightViolation>> {
    if lambda.len() != net.n() {
        return Err(Error::Dimension {
            what: "weights",
            expected: net.n(),
            got: lambda.len(),
        });
    }
    let mut rng = spec.rng();
    for _ in 0..spec.samples {
        let x = spec.region.sample(&mut rng);
        for (e, c) in net.couplings().iter().enumerate() {
            for dir in [Direction::Forward, Direction::Backward] {
                let (src, dst) = net.endpoints(e, dir);
                let t = c.transfer(dir);
                let lhs = lambda[dst] * t.production.eval(&x);
                let rhs = lambda[src] * t.consumption.eval(&x);
                if lhs > rhs + 1e-12 * (1.0 + rhs.abs()) {
                    return Ok(Some(WeightViolation {
                        edge: e,
                        direction: dir,
                        x,
                        lhs,
                        rhs,
                    }));
                }
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipationReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest observed `V̇ − (−α(V) + σ(|w|∞))`; nonpositive when the
    /// inequality holds everywhere sampled.
    pub worst_margin: f64,
    pub worst_state: Option<(Vec<f64>, Vec<f64>)>,
}

/// Samples `(x, w)` and counts violations of `Σ λ_i ẋ_i ≤ −α(V(x)) + σ(|w|∞)`
/// beyond `1e−9` absolute plus `1e−12` relative to the term magnitudes.
pub fn sample_dissipation_inequality(
    net: &BalancedNetwork,
    lambda: &[f64],
    supply: &SupplyRates,
    spec: &SampleSpec,
    inputs: &SampleBox,
    broadcast_input: bool,
) -> Result<DissipationReport> {
    let n = net.n();
    if lambda.len() != n || inputs.upper.len() != n {
        return Err(Error::Dimension {
            what: "weights or input box",
            expected: n,
            got: if lambda.len() != n {
                lambda.len()
            } else {
                inputs.upper.len()
            },
        });
    }
    let mut rng = spec.rng();
    let mut f = vec![0.0; n];
    let mut report = DissipationReport {
        samples: spec.samples,
        violations: 0,
        worst_margin: f64::NEG_INFINITY,
        worst_state: None,
    };
    for _ in 0..spec.samples {
        let x = spec.region.sample(&mut rng);
        let w = if broadcast_input {
            let b = inputs.sample(&mut rng)[0];
            vec![b; n]
        } else {
            inputs.sample(&mut rng)
        };
        net.vector_field_into(&x, &w, &mut f);
        let vdot: f64 = lambda.iter().zip(&f).map(|(l, v)| l * v).sum();
        let v = lyapunov_value(lambda, &x)?;
        let wnorm = w.iter().copied().fold(0.0, f64::max);
        let bound = -supply.alpha.eval(v) + supply.sigma.eval(wnorm);
        let scale: f64 = lambda.iter().zip(&f).map(|(l, v)| (l * v).abs()).sum::<f64>() + bound.abs();
        let margin = vdot - bound;
        if margin > report.worst_margin {
            report.worst_margin = margin;
            report.worst_state = Some((x.clone(), w.clone()));
        }
        if margin > 1e-9 + 1e-12 * scale {
            report.violations += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Coupling, RateFunction, Transfer};
    use approx::assert_relative_eq;

    fn ring(gains: &[(f64, f64)], theta: Vec<ComparisonFn>) -> BalancedNetwork {
        let n = gains.len();
        BalancedNetwork::new(
            (0..n).map(|i| format!("x{i}")).collect(),
            gains
                .iter()
                .map(|(f, b)| Coupling {
                    forward: Transfer::none(*f),
                    backward: Transfer::none(*b),
                })
                .collect(),
            theta,
            vec![ComparisonFn::Zero; n],
        )
        .unwrap()
    }

    #[test]
    fn two_node_loop_gain_four_is_rejected() {
        // ℓ_{1,2} = ℓ_{2,1} = 2 on a two-node ring: both edges carry the pair.
        let net = ring(&[(2.0, 2.0), (2.0, 2.0)], vec![ComparisonFn::Linear(1.0); 2]);
        let cert = check_smallgain(&net).unwrap();
        assert_eq!(cert.class, StabilityClass::NotCertified);
        assert_eq!(cert.cycle_one[0].product, 4.0);
        assert!(!cert.cycle_one[0].holds);
        assert!(matches!(cert.failure, Some(Failure::CycleOne { .. })));
    }

    #[test]
    fn lambda_ratio_on_asymmetric_pair() {
        // ℓ_{1,2} = 4, ℓ_{2,1} = 0.25; edge 0 forward is ℓ_{2,1}, backward ℓ_{1,2}.
        let net = ring(&[(0.25, 4.0), (4.0, 0.25)], vec![ComparisonFn::Linear(1.0); 2]);
        let lambda = synthesize_lambda(&net, 1).unwrap();
        assert_eq!(lambda[1], 1.0);
        assert_relative_eq!(lambda[1] / lambda[0], 4.0, epsilon = 1e-12);
        let cert = check_smallgain(&net).unwrap();
        assert_eq!(cert.class, StabilityClass::Iss);
        assert_eq!(cert.anchor_k, Some(1));
        assert_eq!(cert.lambda, lambda);
    }

    #[test]
    fn closed_form_alpha() {
        let net = ring(
            &[(1.0, 1.0); 3],
            vec![
                ComparisonFn::Linear(1.0),
                ComparisonFn::Linear(2.0),
                ComparisonFn::Linear(3.0),
            ],
        );
        let s = synthesize_supply_rates(&net, &[1.0, 1.0, 1.0], &LevelSetOptions::default()).unwrap();
        assert_relative_eq!(s.alpha.eval(5.0), 5.0);

        let net2 = ring(
            &[(1.0, 1.0); 2],
            vec![ComparisonFn::Linear(1.0), ComparisonFn::Linear(2.0)],
        );
        let s2 = synthesize_supply_rates(&net2, &[1.0, 4.0], &LevelSetOptions::default()).unwrap();
        assert!(matches!(s2.alpha, DecayRate::Linear { coef } if (coef - 0.5).abs() < 1e-15));
    }

    #[test]
    fn level_set_grid_matches_closed_form_on_linear_theta() {
        // Same θ written as callbacks, forcing the grid path.
        let theta = vec![
            ComparisonFn::callback("s", |s| s),
            ComparisonFn::callback("2s", |s| 2.0 * s),
        ];
        let net = ring(&[(1.0, 1.0); 2], theta);
        let s = synthesize_supply_rates(&net, &[1.0, 4.0], &LevelSetOptions::default()).unwrap();
        assert!(matches!(s.alpha, DecayRate::LevelSetGrid { .. }));
        assert_relative_eq!(s.alpha.eval(3.0), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn level_set_rejects_large_networks() {
        let theta = vec![ComparisonFn::Saturating { gain: 1.0, half: 1.0 }; 7];
        let net = ring(&[(1.0, 1.0); 7], theta);
        let err = synthesize_supply_rates(&net, &[1.0; 7], &LevelSetOptions::default()).unwrap_err();
        assert_eq!(err, Error::LevelSetDimension { n: 7, max: 6 });
    }

    #[test]
    fn saturating_dissipation_is_strong_iiss() {
        let theta = vec![ComparisonFn::Saturating { gain: 1.0, half: 1.0 }; 2];
        let cert = check_smallgain(&ring(&[(1.0, 1.0); 2], theta)).unwrap();
        assert_eq!(cert.class, StabilityClass::StrongIntegralIss);
        let mixed = vec![
            ComparisonFn::callback("p", |s| s / (1.0 + s * s)),
            ComparisonFn::Linear(1.0),
        ];
        let cert = check_smallgain(&ring(&[(1.0, 1.0); 2], mixed)).unwrap();
        assert_eq!(cert.class, StabilityClass::IntegralIss);
    }

    #[test]
    fn zero_dissipation_is_not_certified() {
        let cert = check_smallgain(&ring(
            &[(1.0, 1.0); 2],
            vec![ComparisonFn::Zero, ComparisonFn::Linear(1.0)],
        ))
        .unwrap();
        assert_eq!(cert.class, StabilityClass::NotCertified);
        assert_eq!(cert.failure, Some(Failure::DissipationNotClassP { index: 0 }));
    }

    #[test]
    fn single_zero_gain_is_substituted() {
        // One-way cascade on the last edge: ℓ backward = 0 there.
        let net = ring(
            &[(1.0, 1.0), (1.0, 1.0), (1.0, 0.0)],
            vec![ComparisonFn::Linear(1.0); 3],
        );
        let cert = check_smallgain(&net).unwrap();
        assert_eq!(cert.substitutions.len(), 1);
        assert_eq!(cert.substitutions[0].edge, 2);
        assert_eq!(cert.class, StabilityClass::Iss);
        // Only the edge holding the substituted zero can anchor the product.
        assert_eq!(cert.cycle_n.admissible, vec![3]);
        assert!(cert.lambda.iter().all(|l| *l > 0.0 && l.is_finite()));

        // Without substitution the weight chain through that edge is refused.
        assert!(matches!(
            synthesize_lambda(&net, 1),
            Err(Error::ZeroGainInProduct { edge: 2, .. })
        ));
        assert!(synthesize_lambda(&net, 3).is_ok());
    }

    #[test]
    fn several_zero_gains_are_rejected() {
        let net = ring(
            &[(0.0, 1.0), (1.0, 0.0), (1.0, 1.0)],
            vec![ComparisonFn::Linear(1.0); 3],
        );
        assert_eq!(
            check_smallgain(&net).unwrap_err(),
            Error::MultipleZeroGains { count: 2 }
        );
    }

    #[test]
    fn anchor_range_is_checked() {
        let net = ring(&[(1.0, 1.0); 3], vec![ComparisonFn::Linear(1.0); 3]);
        assert!(matches!(
            synthesize_lambda(&net, 0),
            Err(Error::AnchorOutOfRange { anchor: 0, n: 3 })
        ));
        assert!(matches!(
            synthesize_lambda(&net, 4),
            Err(Error::AnchorOutOfRange { .. })
        ));
    }

    #[test]
    fn lyapunov_value_examples() {
        assert_eq!(lyapunov_value(&[1.0, 1.0, 1.0], &[700.0, 200.0, 70.0]).unwrap(), 970.0);
        assert_eq!(lyapunov_value(&[1.0, 1.0, 1.0], &[0.0; 3]).unwrap(), 0.0);
        assert_eq!(lyapunov_value(&[1.0, 2.5], &[3.0, 2.0]).unwrap(), 8.0);
        assert!(lyapunov_value(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn weight_consistency_on_conserving_chain() {
        let net = BalancedNetwork::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                Coupling {
                    forward: Transfer::conserving(RateFunction::bilinear(0.1, 0, 1)),
                    backward: Transfer::none(1.0),
                },
                Coupling {
                    forward: Transfer::conserving(RateFunction::linear(0.3, 1)),
                    backward: Transfer::none(1.0),
                },
                Coupling {
                    forward: Transfer::none(1.0),
                    backward: Transfer::none(1.0),
                },
            ],
            vec![ComparisonFn::Linear(0.2); 3],
            vec![ComparisonFn::Linear(1.0), ComparisonFn::Zero, ComparisonFn::Zero],
        )
        .unwrap();
        let cert = check_smallgain(&net).unwrap();
        let spec = SampleSpec::new(500, SampleBox::uniform(3, 100.0));
        assert_eq!(check_weight_consistency(&net, &cert.lambda, &spec).unwrap(), None);
        let rep = sample_dissipation_inequality(
            &net,
            &cert.lambda,
            cert.supply.as_ref().unwrap(),
            &spec,
            &SampleBox::uniform(3, 10.0),
            true,
        )
        .unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.worst_margin.abs() < 1e-9);
    }
}

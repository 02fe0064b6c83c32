//! Circular balancing-kinetics networks.
//!
//! A network of `n` nonnegative states is a ring. Coupling `e` joins node `e`
//! and node `e + 1` (indices mod `n`) and carries two transfers:
//!
//! - `forward`: node `e` is consumed at rate `η_{e+1,e}(x)` and node `e + 1`
//!   is produced at rate `σ_{e+1,e}(x)`, with declared bound
//!   `σ_{e+1,e} ≤ ℓ_{e+1,e}·η_{e+1,e}`;
//! - `backward`: the same in the opposite direction, `η_{e,e+1}`,
//!   `σ_{e,e+1}`, `ℓ_{e,e+1}`.
//!
//! Every node additionally dissipates at `θ_i(x_i)` and receives input
//! `κ_i(w_i)`:
//!
//! ```text
//! ẋ_i = −η_{i−1,i} + σ_{i,i−1} − η_{i+1,i} + σ_{i,i+1} − θ_i(x_i) + κ_i(w_i)
//! ```
//!
//! Indices in this module are 0-based. For `n = 2` the two couplings are
//! parallel edges between the same pair of nodes, and for `n = 1` the single
//! coupling is a self-loop.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::comparison::{ComparisonClass, ComparisonFn};
use crate::error::{Error, Result};

/// Absolute tolerance for structural zero checks.
pub const ZERO_TOL: f64 = 1e-12;

/// 1-based circular index: `((k − 1) mod n) + 1` with a nonnegative remainder.
pub fn circular_index(k: i64, n: usize) -> usize {
    assert!(n >= 1, "circular_index needs n >= 1");
    ((k - 1).rem_euclid(n as i64) + 1) as usize
}

/// 0-based wrap of a signed offset.
pub(crate) fn wrap(k: isize, n: usize) -> usize {
    k.rem_euclid(n as isize) as usize
}

type RateCallback = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A nonnegative rate `R₊ⁿ → R₊` with a structural tag.
#[derive(Clone)]
pub enum RateFunction {
    Zero,
    /// `coef·x[var]`
    Linear {
        coef: f64,
        var: usize,
    },
    /// `coef·x[var]·x[partner]`
    Bilinear {
        coef: f64,
        var: usize,
        partner: usize,
    },
    Callback {
        label: String,
        f: RateCallback,
    },
}

impl RateFunction {
    pub fn linear(coef: f64, var: usize) -> Self {
        RateFunction::Linear { coef, var }
    }

    pub fn bilinear(coef: f64, var: usize, partner: usize) -> Self {
        RateFunction::Bilinear { coef, var, partner }
    }

    pub fn callback(label: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        RateFunction::Callback {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            RateFunction::Zero => 0.0,
            RateFunction::Linear { coef, var } => coef * x[*var],
            RateFunction::Bilinear { coef, var, partner } => coef * x[*var] * x[*partner],
            RateFunction::Callback { f, .. } => f(x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            RateFunction::Zero => true,
            RateFunction::Linear { coef, .. } | RateFunction::Bilinear { coef, .. } => *coef == 0.0,
            RateFunction::Callback { .. } => false,
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            RateFunction::Linear { var, .. } => Some(*var),
            RateFunction::Bilinear { var, partner, .. } => Some((*var).max(*partner)),
            _ => None,
        }
    }

    fn coef(&self) -> Option<f64> {
        match self {
            RateFunction::Zero => Some(0.0),
            RateFunction::Linear { coef, .. } | RateFunction::Bilinear { coef, .. } => Some(*coef),
            RateFunction::Callback { .. } => None,
        }
    }

    /// Sorted variable multiset of the monomial, or `None` for callbacks.
    fn monomial(&self) -> Option<Vec<usize>> {
        match self {
            RateFunction::Zero => Some(Vec::new()),
            RateFunction::Linear { var, .. } => Some(vec![*var]),
            RateFunction::Bilinear { var, partner, .. } => {
                let mut m = vec![*var, *partner];
                m.sort_unstable();
                Some(m)
            }
            RateFunction::Callback { .. } => None,
        }
    }

    /// Exact answer to "does this rate vanish whenever `x[node] = 0`?" for
    /// structural tags.
    pub fn vanishes_on_facet(&self, node: usize) -> Option<bool> {
        match self {
            RateFunction::Zero => Some(true),
            RateFunction::Linear { coef, var } => Some(*coef == 0.0 || *var == node),
            RateFunction::Bilinear { coef, var, partner } => Some(*coef == 0.0 || *var == node || *partner == node),
            RateFunction::Callback { .. } => None,
        }
    }
}

/// Exact check of `σ(x) ≤ ℓ·η(x)` on the whole orthant for structural tags.
fn bound_holds_exactly(production: &RateFunction, consumption: &RateFunction, ell: f64) -> Option<bool> {
    if production.is_zero() {
        return Some(true);
    }
    let (pm, cm) = (production.monomial()?, consumption.monomial()?);
    let (pc, cc) = (production.coef()?, consumption.coef()?);
    if consumption.is_zero() {
        return Some(pc <= 0.0);
    }
    if pm == cm {
        Some(pc <= ell * cc * (1.0 + ZERO_TOL) + ZERO_TOL)
    } else {
        None
    }
}

impl fmt::Debug for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFunction::Zero => write!(f, "Zero"),
            RateFunction::Linear { coef, var } => write!(f, "{coef}·x{var}"),
            RateFunction::Bilinear { coef, var, partner } => write!(f, "{coef}·x{var}·x{partner}"),
            RateFunction::Callback { label, .. } => write!(f, "Callback({label})"),
        }
    }
}

impl Serialize for RateFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        match self {
            RateFunction::Zero => map.serialize_entry("kind", "zero")?,
            RateFunction::Linear { coef, var } => {
                map.serialize_entry("kind", "linear")?;
                map.serialize_entry("coef", coef)?;
                map.serialize_entry("var", var)?;
            }
            RateFunction::Bilinear { coef, var, partner } => {
                map.serialize_entry("kind", "bilinear")?;
                map.serialize_entry("coef", coef)?;
                map.serialize_entry("var", var)?;
                map.serialize_entry("partner", partner)?;
            }
            RateFunction::Callback { label, .. } => {
                map.serialize_entry("kind", "callback")?;
                map.serialize_entry("label", label)?;
            }
        }
        map.end()
    }
}

/// One direction of a coupling: consumption at the source, production at the
/// target, and the declared bound `ℓ` with `production ≤ ℓ·consumption`.
#[derive(Debug, Clone, Serialize)]
pub struct Transfer {
    pub consumption: RateFunction,
    pub production: RateFunction,
    pub gain: Option<f64>,
}

impl Transfer {
    pub fn new(consumption: RateFunction, production: RateFunction, gain: f64) -> Self {
        Transfer {
            consumption,
            production,
            gain: Some(gain),
        }
    }

    /// A conserving flow: the same rate leaves the source and enters the
    /// target, so `ℓ = 1`.
    pub fn conserving(rate: RateFunction) -> Self {
        Transfer::new(rate.clone(), rate, 1.0)
    }

    /// No flow, with a declared bound.
    pub fn none(gain: f64) -> Self {
        Transfer::new(RateFunction::Zero, RateFunction::Zero, gain)
    }

    pub fn undeclared() -> Self {
        Transfer {
            consumption: RateFunction::Zero,
            production: RateFunction::Zero,
            gain: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

/// Coupling between node `e` and node `e + 1`.
#[derive(Debug, Clone, Serialize)]
pub struct Coupling {
    pub forward: Transfer,
    pub backward: Transfer,
}

impl Coupling {
    pub fn transfer(&self, dir: Direction) -> &Transfer {
        match dir {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }

    /// Declared gains `(ℓ_forward, ℓ_backward)`.
    pub fn gains(&self, edge: usize) -> Result<(f64, f64)> {
        let fwd = self.forward.gain.ok_or(Error::UndeclaredGain {
            edge,
            direction: "forward",
        })?;
        let bwd = self.backward.gain.ok_or(Error::UndeclaredGain {
            edge,
            direction: "backward",
        })?;
        Ok((fwd, bwd))
    }
}

/// The ring network. Immutable after construction; share it freely across
/// threads.
#[derive(Debug, Clone, Serialize)]
pub struct BalancedNetwork {
    labels: Vec<String>,
    couplings: Vec<Coupling>,
    dissipation: Vec<ComparisonFn>,
    input_gains: Vec<ComparisonFn>,
}

impl BalancedNetwork {
    pub fn new(
        labels: Vec<String>,
        couplings: Vec<Coupling>,
        dissipation: Vec<ComparisonFn>,
        input_gains: Vec<ComparisonFn>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidNetwork("network needs at least one state".into()));
        }
        for (what, got) in [
            ("couplings", couplings.len()),
            ("dissipation", dissipation.len()),
            ("input gains", input_gains.len()),
        ] {
            if got != n {
                return Err(Error::Dimension { what, expected: n, got });
            }
        }
        for (e, c) in couplings.iter().enumerate() {
            for dir in [Direction::Forward, Direction::Backward] {
                let t = c.transfer(dir);
                for rate in [&t.consumption, &t.production] {
                    if let Some(v) = rate.max_var() {
                        if v >= n {
                            return Err(Error::InvalidNetwork(format!(
                                "edge {e} {} rate refers to state {v} but n = {n}",
                                dir.as_str()
                            )));
                        }
                    }
                    if let Some(c) = rate.coef() {
                        if !(c >= 0.0 && c.is_finite()) {
                            return Err(Error::InvalidNetwork(format!(
                                "edge {e} {} rate has coefficient {c}; rates must be nonnegative",
                                dir.as_str()
                            )));
                        }
                    }
                }
                if let Some(g) = t.gain {
                    if !(g >= 0.0 && g.is_finite()) {
                        return Err(Error::InvalidNetwork(format!(
                            "edge {e} {} gain bound {g} must be finite and nonnegative",
                            dir.as_str()
                        )));
                    }
                }
            }
        }
        for (i, k) in input_gains.iter().enumerate() {
            let class = k.class();
            if !(class == ComparisonClass::Zero || class.is_class_k() || matches!(k, ComparisonFn::Callback { .. })) {
                return Err(Error::InvalidNetwork(format!(
                    "input gain κ_{i} must be of class K or zero"
                )));
            }
        }
        Ok(BalancedNetwork {
            labels,
            couplings,
            dissipation,
            input_gains,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn dissipation(&self) -> &[ComparisonFn] {
        &self.dissipation
    }

    pub fn input_gains(&self) -> &[ComparisonFn] {
        &self.input_gains
    }

    /// Node indices `(source, target)` of a transfer.
    pub fn endpoints(&self, edge: usize, dir: Direction) -> (usize, usize) {
        let next = wrap(edge as isize + 1, self.n());
        match dir {
            Direction::Forward => (edge, next),
            Direction::Backward => (next, edge),
        }
    }

    /// Returns a copy with one declared gain replaced.
    pub fn with_gain(&self, edge: usize, dir: Direction, gain: f64) -> Result<Self> {
        let mut couplings = self.couplings.clone();
        let c = couplings
            .get_mut(edge)
            .ok_or_else(|| Error::InvalidNetwork(format!("edge {edge} out of range for n = {}", self.n())))?;
        match dir {
            Direction::Forward => c.forward.gain = Some(gain),
            Direction::Backward => c.backward.gain = Some(gain),
        }
        BalancedNetwork::new(
            self.labels.clone(),
            couplings,
            self.dissipation.clone(),
            self.input_gains.clone(),
        )
    }

    fn check_dims(&self, x: &[f64], w: &[f64]) -> Result<()> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::Dimension {
                what: "state",
                expected: n,
                got: x.len(),
            });
        }
        if w.len() != n {
            return Err(Error::Dimension {
                what: "input",
                expected: n,
                got: w.len(),
            });
        }
        Ok(())
    }

    pub fn vector_field(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x, w)?;
        let mut out = vec![0.0; self.n()];
        self.vector_field_into(x, w, &mut out);
        Ok(out)
    }

    /// Allocation-free field evaluation. Dimensions are the caller's
    /// responsibility (checked in debug builds).
    pub fn vector_field_into(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let n = self.n();
        debug_assert!(x.len() == n && w.len() == n && out.len() == n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.input_gains[i].eval(w[i]) - self.dissipation[i].eval(x[i]);
        }
        for (e, c) in self.couplings.iter().enumerate() {
            let next = if e + 1 == n { 0 } else { e + 1 };
            out[e] += c.backward.production.eval(x) - c.forward.consumption.eval(x);
            out[next] += c.forward.production.eval(x) - c.backward.consumption.eval(x);
        }
    }

    /// `Σ_i λ_i ẋ_i`.
    pub fn weighted_derivative(&self, weights: &[f64], x: &[f64], w: &[f64]) -> Result<f64> {
        if weights.len() != self.n() {
            return Err(Error::Dimension {
                what: "weights",
                expected: self.n(),
                got: weights.len(),
            });
        }
        let f = self.vector_field(x, w)?;
        Ok(weights.iter().zip(&f).map(|(l, v)| l * v).sum())
    }

    /// Rates consuming node `i`: forward consumption of coupling `i` and
    /// backward consumption of coupling `i − 1`.
    fn consumptions_of(&self, node: usize) -> [(usize, Direction, &RateFunction); 2] {
        let prev = wrap(node as isize - 1, self.n());
        [
            (node, Direction::Forward, &self.couplings[node].forward.consumption),
            (prev, Direction::Backward, &self.couplings[prev].backward.consumption),
        ]
    }
}

/// Axis-aligned sampling box `[0, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBox {
    pub upper: Vec<f64>,
}

impl SampleBox {
    /// `[0, 10·max(x0_i, 1)]` per coordinate.
    pub fn around(x0: &[f64]) -> Self {
        SampleBox {
            upper: x0.iter().map(|v| 10.0 * v.max(1.0)).collect(),
        }
    }

    pub fn uniform(n: usize, upper: f64) -> Self {
        SampleBox { upper: vec![upper; n] }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.upper.iter().map(|u| rng.random::<f64>() * u).collect()
    }
}

/// Sampling options shared by the falsification checks.
#[derive(Debug, Clone)]
pub struct SampleSpec {
    pub samples: usize,
    pub region: SampleBox,
    pub seed: u64,
}

impl SampleSpec {
    pub fn new(samples: usize, region: SampleBox) -> Self {
        SampleSpec {
            samples,
            region,
            seed: 0x5eed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    fn check(&self, net: &BalancedNetwork) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidParameter {
                field: "samples".into(),
                reason: "need at least one sample".into(),
            });
        }
        if self.region.upper.len() != net.n() {
            return Err(Error::Dimension {
                what: "sample box",
                expected: net.n(),
                got: self.region.upper.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FacetViolation {
    pub node: usize,
    pub edge: usize,
    pub direction: Direction,
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub passed: bool,
    pub samples: usize,
    /// Structural verdict when every consumption rate carries a tag.
    pub exact: Option<bool>,
    pub violation: Option<FacetViolation>,
}

/// Samples each facet `x_i = 0` and checks that both rates consuming `x_i`
/// vanish there.
pub fn validate_positivity(net: &BalancedNetwork, spec: &SampleSpec) -> Result<PositivityReport> {
    spec.check(net)?;
    let n = net.n();
    let mut exact = Some(true);
    for node in 0..n {
        for (_, _, rate) in net.consumptions_of(node) {
            match (exact, rate.vanishes_on_facet(node)) {
                (_, Some(false)) => exact = Some(false),
                (Some(true), None) => exact = None,
                _ => {}
            }
        }
    }
    let mut rng = spec.rng();
    for _ in 0..spec.samples {
        for node in 0..n {
            let mut x = spec.region.sample(&mut rng);
            x[node] = 0.0;
            for (edge, direction, rate) in net.consumptions_of(node) {
                let value = rate.eval(&x);
                if value.abs() > ZERO_TOL || !value.is_finite() {
                    return Ok(PositivityReport {
                        passed: false,
                        samples: spec.samples,
                        exact,
                        violation: Some(FacetViolation {
                            node,
                            edge,
                            direction,
                            x,
                            value,
                        }),
                    });
                }
            }
        }
    }
    Ok(PositivityReport {
        passed: exact != Some(false),
        samples: spec.samples,
        exact,
        violation: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainViolation {
    pub edge: usize,
    pub direction: Direction,
    pub x: Vec<f64>,
    pub production: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainBoundReport {
    pub passed: bool,
    pub samples: usize,
    pub exact: Option<bool>,
    pub violation: Option<GainViolation>,
    pub summary: String,
}

/// Random-samples the box and checks `σ ≤ ℓ·η + 1e−12` for every transfer.
///
/// A pass is a failure to falsify, not a proof, unless `exact` is `Some(true)`.
pub fn validate_gain_bounds(net: &BalancedNetwork, spec: &SampleSpec) -> Result<GainBoundReport> {
    spec.check(net)?;
    let mut transfers = Vec::with_capacity(2 * net.n());
    for (e, c) in net.couplings().iter().enumerate() {
        let (fwd, bwd) = c.gains(e)?;
        transfers.push((e, Direction::Forward, &c.forward, fwd));
        transfers.push((e, Direction::Backward, &c.backward, bwd));
    }
    let mut exact = Some(true);
    for (_, _, t, ell) in &transfers {
        match (exact, bound_holds_exactly(&t.production, &t.consumption, *ell)) {
            (_, Some(false)) => exact = Some(false),
            (Some(true), None) => exact = None,
            _ => {}
        }
    }
    let mut rng = spec.rng();
    for _ in 0..spec.samples {
        let x = spec.region.sample(&mut rng);
        for (edge, direction, t, ell) in &transfers {
            let production = t.production.eval(&x);
            let bound = ell * t.consumption.eval(&x);
            if production > bound + ZERO_TOL || !production.is_finite() {
                return Ok(GainBoundReport {
                    passed: false,
                    samples: spec.samples,
                    exact,
                    summary: format!(
                        "violation on edge {edge} ({}): σ = {production} > ℓ·η = {bound}",
                        direction.as_str()
                    ),
                    violation: Some(GainViolation {
                        edge: *edge,
                        direction: *direction,
                        x,
                        production,
                        bound,
                    }),
                });
            }
        }
    }
    let passed = exact != Some(false);
    let summary = match exact {
        Some(true) => format!("bounds hold exactly; no violation found in {} samples", spec.samples),
        Some(false) => "structural check failed although sampling found no violation".to_string(),
        None => format!("no violation found in {} samples", spec.samples),
    };
    Ok(GainBoundReport {
        passed,
        samples: spec.samples,
        exact,
        violation: None,
        summary,
    })
}

/// `(x, w, node, ẋ_node)` at a facet state where the field points outward.
pub type FacetWitness = (Vec<f64>, Vec<f64>, usize, f64);

/// Samples `(x, w)` with `x` on each facet `x_i = 0` and reports the first
/// state where `ẋ_i < 0`.
pub fn check_facet_field(
    net: &BalancedNetwork,
    spec: &SampleSpec,
    input_upper: &[f64],
) -> Result<Option<FacetWitness>> {
    spec.check(net)?;
    if input_upper.len() != net.n() {
        return Err(Error::Dimension {
            what: "input bound",
            expected: net.n(),
            got: input_upper.len(),
        });
    }
    let inputs = SampleBox {
        upper: input_upper.to_vec(),
    };
    let mut rng = spec.rng();
    let mut out = vec![0.0; net.n()];
    for _ in 0..spec.samples {
        for node in 0..net.n() {
            let mut x = spec.region.sample(&mut rng);
            x[node] = 0.0;
            let w = inputs.sample(&mut rng);
            net.vector_field_into(&x, &w, &mut out);
            if out[node] < -ZERO_TOL {
                return Ok(Some((x, w, node, out[node])));
            }
        }
    }
    Ok(None)
}

type InputCallback = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// Time-varying nonnegative input, one value per channel.
#[derive(Clone)]
pub enum InputSignal {
    Constant(Vec<f64>),
    /// `levels[k]` applies on `[breakpoints[k−1], breakpoints[k])`;
    /// right-continuous at each breakpoint.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        levels: Vec<Vec<f64>>,
    },
    Callback {
        channels: usize,
        label: String,
        f: InputCallback,
    },
}

impl InputSignal {
    pub fn constant(values: Vec<f64>) -> Result<Self> {
        check_levels(&values)?;
        Ok(InputSignal::Constant(values))
    }

    pub fn piecewise(breakpoints: Vec<f64>, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidParameter {
                field: "levels".into(),
                reason: format!(
                    "{} breakpoints need {} levels, got {}",
                    breakpoints.len(),
                    breakpoints.len() + 1,
                    levels.len()
                ),
            });
        }
        if breakpoints.iter().any(|b| !(b.is_finite() && *b > 0.0)) || breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter {
                field: "breakpoints".into(),
                reason: "breakpoints must be positive, finite and strictly increasing".into(),
            });
        }
        let channels = levels[0].len();
        for l in &levels {
            if l.len() != channels {
                return Err(Error::Dimension {
                    what: "input level",
                    expected: channels,
                    got: l.len(),
                });
            }
            check_levels(l)?;
        }
        Ok(InputSignal::PiecewiseConstant { breakpoints, levels })
    }

    pub fn callback(
        channels: usize,
        label: impl Into<String>,
        f: impl Fn(f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        InputSignal::Callback {
            channels,
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn zero(channels: usize) -> Self {
        InputSignal::Constant(vec![0.0; channels])
    }

    pub fn channels(&self) -> usize {
        match self {
            InputSignal::Constant(v) => v.len(),
            InputSignal::PiecewiseConstant { levels, .. } => levels[0].len(),
            InputSignal::Callback { channels, .. } => *channels,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        match self {
            InputSignal::PiecewiseConstant { breakpoints, .. } => breakpoints,
            _ => &[],
        }
    }

    /// Whether the value is constant between consecutive breakpoints.
    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(self, InputSignal::Callback { .. })
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        match self {
            InputSignal::Constant(v) => out.copy_from_slice(v),
            InputSignal::PiecewiseConstant { breakpoints, levels } => {
                let k = breakpoints.partition_point(|b| *b <= t);
                out.copy_from_slice(&levels[k]);
            }
            InputSignal::Callback { f, .. } => {
                f(t, out);
                if let Some((channel, value)) = out.iter().copied().enumerate().find(|(_, v)| !(*v >= 0.0)) {
                    return Err(Error::NegativeInput { channel, t, value });
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.channels()];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Per-channel supremum over `t ≥ 0`, when it is known.
    pub fn sup(&self) -> Option<Vec<f64>> {
        match self {
            InputSignal::Constant(v) => Some(v.clone()),
            InputSignal::PiecewiseConstant { levels, .. } => {
                let mut sup = vec![0.0f64; levels[0].len()];
                for l in levels {
                    for (s, v) in sup.iter_mut().zip(l) {
                        *s = s.max(*v);
                    }
                }
                Some(sup)
            }
            InputSignal::Callback { .. } => None,
        }
    }
}

fn check_levels(values: &[f64]) -> Result<()> {
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter {
            field: format!("input[{i}]"),
            reason: format!("input values must be finite and nonnegative, got {v}"),
        });
    }
    Ok(())
}

impl fmt::Debug for InputSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSignal::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            InputSignal::PiecewiseConstant { breakpoints, levels } => f
                .debug_struct("PiecewiseConstant")
                .field("breakpoints", breakpoints)
                .field("levels", levels)
                .finish(),
            InputSignal::Callback { channels, label, .. } => f
                .debug_struct("Callback")
                .field("channels", channels)
                .field("label", label)
                .finish(),
        }
    }
}

//! Scalar comparison functions `R₊ → R₊` and their classification.
//!
//! Dissipation terms θ, input gains κ and the supply rates built from them
//! are all scalar functions whose class (P, K, K∞) decides which stability
//! property a certificate can claim. Closed-form descriptors can be classified
//! exactly; callbacks are only spot-checked and never rise above class P.

use std::fmt;
use std::sync::Arc;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Comparison-function classes, ordered from weakest to strongest.
///
/// `Zero` is the identically-zero function (allowed for input gains but not
/// for dissipation). `Unclassified` marks a function that failed the class-P
/// spot check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ComparisonClass {
    Unclassified,
    Zero,
    P,
    K,
    KInf,
}

impl ComparisonClass {
    pub fn is_class_p(self) -> bool {
        self >= ComparisonClass::P
    }

    pub fn is_class_k(self) -> bool {
        self >= ComparisonClass::K
    }
}

type ScalarCallback = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function with a structural descriptor.
#[derive(Clone)]
pub enum ComparisonFn {
    Zero,
    /// `c·s`, class K∞ for `c > 0`.
    Linear(f64),
    /// `c·s^p`, class K∞ for `c, p > 0`.
    Power {
        coef: f64,
        exponent: f64,
    },
    /// `gain·s/(half + s)`, class K but bounded by `gain`.
    Saturating {
        gain: f64,
        half: f64,
    },
    /// Arbitrary callback; classified as P at best.
    Callback {
        label: String,
        f: ScalarCallback,
    },
}

impl ComparisonFn {
    pub fn callback(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ComparisonFn::Callback {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            ComparisonFn::Zero => 0.0,
            ComparisonFn::Linear(c) => c * s,
            ComparisonFn::Power { coef, exponent } => coef * s.powf(*exponent),
            ComparisonFn::Saturating { gain, half } => gain * s / (half + s),
            ComparisonFn::Callback { f, .. } => f(s),
        }
    }

    /// `lim_{s→∞} f(s)`, when it is known from the descriptor.
    pub fn supremum(&self) -> Option<f64> {
        match self {
            ComparisonFn::Zero => Some(0.0),
            ComparisonFn::Linear(c) if *c > 0.0 => Some(f64::INFINITY),
            ComparisonFn::Linear(_) => Some(0.0),
            ComparisonFn::Power { coef, exponent } if *coef > 0.0 && *exponent > 0.0 => Some(f64::INFINITY),
            ComparisonFn::Power { .. } => None,
            ComparisonFn::Saturating { gain, .. } => Some(*gain),
            ComparisonFn::Callback { .. } => None,
        }
    }

    /// The coefficient of a linear descriptor.
    pub fn linear_coef(&self) -> Option<f64> {
        match self {
            ComparisonFn::Zero => Some(0.0),
            ComparisonFn::Linear(c) => Some(*c),
            _ => None,
        }
    }

    pub fn class(&self) -> ComparisonClass {
        match self {
            ComparisonFn::Zero => ComparisonClass::Zero,
            ComparisonFn::Linear(c) => {
                if *c > 0.0 && c.is_finite() {
                    ComparisonClass::KInf
                } else if *c == 0.0 {
                    ComparisonClass::Zero
                } else {
                    ComparisonClass::Unclassified
                }
            }
            ComparisonFn::Power { coef, exponent } => {
                if *coef > 0.0 && *exponent > 0.0 && coef.is_finite() && exponent.is_finite() {
                    ComparisonClass::KInf
                } else {
                    ComparisonClass::Unclassified
                }
            }
            ComparisonFn::Saturating { gain, half } => {
                if *gain > 0.0 && *half > 0.0 && gain.is_finite() && half.is_finite() {
                    ComparisonClass::K
                } else {
                    ComparisonClass::Unclassified
                }
            }
            ComparisonFn::Callback { f, .. } => {
                // Spot check f(0) = 0 and positivity on a geometric grid.
                if f(0.0) != 0.0 {
                    return ComparisonClass::Unclassified;
                }
                let positive = (-6..=6).all(|k| {
                    let v = f(10f64.powi(k));
                    v.is_finite() && v > 0.0
                });
                if positive {
                    ComparisonClass::P
                } else {
                    ComparisonClass::Unclassified
                }
            }
        }
    }
}

impl fmt::Debug for ComparisonFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComparisonFn::Zero => write!(f, "Zero"),
            ComparisonFn::Linear(c) => write!(f, "Linear({c})"),
            ComparisonFn::Power { coef, exponent } => write!(f, "Power({coef}·s^{exponent})"),
            ComparisonFn::Saturating { gain, half } => write!(f, "Saturating({gain}·s/({half}+s))"),
            ComparisonFn::Callback { label, .. } => write!(f, "Callback({label})"),
        }
    }
}

impl Serialize for ComparisonFn {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        match self {
            ComparisonFn::Zero => map.serialize_entry("kind", "zero")?,
            ComparisonFn::Linear(c) => {
                map.serialize_entry("kind", "linear")?;
                map.serialize_entry("coef", c)?;
            }
            ComparisonFn::Power { coef, exponent } => {
                map.serialize_entry("kind", "power")?;
                map.serialize_entry("coef", coef)?;
                map.serialize_entry("exponent", exponent)?;
            }
            ComparisonFn::Saturating { gain, half } => {
                map.serialize_entry("kind", "saturating")?;
                map.serialize_entry("gain", gain)?;
                map.serialize_entry("half", half)?;
            }
            ComparisonFn::Callback { label, .. } => {
                map.serialize_entry("kind", "callback")?;
                map.serialize_entry("label", label)?;
            }
        }
        map.end()
    }
}

const OMINUS_TAU_CAP: f64 = 1e300;

/// The pseudo-inverse `η⊖(s) = sup{τ ≥ 0 : s ≥ η(τ)}`.
///
/// Returns `f64::INFINITY` when `s` reaches the supremum of `η`. Callbacks are
/// bracketed by doubling and then bisected; a decrease observed on the way is
/// reported as [`Error::NotMonotone`].
pub fn ominus(eta: &ComparisonFn, s: f64) -> Result<f64> {
    if s.is_nan() || s < 0.0 {
        return Err(Error::InvalidParameter {
            field: "s".into(),
            reason: format!("ominus argument must be nonnegative, got {s}"),
        });
    }
    match eta {
        ComparisonFn::Zero => Ok(f64::INFINITY),
        ComparisonFn::Linear(c) if *c > 0.0 => Ok(s / c),
        ComparisonFn::Linear(_) => Ok(f64::INFINITY),
        ComparisonFn::Power { coef, exponent } if *coef > 0.0 && *exponent > 0.0 => Ok((s / coef).powf(1.0 / exponent)),
        ComparisonFn::Saturating { gain, half } if *gain > 0.0 && *half > 0.0 => {
            if s >= *gain {
                Ok(f64::INFINITY)
            } else {
                Ok(half * s / (gain - s))
            }
        }
        other => ominus_numeric(|t| other.eval(t), s),
    }
}

/// Bracketing + bisection for `sup{τ : η(τ) ≤ s}` on a nondecreasing `η`.
pub fn ominus_numeric(eta: impl Fn(f64) -> f64, s: f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut f_lo = eta(lo);
    if f_lo > s {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    loop {
        let f_hi = eta(hi);
        if f_hi < f_lo {
            return Err(Error::NotMonotone {
                a: lo,
                fa: f_lo,
                b: hi,
                fb: f_hi,
            });
        }
        if f_hi > s {
            break;
        }
        if hi > OMINUS_TAU_CAP {
            return Ok(f64::INFINITY);
        }
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = eta(mid);
        if f_mid < f_lo {
            return Err(Error::NotMonotone {
                a: lo,
                fa: f_lo,
                b: mid,
                fb: f_mid,
            });
        }
        if f_mid <= s {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

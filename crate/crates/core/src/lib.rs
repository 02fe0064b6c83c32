//! # epinet
//!
//! Stability analysis for positive balancing-kinetics networks and the
//! compartmental epidemic models that fit that structure.
//!
//! The crate is organised bottom-up:
//!
//! - [`comparison`]: comparison functions (class P / K / K∞) and the
//!   `⊖` pseudo-inverse.
//! - [`network`]: the circular neighbour-coupled network, its vector field
//!   and sampled validation of the positivity and gain-bound hypotheses.
//! - [`certificate`]: the cyclic small-gain test, weight synthesis for the
//!   weighted-sum Lyapunov function and the supply rates α, σ.
//! - [`models`]: the epidemic catalog (SIR, SEIS, MSIR, SEIR and three
//!   vaccination variants) lowered onto [`network::BalancedNetwork`].
//! - [`threshold`]: bifurcation points, input thresholds, reproduction
//!   numbers and equilibria.
//! - [`simulate`]: fixed-step RK4 and adaptive Dormand–Prince integration on
//!   the nonnegative orthant, with peak and convergence detection.
//! - [`propcheck`]: trajectory-level checks of the eradication/endemic
//!   claims, returning three-valued verdicts.
//! - [`config`]: the TOML document format shared with the command line tool.

// `!(x >= 0.0)` style guards are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod comparison;
pub mod config;
pub mod error;
pub mod models;
pub mod network;
pub mod propcheck;
pub mod simulate;
pub mod threshold;

pub use certificate::{check_smallgain, StabilityCertificate, StabilityClass};
pub use comparison::{ComparisonClass, ComparisonFn};
pub use error::{Error, Result};
pub use models::{EpidemicModel, EpidemicParams, Family};
pub use network::{BalancedNetwork, InputSignal, RateFunction};
pub use simulate::{SimConfig, Trajectory};
pub use threshold::ThresholdReport;

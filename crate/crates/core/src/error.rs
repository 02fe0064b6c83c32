use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("gain bound on edge {edge} ({direction}) is not declared")]
    UndeclaredGain { edge: usize, direction: &'static str },

    #[error(
        "gain bound on edge {edge} ({direction}) is zero inside the weight product; \
         replace it by a small positive bound (zero-gain substitution) before synthesizing weights"
    )]
    ZeroGainInProduct { edge: usize, direction: &'static str },

    #[error("{count} gain bounds are zero; the cycle product is ambiguous with more than one zero")]
    MultipleZeroGains { count: usize },

    #[error("anchor index {anchor} is outside 1..={n}")]
    AnchorOutOfRange { anchor: usize, n: usize },

    #[error("dissipation θ_{index} is not of class P")]
    DissipationNotClassP { index: usize },

    #[error("level-set minimization supports at most {max} states, got {n}")]
    LevelSetDimension { n: usize, max: usize },

    #[error("function is not monotone: f({a}) = {fa} > f({b}) = {fb}")]
    NotMonotone { a: f64, fa: f64, b: f64, fb: f64 },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("parameter `{0}` is required for this model family")]
    MissingParameter(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("negative input on channel {channel} at t = {t}: {value}")]
    NegativeInput { channel: usize, t: f64, value: f64 },

    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("invalid simulation config: {0}")]
    SimConfig(String),
}

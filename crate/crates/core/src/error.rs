use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("grid size {0} is not a power of two >= 4")]
    InvalidGridSize(usize),
    #[error("grid length must be positive and finite, got {0}")]
    InvalidGridLength(f64),
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("parameter `{name}` out of range: {value}")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("non-resonance margin {margin:e} is not above tolerance {tolerance:e}")]
    Resonant { margin: f64, tolerance: f64 },
    #[error("symbol `{name}` is not finite at k = {k}")]
    NonFiniteSymbol { name: String, k: f64 },
    #[error("state became non-finite at t = {t} (step {step})")]
    NonFinite { t: f64, step: u64 },
    #[error("packet spectrum leaves its support: relative mass {mass:e} outside")]
    SupportViolation { mass: f64 },
    #[error("envelope time {envelope} does not match eps^2 t = {expected}")]
    EnvelopeTime { envelope: f64, expected: f64 },
    #[error("mode {mode} does not fit on a grid of {num_points} points")]
    ModeOutOfRange { mode: i64, num_points: usize },
    #[error("degenerate denominator")]
    Degenerate,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("log-log fit needs positive values, got {0}")]
    NonPositive(f64),
}

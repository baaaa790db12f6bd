use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("fixed-point solver did not converge at z = {re} + {im}i after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        re: f64,
        im: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("fixed-point solution left the upper half plane at z = {re} + {im}i (Im m = {im_m:e})")]
    BranchViolation { re: f64, im: f64, im_m: f64 },

    #[error("no sign change of H(zeta) - 1 on the {side} side; the support may split")]
    NoBracketing { side: &'static str },

    #[error("H(zeta) = 1 has additional real roots inside the support hull; the law has split support")]
    SplitSupport,

    #[error("coupling {theta} is outside [0, {max}]")]
    ThetaOutOfRange { theta: f64, max: f64 },

    #[error("density grid cannot resolve the edge-fit window: {0}")]
    InsufficientResolution(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("step size collapsed after {halvings} halvings at t = {t}")]
    StepCollapse { halvings: usize, t: f64 },

    #[error("classical-location trajectories crossed at t = {t}")]
    OrderViolation { t: f64 },

    #[error("non-finite log-density during sampling: {0}")]
    NonFiniteDensity(String),

    #[error("point {x} lies outside the configuration interval ({lo}, {hi})")]
    OutOfInterval { x: f64, lo: f64, hi: f64 },

    #[error("index window [{lo}, {hi}] leaves the bulk [{bulk_lo}, {bulk_hi}]")]
    IndexOutOfBulk {
        lo: usize,
        hi: usize,
        bulk_lo: usize,
        bulk_hi: usize,
    },

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("potential extension is invalid: {0}")]
    ExtensionInvalid(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

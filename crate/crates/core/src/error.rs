use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "control singular: |{denominator:e}| <= {threshold:e} in the b-rate equation (a = {a})"
    )]
    SingularControl {
        a: f64,
        denominator: f64,
        threshold: f64,
    },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("too many integration steps ({steps}) before reaching t = {t_end}")]
    TooManySteps { steps: usize, t_end: f64 },
    #[error("value {value} out of range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("degenerate arc: {0}")]
    DegenerateArc(String),
    #[error("arc did not come to rest within the horizon ({direction} half, |xi2| = {speed:e})")]
    NoTerminalRest { direction: &'static str, speed: f64 },
    #[error("optimization failed: cost {cost:e} exceeds threshold {threshold:e} after {iterations} iterations")]
    OptimizationFailed {
        cost: f64,
        threshold: f64,
        iterations: usize,
    },
    #[error("empty segment between cusps {0} and {1}")]
    EmptySegment(usize, usize),
    #[error("biarc fit failed to reach tolerance {tol:e} (error {error:e}) within depth {depth}")]
    FitFailed { tol: f64, error: f64, depth: usize },
    #[error("curve has no distinct points")]
    DuplicatePoints,
    #[error("join {index}: positional gap {gap:e} exceeds tolerance {tol:e}")]
    JoinGap { index: usize, gap: f64, tol: f64 },
    #[error("join {index}: end speed {speed:e} exceeds tolerance {tol:e}")]
    NonzeroJoinSpeed { index: usize, speed: f64, tol: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("degenerate input to {op}: {detail}")]
    Degenerate { op: &'static str, detail: String },

    #[error("matrix is not antisymmetric (|S + S^T| = {0:e})")]
    NotAntisymmetric(f64),

    #[error("jet order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("degenerate tension: norm {0:e} is below the flatness threshold")]
    DegenerateTension(f64),

    #[error("flatness singularity at t = {t}: {detail}")]
    FlatnessSingularity { t: f64, detail: String },

    #[error("attitude recovery singular: {0}")]
    AttitudeSingularity(String),

    #[error("singular mass matrix (condition estimate {condition:e})")]
    SingularMassMatrix { condition: f64 },

    #[error("inconsistent tension recursion: terminal residual {0:e} N")]
    InconsistentTensions(f64),

    #[error("unreachable target: {0}")]
    Unreachable(String),

    #[error("shooting solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("outside injectivity radius: {0}")]
    OutOfRadius(String),

    #[error("Riccati integration blew up at t = {t}")]
    RiccatiBlowUp { t: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("gain schedule file: {0}")]
    GainFile(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

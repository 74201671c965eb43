use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system spec: {}", .0.join("; "))]
    Spec(Vec<String>),
    #[error("invalid parameter path: {0}")]
    Path(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("numerical failure in {what} (worst residual {worst_residual:.3e})")]
    Numerical { what: String, worst_residual: f64 },
    #[error("tracking ambiguity at step {step} not resolved: {detail}")]
    Tracking { step: usize, detail: String },
    #[error("search did not converge after {iterations} iterations (last iterate {last})")]
    NoConvergence { iterations: usize, last: String },
    #[error("no exceptional point found: best gap {best_gap:.3e} at {detail}")]
    EpNotFound { best_gap: f64, detail: String },
    #[error("encircling failed: {0}")]
    Encircle(String),
    #[error("external mixing diverges: |phi^T phi| = {self_overlap:.3e} flags EP proximity")]
    DivergingEm { self_overlap: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code contract: 1 usage/config, 2 numerical, 3 search not converged.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Spec(_)
            | Error::Path(_)
            | Error::Dimension(_)
            | Error::Domain(_)
            | Error::Precondition(_)
            | Error::Config(_)
            | Error::Io(_) => 1,
            Error::Numerical { .. } | Error::Tracking { .. } => 2,
            Error::NoConvergence { .. }
            | Error::EpNotFound { .. }
            | Error::Encircle(_)
            | Error::DivergingEm { .. } => 3,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative solver hit its cap. `best` is the last iterate.
    #[error("no convergence after {iterations} iterations (best {best}, residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        best: f64,
        residual: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular matrix: eigenvalue {eigenvalue:e} at or below threshold {threshold:e}")]
    Singular { eigenvalue: f64, threshold: f64 },

    #[error("ill-conditioned system: condition number {0:e}")]
    IllConditioned(f64),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("rank-deficient iterate in Tyler's fixed point at iteration {iteration}")]
    RankDeficient { iteration: usize },

    #[error("Tyler's fixed point did not converge in {iterations} iterations (residual {residual:e})")]
    TylerNoConvergence { iterations: usize, residual: f64 },

    #[error("degenerate perturbation: denominator {0:e}")]
    DegeneratePerturbation(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("experiment failed: {failed} of {attempted} trials failed for {label} at sweep value {sweep}")]
    ExperimentFailed {
        label: String,
        sweep: f64,
        failed: usize,
        attempted: usize,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

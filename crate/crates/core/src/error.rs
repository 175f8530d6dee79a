use thiserror::Error;

/// Errors raised across the certification engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} is {left_shape:?} but {right} is {right_shape:?}")]
    Dimension {
        left: &'static str,
        left_shape: (usize, usize),
        right: &'static str,
        right_shape: (usize, usize),
    },

    #[error("channel index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigensolver failed to converge on a {0}x{0} matrix")]
    Eigen(usize),

    #[error("Lyapunov equation is singular (eigenvalue pair sum {0:.3e})")]
    SingularLyapunov(f64),

    #[error("norm undefined: F is not Hurwitz (spectral abscissa {abscissa:.6e})")]
    NotHurwitz { abscissa: f64 },

    #[error("H-infinity bisection did not converge after {iterations} iterations (bracket [{lo:.6e}, {hi:.6e}])")]
    HinfNoConvergence { iterations: usize, lo: f64, hi: f64 },

    #[error("internal consistency: primary norm {primary:.12e} and reduced norm {reduced:.12e} disagree")]
    NormMismatch { primary: f64, reduced: f64 },

    #[error("matrix inequality infeasible: {0}")]
    QmiInfeasible(String),

    #[error("matrix is not positive definite (min eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),

    #[error("truncation too small: {0}")]
    Truncation(String),

    #[error("integration aborted at t = {t:.4}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operation requires a {expected}-mode object, got {got} mode(s)")]
    ModeCount { expected: usize, got: usize },

    #[error("cutoff {cutoff} too small: {weight:.3e} of the norm sits in the top two Fock levels")]
    Truncation { cutoff: usize, weight: f64 },

    #[error("state has zero norm: {0}")]
    ZeroNorm(String),

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("channel annihilated the input (branch weight {0:.3e})")]
    Annihilated(f64),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("degenerate phase coverage: {0}")]
    DegeneratePhases(String),

    #[error("objective is flat: {0}")]
    FlatObjective(String),

    #[error("optimizer did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("binning mismatch: {0}")]
    Binning(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

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

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Whether the error comes from user input (parameters, config, file
    /// contents) rather than from a numerical failure.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidParameter { .. }
            | Error::Unknown { .. }
            | Error::Config(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::EmptyData(_)
            | Error::Binning(_)
            | Error::CutoffMismatch { .. }
            | Error::DimensionMismatch { .. }
            | Error::ModeCount { .. } => true,
            Error::Stage { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("construction failed: {reason}")]
    Construction {
        reason: String,
        diagnostics: Box<ConstructionDiagnostics>,
    },

    #[error("degenerate overlap: mass of the product density is {mass:e}")]
    DegenerateOverlap { mass: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{failed} of {total} trials failed; first: {first}")]
    Battery {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Numbers attached to a failed construction so callers can map where it broke.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct ConstructionDiagnostics {
    pub candidates: usize,
    pub removed: usize,
    pub retained: usize,
    pub removal_fraction: f64,
    pub radius: f64,
    pub threshold: f64,
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Process exit code for the CLI: 2 for bad input, 3 for resource
    /// exhaustion, 1 for everything that is a verdict about the math.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_)
            | Error::DimensionMismatch { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Io(_) => 2,
            Error::Resource(_) => 3,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Construction { .. } | Error::DegenerateOverlap { .. } | Error::Battery { .. } => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

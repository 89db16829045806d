use inscat_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    /// A pipeline stage failed; the stage name tags the message.
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: CoreError,
    },

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// 0 success, 2 configuration problems, 3 numerical failures, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { source, .. } => match source {
                CoreError::InvalidArgument(_) | CoreError::GeometryInfeasible(_) | CoreError::Accuracy { .. } => 2,
                CoreError::Domain(_)
                | CoreError::Singularity
                | CoreError::SolverFailure(_)
                | CoreError::UndefinedMetric(_) => 3,
                CoreError::Format(_) | CoreError::Io(_) => 1,
            },
            CliError::Io(_) => 1,
        }
    }
}

/// Attach a stage name to core results.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> StageExt<T> for inscat_core::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}

use thiserror::Error;

/// Harness failures, grouped by the process exit code they map to.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    /// A modelling assumption does not hold for the configured problem.
    #[error("assumption violated ({assumption}): {source}")]
    Assumption {
        assumption: &'static str,
        #[source]
        source: lsa_core::Error,
    },

    #[error(transparent)]
    Core(#[from] lsa_core::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// 2 for configuration, 3 for assumption, 4 for divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Assumption { .. } => 3,
            Self::Core(lsa_core::Error::Diverged { .. }) => 4,
            Self::Core(_) | Self::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

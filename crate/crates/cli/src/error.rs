use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Config { path: PathBuf, line: Option<usize>, message: String },

    #[error("{module}: {source}")]
    Numerical {
        module: &'static str,
        #[source]
        source: weakhom_core::Error,
    },

    #[error("{module}: budget exceeded: {message}")]
    Budget { module: &'static str, message: String },

    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 1 for configuration and file problems, 2 for numerical failures, 3
    /// when a budget or scale cap stops the run.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Io(_) => 1,
            CliError::Numerical { .. } => 2,
            CliError::Budget { .. } => 3,
        }
    }
}

/// Tags a core error with the module it came from; budget-type failures map
/// to [`CliError::Budget`].
pub fn numerical(module: &'static str) -> impl Fn(weakhom_core::Error) -> CliError {
    move |source| match source {
        weakhom_core::Error::IntegratorBudget(_) | weakhom_core::Error::TruncationTooSmall { .. } => {
            CliError::Budget { module, message: source.to_string() }
        }
        source => CliError::Numerical { module, source },
    }
}

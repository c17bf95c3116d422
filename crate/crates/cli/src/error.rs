use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: rabisense::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    #[error("plot failed: {0}")]
    Plot(String),

    #[error("{failed} of {total} trajectories failed, above the {threshold} threshold")]
    Partial { failed: usize, total: usize, threshold: f64 },
}

impl From<rabisense::Error> for CliError {
    fn from(source: rabisense::Error) -> Self {
        CliError::Core { context: "error".into(), source }
    }
}

impl CliError {
    /// Process exit code: 2 for configuration and input problems, 3 for
    /// numerical failures, 4 for runs with too many failed trajectories.
    pub fn exit_code(&self) -> i32 {
        use rabisense::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => 2,
            CliError::Core { source, .. } => match source {
                E::Config(_) | E::Dataset(_) | E::NoOverlap | E::Format(_) | E::RecordMismatch(_) | E::Io(_) | E::Csv(_) => 2,
                _ => 3,
            },
            CliError::Plot(_) => 3,
            CliError::Partial { .. } => 4,
        }
    }
}

/// Attaches a context label to core errors.
pub trait Context<T> {
    fn context(self, label: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T> Context<T> for rabisense::Result<T> {
    fn context(self, label: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|source| CliError::Core { context: label(), source })
    }
}

pub fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

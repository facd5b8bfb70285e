use aqa_autodiff::AutodiffError;
use aqa_model::ModelError;
use thiserror::Error;

/// Every failure maps to one stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Numeric(String),

    #[error("{0}")]
    Incompatible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Incompatible(_) => 5,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
            CliError::Incompatible(_) => "incompatible",
        }
    }

    /// One line: `error code=<name> exit=<n> message=<json string>`.
    pub fn line(&self) -> String {
        format!(
            "error code={} exit={} message={}",
            self.code(),
            self.exit_code(),
            serde_json::Value::String(self.to_string())
        )
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn data(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            ModelError::Incompatible(_) => CliError::Incompatible(e.to_string()),
            ModelError::Autodiff(AutodiffError::Incompatible(_)) => CliError::Incompatible(e.to_string()),
            ModelError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<AutodiffError> for CliError {
    fn from(e: AutodiffError) -> Self {
        ModelError::from(e).into()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        data(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        data(e)
    }
}

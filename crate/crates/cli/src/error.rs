use idgp_core::generation::GenError;
use idgp_core::{DataError, NetError, TrainError};
use thiserror::Error;

/// Failure of a subcommand, carrying the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Gradcheck(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Gradcheck(_) => 5,
        }
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io(_) | DataError::Parse { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::InputDim { .. } | NetError::GradDim { .. } | NetError::NonFiniteInput(_) => CliError::Data(e.to_string()),
            NetError::NonFiniteGradient(_) | NetError::StaleCache => CliError::Numeric(e.to_string()),
            NetError::Config(_) => CliError::Usage(e.to_string()),
            NetError::Format(_) => CliError::Io(e.to_string()),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Data(d) => d.into(),
            GenError::Net(n) => n.into(),
            GenError::NonFiniteScore { .. } => CliError::Numeric(e.to_string()),
            GenError::InvalidProbability(_) => CliError::Usage(e.to_string()),
            GenError::MissingTrueLabels | GenError::Dimension(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            TrainError::NonFiniteLoss { .. } | TrainError::Objective(_) => CliError::Numeric(e.to_string()),
            TrainError::Dimension { .. } => CliError::Data(e.to_string()),
            TrainError::Net(n) => n.into(),
            TrainError::Data(d) => d.into(),
        }
    }
}

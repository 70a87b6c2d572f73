//! Error classes mapped to exit codes.
//!
//! Commands bubble everything up as one of four classes so scripts can
//! branch on the exit status: usage (64), bad data (65), transport (69),
//! and configuration (78).

use retain_core::courselog::LogError;
use retain_core::dataset::DatasetError;
use retain_core::eval::EvalError;
use retain_core::intervene::{InterveneError, MailError, MeasureError};
use retain_core::predict::PredictError;
use retain_core::simkit::SimError;
use retain_core::stats::StatsError;

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_TRANSPORT: i32 = 69;
pub const EXIT_CONFIG: i32 = 78;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Transport(String),
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Transport(_) => EXIT_TRANSPORT,
            CliError::Config(_) => EXIT_CONFIG,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Data(m)
            | CliError::Transport(m)
            | CliError::Config(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let class = match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Transport(_) => "transport",
            CliError::Config(_) => "config",
        };
        write!(f, "{class} error: {}", self.message())
    }
}

impl std::error::Error for CliError {}

impl From<LogError> for CliError {
    fn from(e: LogError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<MailError> for CliError {
    fn from(e: MailError) -> CliError {
        CliError::Transport(e.to_string())
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> CliError {
        match e {
            PredictError::Transport(_)
            | PredictError::MalformedResponse { .. }
            | PredictError::AllStagesFailed { .. } => CliError::Transport(e.to_string()),
            PredictError::MissingModel
            | PredictError::MissingEmbedClient
            | PredictError::BadPolicy(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<InterveneError> for CliError {
    fn from(e: InterveneError) -> CliError {
        match e {
            InterveneError::Log(inner) => inner.into(),
            InterveneError::Predict(inner) => inner.into(),
            InterveneError::Mail(inner) => inner.into(),
        }
    }
}

/// IO failures on data files; config-file IO is classed separately.
pub fn io_data(context: &str, e: std::io::Error) -> CliError {
    CliError::Data(format!("{context}: {e}"))
}

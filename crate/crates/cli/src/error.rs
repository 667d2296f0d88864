use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error(transparent)]
    Core(holderflow::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Core(_) | CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }

    pub fn config(field: &str, msg: impl std::fmt::Display) -> Self {
        CliError::Config(format!("{field}: {msg}"))
    }
}

impl From<holderflow::Error> for CliError {
    fn from(e: holderflow::Error) -> Self {
        use holderflow::Error as E;
        match e {
            E::OrbitBudget { .. } | E::BudgetExceeded(_) | E::PrecisionExhausted(_) => CliError::Budget(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

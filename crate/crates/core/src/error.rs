use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-range input; the message names the offending field.
    #[error("input error: {0}")]
    Input(String),
    /// Flattening a construction would exceed the requested piece budget.
    #[error("budget error: materialization needs {required} pieces, budget is {budget}")]
    Budget { required: u128, budget: usize },
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) => 2,
            Error::Budget { .. } => 3,
            Error::Internal(_) => 4,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

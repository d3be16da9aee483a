use thiserror::Error;

/// Errors surfaced by the exploration engine.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated a documented precondition (shape, range, phase).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training diverged: {0}")]
    Training(String),

    #[error("model decode error: {0}")]
    Decode(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Env(#[from] EnvError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Failures raised by an environment backend.
#[derive(Debug, Error)]
pub enum EnvError {
    /// The action's locator does not resolve on the current page. Recoverable:
    /// the explorer records a zero-effect step.
    #[error("stale locator {0}")]
    StaleLocator(String),

    #[error("navigation failed: {0}")]
    Navigation(String),

    #[error("driver disconnected: {0}")]
    Disconnected(String),

    #[error("webdriver protocol error: {0}")]
    Protocol(String),
}

impl EnvError {
    pub fn is_recoverable(&self) -> bool {
        matches!(self, EnvError::StaleLocator(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

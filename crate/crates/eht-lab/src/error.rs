//! Failure classification for the CLI.
//!
//! Every command maps its errors onto four exit codes: 2 for anything the
//! user can fix in the config file, 3 for a state space that exceeds the
//! cap, 4 for a broken internal invariant (row sums, route disagreement,
//! stationary residuals), and 1 for everything else (I/O, mostly).

use std::fmt;

use eht_core::belief::BeliefError;
use eht_core::chain::ChainError;
use eht_core::dynamics::DynamicsError;
use eht_core::game::GameError;
use eht_core::testing::TestError;
use eht_core::verify::VerifyError;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration; `pointer` locates the offending field when known.
    Config {
        pointer: Option<String>,
        message: String,
    },
    /// State space above the cap.
    Capacity(String),
    /// A cross-check the implementation guarantees has failed.
    Invariant(String),
    /// I/O and other environment failures.
    Other(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config {
            pointer: None,
            message: message.into(),
        }
    }

    pub fn config_at(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            pointer: Some(pointer.into()),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Capacity(_) => 3,
            CliError::Invariant(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config {
                pointer: Some(p),
                message,
            } => write!(f, "config error at {p}: {message}"),
            CliError::Config {
                pointer: None,
                message,
            } => write!(f, "config error: {message}"),
            CliError::Capacity(m) => write!(f, "capacity exceeded: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violated: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(format!("i/o error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<GameError> for CliError {
    fn from(e: GameError) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<BeliefError> for CliError {
    fn from(e: BeliefError) -> Self {
        match e {
            BeliefError::CapacityExceeded { .. } => CliError::Capacity(e.to_string()),
            other => CliError::config(other.to_string()),
        }
    }
}

impl From<TestError> for CliError {
    fn from(e: TestError) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::config(e.to_string())
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        match e {
            // Everything the user controls through the config file.
            ChainError::BadPerturbation { .. }
            | ChainError::BadSlopeGrid
            | ChainError::SlopePairAboveCeiling { .. }
            | ChainError::NoConsistentStates
            | ChainError::NonpositiveValue { .. } => CliError::config(e.to_string()),
            ChainError::Game(inner) => inner.into(),
            ChainError::Belief(inner) => inner.into(),
            ChainError::Dynamics(inner) => inner.into(),
            // The rest are promises the implementation makes about itself.
            other => CliError::Invariant(other.to_string()),
        }
    }
}

impl From<VerifyError> for CliError {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Game(inner) => inner.into(),
            VerifyError::Belief(inner) => inner.into(),
            VerifyError::NoConvergence { .. } => CliError::Other(e.to_string()),
            other => CliError::config(other.to_string()),
        }
    }
}

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One violated configuration invariant, naming the offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub field: String,
    pub reason: String,
}

impl ConfigIssue {
    pub fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("infeasible design{}: {reason} (residual {residual:.3e})", symbol_label(*.symbol))]
    Infeasible {
        /// 1-based symbol index, when the failure is tied to one weight vector.
        symbol: Option<usize>,
        reason: String,
        residual: f64,
    },

    #[error("solver hit the iteration limit ({iterations}) with gap {gap:.3e}")]
    IterationLimit { iterations: usize, gap: f64 },

    #[error(
        "power iteration for eigenpair {index} did not converge in {iterations} iterations \
         (last estimate {last_estimate:.6e}, xi {last_change:.3e})"
    )]
    Convergence {
        /// 1-based eigenpair index.
        index: usize,
        iterations: usize,
        last_estimate: f64,
        last_change: f64,
    },

    #[error("ill-conditioned {what} (condition estimate {condition:.3e})")]
    Conditioning { what: String, condition: f64 },

    #[error("invalid configuration:\n{}", join_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("scenario `{scenario}` failed")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn symbol_label(symbol: Option<usize>) -> String {
    match symbol {
        Some(k) => format!(" for symbol k={k}"),
        None => String::new(),
    }
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

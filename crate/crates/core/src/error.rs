use std::path::PathBuf;

use thiserror::Error;

use crate::graph::{Action, NodeId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One schema or consistency problem found while validating a game spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// JSON-path-like location, e.g. `$.costs.g.S[3]`.
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("edge ({from}, {to}) has an endpoint outside 0..{node_count}")]
    EdgeOutOfRange {
        from: NodeId,
        to: NodeId,
        node_count: usize,
    },

    #[error("node {node} is outside 0..{node_count}")]
    NodeOutOfRange { node: NodeId, node_count: usize },

    #[error("action {action} is not available at node {node}")]
    InvalidAction { node: NodeId, action: Action },

    #[error("time step {k} is outside {lo}..={hi}")]
    TimeOutOfRange { k: usize, lo: usize, hi: usize },

    #[error("grid index {index} is outside 0..{len}")]
    GridIndexOutOfRange { index: usize, len: usize },

    #[error("invalid game spec: {0}")]
    Spec(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix game solver failed ({context}): {message}; matrix = {matrix:?}")]
    MatrixGame {
        context: String,
        message: String,
        matrix: Vec<Vec<f64>>,
    },

    #[error("invalid policy at k={k}, node {node}: {message}")]
    Policy {
        k: usize,
        node: NodeId,
        message: String,
    },

    #[error("spec validation failed with {} violation(s): {}", .0.len(), join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Prefixes solver errors with the recursion cell they came from.
    pub(crate) fn in_context(self, context: impl FnOnce() -> String) -> Self {
        match self {
            Error::MatrixGame {
                context: inner,
                message,
                matrix,
            } => Error::MatrixGame {
                context: format!("{}: {inner}", context()),
                message,
                matrix,
            },
            other => other,
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

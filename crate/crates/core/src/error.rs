use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate discretization: {0}")]
    DegenerateMesh(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("point ({x}, {y}) lies outside the computational domain")]
    PointOutsideDomain { x: f64, y: f64 },

    #[error("node {0} is a boundary node")]
    BoundaryNode(usize),

    #[error("linear solver failure: {0}")]
    LinearSolver(String),

    #[error("policy iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    NotConverged { iterations: usize, last_step: f64 },

    #[error("exact gradient required for the H1 error but not provided by problem `{0}`")]
    MissingGradient(String),

    #[error("failed to parse {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

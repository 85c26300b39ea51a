use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("field is indexed against mesh {found}, expected mesh {expected}")]
    MeshMismatch { expected: u64, found: u64 },

    #[error("meshes do not share connectivity")]
    ConnectivityMismatch,

    #[error("boundary tag `{0}` not found")]
    MissingTag(String),

    #[error("coercivity violated: {0}")]
    NotCoercive(String),

    #[error("linear system is singular: {0}")]
    Singular(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("perturbed mesh is inadmissible at t = {t:e}")]
    Inadmissible { t: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

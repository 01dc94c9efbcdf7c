use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("OBJ parse error at line {line}: {message}")]
    ObjParse { line: usize, message: String },

    #[error("face index {index} out of range (vertex count {vertex_count}) at line {line}")]
    FaceIndexOutOfRange {
        line: usize,
        index: i64,
        vertex_count: usize,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("numerical rank {rank} is insufficient: {message}")]
    RankDeficient { rank: usize, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },

    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    #[error("training diverged at step {step}: {message}")]
    Diverged { step: u64, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

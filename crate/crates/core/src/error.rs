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

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}:{line}: vertex index {index} out of range (have {count} vertices)")]
    IndexOutOfRange {
        path: PathBuf,
        line: usize,
        index: i64,
        count: usize,
    },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("anchor mismatch: {0}")]
    AnchorMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("singular normal system at stiffness {stiffness}")]
    SingularSystem { stiffness: f64 },

    #[error("rank-deficient anchor configuration: {0}")]
    RankDeficient(String),

    #[error("solver diverged after {iterations} iterations (residual {residual:e})")]
    Divergence { iterations: usize, residual: f64 },

    #[error("empty union in IoU")]
    EmptyUnion,

    #[error("voxel frames differ")]
    FrameMismatch,

    #[error("silhouette is empty")]
    EmptySilhouette,

    #[error("no visible anchors")]
    NoVisibleAnchors,

    #[error("graph has no edge {source_id} -> {target_id}")]
    MissingEdge {
        source_id: String,
        target_id: String,
    },

    #[error("unknown node {0}")]
    UnknownNode(String),

    #[error("graph manifest: {0}")]
    Manifest(String),

    #[error("all {} nodes failed", .0.len())]
    AllNodesFailed(Vec<(String, String)>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

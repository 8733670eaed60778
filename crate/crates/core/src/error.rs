use thiserror::Error;

/// Errors produced by the partition library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("domain does not intersect grid")]
    EmptyDomain,

    #[error("index {index} out of range for operator of order {order}")]
    IndexOutOfRange { index: usize, order: usize },

    #[error("cell vanished: no node has density above {threshold}")]
    CellVanished { threshold: f64 },

    #[error("cell {cell} vanished: no node has density above {threshold}")]
    EmptyCell { cell: usize, threshold: f64 },

    #[error("empty computational neighborhood")]
    EmptyNeighborhood,

    #[error("eigensolver did not converge after {iterations} iterations (best relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("isosurface extraction failed: {0}")]
    Isosurface(String),

    #[error("expression parse error at byte {position}: {message}")]
    Expression { position: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

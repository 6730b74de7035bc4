use thiserror::Error;

/// Errors produced by volume processing, geometry and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("threshold must be finite, got {0}")]
    InvalidThreshold(f64),
    #[error("histogram is degenerate: volume has fewer than two distinct values")]
    DegenerateHistogram,
    #[error("volume must be cubic, got {0:?}")]
    NonCubicVolume([usize; 3]),
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimMismatch([usize; 3], [usize; 3]),
    #[error("malformed volume file at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },
    #[error("volume contains non-finite values")]
    NonFiniteData,
    #[error("voxel index {index:?} out of range for side {side}")]
    IndexOutOfRange { index: [usize; 3], side: usize },
    #[error("surface representation is empty; no points to sample")]
    EmptySurface,
    #[error("convex hull needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("points are coplanar or collinear")]
    DegenerateInput,
    #[error("invalid count: {0}")]
    InvalidCount(String),
    #[error("privacy transform failed after {attempts} attempts: {last}")]
    TransformFailed { attempts: usize, last: Box<Error> },
    #[error("brain mask has {0} voxels outside the head hull")]
    BrainOutsideHull(usize),
    #[error("scale must be a power of two with min side <= side, got side {side}, min side {min_side}")]
    InvalidScale { side: usize, min_side: usize },
    #[error("mask is empty")]
    EmptyMask,
    #[error("invalid phantom parameters: {0}")]
    InvalidPhantomParams(String),
    #[error("invalid gallery: {0}")]
    InvalidGallery(String),
    #[error("input is empty")]
    EmptyInput,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

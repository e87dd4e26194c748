use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("no voxel is visible from pose {0}")]
    EmptyView(String),
    #[error("invalid navigation domain: {0}")]
    InvalidDomain(String),
    #[error("view index {index} out of range (domain has {len} views)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("reference {0} is not a member of its segment")]
    ReferenceNotMember(usize),
    #[error("duplicate reference index {0}")]
    DuplicateReference(usize),
    #[error("segment is empty")]
    EmptySegment,
    #[error("requested {requested} segments but at most {max} fit the domain")]
    TooManySegments { requested: usize, max: usize },
    #[error("view {0} is outside the segment")]
    OutsideSegment(usize),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("malformed bitstream: {0}")]
    Bitstream(String),
    #[error("unknown segment id {0}")]
    UnknownSegment(usize),
    #[error("no partition loaded")]
    NoPartition,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

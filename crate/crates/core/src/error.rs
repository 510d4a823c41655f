use thiserror::Error;

/// Errors raised by geometry construction, exact engines and chains.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("configuration has {got} sites but the torus has {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("site ({t1}, {t2}) lies outside the {width}x{height} torus")]
    SiteOutOfRange {
        t1: usize,
        t2: usize,
        width: usize,
        height: usize,
    },

    #[error("site index {index} out of range for {len} sites")]
    SiteIndexOutOfRange { index: usize, len: usize },

    #[error("reflection line at offset {offset} is not aligned to the lattice")]
    MisalignedPlane { offset: f64 },

    #[error("reflection line {0} is not one of the model's reflection lines")]
    PlaneNotInFamily(String),

    #[error("double block {kind} needs an even cell length along its axis")]
    DoubleBlockUnavailable { kind: String },

    #[error("double block {kind}: {reason}")]
    DoubleBlockAnchor { kind: String, reason: String },

    #[error("{what}: {got} exceeds the guard of {limit}")]
    GuardExceeded {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("propagated block configurations disagree at site {site}")]
    TilingInconsistent { site: usize },

    #[error("duplicate block coordinate ({n}, {m}) in chessboard assignment")]
    DuplicateBlock { n: usize, m: usize },

    #[error("invalid event: {0}")]
    InvalidEvent(String),

    #[error("invalid chain specification: {0}")]
    InvalidChain(String),

    #[error("pinned configuration has zero weight")]
    EmptyEvent,
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid weight: value {value} at cell {cell} is not strictly positive")]
    InvalidWeight { cell: usize, value: f64 },

    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("cover gap: cell {cell} lies in no subdomain")]
    CoverGap { cell: usize },

    #[error("degenerate connector at node {node}: |B_t| counts zero cells on this grid (refine the grid)")]
    DegenerateConnector { node: usize },

    #[error("grid too coarse: {0} (refine the grid)")]
    RefineGrid(String),

    #[error("empty domain: no cell center lies inside the region")]
    EmptyDomain,

    #[error("face graph is disconnected into {} components (sizes {sizes:?})", sizes.len())]
    Disconnected { sizes: Vec<usize> },

    #[error("profile violation: {0}")]
    ProfileViolation(String),

    #[error("malformed profile: {0}")]
    MalformedProfile(String),

    #[error("containment failure: {0}")]
    Containment(String),

    #[error("mean violation: |integral f| = {mean:e} exceeds tolerance {tol:e}")]
    MeanViolation { mean: f64, tol: f64 },

    #[error("invalid affine map: matrix is singular")]
    InvalidMap,

    #[error("local solve failed at node {node}: {source}")]
    LocalSolve {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("domain file: {0}")]
    DomainFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The input description is invalid or inconsistent.
    Spec,
    /// The grid cannot resolve the requested geometry.
    Degenerate,
    /// The data violates a precondition (e.g. nonzero mean).
    Data,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidWeight { .. }
            | Error::MalformedTree(_)
            | Error::ProfileViolation(_)
            | Error::MalformedProfile(_)
            | Error::Containment(_)
            | Error::InvalidMap
            | Error::DomainFile(_) => ErrorClass::Spec,
            Error::CoverGap { .. }
            | Error::DegenerateConnector { .. }
            | Error::RefineGrid(_)
            | Error::EmptyDomain
            | Error::Disconnected { .. } => ErrorClass::Degenerate,
            Error::MeanViolation { .. } => ErrorClass::Data,
            Error::LocalSolve { source, .. } => source.class(),
            Error::Io(_) => ErrorClass::Io,
        }
    }
}

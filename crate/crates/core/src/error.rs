use thiserror::Error;

/// Every failure the library reports. The variant name doubles as the
/// machine-readable error kind printed by the command line tool.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge vectors do not close: |sum| = {0:e}")]
    ClosureViolation(f64),
    #[error("edge {0} has zero length")]
    DegenerateEdge(usize),
    #[error("polygon needs at least 3 edges, got {0}")]
    TooFewEdges(usize),
    #[error("invalid star spec (r={r}, q={q}): need gcd(q,r)=1 and 2q<r")]
    InvalidStar { r: usize, q: usize },
    #[error("polygon is not convex at vertex {0}")]
    NotConvex(usize),

    #[error("puncture at distance {dist:e} from the boundary, need at least {min:e}")]
    PunctureTooClose { dist: f64, min: f64 },
    #[error("cut from the puncture to P_1 leaves the disk")]
    CutCrossesBoundary,
    #[error("mesh generation failed: {0}")]
    MeshFailure(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("Newton did not converge after {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("jump constant degenerate: |c| = {0:e}")]
    JumpDegenerate(f64),
    #[error("continuation differences do not decrease: {0}")]
    NonCauchy(String),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("unknown conjugate form index {0}")]
    UnknownForm(usize),
    #[error("path leaves the mesh: {0}")]
    PathNotInMesh(String),
    #[error("no closed loop around the puncture: {0}")]
    NoLoop(String),
    #[error("period not closed: gap {0:e}")]
    PeriodNotClosed(f64),
    #[error("domain not simply connected after the cut")]
    NotSimplyConnected,
    #[error("weld gap {0:e} exceeds tolerance")]
    WeldGap(f64),
    #[error("surface has no end metadata for end {0}")]
    MissingEndMetadata(usize),
    #[error("surface is not closed up")]
    OpenSurface,
    #[error("curve extraction failed: {0}")]
    CurveExtractionFailed(String),

    #[error("inset {delta:e} too large, limit {limit:e}")]
    InsetTooLarge { delta: f64, limit: f64 },
    #[error("too few loop samples: {got} < {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("period vanishes on the loop at sample {0}")]
    ZeroOnLoop(usize),
    #[error("loop undersampled: angle jump {0} >= pi/2")]
    Undersampled(f64),
    #[error("no zero found within budget (best |Per| = {0:e})")]
    NoZeroFound(f64),
    #[error("symmetry violated: {0}")]
    SymmetryViolation(String),
    #[error("curve is not strictly convex: {0}")]
    NotStrictlyConvex(String),

    #[error("config error: {0}")]
    ConfigError(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short name of the variant, used in single-line error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ClosureViolation(_) => "ClosureViolation",
            Error::DegenerateEdge(_) => "DegenerateEdge",
            Error::TooFewEdges(_) => "TooFewEdges",
            Error::InvalidStar { .. } => "InvalidStar",
            Error::NotConvex(_) => "NotConvex",
            Error::PunctureTooClose { .. } => "PunctureTooClose",
            Error::CutCrossesBoundary => "CutCrossesBoundary",
            Error::MeshFailure(_) => "MeshFailure",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::JumpDegenerate(_) => "JumpDegenerate",
            Error::NonCauchy(_) => "NonCauchy",
            Error::LinearSolve(_) => "LinearSolve",
            Error::UnknownForm(_) => "UnknownForm",
            Error::PathNotInMesh(_) => "PathNotInMesh",
            Error::NoLoop(_) => "NoLoop",
            Error::PeriodNotClosed(_) => "PeriodNotClosed",
            Error::NotSimplyConnected => "NotSimplyConnected",
            Error::WeldGap(_) => "WeldGap",
            Error::MissingEndMetadata(_) => "MissingEndMetadata",
            Error::OpenSurface => "OpenSurface",
            Error::CurveExtractionFailed(_) => "CurveExtractionFailed",
            Error::InsetTooLarge { .. } => "InsetTooLarge",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::ZeroOnLoop(_) => "ZeroOnLoop",
            Error::Undersampled(_) => "Undersampled",
            Error::NoZeroFound(_) => "NoZeroFound",
            Error::SymmetryViolation(_) => "SymmetryViolation",
            Error::NotStrictlyConvex(_) => "NotStrictlyConvex",
            Error::ConfigError(_) => "ConfigError",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

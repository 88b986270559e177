use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected n = {expected}, found n = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dilation factor must be positive, got {0}")]
    NonPositiveDilation(f64),

    #[error("heat time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("point lies outside the unit cube [-1/2, 1/2)^(2n)")]
    OutsideCube,

    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("point is within {distance:e} of a tile boundary at level {level}")]
    Boundary { level: i32, distance: f64 },

    #[error("level {level} outside the range {lo}..={hi}")]
    LevelOutOfRange { level: i32, lo: i32, hi: i32 },

    #[error("tile or point is not inside the region")]
    NotInRegion,

    #[error("tile at level {0} has no children inside the region")]
    NoChildren(i32),

    #[error("symbol is not differentiable at the requested point")]
    NotDifferentiable,

    #[error("field index {index} out of range 1..={max}")]
    FieldIndex { index: usize, max: usize },

    #[error("kernel is singular at the identity")]
    AtOrigin,

    #[error("quadrature did not converge: estimate {value:e}, error {error:e} after {evals} evaluations")]
    Quadrature {
        value: f64,
        error: f64,
        evals: usize,
    },

    #[error("integral diverges: {0}")]
    Divergent(&'static str),

    #[error("unsupported index pattern ({j}, {k}) for this route")]
    IndexPattern { j: usize, k: usize },

    #[error("exponent must satisfy {constraint}, got {p}")]
    Exponent { p: f64, constraint: &'static str },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("Monte-Carlo error bar {rel:.3} exceeds the allowed relative error")]
    InsufficientSamples { rel: f64 },

    #[error("depth {depth} is insufficient: {need}")]
    Depth { depth: u32, need: &'static str },

    #[error("inconsistent data: {0}")]
    Inconsistent(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage {stage} failed (config {config_hash}): {source}")]
    Stage {
        stage: String,
        config_hash: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

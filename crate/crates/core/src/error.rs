use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("state is not normalized (norm = {0})")]
    NotNormalized(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("{name} = {value} is outside its valid range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("unknown noise marker `{0}`")]
    UnknownMarker(String),

    #[error("constraint `{name}` violated: ratio {ratio:.4} below required {required}")]
    ConstraintViolated {
        name: &'static str,
        ratio: f64,
        required: f64,
    },

    #[error("degenerate parameters: {0}")]
    Degenerate(&'static str),

    #[error("integrator step dt = {dt:e} s too coarse: dt*omega_max = {product:.3} > {limit}")]
    StepTooCoarse { dt: f64, product: f64, limit: f64 },

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

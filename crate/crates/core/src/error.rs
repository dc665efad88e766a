use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("degenerate stencil at node {node}: zero chord length")]
    DegenerateStencil { node: usize },

    #[error("kernel evaluated at zero distance")]
    SingularEvaluation,

    #[error("singular system: pivot {pivot:e} in column {column} below tolerance")]
    SingularSystem { column: usize, pivot: f64 },

    #[error("charge {charge} is {distance:e} from the curve, guard requires more than {limit:e}")]
    ChargeTooClose {
        charge: usize,
        distance: f64,
        limit: f64,
    },

    #[error("charge {charge} is not inside the curve")]
    ChargeExited { charge: usize },

    #[error("blow-up at node {node}: displacement {displacement:e} exceeds {limit:e}")]
    BlowUp {
        node: usize,
        displacement: f64,
        limit: f64,
    },

    #[error("malformed image at byte {offset}: {reason}")]
    MalformedImage { offset: usize, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix too large for explicit inversion: {0} > {max}", max = crate::linalg::MAX_INVERT_DIM)]
    MatrixTooLarge(usize),
}

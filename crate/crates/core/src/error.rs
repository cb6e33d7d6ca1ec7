use thiserror::Error;

/// Errors raised by the solver toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("matrix market line {line}: {msg}")]
    MatrixMarket { line: usize, msg: String },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("nonsymmetric content at ({row}, {col})")]
    Nonsymmetric { row: usize, col: usize },

    #[error("index ({row}, {col}) out of range for order {n}")]
    IndexOutOfRange { row: usize, col: usize, n: usize },

    #[error("factorization breakdown at pivot {pivot} after {retries} shift retries")]
    FactorizationBreakdown { pivot: usize, retries: usize },

    #[error("subdomain {id}: {source}")]
    Subdomain {
        id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("order {n} exceeds the cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("indefinite interface matrix (interval [{lo}, {hi}])")]
    IndefiniteInterface { lo: f64, hi: f64 },

    #[error("operator not SPD (p'Ap = {0})")]
    NotSpd(f64),

    #[error("G_k singular")]
    SingularCorrection,

    #[error("theta = {0} makes 1 - theta singular")]
    ThetaOutOfRange(f64),

    #[error("operator is not symmetric (defect {defect:e})")]
    NonsymmetricOperator { defect: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

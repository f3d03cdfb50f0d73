use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coercivity violated in cell {cell:?} at amplitude {amplitude}: eigenvalue {eigenvalue}")]
    NotCoercive {
        cell: Option<[usize; 2]>,
        amplitude: f64,
        eigenvalue: f64,
    },

    #[error("linear solver stopped after {iterations} iterations with relative residual {residual:e}")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("lower-order amplitude derivative {0:?} has not been computed")]
    MissingLowerOrder(Vec<u32>),

    #[error("test function does not provide derivative of order {0}")]
    MissingDerivative(u32),

    #[error("unknown perturbation law `{0}`")]
    UnknownLaw(String),

    #[error("law `{0}` has no sampler")]
    NoSampler(String),

    #[error("law `{0}` does not provide moment data for the corrector route")]
    NoMoments(String),

    #[error("offset {offset:?} lies outside the trustworthy core (|k| <= {core}) of the truncation")]
    TruncationTooSmall { offset: [i64; 2], core: i64 },

    #[error("numerical integration budget exceeded: {0}")]
    IntegratorBudget(String),
}

pub type Result<T> = core::result::Result<T, Error>;

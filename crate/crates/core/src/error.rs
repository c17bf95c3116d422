use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state has zero norm or trace")]
    DegenerateState,

    #[error("expectation of hermitian operator has imaginary residue {0:e}")]
    ImaginaryResidue(f64),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("truncation leakage {population:e} exceeds {tolerance:e} at t = {time}; increase fock_dim")]
    Leakage { population: f64, tolerance: f64, time: f64 },

    #[error("negative eigenvalue {0:e} in conditional state; reduce the time step")]
    Positivity(f64),

    #[error("steady state did not converge: residual {residual:e}")]
    SteadyStateNotConverged { residual: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("decay is not exponential (R^2 = {r2:.4})")]
    NonExponential { r2: f64 },

    #[error("record does not match the replay configuration: {0}")]
    RecordMismatch(String),

    #[error("finite-difference step too large: F(delta) = {coarse:e}, F(delta/2) = {fine:e}, tolerance {tolerance:e}")]
    DeltaTooLarge { coarse: f64, fine: f64, tolerance: f64 },

    #[error("invalid collapse dataset: {0}")]
    Dataset(String),

    #[error("no overlapping region between any pair of rescaled sets")]
    NoOverlap,

    #[error("malformed record container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("sampled JSA is identically zero on the grid")]
    ZeroJsa,
    #[error("JSA is not normalized (sum of squared Schmidt coefficients = {0})")]
    NotNormalized(f64),
    #[error("SVD did not converge")]
    SvdFailure,
    #[error("no Schmidt coefficient at or above cutoff {0}")]
    EmptyDecomposition(f64),
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),
    #[error("symmetric length undefined for equal signal and idler slowness")]
    DegenerateSlowness,
    #[error("fidelity is not monotone in chi on [0, {chi_max}]")]
    NonMonotone { chi_max: f64 },
    #[error("bisection did not reach the fidelity tolerance in {0} iterations")]
    NotConverged(usize),
    #[error("dispersion table has no entry at {0} nm")]
    MissingDispersion(f64),
    #[error("config error: {0}")]
    Config(String),
    #[error("refusing to overwrite {0} with different content (use --force)")]
    WouldOverwrite(String),
    #[error("oracle mismatch in {0} instance(s)")]
    OracleMismatch(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidInput(_)
            | Error::MissingDispersion(_)
            | Error::WouldOverwrite(_)
            | Error::Io(_) => 1,
            Error::OracleMismatch(_) => 3,
            _ => 2,
        }
    }
}

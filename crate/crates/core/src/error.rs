use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("log too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dim {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("ill-conditioned system: condition estimate {cond:.3e} exceeds {limit:.1e}")]
    IllConditioned { cond: f64, limit: f64 },
    #[error("rank deficient least-squares problem (rank {rank} of {cols})")]
    RankDeficient { rank: usize, cols: usize },
    #[error("matrix not Schur stable: eigenvalue moduli {0:?}")]
    NotSchur(Vec<f64>),
    #[error("zero on or too near the unit circle at {0:?}")]
    UnitCircleZero((f64, f64)),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("feedforward diverged at step {step}: |u_ff| = {value:.3e}")]
    Diverged { step: usize, value: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dim { what, expected, got });
    }
    Ok(())
}

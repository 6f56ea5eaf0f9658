use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("rank-deficient scatter: {deficient} dimension(s) numerically null; reduce q or h")]
    RankDeficient { deficient: usize },

    #[error("scatter inverse not available; call factorized() first")]
    InverseUnavailable,

    #[error("degenerate correction: h = {h} with n = {n} leaves no room for disagreement")]
    DegenerateCorrection { h: usize, n: usize },

    #[error("reweighting rejected all but {kept} observation(s)")]
    AllRejected { kept: usize },

    #[error("matrix {name} is not symmetric positive definite")]
    NotSpd { name: &'static str },

    #[error("bootstrap pair {pair} failed: {source}")]
    Bootstrap {
        pair: usize,
        #[source]
        source: Box<Error>,
    },
}

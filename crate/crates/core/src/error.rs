use thiserror::Error;

/// Errors produced by the design, verification and generation stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frequency specification: {0}")]
    InvalidSpec(String),

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("frequency {0} lies in a don't-care region of the specification")]
    OutsideBands(f64),

    #[error("invalid fixed-point format: {0}")]
    InvalidFormat(String),

    #[error("unstable denominator (a1 = {a1}, a2 = {a2})")]
    Unstable { a1: f64, a2: f64 },

    #[error("degenerate specification: {0}")]
    Degenerate(String),

    #[error("constant {0} exceeds the supported magnitude 2^24")]
    ConstantTooLarge(i64),

    #[error("invalid adder graph: {0}")]
    InvalidGraph(String),

    #[error("linear model error: {0}")]
    Model(String),

    #[error("big-M constant {value} for `{name}` exceeds 2^24; refusing to export")]
    BigMTooLarge { name: String, value: u64 },

    #[error("overflow of signal `{signal}` at sample {sample}")]
    Overflow { signal: String, sample: usize },

    #[error("input sample {value} at index {index} is outside the input format")]
    InputRange { index: usize, value: i64 },

    #[error("verification did not converge: {0}")]
    Verification(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

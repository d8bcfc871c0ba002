use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} categories, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("sample count mismatch: expected n = {expected}, got n = {actual}")]
    SampleCountMismatch { expected: u64, actual: u64 },

    #[error(
        "discrete simplex with k = {k}, n = {n} has {required} elements, which exceeds the \
         platform integer range"
    )]
    EnumerationOverflow { k: usize, n: u64, required: String },

    #[error("invalid probability vector: {0}")]
    InvalidSimplexPoint(String),

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("error level must lie in (0, 1), got {0}")]
    InvalidDelta(f64),

    #[error("{name} = {value} is outside [0, 1]")]
    OutOfUnitInterval { name: &'static str, value: f64 },

    #[error("chi-square prefilter unavailable: p has a zero coordinate")]
    PrefilterUnavailable,

    #[error(
        "no scan point of the {scan} lies in the region; rerun with a finer resolution \
         ({diagnostics})"
    )]
    EmptyRegionScan { scan: String, diagnostics: String },

    #[error("grid resolution {resolution} is below the minimum of {minimum}")]
    ResolutionTooSmall { resolution: u64, minimum: u64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "LUCB did not stop within the cap of {cap} samples (per-arm counts {per_arm_counts:?})"
    )]
    SampleCapExceeded { cap: u64, per_arm_counts: Vec<u64> },
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidDelta(delta))
    }
}

pub(crate) fn check_dims(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Result`]. Variants carry
//! enough context to identify the offending quantity without needing a
//! backtrace: bad arguments name the parameter, signal-domain failures name
//! the time or index that was out of reach, and design failures name the
//! frequency bin that could not be solved.

use thiserror::Error;

/// Errors produced by the transmit chain, channel, receiver, and harness.
#[derive(Error, Debug)]
pub enum Error {
    /// A parameter failed validation. The message names the parameter and the
    /// constraint it violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An LFSR tap set does not generate a maximal-length sequence.
    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    /// An interpolation query fell outside the sampled support of a signal.
    #[error("time {t} s outside signal support [{start} s, {end} s]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    /// Two signals that must share a sample grid do not.
    #[error("sample rate mismatch: {a} Hz vs {b} Hz")]
    RateMismatch { a: f64, b: f64 },

    /// A per-bin constraint system was rank deficient, typically because two
    /// steering directions alias at that frequency.
    #[error("singular beam design at bin {bin} (f = {freq} Hz): {detail}")]
    SingularDesign { bin: usize, freq: f64, detail: String },

    /// The synchronizer could not find a credible frame start.
    #[error("synchronization failed: peak quality {quality_db:.1} dB below threshold {threshold_db:.1} dB")]
    SyncFailure { quality_db: f64, threshold_db: f64 },

    /// The input signal ended before the operation could finish the frame.
    #[error("truncated frame: needed {needed} samples but only {available} are available")]
    TruncatedFrame { needed: usize, available: usize },

    /// The adaptive equalizer diverged and the frame was abandoned.
    #[error("equalizer diverged at symbol {symbol}")]
    Divergence {
        symbol: usize,
        /// Partial run up to the abort point, for post-mortem inspection.
        partial: Box<crate::receiver::DfeRun>,
    },

    /// Config files that fail to parse or violate schema constraints.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

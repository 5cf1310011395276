use std::io;

use thiserror::Error;

use crate::transforms::Domain;

/// Errors produced anywhere in the simulation chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid configuration: {0}")]
    InvalidGrid(String),

    #[error("index ({f_index}, {t_index}) outside {n}x{m} grid")]
    IndexOutOfRange {
        f_index: usize,
        t_index: usize,
        n: usize,
        m: usize,
    },

    #[error("unsupported QAM order {0} (expected 4, 16 or 64)")]
    UnsupportedOrder(usize),

    #[error("bit sequence of length {len} is not a multiple of {bits_per_symbol}")]
    BitLength { len: usize, bits_per_symbol: usize },

    #[error("bit value {0} is not 0 or 1")]
    InvalidBit(u8),

    #[error("expected a {expected:?} grid, got {actual:?}")]
    WrongDomain { expected: Domain, actual: Domain },

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("grid {n}x{m} too small: need at least {min_n}x{min_m}")]
    GridTooSmall {
        n: usize,
        m: usize,
        min_n: usize,
        min_m: usize,
    },

    #[error("invalid tap set: {0}")]
    InvalidTaps(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("trace format error: {0}")]
    Format(String),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("requested bandwidth {requested_hz} Hz exceeds measured bandwidth {available_hz} Hz")]
    BandwidthExceeded { requested_hz: f64, available_hz: f64 },

    #[error("band of {rows} rows does not fit into {n_delay} delay bins")]
    BandTooWide { rows: usize, n_delay: usize },

    #[error("target interval {target_s} s exceeds source interval {source_s} s (downsampling unsupported)")]
    Downsampling { target_s: f64, source_s: f64 },

    #[error("zero-norm vector in correlation")]
    ZeroNorm,

    #[error("frame {frame_index} extends past the end of the recording")]
    FrameOutOfRange { frame_index: usize },

    #[error("scatterer violates the unambiguous range: {0}")]
    AliasViolation(String),

    #[error("channel is identically zero")]
    ZeroChannel,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
}

impl Error {
    /// True for errors caused by a bad simulation configuration rather
    /// than I/O or file contents.
    pub fn is_config(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Format(_) | Error::InvalidTrace(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

//! Link-level OTFS simulation.
//!
//! Bits are mapped to QAM symbols on an `N x M` delay-Doppler grid, passed
//! through a delay-Doppler channel plus AWGN, detected by iterative message
//! passing, and counted into BER points. Channels come from a synthetic
//! Rayleigh tap model or from frequency-time channel traces resampled onto
//! the simulation grid.

pub mod channel;
pub mod detector;
pub mod error;
pub mod grid;
pub mod harness;
pub mod qam;
pub mod trace;
pub mod transforms;

pub use channel::{DDChannel, TFChannel, Tap, TapSet};
pub use detector::{mp_detect, vectorize, MpOutput, MpParams, SparseSystem};
pub use error::{Error, Result};
pub use grid::GridConfig;
pub use harness::{preset, run_ber_point, run_sweep, BerRecord, ChannelSource, SimConfig};
pub use qam::Alphabet;
pub use trace::{ChannelTrace, DelayTimeGrid, TraceChannel};
pub use transforms::{isfft, sfft, Domain, SymbolGrid};

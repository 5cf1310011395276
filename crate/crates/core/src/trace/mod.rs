//! Measured (or synthetic) channel traces and their conversion to
//! simulation-grid channels.
//!
//! Pipeline: [`select_band`] → [`to_delay_time`] → [`interpolate_time`] →
//! [`extract_frame`] → [`crate::channel::tf_to_dd`]. [`TraceChannel`] wraps
//! the whole chain for frame-by-frame use.

mod format;
mod resample;
mod synth;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use format::{load_trace, read_trace, save_trace, write_trace, MAGIC};
pub use resample::{
    centered_dft, centered_idft, correlation_stats, extract_frame, interpolate_time, select_band,
    snapshot_correlation, to_delay_time, RhoStats, TraceChannel,
};
pub use synth::{gen_synth_trace, parse_scatterers_csv, Scatterer, SynthTraceParams};

/// Frequency-time transfer function `H[f,t]` with sounder metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    h: Array2<Complex64>,
    subcarrier_spacing_hz: f64,
    snapshot_interval_s: f64,
    carrier_hz: f64,
    label: String,
}

impl ChannelTrace {
    pub fn new(
        h: Array2<Complex64>,
        subcarrier_spacing_hz: f64,
        snapshot_interval_s: f64,
        carrier_hz: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        let (nf, nt) = h.dim();
        if nf < 1 || nt < 2 {
            return Err(Error::InvalidTrace(format!(
                "need at least 1 tone and 2 snapshots, got {nf}x{nt}"
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(subcarrier_spacing_hz) || !positive(snapshot_interval_s) {
            return Err(Error::InvalidTrace(
                "subcarrier spacing and snapshot interval must be positive".into(),
            ));
        }
        if !carrier_hz.is_finite() {
            return Err(Error::InvalidTrace("carrier must be finite".into()));
        }
        Ok(Self {
            h,
            subcarrier_spacing_hz,
            snapshot_interval_s,
            carrier_hz,
            label: label.into(),
        })
    }

    pub fn h(&self) -> &Array2<Complex64> {
        &self.h
    }

    pub fn n_tones(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.h.ncols()
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.subcarrier_spacing_hz
    }

    pub fn snapshot_interval_s(&self) -> f64 {
        self.snapshot_interval_s
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn measured_bandwidth_hz(&self) -> f64 {
        self.n_tones() as f64 * self.subcarrier_spacing_hz
    }

    pub fn duration_s(&self) -> f64 {
        (self.n_snapshots() - 1) as f64 * self.snapshot_interval_s
    }
}

/// Delay-time channel `G`: `N` delay rows by snapshot columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTimeGrid {
    pub g: Array2<Complex64>,
    /// Delay spacing of the rows, `1/(f' Δf)`.
    pub delta_tau: f64,
    pub snapshot_interval: f64,
    /// Time of column 0 relative to the start of the recording.
    pub start_time_s: f64,
}

impl DelayTimeGrid {
    pub fn n_snapshots(&self) -> usize {
        self.g.ncols()
    }
}

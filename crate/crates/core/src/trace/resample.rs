//! Band selection, delay-time conversion, time interpolation and frame
//! extraction.
//!
//! "Centered" DFTs index their frequency rows `r = 0..L` by the signed
//! frequency `k_r = r - floor(L/2)`, i.e. `-floor(L/2) ..= floor((L-1)/2)`,
//! with row 0 the lowest frequency. The delay side is indexed `0..L`.
//!
//! ```text
//! forward  H[r] = 1/sqrt(L) * sum_n g[n] * exp(-j2pi k_r n / L)
//! inverse  g[n] = 1/sqrt(L) * sum_r H[r] * exp(+j2pi k_r n / L)
//! ```

use ndarray::{s, Array2, ArrayView2, Axis};
use num_complex::Complex64;
use rustfft::FftDirection;

use super::{ChannelTrace, DelayTimeGrid};
use crate::channel::TFChannel;
use crate::error::{Error, Result};
use crate::grid::GridConfig;
use crate::transforms::fft_along;

/// Forward centered unitary DFT of every column (delay rows → frequency rows).
pub fn centered_dft(g: ArrayView2<Complex64>) -> Array2<Complex64> {
    let l = g.nrows();
    let mut spec = g.to_owned();
    fft_along(&mut spec, Axis(0), FftDirection::Forward);
    let half = l / 2;
    let scale = 1.0 / (l as f64).sqrt();
    // H[r] = spec[(r - half) mod L]
    Array2::from_shape_fn(g.dim(), |(r, t)| spec[[(r + l - half) % l, t]] * scale)
}

/// Inverse of [`centered_dft`] (frequency rows → delay rows).
pub fn centered_idft(h: ArrayView2<Complex64>) -> Array2<Complex64> {
    let l = h.nrows();
    let half = l / 2;
    let mut buf = Array2::from_shape_fn(h.dim(), |(k, t)| h[[(k + half) % l, t]]);
    fft_along(&mut buf, Axis(0), FftDirection::Inverse);
    let scale = 1.0 / (l as f64).sqrt();
    buf.mapv_inplace(|z| z * scale);
    buf
}

/// Keeps the `round(B / Δf)` contiguous rows around the band center.
pub fn select_band(trace: &ChannelTrace, system_bandwidth_hz: f64) -> Result<ChannelTrace> {
    let available = trace.measured_bandwidth_hz();
    if !(system_bandwidth_hz > 0.0) || system_bandwidth_hz > available * (1.0 + 1e-12) {
        return Err(Error::BandwidthExceeded {
            requested_hz: system_bandwidth_hz,
            available_hz: available,
        });
    }
    let nf = trace.n_tones();
    let rows = ((system_bandwidth_hz / trace.subcarrier_spacing_hz()).round() as usize).clamp(1, nf);
    let start = (nf - rows) / 2;
    let h = trace.h().slice(s![start..start + rows, ..]).to_owned();
    ChannelTrace::new(
        h,
        trace.subcarrier_spacing_hz(),
        trace.snapshot_interval_s(),
        trace.carrier_hz(),
        trace.label(),
    )
}

/// `G = [F^H H'; 0]`, zero padded to `n_delay` rows.
pub fn to_delay_time(reduced: &ChannelTrace, n_delay: usize) -> Result<DelayTimeGrid> {
    let rows = reduced.n_tones();
    if rows > n_delay {
        return Err(Error::BandTooWide { rows, n_delay });
    }
    let profile = centered_idft(reduced.h().view());
    let mut g = Array2::zeros((n_delay, reduced.n_snapshots()));
    g.slice_mut(s![..rows, ..]).assign(&profile);
    Ok(DelayTimeGrid {
        g,
        delta_tau: 1.0 / (rows as f64 * reduced.subcarrier_spacing_hz()),
        snapshot_interval: reduced.snapshot_interval_s(),
        start_time_s: 0.0,
    })
}

/// Linear interpolation (real and imaginary parts independently) onto a
/// uniform axis with spacing at most `target_interval_s` covering the same
/// span. Both endpoints are reproduced exactly.
pub fn interpolate_time(g: &DelayTimeGrid, target_interval_s: f64) -> Result<DelayTimeGrid> {
    let src = g.snapshot_interval;
    if !(target_interval_s > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "target interval must be positive, got {target_interval_s}"
        )));
    }
    if target_interval_s > src * (1.0 + 1e-12) {
        return Err(Error::Downsampling {
            target_s: target_interval_s,
            source_s: src,
        });
    }
    let t_src = g.n_snapshots();
    if t_src < 2 {
        return Err(Error::InvalidTrace("need at least 2 snapshots to interpolate".into()));
    }
    let gaps = t_src - 1;
    let ratio = src / target_interval_s;
    let steps_per_gap = (ratio - 1e-9).ceil().max(1.0) as usize;
    let t_out = gaps * steps_per_gap + 1;

    let mut out = Array2::zeros((g.g.nrows(), t_out));
    for k in 0..t_out {
        let i = k / steps_per_gap;
        let rem = k % steps_per_gap;
        if rem == 0 {
            out.column_mut(k).assign(&g.g.column(i));
            continue;
        }
        let w = rem as f64 / steps_per_gap as f64;
        let (a, b) = (g.g.column(i), g.g.column(i + 1));
        for (r, o) in out.column_mut(k).iter_mut().enumerate() {
            *o = Complex64::new(
                a[r].re + w * (b[r].re - a[r].re),
                a[r].im + w * (b[r].im - a[r].im),
            );
        }
    }
    Ok(DelayTimeGrid {
        g: out,
        delta_tau: g.delta_tau,
        snapshot_interval: src / steps_per_gap as f64,
        start_time_s: g.start_time_s,
    })
}

/// Picks the snapshot nearest each slot boundary of frame `frame_index` and
/// transforms the delay rows to `N` subcarriers.
pub fn extract_frame(g: &DelayTimeGrid, config: &GridConfig, frame_index: usize) -> Result<TFChannel> {
    let (n, m) = (config.n_delay(), config.m_doppler());
    if g.g.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: (n, m),
            actual: g.g.dim(),
        });
    }
    let frame_start = frame_index as f64 * config.frame_duration();
    let mut cols = Array2::zeros((n, m));
    for t in 0..m {
        let rel = frame_start + t as f64 * config.slot_duration() - g.start_time_s;
        let idx = (rel / g.snapshot_interval).round();
        if !(idx >= 0.0) || idx as usize >= g.n_snapshots() {
            return Err(Error::FrameOutOfRange { frame_index });
        }
        cols.column_mut(t).assign(&g.g.column(idx as usize));
    }
    Ok(TFChannel::new(centered_dft(cols.view())))
}

/// `Re<a, b> / (|a| |b|)`.
pub fn snapshot_correlation(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: (a.len(), 1),
            actual: (b.len(), 1),
        });
    }
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let inner: f64 = a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum();
    Ok((inner / (na * nb)).clamp(-1.0, 1.0))
}

/// Summary of consecutive-snapshot correlations over a recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoStats {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub pairs: usize,
}

pub fn correlation_stats(trace: &ChannelTrace) -> Result<RhoStats> {
    let h = trace.h();
    let mut rhos = (1..trace.n_snapshots())
        .map(|t| {
            let a: Vec<_> = h.column(t - 1).to_vec();
            let b: Vec<_> = h.column(t).to_vec();
            snapshot_correlation(&a, &b)
        })
        .collect::<Result<Vec<f64>>>()?;
    rhos.sort_by(f64::total_cmp);
    let pairs = rhos.len();
    let median = if pairs % 2 == 1 {
        rhos[pairs / 2]
    } else {
        0.5 * (rhos[pairs / 2 - 1] + rhos[pairs / 2])
    };
    Ok(RhoStats {
        mean: rhos.iter().sum::<f64>() / pairs as f64,
        median,
        min: rhos[0],
        pairs,
    })
}

/// A trace prepared for a given simulation grid, yielding one TF channel
/// per OTFS frame.
///
/// Frames are normalized by one trace-wide factor so that the mean of
/// `|H[f,t]|^2` over the recording is 1; large-scale variation between
/// frames is kept.
#[derive(Debug, Clone)]
pub struct TraceChannel {
    config: GridConfig,
    delay_time: DelayTimeGrid,
    interp_factor: usize,
    scale: f64,
}

impl TraceChannel {
    /// `interp_factor` sets the interpolation grid to `slot_duration / interp_factor`
    /// (capped at the source interval).
    pub fn new(trace: &ChannelTrace, config: GridConfig, interp_factor: usize) -> Result<Self> {
        if interp_factor == 0 {
            return Err(Error::InvalidConfig("interpolation factor must be positive".into()));
        }
        let reduced = select_band(trace, config.bandwidth_hz())?;
        let delay_time = to_delay_time(&reduced, config.n_delay())?;
        let mean_col_energy =
            delay_time.g.iter().map(|z| z.norm_sqr()).sum::<f64>() / delay_time.n_snapshots() as f64;
        if mean_col_energy == 0.0 {
            return Err(Error::ZeroChannel);
        }
        let scale = (config.n_delay() as f64 / mean_col_energy).sqrt();
        let this = Self {
            config,
            delay_time,
            interp_factor,
            scale,
        };
        if this.frame_count() == 0 {
            return Err(Error::InvalidTrace("trace shorter than one frame".into()));
        }
        Ok(this)
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn delay_time(&self) -> &DelayTimeGrid {
        &self.delay_time
    }

    fn span(&self) -> f64 {
        (self.delay_time.n_snapshots() - 1) as f64 * self.delay_time.snapshot_interval
    }

    fn frame_tail(&self) -> f64 {
        (self.config.m_doppler() - 1) as f64 * self.config.slot_duration()
    }

    pub fn frame_count(&self) -> usize {
        let usable = self.span() - self.frame_tail();
        if usable < -1e-12 * self.span() {
            return 0;
        }
        ((usable.max(0.0) / self.config.frame_duration()) * (1.0 + 1e-12)).floor() as usize + 1
    }

    /// Normalized TF channel of frame `frame_index`.
    pub fn frame(&self, frame_index: usize) -> Result<TFChannel> {
        if frame_index >= self.frame_count() {
            return Err(Error::FrameOutOfRange { frame_index });
        }
        let dt = self.delay_time.snapshot_interval;
        let last = self.delay_time.n_snapshots() - 1;
        let t0 = frame_index as f64 * self.config.frame_duration();
        let t1 = t0 + self.frame_tail();
        let mut i0 = ((t0 / dt).floor() as usize).min(last);
        let mut i1 = ((t1 / dt).ceil() as usize).min(last);
        if i0 == i1 {
            if i1 < last {
                i1 += 1;
            } else {
                i0 -= 1;
            }
        }
        let window = DelayTimeGrid {
            g: self.delay_time.g.slice(s![.., i0..=i1]).to_owned(),
            delta_tau: self.delay_time.delta_tau,
            snapshot_interval: dt,
            start_time_s: i0 as f64 * dt,
        };
        let target = (self.config.slot_duration() / self.interp_factor as f64).min(dt);
        let fine = interpolate_time(&window, target)?;
        let h = extract_frame(&fine, &self.config, frame_index)?;
        Ok(TFChannel::new(h.h().mapv(|z| z * self.scale)))
    }
}

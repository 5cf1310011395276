//! OTFS lattice parameters and conversions to physical units.
//!
//! The delay axis has `N` bins of width `delta_tau = 1/B`; the Doppler axis has
//! `M` bins of width `delta_nu = 1/(N * M * delta_tau)`. Both resolutions are
//! derived from the bandwidth on demand and never stored, so the
//! reciprocity between them holds by construction.

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    n_delay: usize,
    m_doppler: usize,
    bandwidth_hz: f64,
    carrier_hz: f64,
    start_time_s: f64,
}

/// Derived grid resolutions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolutions {
    pub delta_tau: f64,
    pub delta_nu: f64,
    pub frame_duration: f64,
}

impl GridConfig {
    pub fn new(n_delay: usize, m_doppler: usize, bandwidth_hz: f64, carrier_hz: f64) -> Result<Self> {
        if n_delay == 0 || m_doppler == 0 {
            return Err(Error::InvalidGrid(format!(
                "N and M must be positive (got N={n_delay}, M={m_doppler})"
            )));
        }
        if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
            return Err(Error::InvalidGrid(format!("bandwidth must be positive, got {bandwidth_hz}")));
        }
        if !(carrier_hz.is_finite() && carrier_hz >= 0.0) {
            return Err(Error::InvalidGrid(format!("carrier must be non-negative, got {carrier_hz}")));
        }
        Ok(Self {
            n_delay,
            m_doppler,
            bandwidth_hz,
            carrier_hz,
            start_time_s: 0.0,
        })
    }

    pub fn with_start_time(mut self, start_time_s: f64) -> Self {
        self.start_time_s = start_time_s;
        self
    }

    pub fn n_delay(&self) -> usize {
        self.n_delay
    }

    pub fn m_doppler(&self) -> usize {
        self.m_doppler
    }

    /// Number of grid cells, `N * M`.
    pub fn cells(&self) -> usize {
        self.n_delay * self.m_doppler
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn start_time_s(&self) -> f64 {
        self.start_time_s
    }

    /// Delay resolution, the system sampling period `1/B`.
    pub fn delta_tau(&self) -> f64 {
        1.0 / self.bandwidth_hz
    }

    /// Doppler resolution `1/(N M delta_tau)`.
    pub fn delta_nu(&self) -> f64 {
        1.0 / (self.cells() as f64 * self.delta_tau())
    }

    /// Duration of one time slot (one OFDM symbol without CP), `N delta_tau`.
    pub fn slot_duration(&self) -> f64 {
        self.n_delay as f64 * self.delta_tau()
    }

    pub fn frame_duration(&self) -> f64 {
        self.cells() as f64 * self.delta_tau()
    }

    /// Subcarrier spacing `B/N`.
    pub fn subcarrier_spacing(&self) -> f64 {
        1.0 / self.slot_duration()
    }

    pub fn resolutions(&self) -> Resolutions {
        Resolutions {
            delta_tau: self.delta_tau(),
            delta_nu: self.delta_nu(),
            frame_duration: self.frame_duration(),
        }
    }

    /// Maps a time-frequency index pair to physical time and frequency:
    /// `t' = t/(M delta_nu) + T0`, `f' = f/(N delta_tau) + F0`.
    pub fn grid_to_physical(&self, f_index: usize, t_index: usize) -> Result<(f64, f64)> {
        if f_index >= self.n_delay || t_index >= self.m_doppler {
            return Err(Error::IndexOutOfRange {
                f_index,
                t_index,
                n: self.n_delay,
                m: self.m_doppler,
            });
        }
        let t_prime = t_index as f64 / (self.m_doppler as f64 * self.delta_nu()) + self.start_time_s;
        let f_prime = f_index as f64 / (self.n_delay as f64 * self.delta_tau()) + self.carrier_hz;
        Ok((t_prime, f_prime))
    }

    /// Physical delay bin (in units of `delta_tau`) represented by delay-Doppler
    /// row `n`.
    ///
    /// The symplectic transform pairs delay with a `+j2pi f n / N` kernel, so a
    /// path with physical delay `k delta_tau` appears at row `-k mod N`.
    pub fn physical_delay_bin(&self, n: usize) -> usize {
        (self.n_delay - n % self.n_delay) % self.n_delay
    }

    /// Signed physical Doppler bin (in units of `delta_nu`) represented by
    /// delay-Doppler column `m`, in `(-M/2, M/2]`. Same sign flip as the delay axis.
    pub fn physical_doppler_bin(&self, m: usize) -> i64 {
        let mm = self.m_doppler as i64;
        let k = (mm - (m as i64 % mm)) % mm;
        if 2 * k > mm {
            k - mm
        } else {
            k
        }
    }
}

/// Free-space Doppler shift `v f_c / c` for a relative speed in m/s.
pub fn doppler_shift(relative_speed_mps: f64, carrier_hz: f64) -> f64 {
    relative_speed_mps * carrier_hz / SPEED_OF_LIGHT
}

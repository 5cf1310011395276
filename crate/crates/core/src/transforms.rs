//! Symplectic finite Fourier transform pair between the delay-Doppler and
//! time-frequency domains.
//!
//! Convention (the only one used anywhere in this crate):
//!
//! ```text
//! U[f,t] = 1/sqrt(NM) * sum_n sum_m X[n,m] * exp(-j2pi (t m / M - f n / N))
//! ```
//!
//! i.e. an unnormalized inverse DFT along the delay axis, a forward DFT along
//! the Doppler axis, and a global `1/sqrt(NM)` that makes the pair unitary.

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    DelayDoppler,
    TimeFrequency,
}

/// An `N x M` block of complex samples tagged with its domain.
///
/// Rows index delay (or frequency), columns index Doppler (or time).
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    data: Array2<Complex64>,
    domain: Domain,
}

impl SymbolGrid {
    pub fn new(data: Array2<Complex64>, domain: Domain) -> Self {
        Self { data, domain }
    }

    pub fn zeros(n: usize, m: usize, domain: Domain) -> Self {
        Self::new(Array2::zeros((n, m)), domain)
    }

    /// Builds a grid from a row-major vector (index `n * M + m`).
    pub fn from_vec(n: usize, m: usize, values: Vec<Complex64>, domain: Domain) -> Result<Self> {
        let len = values.len();
        let data = Array2::from_shape_vec((n, m), values).map_err(|_| Error::DimensionMismatch {
            expected: (n, m),
            actual: (len, 1),
        })?;
        Ok(Self::new(data, domain))
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dims(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn expect_domain(&self, expected: Domain) -> Result<()> {
        if self.domain != expected {
            return Err(Error::WrongDomain {
                expected,
                actual: self.domain,
            });
        }
        Ok(())
    }
}

/// Unnormalized in-place DFT of every lane along `axis`.
pub(crate) fn fft_along(data: &mut Array2<Complex64>, axis: Axis, direction: FftDirection) {
    let len = data.len_of(axis);
    if len <= 1 {
        return;
    }
    let fft = FftPlanner::new().plan_fft(len, direction);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for mut lane in data.lanes_mut(axis) {
        for (b, v) in buf.iter_mut().zip(lane.iter()) {
            *b = *v;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (v, b) in lane.iter_mut().zip(buf.iter()) {
            *v = *b;
        }
    }
}

/// Delay-Doppler to time-frequency.
pub fn isfft(x: &SymbolGrid) -> Result<SymbolGrid> {
    x.expect_domain(Domain::DelayDoppler)?;
    let mut data = x.data.clone();
    fft_along(&mut data, Axis(0), FftDirection::Inverse);
    fft_along(&mut data, Axis(1), FftDirection::Forward);
    let scale = 1.0 / (data.len() as f64).sqrt();
    data.mapv_inplace(|z| z * scale);
    Ok(SymbolGrid::new(data, Domain::TimeFrequency))
}

/// Time-frequency to delay-Doppler; exact inverse of [`isfft`].
pub fn sfft(u: &SymbolGrid) -> Result<SymbolGrid> {
    u.expect_domain(Domain::TimeFrequency)?;
    let mut data = u.data.clone();
    fft_along(&mut data, Axis(0), FftDirection::Forward);
    fft_along(&mut data, Axis(1), FftDirection::Inverse);
    let scale = 1.0 / (data.len() as f64).sqrt();
    data.mapv_inplace(|z| z * scale);
    Ok(SymbolGrid::new(data, Domain::DelayDoppler))
}

//! Synthetic traces in sounder format, built from discrete scatterers.

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

use super::ChannelTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub delay_s: f64,
    pub doppler_hz: f64,
    pub amplitude: Complex64,
}

impl Scatterer {
    pub fn new(delay_s: f64, doppler_hz: f64, amplitude: Complex64) -> Self {
        Self {
            delay_s,
            doppler_hz,
            amplitude,
        }
    }
}

/// Sounder grid for synthetic traces. Defaults follow the 60 GHz V2V
/// measurement campaign: 102 tones at 4.96 MHz, one snapshot every 129.1 µs,
/// 720 ms recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthTraceParams {
    pub subcarrier_spacing_hz: f64,
    pub n_tones: usize,
    pub snapshot_interval_s: f64,
    pub carrier_hz: f64,
    pub duration_s: f64,
    /// Variance of complex white noise added to every sample.
    pub noise_variance: f64,
    pub label: String,
}

impl Default for SynthTraceParams {
    fn default() -> Self {
        Self {
            subcarrier_spacing_hz: 4.96e6,
            n_tones: 102,
            snapshot_interval_s: 129.1e-6,
            carrier_hz: 60e9,
            duration_s: 0.72,
            noise_variance: 0.0,
            label: "synthetic".into(),
        }
    }
}

/// `H[f,t] = sum_k a_k exp(-j2pi f'(f) tau_k) exp(+j2pi nu_k t dt)`, with
/// `f'(f) = (f - floor(Nf/2)) * spacing` the offset from the band center.
pub fn gen_synth_trace(scatterers: &[Scatterer], params: &SynthTraceParams, seed: u64) -> Result<ChannelTrace> {
    let spacing = params.subcarrier_spacing_hz;
    let dt = params.snapshot_interval_s;
    if !(spacing > 0.0 && dt > 0.0 && params.duration_s > 0.0) || params.n_tones == 0 {
        return Err(Error::InvalidTrace("sounder grid parameters must be positive".into()));
    }
    let max_delay = 1.0 / spacing;
    let max_doppler = 0.5 / dt;
    for s in scatterers {
        if !(s.delay_s >= 0.0 && s.delay_s < max_delay) {
            return Err(Error::AliasViolation(format!(
                "delay {} s outside [0, {max_delay})",
                s.delay_s
            )));
        }
        if !(s.doppler_hz.abs() < max_doppler) {
            return Err(Error::AliasViolation(format!(
                "|Doppler| {} Hz not below {max_doppler} Hz",
                s.doppler_hz
            )));
        }
        if !(s.amplitude.re.is_finite() && s.amplitude.im.is_finite()) {
            return Err(Error::NonFinite("scatterer amplitude"));
        }
    }

    let nt = (params.duration_s / dt + 1e-9).floor() as usize + 1;
    let center = (params.n_tones / 2) as f64;
    let mut h = Array2::from_shape_fn((params.n_tones, nt.max(2)), |(f, t)| {
        let freq = (f as f64 - center) * spacing;
        let time = t as f64 * dt;
        scatterers
            .iter()
            .map(|s| s.amplitude * Complex64::from_polar(1.0, 2.0 * PI * (s.doppler_hz * time - freq * s.delay_s)))
            .sum()
    });

    if params.noise_variance > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = (params.noise_variance / 2.0).sqrt();
        for z in h.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z += Complex64::new(re * sigma, im * sigma);
        }
    }

    ChannelTrace::new(h, spacing, dt, params.carrier_hz, params.label.clone())
}

/// Parses `delay_s,doppler_hz,re,im` lines. Blank lines, `#` comments and a
/// non-numeric header line are skipped.
pub fn parse_scatterers_csv(text: &str) -> Result<Vec<Scatterer>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 4 => out.push(Scatterer::new(v[0], v[1], Complex64::new(v[2], v[3]))),
            Err(_) if out.is_empty() && lineno == 0 => continue,
            _ => {
                return Err(Error::Format(format!(
                    "scatterer line {}: expected delay_s,doppler_hz,re,im",
                    lineno + 1
                )))
            }
        }
    }
    Ok(out)
}

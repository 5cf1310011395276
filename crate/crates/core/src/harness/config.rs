//! Simulation configuration, shipped presets, and the flat `key = value`
//! config-file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! preset = bw40_m8          # optional; must come first when present
//! n = 64
//! m = 8
//! bandwidth_hz = 40e6
//! carrier_hz = 60e9
//! order = 4
//! channel = four_tap        # four_tap | identity | taps | trace
//! taps = 0:0;1:0;2:0;3:0    # delay:doppler offsets for channel = taps
//! trace = run1.otfstrc      # trace file, implies channel = trace
//! trace_start_frame = 0
//! interp_factor = 4
//! ebn0_db = 0,5,10,15,20
//! min_bit_errors = 200
//! max_frames = 100000
//! max_iterations = 30
//! damping = 0.6
//! tolerance = 1e-4
//! tap_threshold = 1e-3
//! seed = 1
//! ```

use std::path::PathBuf;

use num_complex::Complex64;

use crate::detector::MpParams;
use crate::error::{Error, Result};
use crate::grid::GridConfig;
use crate::trace::Scatterer;

pub const PRESET_NAMES: [&str; 6] = ["bw5_m64", "bw40_m64", "bw120_m64", "bw40_m8", "bw40_m2", "synth_viterbo"];

#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    File(PathBuf),
    /// Trace generated on the fly in sounder format from these scatterers.
    Synthetic(Vec<Scatterer>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    /// Four equal-power Rayleigh taps at (0,0)..(3,3), redrawn every frame.
    FourTap,
    /// Equal-power Rayleigh taps at the given (delay, Doppler) offsets,
    /// redrawn every frame.
    RayleighTaps(Vec<(usize, usize)>),
    /// Unit tap at (0,0); pure AWGN.
    Identity,
    /// Consecutive frames of a channel trace.
    Trace {
        source: TraceSource,
        start_frame: usize,
        interp_factor: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: GridConfig,
    pub order: usize,
    pub channel: ChannelSource,
    pub ebn0_list_db: Vec<f64>,
    pub min_bit_errors: u64,
    pub max_frames: u64,
    pub mp: MpParams,
    pub tap_threshold: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !matches!(self.order, 4 | 16 | 64) {
            return bad(format!("QAM order {} not in {{4, 16, 64}}", self.order));
        }
        if self.ebn0_list_db.is_empty() {
            return bad("Eb/N0 list is empty".into());
        }
        if self.ebn0_list_db.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return bad("Eb/N0 values must be numbers".into());
        }
        if self.ebn0_list_db.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("Eb/N0 list must be strictly increasing".into());
        }
        if self.min_bit_errors == 0 || self.max_frames == 0 {
            return bad("stopping-rule fields must be positive".into());
        }
        if !(self.tap_threshold >= 0.0 && self.tap_threshold <= 1.0) {
            return bad(format!("tap threshold {} not in [0, 1]", self.tap_threshold));
        }
        self.mp.validate()?;
        let (n, m) = (self.grid.n_delay(), self.grid.m_doppler());
        match &self.channel {
            ChannelSource::FourTap if n < 4 || m < 4 => {
                return Err(Error::GridTooSmall { n, m, min_n: 4, min_m: 4 })
            }
            ChannelSource::RayleighTaps(offsets) => {
                if offsets.is_empty() {
                    return bad("tap list is empty".into());
                }
                if let Some(o) = offsets.iter().find(|o| o.0 >= n || o.1 >= m) {
                    return bad(format!("tap {o:?} outside {n}x{m} grid"));
                }
            }
            ChannelSource::Trace { interp_factor: 0, .. } => return bad("interp_factor must be positive".into()),
            _ => {}
        }
        Ok(())
    }
}

/// Stand-in for the measured SUV pass-by: line of sight, the passing
/// vehicle at 50 km/h-equivalent Doppler, and two weak static reflections.
pub fn suv_passby_scatterers() -> Vec<Scatterer> {
    vec![
        Scatterer::new(0.0, 0.0, Complex64::new(1.0, 0.0)),
        Scatterer::new(15e-9, 2778.0, Complex64::from_polar(0.5, 0.7)),
        Scatterer::new(40e-9, -350.0, Complex64::from_polar(0.3, -1.9)),
        Scatterer::new(85e-9, 120.0, Complex64::from_polar(0.15, 2.4)),
    ]
}

pub fn preset(name: &str) -> Result<SimConfig> {
    let (bandwidth, m, channel) = match name {
        "bw5_m64" => (5e6, 64, None),
        "bw40_m64" => (40e6, 64, None),
        "bw120_m64" => (120e6, 64, None),
        "bw40_m8" => (40e6, 8, None),
        "bw40_m2" => (40e6, 2, None),
        "synth_viterbo" => (40e6, 64, Some(ChannelSource::FourTap)),
        other => return Err(Error::UnknownPreset(other.to_owned())),
    };
    let channel = channel.unwrap_or(ChannelSource::Trace {
        source: TraceSource::Synthetic(suv_passby_scatterers()),
        start_frame: 0,
        interp_factor: 4,
    });
    Ok(SimConfig {
        grid: GridConfig::new(64, m, bandwidth, 60e9)?,
        order: 4,
        channel,
        ebn0_list_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
        min_bit_errors: 200,
        max_frames: 100_000,
        mp: MpParams::default(),
        tap_threshold: 1e-3,
        seed: 1,
    })
}

/// Splits config text into `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse '{value}'")))
}

fn parse_offsets(value: &str) -> Result<Vec<(usize, usize)>> {
    value
        .split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (d, m) = pair
                .split_once(':')
                .ok_or_else(|| Error::InvalidConfig(format!("taps: expected delay:doppler, got '{pair}'")))?;
            Ok((num("taps", d.trim())?, num("taps", m.trim())?))
        })
        .collect()
}

/// Applies one setting on top of `config`.
pub fn apply_setting(config: &mut SimConfig, key: &str, value: &str) -> Result<()> {
    let g = config.grid;
    match key {
        "preset" => *config = preset(value)?,
        "n" => config.grid = GridConfig::new(num(key, value)?, g.m_doppler(), g.bandwidth_hz(), g.carrier_hz())?,
        "m" => config.grid = GridConfig::new(g.n_delay(), num(key, value)?, g.bandwidth_hz(), g.carrier_hz())?,
        "bandwidth_hz" => config.grid = GridConfig::new(g.n_delay(), g.m_doppler(), num(key, value)?, g.carrier_hz())?,
        "carrier_hz" => config.grid = GridConfig::new(g.n_delay(), g.m_doppler(), g.bandwidth_hz(), num(key, value)?)?,
        "order" => config.order = num(key, value)?,
        "channel" => {
            config.channel = match value {
                "four_tap" => ChannelSource::FourTap,
                "identity" => ChannelSource::Identity,
                "taps" => match &config.channel {
                    c @ ChannelSource::RayleighTaps(_) => c.clone(),
                    _ => ChannelSource::RayleighTaps(crate::channel::FOUR_TAP_OFFSETS.to_vec()),
                },
                "trace" => match &config.channel {
                    c @ ChannelSource::Trace { .. } => c.clone(),
                    _ => ChannelSource::Trace {
                        source: TraceSource::Synthetic(suv_passby_scatterers()),
                        start_frame: 0,
                        interp_factor: 4,
                    },
                },
                other => return Err(Error::InvalidConfig(format!("unknown channel '{other}'"))),
            }
        }
        "taps" => config.channel = ChannelSource::RayleighTaps(parse_offsets(value)?),
        "trace" => {
            let (start_frame, interp_factor) = match config.channel {
                ChannelSource::Trace { start_frame, interp_factor, .. } => (start_frame, interp_factor),
                _ => (0, 4),
            };
            config.channel = ChannelSource::Trace {
                source: TraceSource::File(PathBuf::from(value)),
                start_frame,
                interp_factor,
            };
        }
        "trace_start_frame" | "interp_factor" => match &mut config.channel {
            ChannelSource::Trace { start_frame, interp_factor, .. } => {
                if key == "trace_start_frame" {
                    *start_frame = num(key, value)?;
                } else {
                    *interp_factor = num(key, value)?;
                }
            }
            _ => return Err(Error::InvalidConfig(format!("{key} requires a trace channel"))),
        },
        "ebn0_db" => {
            config.ebn0_list_db = value
                .split(',')
                .map(|v| match v.trim() {
                    "inf" | "+inf" => Ok(f64::INFINITY),
                    s => num(key, s),
                })
                .collect::<Result<_>>()?
        }
        "min_bit_errors" => config.min_bit_errors = num(key, value)?,
        "max_frames" => config.max_frames = num(key, value)?,
        "max_iterations" => config.mp.max_iterations = num(key, value)?,
        "damping" => config.mp.damping = num(key, value)?,
        "tolerance" => config.mp.tolerance = num(key, value)?,
        "tap_threshold" => config.tap_threshold = num(key, value)?,
        "seed" => config.seed = num(key, value)?,
        other => return Err(Error::InvalidConfig(format!("unknown key '{other}'"))),
    }
    Ok(())
}

/// Builds a config from `base` (or the `preset` key, which must be first)
/// followed by the settings in `text`.
pub fn parse_config(text: &str, base: SimConfig) -> Result<SimConfig> {
    let mut config = base;
    for (i, (k, v)) in parse_pairs(text)?.iter().enumerate() {
        if k == "preset" && i != 0 {
            return Err(Error::InvalidConfig("preset must be the first setting".into()));
        }
        apply_setting(&mut config, k, v)?;
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let c = preset("bw40_m64").unwrap();
        assert!((c.grid.delta_nu() - 9765.625).abs() < 1e-9);
        assert_eq!((c.grid.n_delay(), c.order), (64, 4));
        let c = preset("bw5_m64").unwrap();
        assert!((c.grid.delta_nu() - 1220.703125).abs() < 1e-9);
        assert_eq!(preset("bw40_m2").unwrap().grid.m_doppler(), 2);
        assert_eq!(preset("bw120_m64").unwrap().grid.bandwidth_hz(), 120e6);
        assert_eq!(preset("synth_viterbo").unwrap().channel, ChannelSource::FourTap);
        assert!(matches!(preset("bw80"), Err(Error::UnknownPreset(_))));
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn parse_file() {
        let text = "preset = bw40_m8\n# comment\nebn0_db = 0, 4,8 \nseed=9\ntaps = 0:0;1:0\nmin_bit_errors = 50 # trailing\n";
        let c = parse_config(text, preset("synth_viterbo").unwrap()).unwrap();
        assert_eq!(c.grid.m_doppler(), 8);
        assert_eq!(c.ebn0_list_db, vec![0.0, 4.0, 8.0]);
        assert_eq!(c.seed, 9);
        assert_eq!(c.channel, ChannelSource::RayleighTaps(vec![(0, 0), (1, 0)]));
        assert_eq!(c.min_bit_errors, 50);

        let c = parse_config("trace = a.bin\ninterp_factor = 8", preset("synth_viterbo").unwrap()).unwrap();
        assert_eq!(
            c.channel,
            ChannelSource::Trace { source: TraceSource::File("a.bin".into()), start_frame: 0, interp_factor: 8 }
        );
    }

    #[test]
    fn parse_errors() {
        let base = || preset("synth_viterbo").unwrap();
        assert!(parse_config("ebn0_db = 5,3", base()).is_err());
        assert!(parse_config("ebn0_db = ", base()).is_err());
        assert!(parse_config("bogus = 1", base()).is_err());
        assert!(parse_config("seed 1", base()).is_err());
        assert!(parse_config("seed = x", base()).is_err());
        assert!(parse_config("n = 0", base()).is_err());
        assert!(parse_config("m = 2", base()).is_err());
        assert!(parse_config("seed = 1\npreset = bw5_m64", base()).is_err());
        assert!(parse_config("max_frames = 0", base()).is_err());
        assert!(parse_config("interp_factor = 2", base()).is_err());
        assert!(parse_config("taps = 0:0;64:0", base()).is_err());
        assert!(parse_config("order = 8", base()).is_err());
    }
}

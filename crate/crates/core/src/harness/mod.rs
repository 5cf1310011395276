//! Monte Carlo BER sweeps.
//!
//! Per frame: random bits → QAM → delay-Doppler channel → AWGN → MP
//! detection → bit errors. Every frame draws from its own ChaCha stream
//! keyed by `(master seed, Eb/N0, frame index)`, so results do not depend on
//! thread count or scheduling. Frames run in fixed-size parallel batches and
//! are accumulated in frame order; the stopping rule is checked after every
//! frame, which makes the outcome identical to a sequential run.

mod config;
mod csv;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    add_awgn, apply_dd, apply_tf, noise_variance, synth_four_tap, synth_rayleigh_taps, taps_to_dd, tf_to_dd,
    DDChannel,
};
use crate::detector::{mp_detect, vectorize};
use crate::error::{Error, Result};
use crate::qam::Alphabet;
use crate::trace::{gen_synth_trace, load_trace, SynthTraceParams, TraceChannel};
use crate::transforms::{isfft, sfft, Domain, SymbolGrid};

pub use config::{
    apply_setting, parse_config, parse_pairs, preset, suv_passby_scatterers, ChannelSource, SimConfig, TraceSource,
    PRESET_NAMES,
};
pub use csv::{format_record, CSV_HEADER};

const BATCH: u64 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub ebn0_db: f64,
    pub frames_run: u64,
    pub bits_transmitted: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub mean_iterations: f64,
    pub converged_fraction: f64,
}

/// Result of a single simulated frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameOutcome {
    pub bits: u64,
    pub bit_errors: u64,
    pub iterations: usize,
    pub converged: bool,
}

/// A validated config with its channel source loaded.
pub struct Simulation {
    config: SimConfig,
    alphabet: Alphabet,
    trace: Option<(TraceChannel, usize)>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let alphabet = Alphabet::new(config.order)?;
        let trace = match &config.channel {
            ChannelSource::Trace {
                source,
                start_frame,
                interp_factor,
            } => {
                let trace = match source {
                    TraceSource::File(path) => load_trace(path)?,
                    TraceSource::Synthetic(scatterers) => {
                        let params = SynthTraceParams {
                            carrier_hz: config.grid.carrier_hz(),
                            label: "suv pass-by proxy".into(),
                            ..Default::default()
                        };
                        gen_synth_trace(scatterers, &params, config.seed)?
                    }
                };
                Some((TraceChannel::new(&trace, config.grid, *interp_factor)?, *start_frame))
            }
            _ => None,
        };
        Ok(Self {
            config,
            alphabet,
            trace,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    fn frame_rng(&self, ebn0_db: f64, frame: u64) -> ChaCha8Rng {
        let key = splitmix64(self.config.seed ^ splitmix64(ebn0_db.to_bits()));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(frame);
        rng
    }

    /// Runs frame `frame` at `ebn0_db`.
    pub fn simulate_frame(&self, ebn0_db: f64, frame: u64) -> Result<FrameOutcome> {
        let cfg = &self.config;
        let (n, m) = (cfg.grid.n_delay(), cfg.grid.m_doppler());
        let mut rng = self.frame_rng(ebn0_db, frame);

        enum Chan {
            Dd(DDChannel),
            Tf(crate::channel::TFChannel, DDChannel),
        }
        let chan = match &cfg.channel {
            ChannelSource::FourTap => Chan::Dd(taps_to_dd(&synth_four_tap(&cfg.grid, &mut rng)?)),
            ChannelSource::RayleighTaps(offsets) => Chan::Dd(taps_to_dd(&synth_rayleigh_taps(n, m, offsets, &mut rng)?)),
            ChannelSource::Identity => Chan::Dd(DDChannel::identity(n, m)),
            ChannelSource::Trace { .. } => {
                let (tc, start) = self.trace.as_ref().expect("trace loaded in new");
                let idx = (*start as u64 + frame) % tc.frame_count() as u64;
                let h = tc.frame(idx as usize)?;
                let s = tf_to_dd(&h);
                Chan::Tf(h, s)
            }
        };

        let q = self.alphabet.order();
        let bps = self.alphabet.bits_per_symbol();
        let tx: Vec<usize> = (0..n * m).map(|_| rng.random_range(0..q)).collect();
        let x = SymbolGrid::from_vec(n, m, tx.iter().map(|&i| self.alphabet.point(i)).collect(), Domain::DelayDoppler)?;

        let (y, s_h) = match &chan {
            Chan::Dd(s) => (apply_dd(s, &x)?, s),
            // Dense trace channels: the TF route is O(NM log NM) and exactly equivalent.
            Chan::Tf(h, s) => (sfft(&apply_tf(h, &isfft(&x)?)?)?, s),
        };
        let y = add_awgn(&y, ebn0_db, &self.alphabet, &mut rng);

        let system = vectorize(s_h, cfg.tap_threshold)?.with_noise_variance(noise_variance(ebn0_db, bps))?;
        let out = mp_detect(&y, &system, &self.alphabet, &cfg.mp)?;
        let bit_errors = tx
            .iter()
            .zip(&out.decisions)
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum();
        Ok(FrameOutcome {
            bits: (n * m * bps) as u64,
            bit_errors,
            iterations: out.iterations,
            converged: out.converged,
        })
    }

    pub fn run_point(&self, ebn0_db: f64) -> Result<BerRecord> {
        let cfg = &self.config;
        let mut frames = 0u64;
        let mut bits = 0u64;
        let mut errors = 0u64;
        let mut iterations = 0u64;
        let mut converged = 0u64;

        'outer: while frames < cfg.max_frames {
            let end = (frames + BATCH).min(cfg.max_frames);
            let batch: Vec<Result<FrameOutcome>> = (frames..end)
                .into_par_iter()
                .map(|f| self.simulate_frame(ebn0_db, f))
                .collect();
            for outcome in batch {
                let o = outcome?;
                frames += 1;
                bits += o.bits;
                errors += o.bit_errors;
                iterations += o.iterations as u64;
                converged += o.converged as u64;
                if errors >= cfg.min_bit_errors {
                    break 'outer;
                }
            }
        }

        Ok(BerRecord {
            ebn0_db,
            frames_run: frames,
            bits_transmitted: bits,
            bit_errors: errors,
            ber: errors as f64 / bits as f64,
            mean_iterations: iterations as f64 / frames as f64,
            converged_fraction: converged as f64 / frames as f64,
        })
    }

    /// Runs every Eb/N0 point in order, passing each record to `sink` as soon
    /// as it is available.
    pub fn run_sweep_with<F>(&self, mut sink: F) -> Result<Vec<BerRecord>>
    where
        F: FnMut(&BerRecord) -> Result<()>,
    {
        let mut out = Vec::with_capacity(self.config.ebn0_list_db.len());
        for &ebn0 in &self.config.ebn0_list_db {
            let rec = self.run_point(ebn0)?;
            sink(&rec)?;
            out.push(rec);
        }
        Ok(out)
    }

    /// Sweep with CSV output, flushed after every row.
    pub fn run_sweep_csv<W: Write>(&self, mut w: W) -> Result<Vec<BerRecord>> {
        writeln!(w, "{CSV_HEADER}")?;
        w.flush()?;
        self.run_sweep_with(|rec| {
            writeln!(w, "{}", format_record(rec))?;
            w.flush().map_err(Error::from)
        })
    }
}

pub fn run_ber_point(config: &SimConfig, ebn0_db: f64) -> Result<BerRecord> {
    Simulation::new(config.clone())?.run_point(ebn0_db)
}

pub fn run_sweep(config: &SimConfig) -> Result<Vec<BerRecord>> {
    Simulation::new(config.clone())?.run_sweep_with(|_| Ok(()))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use otfs_core::harness::{apply_setting, format_record, parse_config, preset, Simulation, CSV_HEADER};
use otfs_core::trace::{
    correlation_stats, gen_synth_trace, load_trace, parse_scatterers_csv, save_trace, ChannelTrace,
    RhoStats, SynthTraceParams, TraceChannel,
};
use otfs_core::{Error, GridConfig};

const DEFAULT_PRESET: &str = "synth_viterbo";

#[derive(Parser)]
#[command(name = "otfs", version, about = "OTFS link-level simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER sweep and write one CSV row per Eb/N0 point.
    Simulate {
        /// Flat `key = value` config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Base preset; settings from --config and --set override it.
        #[arg(long)]
        preset: Option<String>,
        /// Extra `key=value` override, applied last. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resample a trace onto an OTFS grid and export one frame.
    Resample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        bandwidth: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long, default_value_t = 4)]
        interp_factor: usize,
        /// `.csv` writes `f,t,re,im` rows; anything else writes a trace file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic trace from a scatterer list.
    SynthTrace {
        /// CSV with `delay_s,doppler_hz,re,im` per line.
        #[arg(long)]
        scatterers: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4.96e6)]
        spacing: f64,
        #[arg(long, default_value_t = 102)]
        tones: usize,
        #[arg(long, default_value_t = 129.1e-6)]
        interval: f64,
        #[arg(long, default_value_t = 0.72)]
        duration: f64,
        #[arg(long, default_value_t = 60e9)]
        carrier: f64,
        #[arg(long, default_value_t = 0.0)]
        noise_variance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "synthetic")]
        label: String,
    },
    /// Print trace header metadata and snapshot correlation statistics.
    Info {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 3 } else { 2 })
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate {
            config,
            preset: preset_name,
            overrides,
            out,
        } => simulate(config.as_deref(), preset_name.as_deref(), &overrides, &out),
        Command::Resample {
            input,
            bandwidth,
            n,
            m,
            frame,
            interp_factor,
            out,
        } => resample(&input, bandwidth, n, m, frame, interp_factor, &out),
        Command::SynthTrace {
            scatterers,
            out,
            spacing,
            tones,
            interval,
            duration,
            carrier,
            noise_variance,
            seed,
            label,
        } => {
            let text = fs::read_to_string(&scatterers)?;
            let list = parse_scatterers_csv(&text)?;
            let params = SynthTraceParams {
                subcarrier_spacing_hz: spacing,
                n_tones: tones,
                snapshot_interval_s: interval,
                carrier_hz: carrier,
                duration_s: duration,
                noise_variance,
                label,
            };
            let trace = gen_synth_trace(&list, &params, seed)?;
            save_trace(&trace, &out)?;
            print_header(&trace);
            Ok(())
        }
        Command::Info { input } => {
            let trace = load_trace(&input)?;
            print_header(&trace);
            print_rho("snapshot rho", &correlation_stats(&trace)?);
            Ok(())
        }
    }
}

fn simulate(config: Option<&Path>, preset_name: Option<&str>, overrides: &[String], out: &Path) -> Result<(), Failure> {
    let base = preset(preset_name.unwrap_or(DEFAULT_PRESET))?;
    let mut cfg = match config {
        Some(path) => parse_config(&fs::read_to_string(path)?, base)?,
        None => base,
    };
    for kv in overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        apply_setting(&mut cfg, k.trim(), v.trim())?;
    }
    cfg.validate()?;

    let sim = Simulation::new(cfg)?;
    let mut w = BufWriter::new(File::create(out)?);
    writeln!(w, "{}", CSV_HEADER)?;
    sim.run_sweep_with(|r| {
        writeln!(w, "{}", format_record(r))?;
        w.flush()?;
        eprintln!(
            "Eb/N0 {:>6} dB: BER {:.3e} ({} errors / {} bits, {} frames)",
            r.ebn0_db, r.ber, r.bit_errors, r.bits_transmitted, r.frames_run
        );
        Ok(())
    })?;
    Ok(())
}

fn resample(
    input: &Path,
    bandwidth: f64,
    n: usize,
    m: usize,
    frame: usize,
    interp_factor: usize,
    out: &Path,
) -> Result<(), Failure> {
    let trace = load_trace(input)?;
    let grid = GridConfig::new(n, m, bandwidth, trace.carrier_hz())?;
    let tc = TraceChannel::new(&trace, grid, interp_factor)?;
    let h = tc.frame(frame)?;
    print_rho("source snapshot rho", &correlation_stats(&trace)?);
    println!("frames available: {}", tc.frame_count());

    let is_csv = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let mut w = BufWriter::new(File::create(out)?);
        writeln!(w, "f,t,re,im")?;
        for ((f, t), z) in h.h().indexed_iter() {
            writeln!(w, "{f},{t},{:e},{:e}", z.re, z.im)?;
        }
        w.flush()?;
    } else {
        let label = format!("{} | B={bandwidth} N={n} M={m} frame={frame}", trace.label());
        let framed = ChannelTrace::new(
            h.h().clone(),
            grid.subcarrier_spacing(),
            grid.slot_duration(),
            trace.carrier_hz(),
            label,
        )?;
        if m >= 2 {
            print_rho("frame slot rho", &correlation_stats(&framed)?);
        }
        save_trace(&framed, out)?;
    }
    Ok(())
}

fn print_header(trace: &ChannelTrace) {
    println!("label: {}", trace.label());
    println!("tones: {}", trace.n_tones());
    println!("snapshots: {}", trace.n_snapshots());
    println!("subcarrier spacing: {} Hz", trace.subcarrier_spacing_hz());
    println!("snapshot interval: {} s", trace.snapshot_interval_s());
    println!("carrier: {} Hz", trace.carrier_hz());
    println!("measured bandwidth: {} Hz", trace.measured_bandwidth_hz());
    println!("duration: {} s", trace.duration_s());
}

fn print_rho(what: &str, s: &RhoStats) {
    println!(
        "{what}: mean {:.6} median {:.6} min {:.6} over {} pairs",
        s.mean, s.median, s.min, s.pairs
    );
}

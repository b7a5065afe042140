//! `patchwork` command-line front end.
//!
//! Precedence for every setting: built-in default, then `--config` file,
//! then command-line flags.

mod commands;
mod config;
mod error;
mod frames;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use patchwork::eval::{EvalRange, Method};
use patchwork::io::PlyFormat;
use patchwork::Variant;

use crate::commands::Preset;
use crate::config::{Jobs, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "patchwork",
    version,
    about = "Ground segmentation for 3D LiDAR scans"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every randomized step (synthetic scenes, RANSAC).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Frames processed concurrently by segment and eval.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// uniform+U, czm+U, czm+U+E or czm+U+E+F.
    #[arg(long, global = true)]
    variant: Option<Variant>,
    /// patchwork or ransac.
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Print the resolved configuration and exit (same as `dump-config`).
    #[arg(long)]
    dump_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Segment scans and write colored PLY files.
    Segment(SegmentArgs),
    /// Score scans against SemanticKITTI labels.
    Eval(EvalArgs),
    /// Time segmentation of scans.
    Bench(BenchArgs),
    /// Generate labelled synthetic scans.
    Synth(SynthArgs),
    /// Print the resolved configuration as TOML.
    DumpConfig {
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlyArg {
    Ascii,
    Binary,
}

#[derive(Clone, Copy, ValueEnum)]
enum RangeArg {
    Segmentable,
    All,
}

#[derive(Args)]
struct SegmentArgs {
    /// `.bin` scan or directory of scans.
    #[arg(long)]
    input: Option<PathBuf>,
    /// `.label` file or directory; colors the PLY by TP/FP/FN/TN.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write `<frame>_bins.csv` with per-bin diagnostics.
    #[arg(long)]
    bin_csv: bool,
    #[arg(long, value_enum)]
    ply_format: Option<PlyArg>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Defaults to the input's directory.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Per-frame CSV; defaults to `eval.csv` in the output directory.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, value_enum)]
    range: Option<RangeArg>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    frames: usize,
    /// Index of the first frame; files are named `{index:06}.bin`.
    #[arg(long, default_value_t = 0)]
    first: usize,
    /// Built-in scene instead of the config's `[scene]` section.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Total points for a preset (default 50000); alone it implies `flat`.
    #[arg(long)]
    points: Option<usize>,
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.run.jobs = Jobs(j);
    }
    if let Some(v) = cli.variant {
        cfg.run.variant = v;
    }
    if let Some(m) = cli.method {
        cfg.run.method = m;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = build_config(&cli)?;
    let command = match cli.command {
        Some(c) => c,
        None if cli.dump_config => Command::DumpConfig { out: None },
        None => {
            return Err(CliError::Validation(
                "no subcommand given, see --help".into(),
            ))
        }
    };
    match &command {
        Command::Segment(a) => {
            if a.bin_csv {
                cfg.output.bin_csv = true;
            }
            if let Some(f) = a.ply_format {
                cfg.output.ply_format = match f {
                    PlyArg::Ascii => PlyFormat::Ascii,
                    PlyArg::Binary => PlyFormat::BinaryLittleEndian,
                };
            }
        }
        Command::Eval(a) => {
            if let Some(r) = a.range {
                cfg.eval.range = match r {
                    RangeArg::Segmentable => EvalRange::Segmentable,
                    RangeArg::All => EvalRange::All,
                };
            }
        }
        _ => {}
    }
    cfg.validate()?;
    match command {
        Command::Segment(a) => commands::segment(
            &cfg,
            commands::SegmentOpts {
                input: a.input,
                labels: a.labels,
                out: a.out,
            },
        ),
        Command::Eval(a) => commands::eval(
            &cfg,
            commands::EvalOpts {
                input: a.input,
                labels: a.labels,
                csv: a.csv,
            },
        ),
        Command::Bench(a) => commands::bench(
            &cfg,
            commands::BenchOpts {
                input: a.input,
                reps: a.reps,
                warmup: a.warmup,
            },
        ),
        Command::Synth(a) => commands::synth(
            &cfg,
            commands::SynthOpts {
                out: a.out,
                frames: a.frames,
                first: a.first,
                preset: a.preset,
                points: a.points,
            },
        ),
        Command::DumpConfig { out } => commands::dump_config(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or("")
                .trim_start_matches("error: ")
                .to_string();
            let err = CliError::Validation(first);
            eprintln!("{}", err.line());
            return err.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}

//! `farsight`: turbulence simulation, association, enrollment, scoring,
//! fusion, evaluation and benchmarking from the command line.
//!
//! Exit codes: 0 success, 2 invalid input, 3 I/O failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "farsight", version, about = "Long-range whole-body biometrics toolkit")]
struct Cli {
    /// Seed for every random draw; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration file (see README for the schema).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic walking-subject corpus with detections.
    Synth(SynthArgs),
    /// Degrade a directory of frames with simulated turbulence.
    Simulate(SimulateArgs),
    /// Associate faces with bodies in a detection file.
    Assoc(AssocArgs),
    /// Run the pipeline over videos and write a template store.
    Enroll(EnrollArgs),
    /// Cosine-score probe templates against gallery templates.
    Score(ScoreArgs),
    /// Fuse face, gait and body score tables.
    Fuse(FuseArgs),
    /// TAR@FAR, Rank-N and FNIR@FPIR for a score table.
    Eval(EvalArgs),
    /// Serialized per-module timing over 1080p and 4K footage.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    gallery_videos: Option<usize>,
    #[arg(long)]
    probe_videos: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("strength").required(true).args(["cn2", "d_over_r0"]))]
struct SimulateArgs {
    /// Directory of frames (png, pgm, ppm).
    #[arg(long = "in")]
    input: PathBuf,
    /// Refractive-index structure parameter; D/r0 is derived from it.
    #[arg(long)]
    cn2: Option<f64>,
    /// Turbulence strength given directly.
    #[arg(long)]
    d_over_r0: Option<f64>,
    #[arg(long)]
    grid_spacing: Option<u32>,
    #[arg(long)]
    psf_size: Option<usize>,
}

#[derive(Debug, Args)]
struct AssocArgs {
    /// Detection JSON, or a video directory containing `detections.json`.
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Probe,
    Gallery,
}

#[derive(Debug, Args)]
struct EnrollArgs {
    /// A video directory, or a directory of video directories.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "probe")]
    mode: ModeArg,
    /// Degrade frames with simulated turbulence before encoding.
    #[arg(long)]
    simulate: bool,
    /// Store file name inside the output directory.
    #[arg(long, default_value = "templates.fstb")]
    store: String,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    probe: PathBuf,
    #[arg(long)]
    gallery: PathBuf,
}

#[derive(Debug, Args)]
struct FuseArgs {
    #[arg(long)]
    face: PathBuf,
    #[arg(long)]
    gait: PathBuf,
    #[arg(long)]
    body: PathBuf,
    /// Face, gait and body weights; must sum to 1.
    #[arg(long, num_args = 3, value_names = ["FACE", "GAIT", "BODY"])]
    weights: Option<Vec<f64>>,
    /// Score substituted for a missing modality.
    #[arg(long)]
    impute: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Score table CSV (probes by gallery).
    #[arg(long)]
    scores: PathBuf,
    /// JSON object mapping probe id to gallery id, or null for non-mated probes.
    #[arg(long)]
    mates: PathBuf,
    #[arg(long)]
    far: Option<f64>,
    #[arg(long)]
    fpir: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Directory with one video per resolution name; synthesized when absent.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Frames per 4K video; 1080p gets twice as many.
    #[arg(long)]
    frames_4k: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] farsight_core::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 3,
            CliError::Core(e) if e.is_io() => 3,
            _ => 2,
        }
    }
}

/// Lifts any module error into [`CliError`] through the core error type.
pub fn core<E: Into<farsight_core::Error>>(e: E) -> CliError {
    CliError::Core(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.apply_seed(seed);
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Synth(a) => {
            let mut s = cfg.synth;
            s.subjects = a.subjects.unwrap_or(s.subjects);
            s.gallery_videos_per_subject = a.gallery_videos.unwrap_or(s.gallery_videos_per_subject);
            s.probe_videos_per_subject = a.probe_videos.unwrap_or(s.probe_videos_per_subject);
            s.frames_per_video = a.frames.unwrap_or(s.frames_per_video);
            s.width = a.width.unwrap_or(s.width);
            s.height = a.height.unwrap_or(s.height);
            commands::synth(&s, out)
        }
        Command::Simulate(a) => {
            let mut t = cfg.pipeline.turbulence;
            if let Some(c) = a.cn2 {
                t.cn2 = c;
                t.d_over_r0 = None;
            }
            if a.d_over_r0.is_some() {
                t.d_over_r0 = a.d_over_r0;
            }
            t.grid_spacing = a.grid_spacing.unwrap_or(t.grid_spacing);
            let psf_size = a.psf_size.unwrap_or(cfg.pipeline.psf_size);
            commands::simulate(&a.input, out, &t, psf_size)
        }
        Command::Assoc(a) => commands::assoc(&a.input, out, &cfg.pipeline.assoc),
        Command::Enroll(a) => {
            let mut p = cfg.pipeline;
            p.mode = match a.mode {
                ModeArg::Probe => farsight_core::pipeline::Mode::Probe,
                ModeArg::Gallery => farsight_core::pipeline::Mode::Gallery,
            };
            p.simulate |= a.simulate;
            commands::enroll(&a.input, out, &a.store, &p)
        }
        Command::Score(a) => commands::score(&a.probe, &a.gallery, out),
        Command::Fuse(a) => {
            let mut f = cfg.pipeline.fusion;
            if let Some(w) = a.weights {
                f.modality_weights = [w[0], w[1], w[2]];
            }
            f.imputed_value = a.impute.unwrap_or(f.imputed_value);
            commands::fuse(&a.face, &a.gait, &a.body, out, &f)
        }
        Command::Eval(a) => {
            let mut e = cfg.eval;
            e.far_target = a.far.unwrap_or(e.far_target);
            e.fpir_target = a.fpir.unwrap_or(e.fpir_target);
            if let Some(r) = a.ranks {
                e.ranks = r;
            }
            commands::eval(&a.scores, &a.mates, out, &e)
        }
        Command::Bench(a) => {
            let mut b = cfg.bench;
            if a.corpus.is_some() {
                b.corpus_dir = a.corpus;
            }
            if let Some(n) = a.frames_4k {
                for r in &mut b.resolutions {
                    r.frames = if r.height >= 2160 { n } else { 2 * n };
                }
            }
            commands::bench(&b, out)
        }
    }
}

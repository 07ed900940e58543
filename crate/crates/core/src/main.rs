use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use choreokit::audio::load_audio;
use choreokit::config::{ConfigLayer, Settings};
use choreokit::crossmodal::{load_model, save_model};
use choreokit::pipeline::{self, DemoSpec};
use choreokit::pose::{load_database, load_keypoint_sequence, save_database, save_keypoint_sequence};
use choreokit::render::{export_gif, plot_beat_alignment, render_video, RenderStyle};
use choreokit::Error;

#[derive(Parser)]
#[command(name = "choreokit", version, about = "Music-driven dance skeleton synthesis")]
struct Cli {
    /// TOML file of settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

/// Settings that may be given on any subcommand.
#[derive(Args, Default)]
struct Flags {
    #[arg(long, global = true)]
    fps: Option<u32>,
    /// Fragment length in seconds.
    #[arg(long, global = true)]
    duration: Option<u32>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    dropout: Option<f64>,
    /// Embedding dimension.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// Discontinuity threshold for spatial alignment, px.
    #[arg(long, global = true)]
    disc_threshold: Option<f64>,
    /// Volatility threshold for period detection.
    #[arg(long = "tsd-th", global = true)]
    tsd_threshold: Option<f64>,
    /// Beat-match tolerance for S_BA, frames.
    #[arg(long, global = true)]
    tolerance: Option<usize>,
    #[arg(long, global = true)]
    omega_a: Option<usize>,
    #[arg(long, global = true)]
    omega_b: Option<usize>,
    /// Beat window in frames; 0 uses the median beat spacing.
    #[arg(long, global = true)]
    omega_c: Option<usize>,
    #[arg(long, global = true)]
    width: Option<u32>,
    #[arg(long, global = true)]
    height: Option<u32>,
}

impl Flags {
    fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            fps: self.fps,
            duration_s: self.duration,
            seed: self.seed,
            epochs: self.epochs,
            lr: self.lr,
            dropout: self.dropout,
            dim: self.dim,
            disc_threshold: self.disc_threshold,
            tsd_threshold: self.tsd_threshold,
            beat_tolerance: self.tolerance,
            omega_a: self.omega_a,
            omega_b: self.omega_b,
            omega_c: self.omega_c,
            render_width: self.width,
            render_height: self.height,
            ..ConfigLayer::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Clean, segment and normalise a directory of keypoint + WAV pairs into a fragment database.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        db: PathBuf,
    },
    /// Train the audio/pose embedding on a directory of keypoint + WAV pairs.
    Train {
        /// Directory of keypoint + WAV pairs.
        #[arg(long, alias = "input")]
        pairs: PathBuf,
        /// Model file to write.
        #[arg(long, alias = "model")]
        out: PathBuf,
        /// Sources (last by name) kept out of training and used for accuracy.
        #[arg(long, default_value_t = 0)]
        holdout: usize,
    },
    /// Produce a pose sequence for an audio file.
    Generate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Emit the plain concatenation of retrieved fragments.
        #[arg(long)]
        skip_align: bool,
        /// Also render frames into this directory.
        #[arg(long)]
        render: Option<PathBuf>,
    },
    /// Score a pose sequence against its audio and a reference database.
    Eval {
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        audio: PathBuf,
        /// Reference keypoint file; repeatable.
        #[arg(long = "ref", required_unless_present = "db")]
        references: Vec<PathBuf>,
        /// Use every fragment of this database as reference motion.
        #[arg(long)]
        db: Option<PathBuf>,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Draw a pose sequence as numbered PNG frames.
    Render {
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        gif: Option<PathBuf>,
        /// Also draw the beat-alignment plot for this audio.
        #[arg(long)]
        audio: Option<PathBuf>,
    },
    /// Synthetic corpus through ingest, train, generate, eval and render.
    Demo {
        #[arg(long, default_value = "demo_out")]
        out: PathBuf,
        /// Skip frame rendering.
        #[arg(long)]
        no_render: bool,
    },
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::Numerical(_)) => Failure::Numerical(e),
            _ => Failure::Data(e),
        }
    }
}

fn settings(cli: &Cli, base: ConfigLayer) -> Result<Settings, Failure> {
    let file = match &cli.config {
        Some(p) => Some(ConfigLayer::load(p).with_context(|| format!("reading config {}", p.display())).map_err(Failure::Usage)?),
        None => None,
    };
    let file = base.overlay(&file.unwrap_or_default());
    Settings::resolve(Some(&file), &cli.flags.layer()).context("invalid settings").map_err(Failure::Usage)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Ingest { input, db } => {
            let s = settings(&cli, ConfigLayer::default())?;
            let report = pipeline::ingest_dir(input, &s).with_context(|| format!("ingesting {}", input.display()))?;
            for f in &report.files {
                println!(
                    "{}: {} frames, {} removed, {} runs, {} fragments, {} degenerate",
                    f.source_id, f.frames, f.removed_frames, f.runs, f.fragments, f.degenerate_fragments
                );
            }
            for (p, why) in &report.failures {
                eprintln!("skipped {}: {why}", p.display());
            }
            save_database(&report.database, db)?;
            println!("{} fragments -> {}", report.database.len(), db.display());
        }
        Command::Train { pairs, out, holdout } => {
            let s = settings(&cli, ConfigLayer::default())?;
            let report = pipeline::train_from_dir(pairs, &s, *holdout).with_context(|| format!("training on {}", pairs.display()))?;
            for (p, why) in &report.failures {
                eprintln!("skipped {}: {why}", p.display());
            }
            save_model(&report.model, out)?;
            println!("pairs: {}, final loss: {:.4}", report.train_pairs, report.loss_history.last().copied().unwrap_or(f64::NAN));
            println!("train correlation accuracy: {:.3}", report.train_accuracy);
            if let Some(acc) = report.holdout_accuracy {
                println!("held-out correlation accuracy: {acc:.3} ({} pairs)", report.holdout_pairs);
            }
        }
        Command::Generate { model, db, audio, out, skip_align, render } => {
            let s = settings(&cli, ConfigLayer::default())?;
            let model = load_model(model)?;
            let db = load_database(db)?;
            let clip = load_audio(audio)?;
            let g = pipeline::generate(&model, &db, &clip, &s, *skip_align)?;
            save_keypoint_sequence(&g.poses, out)?;
            println!("{} frames from {} fragments -> {}", g.poses.len(), g.retrieved.len(), out.display());
            if let Some(dir) = render {
                render_video(&g.poses, dir, g.poses.fps, (s.render_width, s.render_height), &RenderStyle::default())?;
            }
        }
        Command::Eval { poses, audio, references, db, report: report_path } => {
            let s = settings(&cli, ConfigLayer::default())?;
            let seq = load_keypoint_sequence(poses)?;
            let clip = load_audio(audio)?;
            let mut refs = references.iter().map(load_keypoint_sequence).collect::<Result<Vec<_>, _>>()?;
            if let Some(db) = db {
                refs.extend(pipeline::database_sequences(&load_database(db)?));
            }
            let report = pipeline::evaluate(&seq, &clip, &refs, &s)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?);
            if let Some(p) = report_path {
                write_json(p, &report)?;
            }
        }
        Command::Render { poses, out, gif, audio } => {
            let s = settings(&cli, ConfigLayer::default())?;
            let seq = load_keypoint_sequence(poses)?;
            let canvas = (s.render_width, s.render_height);
            let style = RenderStyle::default();
            let manifest = render_video(&seq, out, seq.fps, canvas, &style)?;
            if let Some(g) = gif {
                export_gif(&seq, g, seq.fps, canvas, &style)?;
            }
            if let Some(a) = audio {
                let beats = choreokit::audio::detect_beats(&load_audio(a)?, seq.fps)?;
                plot_beat_alignment(&beats, &seq, out.join("beats.png"))?;
            }
            println!("{} frames -> {}", manifest.frame_count, out.display());
        }
        Command::Demo { out, no_render } => {
            let base = ConfigLayer { epochs: Some(40), render_width: Some(480), render_height: Some(270), ..ConfigLayer::default() };
            let s = settings(&cli, base)?;
            let spec = DemoSpec { render: !no_render, ..DemoSpec::default() };
            let d = pipeline::run_demo(out, &s, &spec)?;
            println!("ingested {} fragments from {} sources", d.fragments, d.ingest.len());
            println!("trained on {} pairs, correlation accuracy {:.3}", d.train_pairs, d.train_accuracy);
            println!("generated {} frames", d.generated_frames);
            println!("{}", serde_json::to_string_pretty(&d.report).map_err(anyhow::Error::from)?);
        }
    }
    Ok(())
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(anyhow::Error::from(e))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Usage(e) | Failure::Data(e) | Failure::Numerical(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

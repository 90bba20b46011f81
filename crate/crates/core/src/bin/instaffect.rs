use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use instaffect::pipeline::{self, check_leakage, Pipeline, PipelineConfig};
use instaffect::{Error, Result};

/// Frame-by-frame emotion prediction: stream CNN features, mRMR selection
/// and epsilon-SVR regression.
#[derive(Debug, Parser)]
#[command(name = "instaffect", version)]
struct Cli {
    /// TOML pipeline config (defaults to the built-in desk-scale config).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config work directory.
    #[arg(long, global = true)]
    work_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus.
    GenerateSynthetic {
        #[arg(long)]
        subjects: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
        /// Number of leading subjects used for training.
        #[arg(long)]
        train: Option<usize>,
        /// Output directory (defaults to the config corpus path).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a corpus and print per-subject frame counts.
    IngestCheck {
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Train the video and audio stream CNNs.
    TrainCnn,
    /// Extract 1024-wide features for the training subjects.
    Extract,
    /// Rank features by mRMR on low-variation training windows.
    Select,
    /// Choose feature length and SVR hyperparameters, then fit the SVR.
    FitSvr,
    /// Predict every frame of the test subjects.
    Predict,
    /// Score predictions (RMSE, MAE, CC, CCC).
    Evaluate,
    /// Check that no test-subject frame was read before predict.
    Audit,
    /// Write `t,truth,prediction` plot data.
    EmitTrace {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        ratings: PathBuf,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = &cli.work_dir {
        cfg.work_dir = w.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::GenerateSynthetic {
            subjects,
            frames,
            train,
            out,
        } => {
            let s = &mut cfg.synthetic;
            s.subjects = subjects.unwrap_or(s.subjects);
            s.frames = frames.unwrap_or(s.frames);
            s.train_subjects = train.unwrap_or(s.train_subjects);
            let root = out.unwrap_or_else(|| cfg.corpus_dir());
            let m = pipeline::generate_synthetic(&root, &cfg.synthetic, cfg.seed)?;
            println!(
                "wrote {} subjects ({} train, {} test) to {}",
                m.subjects.len(),
                m.train.len(),
                m.test.len(),
                root.display()
            );
        }
        Command::IngestCheck { corpus } => {
            let root = corpus.unwrap_or_else(|| cfg.corpus_dir());
            let (_, summary) = pipeline::ingest(&root)?;
            println!("subject,split,frames,height,width,audio_samples");
            for s in summary {
                println!(
                    "{},{},{},{},{},{}",
                    s.subject, s.split, s.frames, s.height, s.width, s.audio_samples
                );
            }
        }
        Command::TrainCnn => Pipeline::new(cfg)?.train_cnn()?,
        Command::Extract => Pipeline::new(cfg)?.extract()?,
        Command::Select => Pipeline::new(cfg)?.select()?,
        Command::FitSvr => Pipeline::new(cfg)?.fit_svr()?,
        Command::Predict => Pipeline::new(cfg)?.predict()?,
        Command::Evaluate => {
            let rows = Pipeline::new(cfg)?.evaluate()?;
            println!("scope,{}", instaffect::metrics::EvalReport::CSV_HEADER);
            for (scope, r) in rows {
                println!("{scope},{}", r.csv_row());
            }
        }
        Command::Audit => {
            let p = Pipeline::new(cfg)?;
            let report = check_leakage(p.workspace().root(), p.corpus()?.manifest())?;
            println!(
                "{} frame accesses recorded before predict, {} on test subjects",
                report.records, report.test_frames_touched
            );
            if !report.is_clean() {
                return Err(Error::Leakage(format!(
                    "test-subject frames read before predict, e.g. {:?}",
                    report.examples.first()
                )));
            }
        }
        Command::EmitTrace {
            predictions,
            ratings,
            out,
        } => {
            let csv = pipeline::emit_trace(&predictions, &ratings)?;
            match out {
                Some(p) => std::fs::write(&p, csv).map_err(|e| Error::Io { path: p, source: e })?,
                None => std::io::stdout().write_all(csv.as_bytes()).map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

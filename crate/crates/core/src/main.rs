use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use audiocap::pipeline::{self, RunConfig, Split};
use audiocap::{Error, Result};

#[derive(Parser)]
#[command(name = "audiocap", version, about = "Audio captioning with acoustic event clues")]
struct Cli {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, env = "CAPTIONER_SEED")]
    seed: Option<u64>,
    /// Recompute outputs that already exist.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads for per-clip work (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, overriding `paths.out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract one feature vector per clip.
    Features,
    /// Threshold tagger scores into event vocabularies and one-hot vectors.
    Events {
        /// Comma-separated thresholds (default: `event_thresholds`).
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
    },
    /// Train the captioner and keep the best epoch.
    Train,
    /// Greedy-decode captions for a split.
    Caption {
        #[arg(long, default_value = "evaluation")]
        split: Split,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score candidate captions against manifest references.
    Evaluate {
        #[arg(long, default_value = "evaluation")]
        split: Split,
        /// Candidates file (default: this run's captions for the split).
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Reference manifest (default: the split's manifest).
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Sweep thresholds × embeddings × batch sizes.
    Ablate,
    /// Split the development manifest into training and validation parts.
    SplitDev {
        #[arg(long)]
        train_size: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.model.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.paths.out_dir = out;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match cli.command {
        Command::Features => {
            let s = pipeline::cmd_features(&cfg, cli.force)?;
            println!("{} clips: {} written, {} skipped", s.clips, s.written, s.skipped);
        }
        Command::Events { thresholds } => {
            let ts = if thresholds.is_empty() { cfg.event_thresholds.clone() } else { thresholds };
            for s in pipeline::cmd_events(&cfg, &ts, cli.force)? {
                println!("t={}  K={}", s.threshold, s.k);
            }
        }
        Command::Train => {
            let r = pipeline::cmd_train(&cfg)?;
            println!("best epoch {} loss {:.5}", r.best_epoch, r.best_loss);
        }
        Command::Caption { split, checkpoint } => {
            let path = pipeline::cmd_caption(&cfg, split, checkpoint.as_deref())?;
            println!("{}", path.display());
        }
        Command::Evaluate { split, candidates, manifest } => {
            let report = match (candidates, manifest) {
                (None, None) => pipeline::evaluate_split(&cfg, split)?,
                (c, m) => {
                    let c = c.unwrap_or_else(|| cfg.captions_path(split));
                    let m = match m.or_else(|| cfg.manifest(split).map(PathBuf::from)) {
                        Some(m) => m,
                        None => return Err(Error::InvalidArgument(format!("no {split} manifest configured"))),
                    };
                    pipeline::cmd_evaluate(&c, &m, &cfg.eval_dir(split))?
                }
            };
            print!("{}", report.table());
        }
        Command::Ablate => {
            for r in pipeline::cmd_ablate(&cfg)? {
                let scores: Vec<String> = r.report.iter().flat_map(|m| m.values()).map(|v| format!("{v:.4}")).collect();
                println!("{:<28} {}", r.label, scores.join(" "));
            }
        }
        Command::SplitDev { train_size } => {
            if let Some(n) = train_size {
                cfg.split_train_size = n;
            }
            let s = pipeline::cmd_split_dev(&cfg)?;
            println!("{} train / {} validation (seed {})", s.train.len(), s.validation.len(), s.seed);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}

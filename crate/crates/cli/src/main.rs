use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deligan::data::ToySpec;
use deligan::gan::Variant;
use deligan_cli::commands::{self, EvalInput};
use deligan_cli::error::{CliError, EXIT_INPUT};
use deligan_cli::plot::render_svg;
use deligan_cli::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "deligan",
    version,
    about = "Train and evaluate mixture-latent GANs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model; writes checkpoint.json, history.csv and mu_snapshots.csv.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Run directory; overrides the config `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw samples from a trained checkpoint.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inception score and modified inception score of a sample file.
    Eval {
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Classifier checkpoint from the `classifier` command.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Class-probability table to score directly instead of samples.
        #[arg(long)]
        probs: Option<PathBuf>,
        #[arg(long, default_value_t = deligan::metrics::DEFAULT_SPLITS)]
        splits: usize,
        #[arg(long, default_value_t = deligan::metrics::DEFAULT_PAIRS_PER_SAMPLE)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scatter plot of 2-D samples as SVG.
    Plot {
        #[arg(long)]
        samples: PathBuf,
        /// `unimodal` or `bimodal` truth overlay.
        #[arg(long)]
        truth: Option<String>,
        /// Take the truth overlay from a toy config instead.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Model checkpoint whose mixture means are marked.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 3.0)]
        radius: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nearest training rows for each sample.
    NnGrid {
        #[arg(long)]
        samples: PathBuf,
        /// Training data CSV.
        #[arg(long, conflicts_with = "config")]
        train: Option<PathBuf>,
        /// Take training data from an experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train several variants and seeds in parallel (DELIGAN_THREADS caps workers).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated; all six by default.
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<Variant>>,
        /// Comma-separated; the config seed by default.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the scoring classifier on the config's labelled data.
    Classifier {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let dir = out.or_else(|| cfg.out.clone()).ok_or_else(|| {
                CliError::input("no run directory: pass --out or set `out` in the config")
            })?;
            let o = commands::cmd_train(&cfg, &dir)?;
            let p = o.model.param_report();
            println!(
                "trained {} for {} iterations ({} generator, {} latent, {} discriminator parameters) -> {}",
                cfg.variant,
                o.history.records.len(),
                p.generator,
                p.latent,
                p.discriminator,
                o.dir.display()
            );
        }
        Command::Sample {
            checkpoint,
            n,
            seed,
            out,
        } => {
            commands::cmd_sample(&checkpoint, n, seed, &out)?;
            println!("wrote {n} samples to {}", out.display());
        }
        Command::Eval {
            samples,
            checkpoint,
            probs,
            splits,
            pairs,
            seed,
            out,
        } => {
            let input = EvalInput {
                samples: samples.as_deref(),
                classifier: checkpoint.as_deref(),
                probs: probs.as_deref(),
                splits,
                pairs,
                seed,
            };
            for r in commands::cmd_eval(&input, &out)? {
                for note in &r.notes {
                    eprintln!("note: {note}");
                }
                println!("{}: {:.4} ± {:.4}", r.metric, r.overall.mean, r.overall.std);
            }
        }
        Command::Plot {
            samples,
            truth,
            config,
            checkpoint,
            radius,
            out,
        } => {
            let x = commands::read_samples(&samples)?;
            if x.cols() != 2 {
                return Err(CliError::input(format!(
                    "plot needs 2-D samples, got {} columns",
                    x.cols()
                )));
            }
            let spec = match (truth.as_deref(), config) {
                (Some("unimodal"), _) => Some(ToySpec::unimodal()),
                (Some("bimodal"), _) => Some(ToySpec::bimodal()),
                (Some(other), _) => {
                    return Err(CliError::input(format!("unknown truth `{other}`")))
                }
                (None, Some(c)) => ExperimentConfig::load(&c)?.toy_spec(),
                (None, None) => None,
            };
            let mu = match checkpoint {
                Some(c) => commands::load_gan(&c)?
                    .mixture()
                    .map(|m| m.mu().value().clone()),
                None => None,
            };
            if mu.as_ref().is_some_and(|m| m.cols() != 2) {
                return Err(CliError::input("mixture means are not 2-D"));
            }
            fs::write(&out, render_svg(&x, spec.as_ref(), mu.as_ref(), radius))?;
            println!("wrote {}", out.display());
        }
        Command::NnGrid {
            samples,
            train,
            config,
            k,
            out,
        } => {
            let x = commands::read_samples(&samples)?;
            let pool = match (train, config) {
                (Some(t), _) => commands::read_samples(&t)?,
                (None, Some(c)) => {
                    let cfg = ExperimentConfig::load(&c)?;
                    cfg.dataset(&deligan::rng::Streams::new(cfg.seed))?.samples
                }
                (None, None) => return Err(CliError::input("nn-grid needs --train or --config")),
            };
            commands::cmd_nn_grid(&x, &pool, k, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Sweep {
            config,
            variants,
            seeds,
            out,
        } => {
            let cfg = load_config(&config, None)?;
            let variants = variants.unwrap_or_else(|| Variant::ALL.to_vec());
            let seeds = seeds.unwrap_or_else(|| vec![cfg.seed]);
            let rows = commands::cmd_sweep(&cfg, &variants, &seeds, &out)?;
            for r in &rows {
                let cov = r
                    .coverage
                    .as_ref()
                    .map(|c| format!(" covered {} void {:.3}", c.covered_modes, c.void_fraction))
                    .unwrap_or_default();
                println!("{} seed {}: {}{cov}", r.variant, r.seed, r.status);
            }
            if rows.iter().any(|r| r.status != "completed") {
                return Err(CliError::new(
                    deligan_cli::error::EXIT_DIVERGED,
                    "some runs diverged; see sweep.csv",
                ));
            }
        }
        Command::Classifier { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let clf = commands::cmd_classifier(&cfg, &out)?;
            println!(
                "classifier held-out accuracy {:.4} (floor {:.2}) -> {}",
                clf.heldout_accuracy(),
                clf.accuracy_floor(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

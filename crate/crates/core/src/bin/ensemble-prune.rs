use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ensemble_prune::cli::{
    cmd_arch, cmd_prune, cmd_train, cmd_xor_experiment, ArchArgs, ArchSource, PruneArgs, TrainArgs,
    XorExperimentArgs, OUT_DIR_ENV,
};
use ensemble_prune::config::KeyValues;
use ensemble_prune::nn::MaskPosition;
use ensemble_prune::Result;

/// Structured pruning with linear filter ensembles.
#[derive(Parser)]
#[command(name = "ensemble-prune", version, after_help = format!("Relative output paths are resolved against ${OUT_DIR_ENV} when it is set."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` override (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a fresh network and write a checkpoint.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// fcnN, toy-cnn, tiny-resnet or tiny-resnet-after.
        #[arg(long)]
        model: Option<String>,
        /// xor or blobs.
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Constant learning rate (replaces the model's default schedule).
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Prune a checkpoint layer by layer and write the pruned checkpoint and a CSV report.
    Prune {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Maximum validation accuracy drop per layer.
        #[arg(long)]
        alpha: Option<f64>,
        /// forward or backward.
        #[arg(long)]
        direction: Option<String>,
        /// Stop once this fraction of parameters is removed.
        #[arg(long)]
        target: Option<f64>,
        /// before or after (the residual shortcut).
        #[arg(long)]
        mask_position: Option<String>,
        #[arg(long)]
        finetune_epochs: Option<usize>,
        #[arg(long)]
        retrain_epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Repeat seeded XOR trials and report the success rate with a 95% interval.
    XorExperiment {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// train, one-shot, iterative or random.
        #[arg(long = "type", default_value = "iterative")]
        kind: String,
        /// Hidden width (pruning trials need 10).
        #[arg(long, default_value_t = 10)]
        hidden: usize,
        #[arg(long)]
        seed: u64,
        /// Write per-trial accuracies here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print parameter and FLOP counts of an architecture, or the reduction between two.
    Arch {
        /// Built-in architecture, e.g. resnet20-cifar.
        #[arg(long, conflicts_with = "file")]
        preset: Option<String>,
        /// Descriptor file.
        #[arg(long)]
        file: Option<PathBuf>,
        /// Mask position used by presets.
        #[arg(long, default_value = "before")]
        position: MaskPosition,
        /// Descriptor to compare against.
        #[arg(long)]
        diff: Option<PathBuf>,
        /// Comma-separated filter removals per layer.
        #[arg(long, value_delimiter = ',', conflicts_with = "diff")]
        removals: Option<Vec<usize>>,
    },
}

fn settings(config: &ConfigArgs, flags: &[(&str, Option<String>)]) -> Result<KeyValues> {
    let mut kv = match &config.config {
        Some(p) => KeyValues::load(p)?,
        None => KeyValues::new(),
    };
    for (k, v) in flags {
        if let Some(v) = v {
            kv.set(k, v.clone());
        }
    }
    kv.apply_overrides(&config.overrides)?;
    Ok(kv)
}

fn show<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(T::to_string)
}

fn path(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|p| p.display().to_string())
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Train {
            config,
            model,
            data,
            samples,
            epochs,
            lr,
            seed,
            out,
        } => {
            let kv = settings(
                &config,
                &[
                    ("model", model),
                    ("data", data),
                    ("samples", show(&samples)),
                    ("epochs", show(&epochs)),
                    ("lr", show(&lr)),
                    ("seed", show(&seed)),
                    ("out", path(&out)),
                ],
            )?;
            cmd_train(&TrainArgs::from_config(&kv)?)
        }
        Command::Prune {
            config,
            checkpoint,
            alpha,
            direction,
            target,
            mask_position,
            finetune_epochs,
            retrain_epochs,
            seed,
            out,
            report,
        } => {
            let kv = settings(
                &config,
                &[
                    ("checkpoint", path(&checkpoint)),
                    ("alpha", show(&alpha)),
                    ("direction", direction),
                    ("target", show(&target)),
                    ("mask_position", mask_position),
                    ("finetune_epochs", show(&finetune_epochs)),
                    ("retrain_epochs", show(&retrain_epochs)),
                    ("seed", show(&seed)),
                    ("out", path(&out)),
                    ("report", path(&report)),
                ],
            )?;
            cmd_prune(&PruneArgs::from_config(&kv)?)
        }
        Command::XorExperiment {
            trials,
            kind,
            hidden,
            seed,
            csv,
        } => cmd_xor_experiment(&XorExperimentArgs {
            trials,
            kind: kind.parse()?,
            hidden,
            seed,
            csv,
        }),
        Command::Arch {
            preset,
            file,
            position,
            diff,
            removals,
        } => {
            let source = match (preset, file) {
                (_, Some(f)) => ArchSource::File(f),
                (Some(p), None) => ArchSource::Preset(p),
                (None, None) => ArchSource::Preset("resnet20-cifar".into()),
            };
            cmd_arch(&ArchArgs {
                source,
                position,
                diff,
                removals,
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            println!("{}", text.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

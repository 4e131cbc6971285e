//! Subcommand implementations behind the `ensemble-prune` binary. Argument
//! parsing lives in the binary; these functions take resolved settings and
//! return the text they would print.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::KeyValues;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::experiment::{run_trials, TrialKind};
use crate::importance::ImportanceConfig;
use crate::metrics::{diff_metrics, preset_with_position, render_diff, render_table, ArchDescriptor};
use crate::models::{DataSpec, ModelSpec, BLOB_CHANNELS, BLOB_HW};
use crate::nn::{checkpoint, train, LrSchedule, MaskPosition, Network, TrainConfig};
use crate::pruner::{prune_network, PruneConfig, PruningType, Stopping, XorTrialConfig};
use crate::rng::SeedStream;

/// Environment variable that, when set, is the base directory for relative
/// output paths.
pub const OUT_DIR_ENV: &str = "ENSEMBLE_PRUNE_OUT_DIR";

/// Resolves a relative output path against `$ENSEMBLE_PRUNE_OUT_DIR` and
/// creates missing parent directories.
pub fn output_path(path: &Path) -> Result<PathBuf> {
    let full = match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    };
    if let Some(parent) = full.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(full)
}

/// Train/validation data regenerated from the run seed, so `train` and
/// `prune` invoked with the same seed see the same samples.
pub fn run_data(spec: DataSpec, samples: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let seeds = SeedStream::new(seed);
    let full = spec.generate(samples, &mut seeds.named("data").rng())?;
    Ok(full.split(0.8, &mut seeds.named("split").rng()))
}

pub fn default_samples(spec: DataSpec) -> usize {
    match spec {
        DataSpec::Xor => 1000,
        DataSpec::Blobs => 800,
    }
}

/// Dataset matching a checkpoint's input shape.
pub fn data_for_network(net: &Network) -> Result<DataSpec> {
    match net.input_shape() {
        [2] => Ok(DataSpec::Xor),
        [c, h, w] if *c == BLOB_CHANNELS && *h == BLOB_HW && *w == BLOB_HW => Ok(DataSpec::Blobs),
        other => Err(Error::InvalidConfig(format!(
            "no built-in dataset matches input shape {other:?}"
        ))),
    }
}

/// Default training recipe for a model family.
pub fn default_train_config(spec: ModelSpec) -> TrainConfig {
    match spec {
        ModelSpec::Fcn(_) => TrainConfig::new(200, LrSchedule::Constant(0.004)),
        _ => TrainConfig::new(
            30,
            LrSchedule::Step {
                base: 0.05,
                every: 10,
                gamma: 0.3,
            },
        ),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainArgs {
    pub model: ModelSpec,
    pub data: DataSpec,
    pub samples: usize,
    pub train: TrainConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl TrainArgs {
    /// Settings from `key = value` pairs: `model`, `data`, `samples`,
    /// `epochs`, `lr`, `batch_size`, `momentum`, `seed`, `out`.
    pub fn from_config(kv: &KeyValues) -> Result<Self> {
        let model: ModelSpec = kv.get_or("model", ModelSpec::Fcn(10))?;
        let data: DataSpec = kv.get_or("data", model.default_data())?;
        let mut train = default_train_config(model);
        if let Some(e) = kv.get("epochs")? {
            train.epochs = e;
        }
        if let Some(lr) = kv.get("lr")? {
            train.schedule = LrSchedule::Constant(lr);
        }
        train.batch_size = kv.get_or("batch_size", train.batch_size)?;
        train.momentum = kv.get_or("momentum", train.momentum)?;
        Ok(Self {
            model,
            data,
            samples: kv.get_or("samples", default_samples(data))?,
            train,
            seed: kv.get_or("seed", 0)?,
            out: kv.get_or("out", PathBuf::from("model.ckpt"))?,
        })
    }
}

/// Trains a fresh network and writes its checkpoint. Returns the metrics line.
pub fn cmd_train(args: &TrainArgs) -> Result<String> {
    let (train_data, val_data) = run_data(args.data, args.samples, args.seed)?;
    let seeds = SeedStream::new(args.seed);
    let mut net = args.model.build(&mut seeds.named("init").rng())?;
    if net.input_shape() != &train_data.inputs().shape()[1..] {
        return Err(Error::InvalidConfig(format!(
            "model input {:?} does not fit {} data",
            net.input_shape(),
            args.data.as_str()
        )));
    }
    let stats = train(&mut net, &train_data, &args.train, &mut seeds.named("train").rng())?;
    let path = output_path(&args.out)?;
    checkpoint::save(&net, &path)?;
    Ok(format!(
        "train_acc={:.4} val_acc={:.4} loss={} checkpoint={}",
        net.accuracy(&train_data)?,
        net.accuracy(&val_data)?,
        stats.final_loss().map_or("-".to_string(), |l| format!("{l:.6}")),
        path.display()
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneArgs {
    pub checkpoint: PathBuf,
    pub samples: Option<usize>,
    pub cfg: PruneConfig,
    pub out: PathBuf,
    pub report: PathBuf,
}

impl PruneArgs {
    /// Settings from `key = value` pairs: `checkpoint`, `samples`, `alpha`,
    /// `zero_fraction`, `masks_per_filter`, `scoring_samples`, `direction`,
    /// `finetune_epochs`, `retrain_epochs`, `target`, `mask_position`,
    /// `seed`, `out`, `report`.
    pub fn from_config(kv: &KeyValues) -> Result<Self> {
        let checkpoint: PathBuf = kv
            .get("checkpoint")?
            .ok_or_else(|| Error::InvalidConfig("prune needs a checkpoint".into()))?;
        let d = PruneConfig::default();
        let di = ImportanceConfig::default();
        let finetune_epochs: usize = kv.get_or("finetune_epochs", 10)?;
        let retrain_epochs: usize = kv.get_or("retrain_epochs", 80)?;
        let stopping = match kv.get::<f64>("target")? {
            Some(t) => Stopping::TargetParamsRemoved(t),
            None => Stopping::NoLayerPrunable,
        };
        let cfg = PruneConfig {
            alpha: kv.get_or("alpha", d.alpha)?,
            importance: ImportanceConfig {
                zero_fraction: kv.get_or("zero_fraction", di.zero_fraction)?,
                masks_per_filter: kv.get_or("masks_per_filter", di.masks_per_filter)?,
                scoring_samples: kv.get_or("scoring_samples", di.scoring_samples)?,
            },
            direction: kv.get_or("direction", d.direction)?,
            finetune: (finetune_epochs > 0).then(|| TrainConfig {
                epochs: finetune_epochs,
                ..TrainConfig::fine_tune()
            }),
            final_retrain: (retrain_epochs > 0).then(|| TrainConfig {
                epochs: retrain_epochs,
                ..TrainConfig::final_retrain()
            }),
            stopping,
            mask_position: kv.get_or("mask_position", d.mask_position)?,
            seed: kv.get_or("seed", 0)?,
        };
        cfg.validate()?;
        Ok(Self {
            checkpoint,
            samples: kv.get("samples")?,
            cfg,
            out: kv.get_or("out", PathBuf::from("pruned.ckpt"))?,
            report: kv.get_or("report", PathBuf::from("prune_report.csv"))?,
        })
    }
}

/// Prunes a checkpoint, writes the pruned checkpoint and the CSV report, and
/// returns the summary text (totals agree with [`diff_metrics`]).
pub fn cmd_prune(args: &PruneArgs) -> Result<String> {
    let net = checkpoint::load(&args.checkpoint)?;
    let spec = data_for_network(&net)?;
    let samples = args.samples.unwrap_or_else(|| default_samples(spec));
    let (train_data, val_data) = run_data(spec, samples, args.cfg.seed)?;
    let (pruned, report) = prune_network(&net, &train_data, &val_data, &args.cfg)?;
    let out = output_path(&args.out)?;
    checkpoint::save(&pruned, &out)?;
    let report_path = output_path(&args.report)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    fs::write(&report_path, csv)?;
    let diff = diff_metrics(&ArchDescriptor::from_network(&net), &ArchDescriptor::from_network(&pruned))?;
    Ok(format!(
        "{}\nparams_removed_pct={:.2} flops_removed_pct={:.2}\ncheckpoint={} report={}",
        report.summary(),
        diff.params_removed_pct,
        diff.flops_removed_pct,
        out.display(),
        report_path.display()
    ))
}

/// Which trial an `xor-experiment` run repeats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentType {
    /// Train FCN`hidden` and check it solves XOR.
    Train,
    Prune(PruningType),
}

impl std::str::FromStr for ExperimentType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            other => Ok(Self::Prune(other.parse()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XorExperimentArgs {
    pub trials: usize,
    pub kind: ExperimentType,
    pub hidden: usize,
    pub seed: u64,
    /// Optional CSV of per-trial accuracies.
    pub csv: Option<PathBuf>,
}

pub fn cmd_xor_experiment(args: &XorExperimentArgs) -> Result<String> {
    let cfg = XorTrialConfig {
        hidden: args.hidden,
        ..XorTrialConfig::default()
    };
    let kind = match args.kind {
        ExperimentType::Train => TrialKind::Train,
        ExperimentType::Prune(p) => TrialKind::Prune(p),
    };
    let summary = run_trials(kind, args.trials, &cfg, args.seed)?;
    if let Some(p) = &args.csv {
        let mut s = String::from("trial,accuracy,success\n");
        for (i, a) in summary.accuracies.iter().enumerate() {
            s.push_str(&format!("{i},{a:.6},{}\n", u8::from(crate::pruner::is_success(*a))));
        }
        fs::write(output_path(p)?, s)?;
    }
    let label = match kind {
        TrialKind::Train => format!("train fcn{}", args.hidden),
        TrialKind::Prune(p) => format!("prune fcn{} {}", args.hidden, p.as_str()),
    };
    Ok(summary.line(&label))
}

/// Descriptor source for `arch`.
#[derive(Debug, Clone, PartialEq)]
pub enum ArchSource {
    Preset(String),
    File(PathBuf),
}

impl ArchSource {
    pub fn load(&self, position: MaskPosition) -> Result<ArchDescriptor> {
        match self {
            ArchSource::Preset(name) => preset_with_position(name, position),
            ArchSource::File(p) => ArchDescriptor::parse(&fs::read_to_string(p)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchArgs {
    pub source: ArchSource,
    pub position: MaskPosition,
    /// Second descriptor: print the reduction from `source` to it instead.
    pub diff: Option<PathBuf>,
    /// Per-layer filter removals applied to `source` before printing a diff.
    pub removals: Option<Vec<usize>>,
}

pub fn cmd_arch(args: &ArchArgs) -> Result<String> {
    let before = args.source.load(args.position)?;
    let after = match (&args.diff, &args.removals) {
        (Some(p), _) => Some(ArchDescriptor::parse(&fs::read_to_string(p)?)?),
        (None, Some(r)) => Some(before.apply_removals(r)?),
        (None, None) => None,
    };
    match after {
        Some(after) => Ok(render_diff(&diff_metrics(&before, &after)?)),
        None => render_table(&before),
    }
}

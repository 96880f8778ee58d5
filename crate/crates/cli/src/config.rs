//! Run configuration files and their resolution against command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use poolrank::losses::LossKind;
use poolrank::scorer::ScorerKind;
use poolrank::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::UsageError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Labels stored in the data file.
    #[default]
    Training,
    /// Ground truth from the `.truth` sidecar next to the data file.
    Truth,
}

/// On-disk run configuration (TOML). Relative paths are taken relative to
/// the directory holding the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub train_data: Option<PathBuf>,
    pub valid_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// Labels used when scoring the test set in `ablate` and `sweep`.
    pub test_labels: LabelMode,
    /// Window sizes for `sweep`.
    pub kappas: Vec<usize>,
    pub trainer: TrainConfig,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfigFile =
            toml::from_str(&text).map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in
            [&mut cfg.train_data, &mut cfg.valid_data, &mut cfg.test_data, &mut cfg.output_dir].into_iter().flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Flags shared by `train`, `ablate` and `sweep`. Each one overrides the
/// matching config field.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "train")]
    pub train_data: Option<PathBuf>,
    #[arg(long = "valid")]
    pub valid_data: Option<PathBuf>,
    #[arg(long = "test")]
    pub test_data: Option<PathBuf>,
    /// Output directory.
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub test_labels: Option<LabelMode>,
    #[arg(long, value_parser = parse_loss)]
    pub loss: Option<LossKind>,
    /// Pooling window size. `sweep` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub kappa: Option<Vec<usize>>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long, value_parser = parse_scorer)]
    pub scorer: Option<ScorerKind>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
}

fn parse_loss(s: &str) -> std::result::Result<LossKind, String> {
    s.parse().map_err(|e: poolrank::Error| e.to_string())
}

fn parse_scorer(s: &str) -> std::result::Result<ScorerKind, String> {
    match s {
        "linear" => Ok(ScorerKind::Linear),
        "mlp" => Ok(ScorerKind::Mlp),
        _ => Err(format!("unknown scorer {s:?}; valid names: linear, mlp")),
    }
}

/// Config after flags have been applied. Its JSON form is what gets hashed.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub train_data: Option<PathBuf>,
    pub valid_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub test_labels: LabelMode,
    pub kappas: Vec<usize>,
    pub trainer: TrainConfig,
}

impl Resolved {
    pub fn from_flags(flags: &RunFlags) -> Result<Self> {
        Self::resolve(flags, false)
    }

    /// As [`Resolved::from_flags`], but `--kappa` may list several window sizes.
    pub fn for_sweep(flags: &RunFlags) -> Result<Self> {
        Self::resolve(flags, true)
    }

    fn resolve(flags: &RunFlags, sweep: bool) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => RunConfigFile::load(path)?,
            None => RunConfigFile::default(),
        };
        let mut t = file.trainer;
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = flags.$flag.clone() { t.$field = v; })*
            };
        }
        set!(loss => loss, negatives => negatives_per_query, batch_size => batch_size,
             epochs => epochs, lr => lr, seed => seed, scorer => scorer, hidden => hidden);
        let mut kappas = file.kappas;
        match flags.kappa.as_deref() {
            Some([k]) => {
                t.kappa = *k;
                kappas = vec![*k];
            }
            Some(list) if !sweep => {
                return Err(UsageError(format!("--kappa takes a single value here, got {list:?}")).into());
            }
            Some(list) => kappas = list.to_vec(),
            None => {}
        }
        if flags.patience.is_some() {
            t.patience = flags.patience;
        }
        t.validate().map_err(|e| UsageError(e.to_string()))?;
        Ok(Resolved {
            train_data: flags.train_data.clone().or(file.train_data),
            valid_data: flags.valid_data.clone().or(file.valid_data),
            test_data: flags.test_data.clone().or(file.test_data),
            output_dir: flags.output_dir.clone().or(file.output_dir).unwrap_or_else(|| PathBuf::from(".")),
            test_labels: flags.test_labels.unwrap_or(file.test_labels),
            kappas,
            trainer: t,
        })
    }

    pub fn require_train(&self) -> Result<&Path> {
        self.train_data
            .as_deref()
            .ok_or_else(|| UsageError("no training data: set train_data or pass --train".into()).into())
    }

    pub fn require_test(&self) -> Result<&Path> {
        self.test_data.as_deref().ok_or_else(|| UsageError("no test data: set test_data or pass --test".into()).into())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Hex SHA-256 of the JSON serialization of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

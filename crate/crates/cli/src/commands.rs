use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::Args;
use poolrank::dataset::{generate_synthetic, load_letor, sidecar_path, write_letor, Dataset, GroundTruth, SynthConfig};
use poolrank::metrics::{evaluate, EvalLabels, ReportMeta};
use poolrank::parallel::Workers;
use poolrank::scorer::Scorer;
use poolrank::trainer::{ablate, ablation_tsv, sweep_pooling, sweep_tsv, train};
use serde::Serialize;

use crate::config::{config_hash, ensure_dir, LabelMode, Resolved, RunFlags};
use crate::UsageError;

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_truth(data: &Path) -> Result<GroundTruth> {
    let side = sidecar_path(data);
    if !side.exists() {
        anyhow::bail!("ground-truth sidecar {} not found", side.display());
    }
    Ok(GroundTruth::load(&side)?)
}

fn load_optional(path: Option<&Path>, feature_dim: usize) -> Result<Dataset> {
    match path {
        Some(p) => Ok(load_letor(p)?),
        None => Ok(Dataset::empty(feature_dim, poolrank::dataset::Provenance::LetorFile)),
    }
}

fn header(hash: &str) -> Vec<String> {
    vec![format!("config_sha256={hash}")]
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 200)]
    pub queries: usize,
    #[arg(long, default_value_t = 100)]
    pub docs: usize,
    #[arg(long, default_value_t = 10)]
    pub features: usize,
    #[arg(long, default_value_t = 5)]
    pub relevant: usize,
    #[arg(long, default_value_t = 0.6)]
    pub mislabel: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// File name of the LETOR output inside `--out`.
    #[arg(long, default_value = "synthetic.txt")]
    pub name: String,
}

pub fn gen(args: &GenArgs) -> Result<()> {
    let cfg = SynthConfig {
        num_queries: args.queries,
        docs_per_query: args.docs,
        feature_dim: args.features,
        true_relevant_per_query: args.relevant,
        mislabel_fraction: args.mislabel,
        noise_std: args.noise,
        seed: args.seed,
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let ds = generate_synthetic(&cfg)?;
    let truth = GroundTruth::from_doc_id_suffix(&ds)?;
    ensure_dir(&args.out)?;
    let path = args.out.join(&args.name);
    write_letor(&ds, &path)?;
    write(&sidecar_path(&path), &truth.to_sidecar_string(&ds))?;
    log::info!("wrote {} queries to {}", ds.len(), path.display());
    Ok(())
}

pub fn train_cmd(flags: &RunFlags, workers: &Workers, wall_time: bool) -> Result<()> {
    let r = Resolved::from_flags(flags)?;
    let train_ds = load_letor(r.require_train()?)?;
    let valid = load_optional(r.valid_data.as_deref(), train_ds.feature_dim)?;
    let (sc, rec) = train(&r.trainer, &train_ds, &valid, workers)?;

    let hash = r.hash();
    ensure_dir(&r.output_dir)?;
    sc.save(r.output_dir.join("model.json"))?;
    write(&r.output_dir.join("run.tsv"), &rec.to_tsv(&header(&hash)))?;
    write(&r.output_dir.join("run.json"), &rec.to_json())?;
    write(&r.output_dir.join("config.json"), &serde_json::to_string_pretty(&r)?)?;
    if wall_time {
        let mut text = format!("# config_sha256={hash}\nepoch\twall_secs\n");
        for (e, s) in rec.wall_secs.iter().enumerate() {
            text += &format!("{}\t{s}\n", e + 1);
        }
        write(&r.output_dir.join("wall_time.tsv"), &text)?;
    }
    println!(
        "best_epoch={} best_valid={} epochs_run={}",
        rec.best_epoch,
        rec.best_valid.map_or("-".to_string(), |v| v.to_string()),
        rec.epochs.len()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scorer checkpoint (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// LETOR data file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = LabelMode::Training)]
    pub labels: LabelMode,
    /// nDCG cutoff; the whole list when absent.
    #[arg(long)]
    pub cutoff: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Record the current Unix time in the report.
    #[arg(long)]
    pub timestamp: bool,
}

#[derive(Serialize)]
struct EvalKey<'a> {
    model: &'a Path,
    data: &'a Path,
    labels: LabelMode,
    cutoff: Option<usize>,
}

pub fn eval_cmd(args: &EvalArgs, workers: &Workers) -> Result<()> {
    if args.cutoff == Some(0) {
        return Err(UsageError("--cutoff must be at least 1".into()).into());
    }
    let sc = Scorer::load(&args.model)?;
    let ds = load_letor(&args.data)?;
    let truth = match args.labels {
        LabelMode::Truth => Some(load_truth(&args.data)?),
        LabelMode::Training => None,
    };
    let labels = truth.as_ref().map_or(EvalLabels::Training, EvalLabels::GroundTruth);
    let mut report = evaluate(&sc, &ds, labels, args.cutoff, workers)?;
    report.meta = ReportMeta {
        model: Some(args.model.display().to_string()),
        dataset: Some(args.data.display().to_string()),
        timestamp: args.timestamp.then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())),
        ..report.meta
    };
    let hash = config_hash(&EvalKey { model: &args.model, data: &args.data, labels: args.labels, cutoff: args.cutoff });
    ensure_dir(&args.out)?;
    write(&args.out.join("eval.tsv"), &report.to_tsv(&header(&hash)))?;
    write(&args.out.join("eval.json"), &report.to_json())?;
    let a = report.aggregate;
    println!("__aggregate__\tmrr={}\tndcg={}\tmap={}", a.mrr, a.ndcg, a.map);
    Ok(())
}

struct Grid {
    resolved: Resolved,
    train: Dataset,
    valid: Dataset,
    test: Dataset,
    truth: Option<GroundTruth>,
}

fn load_grid(resolved: Resolved) -> Result<Grid> {
    let test_path = resolved.require_test()?.to_path_buf();
    let train = load_letor(resolved.require_train()?)?;
    let valid = load_optional(resolved.valid_data.as_deref(), train.feature_dim)?;
    let test = load_letor(&test_path)?;
    let truth = match resolved.test_labels {
        LabelMode::Truth => Some(load_truth(&test_path)?),
        LabelMode::Training => None,
    };
    Ok(Grid { resolved, train, valid, test, truth })
}

impl Grid {
    fn labels(&self) -> EvalLabels<'_> {
        self.truth.as_ref().map_or(EvalLabels::Training, EvalLabels::GroundTruth)
    }
}

pub fn ablate_cmd(flags: &RunFlags, workers: &Workers) -> Result<()> {
    let g = load_grid(Resolved::from_flags(flags)?)?;
    let rows = ablate(&g.resolved.trainer, &g.train, &g.valid, &g.test, g.labels(), workers)?;
    let dir = &g.resolved.output_dir;
    ensure_dir(dir)?;
    let tsv = ablation_tsv(&rows, &header(&g.resolved.hash()));
    write(&dir.join("ablation.tsv"), &tsv)?;
    write(&dir.join("ablation.json"), &serde_json::to_string_pretty(&rows)?)?;
    print!("{tsv}");
    Ok(())
}

pub fn sweep_cmd(flags: &RunFlags, workers: &Workers) -> Result<()> {
    let g = load_grid(Resolved::for_sweep(flags)?)?;
    if g.resolved.kappas.is_empty() {
        return Err(UsageError("kappa list is empty: pass --kappa or set kappas".into()).into());
    }
    if g.resolved.kappas.contains(&0) {
        return Err(UsageError("every kappa must be at least 1".into()).into());
    }
    let rows =
        sweep_pooling(&g.resolved.trainer, &g.resolved.kappas, &g.train, &g.valid, &g.test, g.labels(), workers)?;
    let dir = &g.resolved.output_dir;
    ensure_dir(dir)?;
    let tsv = sweep_tsv(&rows, &header(&g.resolved.hash()));
    write(&dir.join("sweep.tsv"), &tsv)?;
    write(&dir.join("sweep.json"), &serde_json::to_string_pretty(&rows)?)?;
    print!("{tsv}");
    Ok(())
}

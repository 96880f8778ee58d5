//! Adam training over per-query candidate lists, plus the loss-component
//! ablation grid and the pooling-window sweep.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{build_lists, Dataset, QueryGroup};
use crate::losses::{Loss, LossKind, LossWeights};
use crate::metrics::{evaluate, EvalLabels, Metric, QueryMetrics};
use crate::parallel::Workers;
use crate::pooling::num_windows;
use crate::scorer::{GradBuffer, Scorer, ScorerKind};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Adam

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Self {
        AdamState { m: vec![0.0; num_params], v: vec![0.0; num_params], t: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimMismatch { expected: self.m.len(), got: grads.len().min(params.len()) });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {i} ({}) at Adam step {}", grads[i], self.t + 1)));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Configuration and records

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub weights: LossWeights,
    pub kappa: usize,
    pub negatives_per_query: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub shuffle_negatives_per_epoch: bool,
    pub approxndcg_tau: f64,
    pub ranknet_sigma: f64,
    /// Epochs without validation improvement before stopping; `None` disables.
    pub patience: Option<usize>,
    pub valid_metric: Metric,
    pub scorer: ScorerKind,
    /// Hidden widths for the MLP scorer (ignored for `linear`).
    pub hidden: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Poolrank,
            weights: LossWeights::default(),
            kappa: 10,
            negatives_per_query: 50,
            batch_size: 4,
            epochs: 30,
            lr: 1e-4,
            seed: 0,
            shuffle_negatives_per_epoch: false,
            approxndcg_tau: 0.1,
            ranknet_sigma: 1.0,
            patience: None,
            valid_metric: Metric::Mrr,
            scorer: ScorerKind::Mlp,
            hidden: vec![16],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.kappa == 0 {
            return bad("kappa must be at least 1");
        }
        if self.negatives_per_query == 0 {
            return bad("negatives_per_query must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.approxndcg_tau > 0.0 && self.approxndcg_tau.is_finite()) {
            return bad("approxndcg_tau must be positive");
        }
        if !(self.ranknet_sigma > 0.0 && self.ranknet_sigma.is_finite()) {
            return bad("ranknet_sigma must be positive");
        }
        if self.patience == Some(0) {
            return bad("patience must be at least 1");
        }
        if self.scorer == ScorerKind::Mlp && self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        self.weights.validate()
    }

    pub fn loss_fn(&self) -> Loss {
        match self.loss {
            LossKind::Margin => Loss::Margin,
            LossKind::Ranknet => Loss::RankNet { sigma: self.ranknet_sigma },
            LossKind::Listnet => Loss::ListNet,
            LossKind::Listmle => Loss::ListMle,
            LossKind::Approxndcg => Loss::ApproxNdcg { tau: self.approxndcg_tau },
            LossKind::Poolrank => Loss::PoolRank { kappa: self.kappa, weights: self.weights },
        }
    }

    pub fn layer_dims(&self, feature_dim: usize) -> Vec<usize> {
        let mut dims = vec![feature_dim];
        if self.scorer == ScorerKind::Mlp {
            dims.extend(&self.hidden);
        }
        dims.push(1);
        dims
    }
}

/// Independent RNG streams derived from the run seed.
fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

const STREAM_LISTS: u64 = 1;
const STREAM_EPOCHS: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid: Option<QueryMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose checkpoint was returned.
    pub best_epoch: usize,
    pub best_valid: Option<f64>,
    pub stopped_early: bool,
    pub dropped_groups: usize,
    /// Wall-clock seconds per epoch; kept out of the serialized record.
    #[serde(skip)]
    pub wall_secs: Vec<f64>,
}

impl RunRecord {
    pub fn to_tsv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            writeln!(out, "# {c}").unwrap();
        }
        out.push_str("epoch\ttrain_loss\tvalid_mrr\tvalid_ndcg\tvalid_map\n");
        for e in &self.epochs {
            let (a, b, c) = match e.valid {
                Some(m) => (m.mrr.to_string(), m.ndcg.to_string(), m.map.to_string()),
                None => ("".into(), "".into(), "".into()),
            };
            writeln!(out, "{}\t{}\t{a}\t{b}\t{c}", e.epoch, e.train_loss).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }
}

// ---------------------------------------------------------------------------
// Training

/// Mean loss and mean parameter gradient over a batch of groups.
///
/// Per-group gradients are computed independently (in parallel when
/// `workers` allows) and summed in batch order.
pub fn batch_gradient(sc: &Scorer, loss: &Loss, batch: &[&QueryGroup], workers: &Workers) -> Result<(f64, GradBuffer)> {
    let parts = workers.map(batch.len(), |i| -> Result<(f64, GradBuffer)> {
        let g = batch[i];
        let scored = sc.score_list(g)?;
        let pos_labels: Vec<u32> = g.positives.iter().map(|c| c.label).collect();
        let lg = loss.eval(&scored.pos, &scored.neg, &pos_labels)?;
        if !lg.is_finite() {
            return Err(Error::NonFinite(format!("{} loss on query {}", loss.kind(), g.query_id)));
        }
        let mut buf = GradBuffer::for_scorer(sc);
        sc.backward(&scored.cache, &lg.grad, &mut buf)?;
        Ok((lg.value, buf))
    });
    let mut total = GradBuffer::for_scorer(sc);
    let mut value = 0.0;
    for part in parts {
        let (v, buf) = part?;
        value += v;
        total.add(&buf);
    }
    let k = 1.0 / batch.len() as f64;
    total.scale(k);
    Ok((value * k, total))
}

/// Trains a freshly initialised scorer. See [`train_from`].
pub fn train(cfg: &TrainConfig, train_ds: &Dataset, valid: &Dataset, workers: &Workers) -> Result<(Scorer, RunRecord)> {
    cfg.validate()?;
    let init = Scorer::init(cfg.scorer, &cfg.layer_dims(train_ds.feature_dim), cfg.seed)?;
    train_from(cfg, init, train_ds, valid, workers)
}

/// Trains `init` with Adam and returns the checkpoint with the best
/// validation metric (the last epoch when `valid` is empty).
pub fn train_from(
    cfg: &TrainConfig,
    init: Scorer,
    train_ds: &Dataset,
    valid: &Dataset,
    workers: &Workers,
) -> Result<(Scorer, RunRecord)> {
    cfg.validate()?;
    if train_ds.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    if init.input_dim() != train_ds.feature_dim {
        return Err(Error::DimMismatch { expected: init.input_dim(), got: train_ds.feature_dim });
    }
    if !valid.is_empty() && valid.feature_dim != train_ds.feature_dim {
        return Err(Error::DimMismatch { expected: train_ds.feature_dim, got: valid.feature_dim });
    }
    let lists = build_lists(train_ds, cfg.negatives_per_query, sub_seed(cfg.seed, STREAM_LISTS))?;
    if lists.dataset.is_empty() {
        return Err(Error::Invalid("every training group was dropped (no positives)".into()));
    }
    let mut groups = lists.dataset.groups;
    let loss = cfg.loss_fn();
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_EPOCHS));

    let mut sc = init;
    let mut adam = AdamState::new(sc.num_params(), cfg.lr);
    let mut best = sc.clone();
    let mut best_valid: Option<f64> = None;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut stopped_early = false;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut wall_secs = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        if cfg.shuffle_negatives_per_epoch {
            for g in &mut groups {
                g.negatives.shuffle(&mut rng);
            }
        }
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&QueryGroup> = chunk.iter().map(|&i| &groups[i]).collect();
            let (value, grad) = batch_gradient(&sc, &loss, &batch, workers).map_err(|e| match e {
                Error::NonFinite(what) => Error::NonFinite(format!("{what} (epoch {epoch}, batch {b})")),
                other => other,
            })?;
            adam.step(sc.params_mut(), &grad.grad).map_err(|e| match e {
                Error::NonFinite(what) => Error::NonFinite(format!("{what} (epoch {epoch}, batch {b})")),
                other => other,
            })?;
            loss_sum += value * chunk.len() as f64;
        }
        let train_loss = loss_sum / groups.len() as f64;

        let valid_metrics = if valid.is_empty() {
            None
        } else {
            Some(evaluate(&sc, valid, EvalLabels::Training, None, workers)?.aggregate)
        };
        epochs.push(EpochRecord { epoch, train_loss, valid: valid_metrics });
        wall_secs.push(started.elapsed().as_secs_f64());

        match valid_metrics.map(|m| m.get(cfg.valid_metric)) {
            Some(v) if best_valid.is_none_or(|b| v > b) => {
                best_valid = Some(v);
                best = sc.clone();
                best_epoch = epoch;
                since_best = 0;
            }
            Some(_) => since_best += 1,
            None => {
                best = sc.clone();
                best_epoch = epoch;
            }
        }
        if cfg.patience.is_some_and(|p| since_best >= p) {
            stopped_early = epoch < cfg.epochs;
            break;
        }
    }

    let record = RunRecord { epochs, best_epoch, best_valid, stopped_early, dropped_groups: lists.dropped, wall_secs };
    Ok((best, record))
}

// ---------------------------------------------------------------------------
// Ablation grid and window sweep

/// The 15 nonzero component masks, ordered by number of active components,
/// then lexicographically with `c1` as the most significant bit.
pub fn ablation_masks() -> Vec<[bool; 4]> {
    let mut masks: Vec<u8> = (1u8..16).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    masks.into_iter().map(|m| [m & 8 != 0, m & 4 != 0, m & 2 != 0, m & 1 != 0]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub mask: [bool; 4],
    pub weights: LossWeights,
    pub test: QueryMetrics,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub kappa: usize,
    /// Windows per list at the configured negatives budget.
    pub windows: usize,
    pub test: QueryMetrics,
    pub best_epoch: usize,
}

/// Trains with `cfg` and evaluates the selected checkpoint on `test`.
pub fn train_and_test(
    cfg: &TrainConfig,
    train_ds: &Dataset,
    valid: &Dataset,
    test: &Dataset,
    test_labels: EvalLabels<'_>,
    workers: &Workers,
) -> Result<(Scorer, RunRecord, QueryMetrics)> {
    let (sc, rec) = train(cfg, train_ds, valid, workers)?;
    let report = evaluate(&sc, test, test_labels, None, workers)?;
    Ok((sc, rec, report.aggregate))
}

/// One PoolRank run per nonzero on/off mask of `cfg.weights`.
pub fn ablate(
    cfg: &TrainConfig,
    train_ds: &Dataset,
    valid: &Dataset,
    test: &Dataset,
    test_labels: EvalLabels<'_>,
    workers: &Workers,
) -> Result<Vec<AblationRow>> {
    ablate_masks(cfg, &ablation_masks(), train_ds, valid, test, test_labels, workers)
}

pub fn ablate_masks(
    cfg: &TrainConfig,
    masks: &[[bool; 4]],
    train_ds: &Dataset,
    valid: &Dataset,
    test: &Dataset,
    test_labels: EvalLabels<'_>,
    workers: &Workers,
) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(masks.len());
    for &mask in masks {
        let weights = cfg.weights.masked(mask)?;
        let run = TrainConfig { loss: LossKind::Poolrank, weights, ..cfg.clone() };
        let (_, rec, test_m) = train_and_test(&run, train_ds, valid, test, test_labels, workers)?;
        rows.push(AblationRow { mask, weights, test: test_m, best_epoch: rec.best_epoch });
    }
    Ok(rows)
}

/// One PoolRank run per window size.
pub fn sweep_pooling(
    cfg: &TrainConfig,
    kappas: &[usize],
    train_ds: &Dataset,
    valid: &Dataset,
    test: &Dataset,
    test_labels: EvalLabels<'_>,
    workers: &Workers,
) -> Result<Vec<SweepRow>> {
    if kappas.is_empty() {
        return Err(Error::Config("kappa list is empty".into()));
    }
    if kappas.contains(&0) {
        return Err(Error::Config("every kappa must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let run = TrainConfig { loss: LossKind::Poolrank, kappa, ..cfg.clone() };
        let (_, rec, test_m) = train_and_test(&run, train_ds, valid, test, test_labels, workers)?;
        let windows = num_windows(cfg.negatives_per_query, kappa);
        rows.push(SweepRow { kappa, windows, test: test_m, best_epoch: rec.best_epoch });
    }
    Ok(rows)
}

pub fn ablation_tsv(rows: &[AblationRow], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    out.push_str("c1\tc2\tc3\tc4\tmrr\tndcg\tmap\tbest_epoch\n");
    for r in rows {
        let m = r.mask.map(u8::from);
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            m[0], m[1], m[2], m[3], r.test.mrr, r.test.ndcg, r.test.map, r.best_epoch
        )
        .unwrap();
    }
    out
}

pub fn sweep_tsv(rows: &[SweepRow], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    out.push_str("kappa\twindows\tmrr\tndcg\tmap\tbest_epoch\n");
    for r in rows {
        writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", r.kappa, r.windows, r.test.mrr, r.test.ndcg, r.test.map, r.best_epoch)
            .unwrap();
    }
    out
}

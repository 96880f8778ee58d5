//! Ranking metrics: MRR, nDCG (exponential gain) and MAP.
//!
//! Relevance for MRR and MAP is binary (`label > 0`). Lists without any
//! relevant document score 0 on every metric and are counted in
//! [`EvalReport::no_relevant`].

use std::fmt::Write as _;

use serde::Serialize;

use crate::dataset::{Dataset, GroundTruth};
use crate::losses::listwise::{gain, label_order};
use crate::parallel::Workers;
use crate::scorer::Scorer;
use crate::{Error, Result};

/// Candidate indices by descending score; ties keep ascending index order.
pub fn rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

pub fn mrr(ranking: &[usize], labels: &[u32]) -> f64 {
    ranking.iter().position(|&i| labels[i] > 0).map_or(0.0, |r| 1.0 / (r + 1) as f64)
}

fn discount(rank0: usize) -> f64 {
    1.0 / ((rank0 + 2) as f64).log2()
}

/// nDCG over the top `cutoff` positions (whole list when `None`).
pub fn ndcg(ranking: &[usize], labels: &[u32], cutoff: Option<usize>) -> f64 {
    let k = cutoff.unwrap_or(ranking.len()).min(ranking.len());
    let dcg: f64 = ranking[..k].iter().enumerate().map(|(r, &i)| gain(labels[i]) * discount(r)).sum();
    let ideal: f64 = label_order(labels).iter().take(k).enumerate().map(|(r, &i)| gain(labels[i]) * discount(r)).sum();
    if ideal > 0.0 {
        dcg / ideal
    } else {
        0.0
    }
}

/// Average precision over all relevant documents in the list.
pub fn map(ranking: &[usize], labels: &[u32]) -> f64 {
    let total = labels.iter().filter(|&&l| l > 0).count();
    if total == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (r, &i) in ranking.iter().enumerate() {
        if labels[i] > 0 {
            hits += 1;
            sum += hits as f64 / (r + 1) as f64;
        }
    }
    sum / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub mrr: f64,
    pub ndcg: f64,
    pub map: f64,
}

impl QueryMetrics {
    pub fn compute(scores: &[f64], labels: &[u32], cutoff: Option<usize>) -> Self {
        let r = rank(scores);
        QueryMetrics { mrr: mrr(&r, labels), ndcg: ndcg(&r, labels, cutoff), map: map(&r, labels) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mrr,
    Ndcg,
    Map,
}

impl QueryMetrics {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Mrr => self.mrr,
            Metric::Ndcg => self.ndcg,
            Metric::Map => self.map,
        }
    }
}

/// Which labels to evaluate against.
#[derive(Debug, Clone, Copy)]
pub enum EvalLabels<'a> {
    /// The labels stored in the dataset.
    Training,
    /// Ground truth from a sidecar (or synthetic doc-id suffixes).
    GroundTruth(&'a GroundTruth),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReportMeta {
    pub model: Option<String>,
    pub dataset: Option<String>,
    pub labels: String,
    pub cutoff: Option<usize>,
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRow {
    pub qid: String,
    #[serde(flatten)]
    pub metrics: QueryMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_query: Vec<QueryRow>,
    pub aggregate: QueryMetrics,
    pub num_queries: usize,
    /// Queries with no relevant document under the chosen labels.
    pub no_relevant: usize,
    pub meta: ReportMeta,
}

impl EvalReport {
    pub fn from_rows(per_query: Vec<QueryRow>, no_relevant: usize, meta: ReportMeta) -> Self {
        let n = per_query.len();
        let mean = |f: fn(&QueryMetrics) -> f64| {
            if n == 0 {
                0.0
            } else {
                per_query.iter().map(|r| f(&r.metrics)).sum::<f64>() / n as f64
            }
        };
        let aggregate = QueryMetrics { mrr: mean(|m| m.mrr), ndcg: mean(|m| m.ndcg), map: mean(|m| m.map) };
        EvalReport { per_query, aggregate, num_queries: n, no_relevant, meta }
    }

    /// One row per query plus an `__aggregate__` row. `comment` lines are
    /// written first, each prefixed with `# `.
    pub fn to_tsv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            writeln!(out, "# {c}").unwrap();
        }
        out.push_str("qid\tmrr\tndcg\tmap\n");
        for r in &self.per_query {
            writeln!(out, "{}\t{}\t{}\t{}", r.qid, r.metrics.mrr, r.metrics.ndcg, r.metrics.map).unwrap();
        }
        let a = &self.aggregate;
        writeln!(out, "__aggregate__\t{}\t{}\t{}", a.mrr, a.ndcg, a.map).unwrap();
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }
}

/// Scores every candidate of every query and aggregates the metrics by mean.
pub fn evaluate(
    sc: &Scorer,
    ds: &Dataset,
    labels: EvalLabels<'_>,
    cutoff: Option<usize>,
    workers: &Workers,
) -> Result<EvalReport> {
    if ds.is_empty() {
        return Err(Error::Invalid("cannot evaluate an empty dataset".into()));
    }
    if ds.feature_dim != sc.input_dim() {
        return Err(Error::DimMismatch { expected: sc.input_dim(), got: ds.feature_dim });
    }
    let rows = workers.map(ds.groups.len(), |gi| -> Result<QueryRow> {
        let g = &ds.groups[gi];
        let (scores, _) = sc.score_rows(g.candidates().map(|c| c.features.as_slice()))?;
        let labels: Vec<u32> = match labels {
            EvalLabels::Training => g.labels(),
            EvalLabels::GroundTruth(truth) => g
                .candidates()
                .map(|c| {
                    truth
                        .get(&g.query_id, &c.doc_id)
                        .ok_or_else(|| Error::Invalid(format!("no ground truth for {}/{}", g.query_id, c.doc_id)))
                })
                .collect::<Result<_>>()?,
        };
        Ok(QueryRow { qid: g.query_id.clone(), metrics: QueryMetrics::compute(&scores, &labels, cutoff) })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let no_relevant = ds.groups.iter().zip(&rows).filter(|(_, r)| r.metrics.mrr == 0.0).count();
    if no_relevant > 0 {
        log::warn!("{no_relevant} query(ies) without a relevant document scored 0");
    }
    let meta = ReportMeta {
        labels: match labels {
            EvalLabels::Training => "training".into(),
            EvalLabels::GroundTruth(_) => "truth".into(),
        },
        cutoff,
        ..ReportMeta::default()
    };
    Ok(EvalReport::from_rows(rows, no_relevant, meta))
}

//! Ranking datasets: LETOR text files, synthetic partial-relevance data,
//! per-query candidate lists and query-level splits.
//!
//! A [`QueryGroup`] stores its candidates already partitioned into
//! positives (label > 0) and negatives (label = 0). Scorers and losses see
//! the positives first, then the negatives, in stored order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub doc_id: String,
    pub label: u32,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryGroup {
    pub query_id: String,
    pub positives: Vec<Candidate>,
    pub negatives: Vec<Candidate>,
}

impl QueryGroup {
    /// Builds a group from candidates in arbitrary order, partitioning by label.
    pub fn from_candidates(query_id: impl Into<String>, candidates: Vec<Candidate>) -> Self {
        let (positives, negatives) = candidates.into_iter().partition(|c| c.label > 0);
        QueryGroup { query_id: query_id.into(), positives, negatives }
    }

    pub fn num_positives(&self) -> usize {
        self.positives.len()
    }

    pub fn num_negatives(&self) -> usize {
        self.negatives.len()
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Positives followed by negatives.
    pub fn candidates(&self) -> impl Iterator<Item = &Candidate> {
        self.positives.iter().chain(self.negatives.iter())
    }

    /// Labels aligned with [`QueryGroup::candidates`].
    pub fn labels(&self) -> Vec<u32> {
        self.candidates().map(|c| c.label).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    LetorFile,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub groups: Vec<QueryGroup>,
    pub feature_dim: usize,
    pub provenance: Provenance,
}

impl Dataset {
    /// Checks the dataset invariants: shared feature dimension, unique query
    /// ids, and a label-exact positive/negative partition.
    pub fn new(groups: Vec<QueryGroup>, feature_dim: usize, provenance: Provenance) -> Result<Self> {
        let mut seen = HashSet::new();
        for g in &groups {
            if !seen.insert(g.query_id.as_str()) {
                return Err(Error::Invalid(format!("duplicate query id {}", g.query_id)));
            }
            for c in g.candidates() {
                if c.features.len() != feature_dim {
                    return Err(Error::DimMismatch { expected: feature_dim, got: c.features.len() });
                }
            }
            if g.positives.iter().any(|c| c.label == 0) || g.negatives.iter().any(|c| c.label > 0) {
                return Err(Error::Invalid(format!(
                    "query {}: positives/negatives not partitioned by label",
                    g.query_id
                )));
            }
        }
        Ok(Dataset { groups, feature_dim, provenance })
    }

    pub fn empty(feature_dim: usize, provenance: Provenance) -> Self {
        Dataset { groups: Vec::new(), feature_dim, provenance }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn num_candidates(&self) -> usize {
        self.groups.iter().map(QueryGroup::len).sum()
    }

    pub fn query_ids(&self) -> Vec<&str> {
        self.groups.iter().map(|g| g.query_id.as_str()).collect()
    }

    /// Returns a copy with every label replaced by its ground-truth value and
    /// the groups re-partitioned accordingly. Candidate order inside each
    /// partition is preserved.
    pub fn relabeled(&self, truth: &GroundTruth) -> Result<Dataset> {
        let mut groups = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let mut cands = Vec::with_capacity(g.len());
            for c in g.candidates() {
                let label = truth
                    .get(&g.query_id, &c.doc_id)
                    .ok_or_else(|| Error::Invalid(format!("no ground truth for {}/{}", g.query_id, c.doc_id)))?;
                cands.push(Candidate { label, ..c.clone() });
            }
            groups.push(QueryGroup::from_candidates(g.query_id.clone(), cands));
        }
        Ok(Dataset { groups, feature_dim: self.feature_dim, provenance: self.provenance })
    }
}

// ---------------------------------------------------------------------------
// LETOR text format

/// Parses LETOR / SVMlight ranking text.
///
/// `source` only labels error messages. Doc ids come from the trailing
/// comment (`# docid = X` or the comment's first token); lines without a
/// comment get `L<line number>`.
pub fn parse_letor(text: &str, source: &str) -> Result<Dataset> {
    struct Row {
        qid: String,
        cand: Candidate,
        sparse: Vec<(usize, f64)>,
    }

    let perr = |line: usize, msg: String| Error::Parse { path: source.to_string(), line, msg };

    let mut rows = Vec::new();
    let mut max_fid = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let (body, comment) = match raw.find('#') {
            Some(p) => (&raw[..p], Some(raw[p + 1..].trim())),
            None => (raw, None),
        };
        if body.trim().is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let label_tok = toks.next().ok_or_else(|| perr(line_no, "missing label".into()))?;
        let label: u32 = label_tok.parse().map_err(|_| perr(line_no, format!("invalid label {label_tok:?}")))?;
        let qid_tok = toks.next().ok_or_else(|| perr(line_no, "missing qid".into()))?;
        let qid = qid_tok
            .strip_prefix("qid:")
            .filter(|q| !q.is_empty())
            .ok_or_else(|| perr(line_no, format!("expected qid:<id>, found {qid_tok:?}")))?;

        let mut sparse = Vec::new();
        let mut last_fid = 0usize;
        for tok in toks {
            let (f, v) =
                tok.split_once(':').ok_or_else(|| perr(line_no, format!("expected <fid>:<value>, found {tok:?}")))?;
            let fid: usize = f.parse().map_err(|_| perr(line_no, format!("invalid feature id {f:?}")))?;
            if fid == 0 {
                return Err(perr(line_no, "feature ids start at 1".into()));
            }
            if fid <= last_fid {
                return Err(perr(line_no, format!("feature id {fid} not strictly increasing")));
            }
            let val: f64 = v.parse().map_err(|_| perr(line_no, format!("invalid feature value {v:?}")))?;
            if !val.is_finite() {
                return Err(perr(line_no, format!("non-finite feature value {v:?}")));
            }
            last_fid = fid;
            sparse.push((fid, val));
        }
        max_fid = max_fid.max(last_fid);

        let doc_id = comment.and_then(doc_id_from_comment).unwrap_or_else(|| format!("L{line_no}"));
        rows.push(Row { qid: qid.to_string(), cand: Candidate { doc_id, label, features: Vec::new() }, sparse });
    }

    if rows.is_empty() {
        return Err(Error::EmptyFile(PathBuf::from(source)));
    }

    let mut order: Vec<String> = Vec::new();
    let mut buckets: HashMap<String, Vec<Candidate>> = HashMap::new();
    for row in rows {
        let mut features = vec![0.0; max_fid];
        for (fid, val) in row.sparse {
            features[fid - 1] = val;
        }
        let mut cand = row.cand;
        cand.features = features;
        buckets
            .entry(row.qid.clone())
            .or_insert_with(|| {
                order.push(row.qid.clone());
                Vec::new()
            })
            .push(cand);
    }
    let groups = order
        .into_iter()
        .map(|qid| {
            let cands = buckets.remove(&qid).unwrap_or_default();
            QueryGroup::from_candidates(qid, cands)
        })
        .collect();
    Dataset::new(groups, max_fid, Provenance::LetorFile)
}

fn doc_id_from_comment(comment: &str) -> Option<String> {
    let rest = comment.strip_prefix("docid").map(|r| r.trim_start());
    let rest = match rest {
        Some(r) => r.strip_prefix('=').or_else(|| r.strip_prefix(':')).unwrap_or(r).trim_start(),
        None => comment,
    };
    rest.split_whitespace().next().map(str::to_string)
}

pub fn load_letor(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    parse_letor(&text, &path.display().to_string())
}

/// Serializes a dataset as LETOR text with every feature written densely.
/// Candidates appear group by group, positives first.
pub fn to_letor_string(ds: &Dataset) -> String {
    let mut out = String::new();
    for g in &ds.groups {
        for c in g.candidates() {
            write!(out, "{} qid:{}", c.label, g.query_id).unwrap();
            for (i, v) in c.features.iter().enumerate() {
                write!(out, " {}:{}", i + 1, v).unwrap();
            }
            writeln!(out, " # {}", c.doc_id).unwrap();
        }
    }
    out
}

pub fn write_letor(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_letor_string(ds)).map_err(|e| Error::io(path, e))
}

/// Evaluation-time relevance labels keyed by (query id, doc id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    labels: BTreeMap<String, BTreeMap<String, u32>>,
}

impl GroundTruth {
    pub fn insert(&mut self, qid: &str, doc_id: &str, label: u32) {
        self.labels.entry(qid.to_string()).or_default().insert(doc_id.to_string(), label);
    }

    pub fn get(&self, qid: &str, doc_id: &str) -> Option<u32> {
        self.labels.get(qid)?.get(doc_id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Recovers ground truth from synthetic doc ids (`..._t<label>`).
    pub fn from_doc_id_suffix(ds: &Dataset) -> Result<Self> {
        let mut truth = GroundTruth::default();
        for g in &ds.groups {
            for c in g.candidates() {
                let label = truth_suffix(&c.doc_id)
                    .ok_or_else(|| Error::Invalid(format!("doc id {} carries no truth suffix", c.doc_id)))?;
                truth.insert(&g.query_id, &c.doc_id, label);
            }
        }
        Ok(truth)
    }

    /// Sidecar lines `<qid>\t<doc_id>\t<true_label>`, in dataset order.
    pub fn to_sidecar_string(&self, ds: &Dataset) -> String {
        let mut out = String::new();
        for g in &ds.groups {
            for c in g.candidates() {
                if let Some(l) = self.get(&g.query_id, &c.doc_id) {
                    writeln!(out, "{}\t{}\t{}", g.query_id, c.doc_id, l).unwrap();
                }
            }
        }
        out
    }

    pub fn parse_sidecar(text: &str, source: &str) -> Result<Self> {
        let mut truth = GroundTruth::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() {
                continue;
            }
            let perr = |msg: String| Error::Parse { path: source.to_string(), line: idx + 1, msg };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(perr(format!("expected 3 tab-separated fields, found {}", fields.len())));
            }
            let label: u32 = fields[2].trim().parse().map_err(|_| perr(format!("invalid label {:?}", fields[2])))?;
            truth.insert(fields[0], fields[1], label);
        }
        Ok(truth)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_sidecar(&text, &path.display().to_string())
    }
}

/// Path of the ground-truth sidecar for a LETOR file (`<path>.truth`).
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".truth");
    PathBuf::from(s)
}

fn truth_suffix(doc_id: &str) -> Option<u32> {
    let (_, t) = doc_id.rsplit_once("_t")?;
    t.parse().ok()
}

// ---------------------------------------------------------------------------
// Synthetic partial-relevance data

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub num_queries: usize,
    pub docs_per_query: usize,
    pub feature_dim: usize,
    pub true_relevant_per_query: usize,
    pub mislabel_fraction: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_queries == 0 || self.feature_dim == 0 {
            return Err(Error::Config("num_queries and feature_dim must be positive".into()));
        }
        if self.true_relevant_per_query == 0 {
            return Err(Error::Config("true_relevant_per_query must be at least 1".into()));
        }
        if self.true_relevant_per_query >= self.docs_per_query {
            return Err(Error::Config("true_relevant_per_query must be smaller than docs_per_query".into()));
        }
        if !(0.0..1.0).contains(&self.mislabel_fraction) {
            return Err(Error::Config("mislabel_fraction must lie in [0, 1)".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Number of truly relevant docs per query whose label is flipped to 0.
    pub fn mislabeled_per_query(&self) -> usize {
        let r = self.true_relevant_per_query;
        // Tolerance absorbs products like 5 * 0.6 landing just under 3.
        let k = (r as f64 * self.mislabel_fraction + 1e-9).floor() as usize;
        k.min(r - 1)
    }

    pub fn labeled_positives_per_query(&self) -> usize {
        self.true_relevant_per_query - self.mislabeled_per_query()
    }
}

/// Generates a dataset whose utilities follow a hidden linear model.
///
/// Doc ids have the form `q<query>_d<doc>_t<true label>` so that evaluation
/// can recover ground truth with [`GroundTruth::from_doc_id_suffix`].
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let f = cfg.feature_dim;

    let mut w: Vec<f64> = (0..f).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        w.iter_mut().for_each(|x| *x /= norm);
    } else {
        w[0] = 1.0;
    }

    let r = cfg.true_relevant_per_query;
    let flip = cfg.mislabeled_per_query();
    let mut groups = Vec::with_capacity(cfg.num_queries);
    for q in 0..cfg.num_queries {
        let mut feats = Vec::with_capacity(cfg.docs_per_query);
        let mut util = Vec::with_capacity(cfg.docs_per_query);
        for _ in 0..cfg.docs_per_query {
            let x: Vec<f64> = (0..f).map(|_| StandardNormal.sample(&mut rng)).collect();
            let noise: f64 = StandardNormal.sample(&mut rng);
            util.push(dot(&w, &x) + cfg.noise_std * noise);
            feats.push(x);
        }
        let mut by_util: Vec<usize> = (0..cfg.docs_per_query).collect();
        by_util.sort_by(|&a, &b| util[b].total_cmp(&util[a]).then(a.cmp(&b)));
        let mut relevant: Vec<usize> = by_util[..r].to_vec();
        relevant.shuffle(&mut rng);
        let mislabeled: HashSet<usize> = relevant[..flip].iter().copied().collect();
        let relevant: HashSet<usize> = relevant.into_iter().collect();

        let cands = feats
            .into_iter()
            .enumerate()
            .map(|(d, features)| {
                let truth = u32::from(relevant.contains(&d));
                let label = if mislabeled.contains(&d) { 0 } else { truth };
                Candidate { doc_id: format!("q{q}_d{d}_t{truth}"), label, features }
            })
            .collect();
        groups.push(QueryGroup::from_candidates(format!("q{q}"), cands));
    }
    Dataset::new(groups, f, Provenance::Synthetic)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Candidate lists and splits

/// Result of [`build_lists`]: the training lists plus how many groups had
/// to be dropped for lacking a positive (or any negative).
#[derive(Debug, Clone)]
pub struct Lists {
    pub dataset: Dataset,
    pub dropped: usize,
}

/// Keeps every positive and a uniform sample without replacement of
/// `min(M, negatives_per_query)` negatives, stored in sampled order.
pub fn build_lists(ds: &Dataset, negatives_per_query: usize, seed: u64) -> Result<Lists> {
    if negatives_per_query == 0 {
        return Err(Error::Config("negatives_per_query must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = Vec::with_capacity(ds.groups.len());
    let mut dropped = 0;
    for g in &ds.groups {
        if g.positives.is_empty() || g.negatives.is_empty() {
            dropped += 1;
            continue;
        }
        let mut negs = g.negatives.clone();
        let take = negs.len().min(negatives_per_query);
        let (chosen, _) = negs.partial_shuffle(&mut rng, take);
        groups.push(QueryGroup {
            query_id: g.query_id.clone(),
            positives: g.positives.clone(),
            negatives: chosen.to_vec(),
        });
    }
    if dropped > 0 {
        log::warn!("build_lists: dropped {dropped} group(s) without positives or negatives");
    }
    Ok(Lists { dataset: Dataset { groups, ..ds.clone_empty() }, dropped })
}

impl Dataset {
    fn clone_empty(&self) -> Dataset {
        Dataset::empty(self.feature_dim, self.provenance)
    }
}

/// Query-level partition into train / valid / test.
///
/// Sizes are `floor(n * f)` per split, with the leftover groups handed out
/// by largest fractional remainder (ties to the earlier split). A split with
/// a nonzero fraction always receives at least one group.
pub fn split(ds: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let fr = [fractions.0, fractions.1, fractions.2];
    if fr.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(Error::Config("split fractions must be finite and non-negative".into()));
    }
    if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config("split fractions must sum to 1".into()));
    }
    let n = ds.groups.len();
    let nonzero = fr.iter().filter(|f| **f > 0.0).count();
    if n < nonzero {
        return Err(Error::Invalid(format!("{n} group(s) cannot fill {nonzero} nonzero splits")));
    }

    let sizes = split_sizes(n, fr);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut parts = Vec::with_capacity(3);
    let mut start = 0;
    for size in sizes {
        let mut chosen = idx[start..start + size].to_vec();
        chosen.sort_unstable();
        start += size;
        let groups = chosen.into_iter().map(|i| ds.groups[i].clone()).collect();
        parts.push(Dataset { groups, ..ds.clone_empty() });
    }
    let test = parts.pop().unwrap();
    let valid = parts.pop().unwrap();
    let train = parts.pop().unwrap();
    Ok((train, valid, test))
}

fn split_sizes(n: usize, fr: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fr.iter().map(|f| n as f64 * f).collect();
    let mut sizes = [0usize; 3];
    for i in 0..3 {
        sizes[i] = (exact[i] + 1e-9).floor() as usize;
    }
    let mut rem: Vec<usize> = (0..3).filter(|&i| fr[i] > 0.0).collect();
    rem.sort_by(|&a, &b| {
        let ra = exact[a] - sizes[a] as f64;
        let rb = exact[b] - sizes[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = n - sizes.iter().sum::<usize>();
    for &i in rem.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    for i in 0..3 {
        if fr[i] > 0.0 && sizes[i] == 0 {
            let donor = (0..3).max_by_key(|&j| (sizes[j], std::cmp::Reverse(j))).unwrap();
            sizes[donor] -= 1;
            sizes[i] += 1;
        }
    }
    sizes
}

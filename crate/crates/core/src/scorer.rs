//! Feature-vector scorers.
//!
//! Every layer, including the output, applies `tanh`, so scores always lie
//! in `[-1, 1]` as the pooling losses require. Parameters live in one flat
//! vector: for each layer, the `out x in` weight matrix (row-major) followed
//! by its `out` biases.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::QueryGroup;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    Linear,
    Mlp,
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScorerKind::Linear => "linear",
            ScorerKind::Mlp => "mlp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scorer {
    kind: ScorerKind,
    layer_dims: Vec<usize>,
    params: Vec<f64>,
}

/// Number of parameters of a fully connected stack with the given widths.
pub fn param_count(layer_dims: &[usize]) -> usize {
    layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_dims(kind: ScorerKind, layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::Config("layer_dims needs at least an input and an output width".into()));
    }
    if layer_dims.contains(&0) {
        return Err(Error::Config(format!("layer_dims contains a zero width: {layer_dims:?}")));
    }
    if *layer_dims.last().unwrap() != 1 {
        return Err(Error::Config("the last layer width must be 1".into()));
    }
    if kind == ScorerKind::Linear && layer_dims.len() != 2 {
        return Err(Error::Config("a linear scorer has exactly one weight layer".into()));
    }
    Ok(())
}

impl Scorer {
    /// Glorot-uniform weights, zero biases.
    pub fn init(kind: ScorerKind, layer_dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(kind, layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(param_count(layer_dims));
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-a..=a)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Ok(Scorer { kind, layer_dims: layer_dims.to_vec(), params })
    }

    pub fn from_params(kind: ScorerKind, layer_dims: &[usize], params: Vec<f64>) -> Result<Self> {
        check_dims(kind, layer_dims)?;
        let expected = param_count(layer_dims);
        if params.len() != expected {
            return Err(Error::DimMismatch { expected, got: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("scorer parameters".into()));
        }
        Ok(Scorer { kind, layer_dims: layer_dims.to_vec(), params })
    }

    pub fn kind(&self) -> ScorerKind {
        self.kind
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn activation_len(&self) -> usize {
        self.layer_dims.iter().sum()
    }

    /// Forward pass writing every layer's activation (input first) into `acts`.
    fn forward_into(&self, x: &[f64], acts: &mut Vec<f64>) -> f64 {
        acts.clear();
        acts.extend_from_slice(x);
        let mut p = 0;
        let mut in_off = 0;
        for w in self.layer_dims.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[p..p + n_in * n_out];
            let biases = &self.params[p + n_in * n_out..p + n_in * n_out + n_out];
            for o in 0..n_out {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let z: f64 = row.iter().zip(&acts[in_off..in_off + n_in]).map(|(a, b)| a * b).sum();
                acts.push((z + biases[o]).tanh());
            }
            p += n_in * n_out + n_out;
            in_off += n_in;
        }
        let s = *acts.last().unwrap();
        debug_assert!(s.abs() <= 1.0);
        s
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut acts = Vec::with_capacity(self.activation_len());
        Ok(self.forward_into(x, &mut acts))
    }

    /// Scores arbitrary feature rows, keeping activations for [`Scorer::backward`].
    pub fn score_rows<'a, I>(&self, rows: I) -> Result<(Vec<f64>, ScoreCache)>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let width = self.activation_len();
        let mut acts = Vec::new();
        let mut scores = Vec::new();
        let mut buf = Vec::with_capacity(width);
        for x in rows {
            if x.len() != self.input_dim() {
                return Err(Error::DimMismatch { expected: self.input_dim(), got: x.len() });
            }
            scores.push(self.forward_into(x, &mut buf));
            acts.extend_from_slice(&buf);
        }
        let cache = ScoreCache { layer_dims: self.layer_dims.clone(), width, acts };
        Ok((scores, cache))
    }

    /// Scores a query group: positives, then negatives.
    pub fn score_list(&self, group: &QueryGroup) -> Result<ScoredList> {
        let (mut scores, cache) = self.score_rows(group.candidates().map(|c| c.features.as_slice()))?;
        let neg = scores.split_off(group.num_positives());
        Ok(ScoredList { pos: scores, neg, cache })
    }

    /// Accumulates `sum_c dL/ds_c * ds_c/dθ` into `out`. Candidates whose
    /// upstream gradient is exactly zero are skipped entirely.
    pub fn backward(&self, cache: &ScoreCache, dl_dscores: &[f64], out: &mut GradBuffer) -> Result<()> {
        if cache.layer_dims != self.layer_dims {
            return Err(Error::Invalid("score cache was produced by a different architecture".into()));
        }
        if dl_dscores.len() != cache.len() {
            return Err(Error::DimMismatch { expected: cache.len(), got: dl_dscores.len() });
        }
        if out.grad.len() != self.params.len() {
            return Err(Error::DimMismatch { expected: self.params.len(), got: out.grad.len() });
        }

        let n_layers = self.layer_dims.len() - 1;
        let mut param_off = Vec::with_capacity(n_layers);
        let mut act_off = Vec::with_capacity(n_layers + 1);
        let (mut p, mut a) = (0, 0);
        for w in self.layer_dims.windows(2) {
            param_off.push(p);
            act_off.push(a);
            p += w[0] * w[1] + w[1];
            a += w[0];
        }
        act_off.push(a);

        // Summed per call, then added: repeated calls accumulate exactly.
        let mut local = vec![0.0; self.params.len()];
        let mut delta = Vec::new();
        let mut next = Vec::new();
        for (c, &g) in dl_dscores.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let acts = &cache.acts[c * cache.width..(c + 1) * cache.width];
            let s = acts[act_off[n_layers]];
            delta.clear();
            delta.push(g * (1.0 - s * s));
            for l in (0..n_layers).rev() {
                let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
                let input = &acts[act_off[l]..act_off[l] + n_in];
                let po = param_off[l];
                for o in 0..n_out {
                    let d = delta[o];
                    let row = &mut local[po + o * n_in..po + (o + 1) * n_in];
                    for (gw, x) in row.iter_mut().zip(input) {
                        *gw += d * x;
                    }
                    local[po + n_in * n_out + o] += d;
                }
                if l > 0 {
                    let weights = &self.params[po..po + n_in * n_out];
                    next.clear();
                    next.resize(n_in, 0.0);
                    for o in 0..n_out {
                        let d = delta[o];
                        for (acc, w) in next.iter_mut().zip(&weights[o * n_in..(o + 1) * n_in]) {
                            *acc += w * d;
                        }
                    }
                    for (acc, h) in next.iter_mut().zip(input) {
                        *acc *= 1.0 - h * h;
                    }
                    std::mem::swap(&mut delta, &mut next);
                }
            }
        }
        for (acc, g) in out.grad.iter_mut().zip(&local) {
            *acc += g;
        }
        out.count += 1;
        Ok(())
    }

    // -- checkpoints -------------------------------------------------------

    /// JSON checkpoint; parameters are written with 17 significant digits.
    pub fn to_checkpoint_string(&self) -> String {
        let params: Vec<Box<serde_json::value::RawValue>> = self
            .params
            .iter()
            .map(|p| serde_json::value::RawValue::from_string(format!("{p:.16e}")).unwrap())
            .collect();
        let doc = CheckpointOut { kind: self.kind, layer_dims: &self.layer_dims, params };
        serde_json::to_string_pretty(&doc).unwrap()
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        let doc: CheckpointIn = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        Scorer::from_params(doc.kind, &doc.layer_dims, doc.params).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_checkpoint_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_str(&text)
    }
}

#[derive(Serialize)]
struct CheckpointOut<'a> {
    kind: ScorerKind,
    layer_dims: &'a [usize],
    params: Vec<Box<serde_json::value::RawValue>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointIn {
    kind: ScorerKind,
    layer_dims: Vec<usize>,
    params: Vec<f64>,
}

/// Per-candidate forward activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ScoreCache {
    layer_dims: Vec<usize>,
    width: usize,
    acts: Vec<f64>,
}

impl ScoreCache {
    /// Number of scored candidates.
    pub fn len(&self) -> usize {
        self.acts.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone)]
pub struct ScoredList {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
    pub cache: ScoreCache,
}

/// Parameter-gradient accumulator with the same layout as [`Scorer::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradBuffer {
    pub grad: Vec<f64>,
    /// Number of backward passes accumulated.
    pub count: usize,
}

impl GradBuffer {
    pub fn zeros(len: usize) -> Self {
        GradBuffer { grad: vec![0.0; len], count: 0 }
    }

    pub fn for_scorer(sc: &Scorer) -> Self {
        Self::zeros(sc.num_params())
    }

    pub fn clear(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        self.count = 0;
    }

    pub fn add(&mut self, other: &GradBuffer) {
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        self.count += other.count;
    }

    pub fn scale(&mut self, k: f64) {
        self.grad.iter_mut().for_each(|g| *g *= k);
    }
}

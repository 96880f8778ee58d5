//! PoolRank: four pooling-based components and their weighted total.
//!
//! With `s̄` the mean positive score and `δ_i` / `Δ_i` the per-window
//! argmin / argmax negatives, over `m` windows:
//!
//! ```text
//! L_min     = 1/m Σ max(0, 1 - s̄ + s[δ_i])
//! L_min/max = 1/m Σ (s[Δ_i] - s[δ_i])²
//! L_max     = 1/m Σ (s[Δ_i] + 1)²
//! L_target  = (1 - s̄)²
//! L         = c1 L_min + c2 L_min/max + c3 L_max + c4 L_target
//! ```
//!
//! Only the positives and the selected negatives receive gradient.

use super::{check_pairwise, LossGrad, LossWeights};
use crate::pooling::{pool_select, PoolingSelection};
use crate::{Error, Result};

pub fn avg_positive(pos: &[f64]) -> Result<f64> {
    if pos.is_empty() {
        return Err(Error::Invalid("average positive score needs N >= 1".into()));
    }
    Ok(pos.iter().sum::<f64>() / pos.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolRankComponents {
    pub l_min: LossGrad,
    pub l_minmax: LossGrad,
    pub l_max: LossGrad,
    pub l_target: LossGrad,
    pub selection: PoolingSelection,
    pub avg_positive: f64,
}

impl PoolRankComponents {
    pub fn values(&self) -> [f64; 4] {
        [self.l_min.value, self.l_minmax.value, self.l_max.value, self.l_target.value]
    }

    pub fn parts(&self) -> [&LossGrad; 4] {
        [&self.l_min, &self.l_minmax, &self.l_max, &self.l_target]
    }

    /// Weighted sum of the components and their gradients.
    pub fn combine(&self, weights: &LossWeights) -> LossGrad {
        let mut total = LossGrad::zeros(self.l_min.grad.len());
        for (c, part) in weights.as_array().into_iter().zip(self.parts()) {
            if c != 0.0 {
                total.add_scaled(c, part);
            }
        }
        total
    }
}

pub fn poolrank_components(pos: &[f64], neg: &[f64], kappa: usize) -> Result<PoolRankComponents> {
    check_pairwise(pos, neg)?;
    let selection = pool_select(neg, kappa)?;
    let n = pos.len();
    let len = n + neg.len();
    let m = selection.m as f64;
    let mean = avg_positive(pos)?;
    let per_pos = 1.0 / n as f64;

    let mut l_min = LossGrad::zeros(len);
    let mut l_minmax = LossGrad::zeros(len);
    let mut l_max = LossGrad::zeros(len);
    let mut l_target = LossGrad::zeros(len);

    let mut d_mean_min = 0.0;
    for (&hi, &lo) in selection.max_indices.iter().zip(&selection.min_indices) {
        let (s_hi, s_lo) = (neg[hi], neg[lo]);

        let hinge = 1.0 - mean + s_lo;
        if hinge > 0.0 {
            l_min.value += hinge;
            l_min.grad[n + lo] += 1.0 / m;
            d_mean_min -= 1.0 / m;
        }

        let gap = s_hi - s_lo;
        l_minmax.value += gap * gap;
        l_minmax.grad[n + hi] += 2.0 * gap / m;
        l_minmax.grad[n + lo] -= 2.0 * gap / m;

        let lift = s_hi + 1.0;
        l_max.value += lift * lift;
        l_max.grad[n + hi] += 2.0 * lift / m;
    }
    l_min.value /= m;
    l_minmax.value /= m;
    l_max.value /= m;

    let short = 1.0 - mean;
    l_target.value = short * short;
    let d_mean_target = -2.0 * short;

    for i in 0..n {
        l_min.grad[i] = d_mean_min * per_pos;
        l_target.grad[i] = d_mean_target * per_pos;
    }

    Ok(PoolRankComponents { l_min, l_minmax, l_max, l_target, selection, avg_positive: mean })
}

pub fn poolrank_loss(pos: &[f64], neg: &[f64], kappa: usize, weights: &LossWeights) -> Result<LossGrad> {
    weights.validate()?;
    Ok(poolrank_components(pos, neg, kappa)?.combine(weights))
}

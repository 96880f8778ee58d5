//! Max/min pooling over the negative-score array.
//!
//! Negatives are cut into consecutive windows of `kappa` scores (the last
//! window may be shorter). Each window contributes the index of its largest
//! score (likely partially relevant) and of its smallest score (likely truly
//! non-relevant). Losses built on the selection route gradient only to these
//! indices; every other negative receives exactly zero.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolingSelection {
    pub kappa: usize,
    /// Number of windows, `ceil(M / kappa)`.
    pub m: usize,
    pub max_indices: Vec<usize>,
    pub min_indices: Vec<usize>,
}

impl PoolingSelection {
    /// Half-open range of negative indices covered by window `i`.
    pub fn window(&self, i: usize, num_negatives: usize) -> std::ops::Range<usize> {
        let start = i * self.kappa;
        start..(start + self.kappa).min(num_negatives)
    }

    /// Sorted, deduplicated set of negatives that receive gradient.
    pub fn selected(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.max_indices.iter().chain(&self.min_indices).copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

pub fn num_windows(num_negatives: usize, kappa: usize) -> usize {
    num_negatives.div_ceil(kappa)
}

/// Per-window argmax / argmin; ties go to the lowest index in the window.
pub fn pool_select(scores_neg: &[f64], kappa: usize) -> Result<PoolingSelection> {
    if scores_neg.is_empty() {
        return Err(Error::Invalid("pooling needs at least one negative score".into()));
    }
    if kappa == 0 {
        return Err(Error::Config("pooling window size must be at least 1".into()));
    }
    let m = num_windows(scores_neg.len(), kappa);
    let mut max_indices = Vec::with_capacity(m);
    let mut min_indices = Vec::with_capacity(m);
    for (w, chunk) in scores_neg.chunks(kappa).enumerate() {
        let base = w * kappa;
        let (mut hi, mut lo) = (0, 0);
        for (j, &s) in chunk.iter().enumerate().skip(1) {
            if s > chunk[hi] {
                hi = j;
            }
            if s < chunk[lo] {
                lo = j;
            }
        }
        max_indices.push(base + hi);
        min_indices.push(base + lo);
    }
    Ok(PoolingSelection { kappa, m, max_indices, min_indices })
}

//! Independent oracles shared by the integration and acceptance suites.
//! Nothing here calls into the code paths it is used to check.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;
/// Denominator floor for the relative error of near-zero gradients.
pub const FD_FLOOR: f64 = 1e-6;

/// Central finite-difference gradient of `f` at `x`.
pub fn fd_gradient(x: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + FD_STEP;
            let up = f(&probe);
            probe[i] = orig - FD_STEP;
            let dn = f(&probe);
            probe[i] = orig;
            (up - dn) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(FD_FLOOR)).fold(0.0, f64::max)
}

pub fn uniform_scores(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-0.95..0.95)).collect()
}

/// True when every pair of values is at least `gap` apart.
pub fn well_separated(xs: &[f64], gap: f64) -> bool {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).all(|w| w[1] - w[0] >= gap)
}

/// Brute-force per-window argmax / argmin (lowest index on ties).
pub fn scan_windows(scores: &[f64], kappa: usize) -> (Vec<usize>, Vec<usize>) {
    let mut hi = Vec::new();
    let mut lo = Vec::new();
    let mut start = 0;
    while start < scores.len() {
        let end = (start + kappa).min(scores.len());
        let mut best_hi = start;
        let mut best_lo = start;
        for j in start..end {
            if scores[j] > scores[best_hi] {
                best_hi = j;
            }
            if scores[j] < scores[best_lo] {
                best_lo = j;
            }
        }
        hi.push(best_hi);
        lo.push(best_lo);
        start = end;
    }
    (hi, lo)
}

// -- definitional metrics over (score, label) pairs ------------------------

/// Labels in ranked order: higher score first, then lower original index.
pub fn ranked_labels(scores: &[f64], labels: &[u32]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    // insertion sort, explicit comparison
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (idx[j - 1], idx[j]);
            let swap = scores[b] > scores[a] || (scores[b] == scores[a] && b < a);
            if !swap {
                break;
            }
            idx.swap(j - 1, j);
            j -= 1;
        }
    }
    idx.into_iter().map(|i| labels[i]).collect()
}

pub fn oracle_mrr(ranked: &[u32]) -> f64 {
    for (k, &l) in ranked.iter().enumerate() {
        if l > 0 {
            return 1.0 / (k as f64 + 1.0);
        }
    }
    0.0
}

fn dcg(ranked: &[u32]) -> f64 {
    ranked.iter().enumerate().map(|(k, &l)| (2f64.powi(l as i32) - 1.0) / (k as f64 + 2.0).log2()).sum()
}

pub fn oracle_ndcg(ranked: &[u32]) -> f64 {
    let mut ideal = ranked.to_vec();
    ideal.sort_by(|a, b| b.cmp(a));
    let i = dcg(&ideal);
    if i == 0.0 {
        0.0
    } else {
        dcg(ranked) / i
    }
}

pub fn oracle_map(ranked: &[u32]) -> f64 {
    let rel = ranked.iter().filter(|&&l| l > 0).count();
    if rel == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 0..ranked.len() {
        if ranked[k] > 0 {
            let hits = ranked[..=k].iter().filter(|&&l| l > 0).count();
            total += hits as f64 / (k + 1) as f64;
        }
    }
    total / rel as f64
}

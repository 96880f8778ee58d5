//! Listwise baselines over a flat `(scores, labels)` list.

use super::{log_sum_exp, sigmoid, softmax, LossGrad};
use crate::{Error, Result};

fn check_list(scores: &[f64], labels: &[u32]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Invalid("listwise losses need a nonempty list".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::DimMismatch { expected: scores.len(), got: labels.len() });
    }
    Ok(())
}

/// ListNet top-one cross entropy between `softmax(labels)` and `softmax(scores)`.
pub fn listnet_loss(scores: &[f64], labels: &[u32]) -> Result<LossGrad> {
    check_list(scores, labels)?;
    let target: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let p_y = softmax(&target);
    let lse = log_sum_exp(scores);
    let value = -p_y.iter().zip(scores).map(|(py, s)| py * (s - lse)).sum::<f64>();
    let grad = scores.iter().zip(&p_y).map(|(s, py)| (s - lse).exp() - py).collect();
    Ok(LossGrad { value, grad })
}

/// Permutation sorting labels descending, ties kept in index order.
pub(crate) fn label_order(labels: &[u32]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| labels[b].cmp(&labels[a]).then(a.cmp(&b)));
    order
}

/// Plackett-Luce negative log-likelihood of the label-sorted permutation.
pub fn listmle_loss(scores: &[f64], labels: &[u32]) -> Result<LossGrad> {
    check_list(scores, labels)?;
    let order = label_order(labels);
    let k = order.len();
    let s: Vec<f64> = order.iter().map(|&i| scores[i]).collect();

    // suffix[i] = log sum_{j >= i} exp(s_j), built back to front.
    let mut suffix = vec![0.0; k];
    let mut acc = f64::NEG_INFINITY;
    for i in (0..k).rev() {
        acc = if acc == f64::NEG_INFINITY {
            s[i]
        } else {
            let (hi, lo) = if acc > s[i] { (acc, s[i]) } else { (s[i], acc) };
            hi + (lo - hi).exp().ln_1p()
        };
        suffix[i] = acc;
    }

    let value = (0..k).map(|i| suffix[i] - s[i]).sum::<f64>().max(0.0);
    let mut grad = vec![0.0; k];
    for (pos, &doc) in order.iter().enumerate() {
        let share: f64 = (0..=pos).map(|i| (s[pos] - suffix[i]).exp()).sum();
        grad[doc] = share - 1.0;
    }
    Ok(LossGrad { value, grad })
}

pub(crate) fn gain(label: u32) -> f64 {
    2f64.powi(label as i32) - 1.0
}

/// Ideal DCG with exponential gains and `1 / log2(1 + rank)` discounts.
pub(crate) fn ideal_dcg(labels: &[u32]) -> f64 {
    label_order(labels).iter().enumerate().map(|(r, &i)| gain(labels[i]) / ((r + 2) as f64).log2()).sum()
}

/// `1 - approxNDCG` with smoothed ranks `1 + sum_{j != i} sigmoid((s_j - s_i) / tau)`.
pub fn approxndcg_loss(scores: &[f64], labels: &[u32], tau: f64) -> Result<LossGrad> {
    check_list(scores, labels)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Config(format!("approxndcg temperature must be > 0, got {tau}")));
    }
    let idcg = ideal_dcg(labels);
    if idcg <= 0.0 {
        return Err(Error::Invalid("undefined nDCG: no relevant label in the list".into()));
    }
    let k = scores.len();
    let mut sig = vec![0.0; k * k];
    let mut rank = vec![1.0; k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let v = sigmoid((scores[j] - scores[i]) / tau);
                sig[i * k + j] = v;
                rank[i] += v;
            }
        }
    }

    let mut dcg = 0.0;
    let mut grad = vec![0.0; k];
    let ln2 = std::f64::consts::LN_2;
    for i in 0..k {
        let g = gain(labels[i]);
        if g == 0.0 {
            continue;
        }
        let lg = (1.0 + rank[i]).log2();
        dcg += g / lg;
        // d(value)/d(rank_i); value = 1 - dcg / idcg
        let dv_dr = g / (idcg * lg * lg * (1.0 + rank[i]) * ln2);
        for j in 0..k {
            if j == i {
                continue;
            }
            let v = sig[i * k + j];
            let d = dv_dr * v * (1.0 - v) / tau;
            grad[j] += d;
            grad[i] -= d;
        }
    }
    Ok(LossGrad { value: 1.0 - dcg / idcg, grad })
}

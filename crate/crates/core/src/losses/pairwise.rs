//! Pairwise baselines, averaged over all `N * M` positive/negative pairs.

use super::{check_pairwise, log1p_exp, sigmoid, LossGrad};
use crate::Result;

/// Hinge `max(0, 1 - s+ + s-)` averaged over pairs. At the kink the
/// subgradient is 0.
pub fn margin_loss(pos: &[f64], neg: &[f64]) -> Result<LossGrad> {
    check_pairwise(pos, neg)?;
    let n = pos.len();
    let scale = 1.0 / (n * neg.len()) as f64;
    let mut out = LossGrad::zeros(n + neg.len());
    for (i, sp) in pos.iter().enumerate() {
        for (j, sn) in neg.iter().enumerate() {
            let h = 1.0 - sp + sn;
            if h > 0.0 {
                out.value += h;
                out.grad[i] -= scale;
                out.grad[n + j] += scale;
            }
        }
    }
    out.value *= scale;
    Ok(out)
}

/// RankNet cross entropy `log(1 + exp(-sigma (s+ - s-)))` averaged over pairs.
pub fn ranknet_loss(pos: &[f64], neg: &[f64], sigma: f64) -> Result<LossGrad> {
    check_pairwise(pos, neg)?;
    let n = pos.len();
    let scale = 1.0 / (n * neg.len()) as f64;
    let mut out = LossGrad::zeros(n + neg.len());
    for (i, sp) in pos.iter().enumerate() {
        for (j, sn) in neg.iter().enumerate() {
            let d = sigma * (sp - sn);
            out.value += log1p_exp(-d);
            let g = scale * sigma * sigmoid(-d);
            out.grad[i] -= g;
            out.grad[n + j] += g;
        }
    }
    out.value *= scale;
    Ok(out)
}

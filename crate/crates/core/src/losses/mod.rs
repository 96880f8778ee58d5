//! Training losses with exact gradients with respect to candidate scores.
//!
//! All losses see one query's list in scoring order: the `N` positive scores
//! followed by the `M` negative scores. [`LossGrad::grad`] follows the same
//! layout, so it can be fed straight into [`crate::scorer::Scorer::backward`].
//!
//! | Loss | Kind | Module |
//! |------|------|--------|
//! | margin, RankNet | pairwise | [`pairwise`] |
//! | ListNet, ListMLE, ApproxNDCG | listwise | [`listwise`] |
//! | PoolRank (four components) | pooling listwise | [`poolrank`] |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub mod listwise;
pub mod pairwise;
pub mod poolrank;

pub use listwise::{approxndcg_loss, listmle_loss, listnet_loss};
pub use pairwise::{margin_loss, ranknet_loss};
pub use poolrank::{avg_positive, poolrank_components, poolrank_loss, PoolRankComponents};

/// Loss value plus its gradient over the whole candidate list.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LossGrad {
    pub fn zeros(len: usize) -> Self {
        LossGrad { value: 0.0, grad: vec![0.0; len] }
    }

    /// Gradient with respect to the first `num_pos` (positive) scores.
    pub fn d_pos(&self, num_pos: usize) -> &[f64] {
        &self.grad[..num_pos]
    }

    /// Gradient with respect to the scores after the first `num_pos`.
    pub fn d_neg(&self, num_pos: usize) -> &[f64] {
        &self.grad[num_pos..]
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.grad.iter().all(|g| g.is_finite())
    }

    /// `self += k * other`.
    pub fn add_scaled(&mut self, k: f64, other: &LossGrad) {
        self.value += k * other.value;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += k * b;
        }
    }
}

/// Mixture weights on L_min, L_min/max, L_max and L_target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { c1: 0.5, c2: 1.0, c3: 0.5, c4: 1.0 }
    }
}

impl LossWeights {
    pub fn new(c1: f64, c2: f64, c3: f64, c4: f64) -> Result<Self> {
        let w = LossWeights { c1, c2, c3, c4 };
        w.validate()?;
        Ok(w)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.c1, self.c2, self.c3, self.c4]
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.as_array();
        if a.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Config(format!("loss weights must be finite and >= 0: {a:?}")));
        }
        if a.iter().all(|&c| c == 0.0) {
            return Err(Error::Config("loss weights must not all be zero".into()));
        }
        Ok(())
    }

    /// Keeps the weights whose mask bit is set, zeroing the rest.
    pub fn masked(&self, mask: [bool; 4]) -> Result<Self> {
        let a = self.as_array();
        let pick = |i: usize| if mask[i] { a[i] } else { 0.0 };
        LossWeights::new(pick(0), pick(1), pick(2), pick(3))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Margin,
    Ranknet,
    Listnet,
    Listmle,
    Approxndcg,
    Poolrank,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::Margin,
        LossKind::Ranknet,
        LossKind::Listnet,
        LossKind::Listmle,
        LossKind::Approxndcg,
        LossKind::Poolrank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Margin => "margin",
            LossKind::Ranknet => "ranknet",
            LossKind::Listnet => "listnet",
            LossKind::Listmle => "listmle",
            LossKind::Approxndcg => "approxndcg",
            LossKind::Poolrank => "poolrank",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = LossKind::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown loss {s:?}; valid names: {}", names.join(", ")))
        })
    }
}

/// A fully parameterised loss, ready to evaluate on one query's list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    Margin,
    RankNet { sigma: f64 },
    ListNet,
    ListMle,
    ApproxNdcg { tau: f64 },
    PoolRank { kappa: usize, weights: LossWeights },
}

impl Loss {
    /// Evaluates the loss on `pos ++ neg`. `pos_labels` carries the graded
    /// labels of the positives; negatives count as label 0.
    pub fn eval(&self, pos: &[f64], neg: &[f64], pos_labels: &[u32]) -> Result<LossGrad> {
        let labels = || {
            let mut l = pos_labels.to_vec();
            l.resize(pos.len() + neg.len(), 0);
            l
        };
        let concat = || [pos, neg].concat();
        match *self {
            Loss::Margin => margin_loss(pos, neg),
            Loss::RankNet { sigma } => ranknet_loss(pos, neg, sigma),
            Loss::ListNet => listnet_loss(&concat(), &labels()),
            Loss::ListMle => listmle_loss(&concat(), &labels()),
            Loss::ApproxNdcg { tau } => approxndcg_loss(&concat(), &labels(), tau),
            Loss::PoolRank { kappa, weights } => poolrank_loss(pos, neg, kappa, &weights),
        }
    }

    pub fn kind(&self) -> LossKind {
        match self {
            Loss::Margin => LossKind::Margin,
            Loss::RankNet { .. } => LossKind::Ranknet,
            Loss::ListNet => LossKind::Listnet,
            Loss::ListMle => LossKind::Listmle,
            Loss::ApproxNdcg { .. } => LossKind::Approxndcg,
            Loss::PoolRank { .. } => LossKind::Poolrank,
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| (x - lse).exp()).collect()
}

pub(crate) fn check_pairwise(pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Invalid(format!(
            "pairwise losses need N >= 1 and M >= 1 (got N={}, M={})",
            pos.len(),
            neg.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_validation() {
        assert!(LossWeights::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(LossWeights::new(-1.0, 1.0, 0.0, 0.0).is_err());
        assert_eq!(LossWeights::default().as_array(), [0.5, 1.0, 0.5, 1.0]);
        let w = LossWeights::default().masked([false, false, true, true]).unwrap();
        assert_eq!(w.as_array(), [0.0, 0.0, 0.5, 1.0]);
        assert!(LossWeights::default().masked([false; 4]).is_err());
    }

    #[test]
    fn loss_names_parse() {
        for k in LossKind::ALL {
            assert_eq!(k.name().parse::<LossKind>().unwrap(), k);
        }
        let err = "hinge".parse::<LossKind>().unwrap_err().to_string();
        assert!(err.contains("margin") && err.contains("poolrank"), "{err}");
    }

    #[test]
    fn stable_helpers() {
        assert!((log1p_exp(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log1p_exp(800.0), 800.0);
        assert!(log1p_exp(-800.0) >= 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-9);
    }
}

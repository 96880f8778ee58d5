//! Pooling-based listwise learning to rank.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: LETOR parsing, synthetic partial-relevance data, candidate lists, splits
//! - [`scorer`]: linear / MLP scorers with a final `tanh`, forward and reverse-mode gradients
//! - [`pooling`]: per-window max/min selection over negative scores
//! - [`losses`]: PoolRank components plus pairwise and listwise baselines, all with score gradients
//! - [`metrics`]: ranking, MRR / nDCG / MAP and evaluation reports
//! - [`trainer`]: Adam, the training loop, the component ablation grid and the window-size sweep

pub mod dataset;
mod error;
pub mod losses;
pub mod metrics;
pub mod parallel;
pub mod pooling;
pub mod scorer;
pub mod trainer;

pub use error::{Error, Result};

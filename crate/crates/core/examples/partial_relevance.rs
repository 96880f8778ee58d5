//! Synthetic partial-relevance benchmark: PoolRank vs. the pairwise margin
//! baseline, scored on ground-truth labels of held-out queries.
//!
//! Usage: cargo run --release -p poolrank --example partial_relevance [seeds]

use poolrank::dataset::{generate_synthetic, split, GroundTruth, SynthConfig};
use poolrank::losses::LossKind;
use poolrank::metrics::EvalLabels;
use poolrank::parallel::Workers;
use poolrank::trainer::{train_and_test, TrainConfig};

fn main() -> poolrank::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let workers = Workers::serial();
    for seed in 0..seeds {
        let ds = generate_synthetic(&SynthConfig {
            num_queries: 200,
            docs_per_query: 100,
            feature_dim: 10,
            true_relevant_per_query: 5,
            mislabel_fraction: 0.6,
            noise_std: 0.1,
            seed,
        })?;
        let truth = GroundTruth::from_doc_id_suffix(&ds)?;
        let (train, valid, test) = split(&ds, (0.6, 0.2, 0.2), seed)?;
        let base = TrainConfig { seed, ..TrainConfig::default() };
        let mut line = format!("seed {seed}");
        for (name, cfg) in [
            ("margin", TrainConfig { loss: LossKind::Margin, ..base.clone() }),
            ("pool5", TrainConfig { kappa: 5, ..base.clone() }),
            ("pool10", TrainConfig { kappa: 10, ..base.clone() }),
            ("listnet", TrainConfig { loss: LossKind::Listnet, ..base.clone() }),
        ] {
            let (_, rec, m) = train_and_test(&cfg, &train, &valid, &test, EvalLabels::GroundTruth(&truth), &workers)?;
            line += &format!("  {name}: mrr={:.4} (valid {:.4})", m.mrr, rec.best_valid.unwrap_or(f64::NAN));
        }
        println!("{line}");
    }
    Ok(())
}

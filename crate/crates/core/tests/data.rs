//! Dataset I/O, synthetic generation, list building and splitting.

use std::collections::BTreeSet;

use poolrank::dataset::{
    build_lists, generate_synthetic, load_letor, parse_letor, sidecar_path, split, to_letor_string, write_letor,
    Candidate, Dataset, GroundTruth, Provenance, QueryGroup, SynthConfig,
};
use proptest::prelude::*;

fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        num_queries: 12,
        docs_per_query: 20,
        feature_dim: 4,
        true_relevant_per_query: 5,
        mislabel_fraction: 0.6,
        noise_std: 0.1,
        seed,
    }
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..5).prop_flat_map(|dim| {
        let cand = (0u32..3, prop::collection::vec(-1e3f64..1e3, dim));
        prop::collection::vec(prop::collection::vec(cand, 1..6), 1..5).prop_map(move |qs| {
            let groups = qs
                .into_iter()
                .enumerate()
                .map(|(q, cs)| {
                    let cands = cs
                        .into_iter()
                        .enumerate()
                        .map(|(d, (label, features))| Candidate { doc_id: format!("doc{q}-{d}"), label, features })
                        .collect();
                    QueryGroup::from_candidates(format!("{}", 100 + q), cands)
                })
                .collect();
            Dataset::new(groups, dim, Provenance::LetorFile).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn letor_round_trip(ds in arb_dataset()) {
        let text = to_letor_string(&ds);
        let back = parse_letor(&text, "mem").unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn split_is_a_partition(n in 3usize..40, a in 0.1f64..0.8, seed in any::<u64>()) {
        let mut cfg = small_synth(seed);
        cfg.num_queries = n;
        cfg.docs_per_query = 6;
        cfg.true_relevant_per_query = 2;
        let ds = generate_synthetic(&cfg).unwrap();
        let b = (1.0 - a) / 2.0;
        let (tr, va, te) = split(&ds, (a, b, 1.0 - a - b), seed).unwrap();
        prop_assert_eq!(tr.len() + va.len() + te.len(), n);
        prop_assert!(!tr.is_empty() && !va.is_empty() && !te.is_empty());
        let mut seen = BTreeSet::new();
        for part in [&tr, &va, &te] {
            for q in part.query_ids() {
                prop_assert!(seen.insert(q.to_string()));
            }
        }
    }
}

#[test]
fn letor_file_round_trip_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synth.txt");
    let ds = generate_synthetic(&small_synth(3)).unwrap();
    write_letor(&ds, &path).unwrap();
    let truth = GroundTruth::from_doc_id_suffix(&ds).unwrap();
    std::fs::write(sidecar_path(&path), truth.to_sidecar_string(&ds)).unwrap();

    let back = load_letor(&path).unwrap();
    assert_eq!(back.groups, ds.groups);
    assert_eq!(GroundTruth::load(sidecar_path(&path)).unwrap(), truth);
}

#[test]
fn synthetic_labels_follow_the_mislabel_rule() {
    let cfg = small_synth(7);
    let ds = generate_synthetic(&cfg).unwrap();
    let truth = GroundTruth::from_doc_id_suffix(&ds).unwrap();
    // floor(5 * 0.6) = 3 flipped, 2 left labeled
    assert_eq!(cfg.mislabeled_per_query(), 3);
    for g in &ds.groups {
        assert_eq!(g.len(), 20);
        assert_eq!(g.num_positives(), 2);
        let relevant = g.candidates().filter(|c| truth.get(&g.query_id, &c.doc_id) == Some(1)).count();
        assert_eq!(relevant, 5);
        // every labeled positive is truly relevant
        assert!(g.positives.iter().all(|c| truth.get(&g.query_id, &c.doc_id) == Some(1)));
    }
    assert_eq!(generate_synthetic(&cfg).unwrap(), ds);
    assert_ne!(generate_synthetic(&small_synth(8)).unwrap(), ds);
}

#[test]
fn mislabel_count_never_erases_all_positives() {
    let mut cfg = small_synth(1);
    cfg.true_relevant_per_query = 2;
    cfg.mislabel_fraction = 0.99;
    assert_eq!(cfg.mislabeled_per_query(), 1);
    cfg.mislabel_fraction = 0.0;
    assert_eq!(cfg.mislabeled_per_query(), 0);
}

#[test]
fn build_lists_samples_negatives_and_drops_unusable_groups() {
    let ds = generate_synthetic(&small_synth(5)).unwrap();
    let lists = build_lists(&ds, 7, 9).unwrap();
    assert_eq!(lists.dropped, 0);
    for (g, orig) in lists.dataset.groups.iter().zip(&ds.groups) {
        assert_eq!(g.positives, orig.positives);
        assert_eq!(g.num_negatives(), 7);
        let ids: BTreeSet<&str> = g.negatives.iter().map(|c| c.doc_id.as_str()).collect();
        assert_eq!(ids.len(), 7);
        assert!(g.negatives.iter().all(|c| orig.negatives.contains(c)));
    }
    // more negatives requested than available keeps all of them
    let all = build_lists(&ds, 1000, 9).unwrap();
    assert!(all.dataset.groups.iter().all(|g| g.num_negatives() == 18));

    let c = |id: &str, label| Candidate { doc_id: id.into(), label, features: vec![0.0] };
    let odd = Dataset::new(
        vec![
            QueryGroup::from_candidates("a", vec![c("x", 0), c("y", 0)]),
            QueryGroup::from_candidates("b", vec![c("x", 1), c("y", 0)]),
            QueryGroup::from_candidates("c", vec![c("x", 1)]),
        ],
        1,
        Provenance::LetorFile,
    )
    .unwrap();
    let lists = build_lists(&odd, 5, 0).unwrap();
    assert_eq!(lists.dropped, 2);
    assert_eq!(lists.dataset.query_ids(), vec!["b"]);
}

#[test]
fn relabel_uses_ground_truth() {
    let ds = generate_synthetic(&small_synth(2)).unwrap();
    let truth = GroundTruth::from_doc_id_suffix(&ds).unwrap();
    let relabeled = ds.relabeled(&truth).unwrap();
    assert!(relabeled.groups.iter().all(|g| g.num_positives() == 5));
}

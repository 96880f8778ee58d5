//! Runs the `poolrank` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use poolrank::dataset::{load_letor, GroundTruth};
use poolrank::metrics::{evaluate, EvalLabels};
use poolrank::parallel::Workers;
use poolrank::scorer::Scorer;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_poolrank"));
    c.env_remove("LTR_THREADS").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: PathBuf) -> String {
    std::fs::read_to_string(path).unwrap()
}

/// Small synthetic dataset in `dir/data/synthetic.txt`.
fn gen_small(dir: &Path, seed: &str, mislabel: &str) -> PathBuf {
    let out = dir.join("data");
    let o = run(&[
        "gen",
        "--queries",
        "24",
        "--docs",
        "15",
        "--features",
        "4",
        "--relevant",
        "3",
        "--mislabel",
        mislabel,
        "--seed",
        seed,
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out.join("synthetic.txt")
}

const FAST: [&str; 6] = ["--epochs", "2", "--negatives", "8", "--kappa", "3"];

#[test]
fn gen_is_deterministic_and_writes_a_sidecar() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = gen_small(a.path(), "1", "0.6");
    let fb = gen_small(b.path(), "1", "0.6");
    assert_eq!(std::fs::read(&fa).unwrap(), std::fs::read(&fb).unwrap());
    assert_eq!(read(fa.with_extension("txt.truth")), read(fb.with_extension("txt.truth")));
    let other = gen_small(b.path(), "2", "0.6");
    assert_ne!(read(fa), read(other));
}

#[test]
fn gen_without_mislabeling_has_matching_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let f = gen_small(dir.path(), "3", "0");
    let ds = load_letor(&f).unwrap();
    let truth = GroundTruth::load(f.with_extension("txt.truth")).unwrap();
    for g in &ds.groups {
        for c in g.candidates() {
            assert_eq!(truth.get(&g.query_id, &c.doc_id), Some(c.label));
        }
    }
}

#[test]
fn gen_rejects_bad_flags_and_unwritable_paths() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gen", "--relevant", "200", "--docs", "10", "--out", p(dir.path())]);
    assert_eq!(code(&o), 1);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = run(&["gen", "--queries", "2", "--docs", "5", "--relevant", "1", "--out", p(&blocker.join("sub"))]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn train_is_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "4", "0.6");
    let out = dir.path().join("run");
    let names = ["model.json", "run.tsv", "run.json", "config.json"];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let mut args = vec!["train", "--train", p(&data), "--valid", p(&data), "--out", p(&out)];
        args.extend(FAST);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        snapshots.push(names.map(|n| std::fs::read(out.join(n)).unwrap()));
    }
    assert!(snapshots[0] == snapshots[1]);
    let tsv = read(out.join("run.tsv"));
    assert!(tsv.starts_with("# config_sha256="));
    assert_eq!(tsv.lines().count(), 2 + 2);
    assert!(!out.join("wall_time.tsv").exists());
}

#[test]
fn threaded_runs_match_serial_runs() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "5", "0.6");
    let mut models = Vec::new();
    for threads in ["0", "3"] {
        let out = dir.path().join(format!("t{threads}"));
        let mut args = vec!["train", "--train", p(&data), "--valid", p(&data), "--out", p(&out)];
        args.extend(FAST);
        let o = bin().args(&args).env("LTR_THREADS", threads).output().unwrap();
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        models.push(std::fs::read(out.join("model.json")).unwrap());
    }
    assert_eq!(models[0], models[1]);
    let o = bin().args(["train", "--train", p(&data)]).env("LTR_THREADS", "many").output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn config_file_paths_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    gen_small(dir.path(), "6", "0.6");
    let cfg_dir = dir.path().join("cfg");
    std::fs::create_dir(&cfg_dir).unwrap();
    let cfg = cfg_dir.join("run.toml");
    std::fs::write(
        &cfg,
        "train_data = \"../data/synthetic.txt\"\noutput_dir = \"out\"\n\n[trainer]\nloss = \"margin\"\nepochs = 2\nnegatives_per_query = 8\n",
    )
    .unwrap();
    let o = run(&["train", "--config", p(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let resolved: serde_json::Value = serde_json::from_str(&read(cfg_dir.join("out/config.json"))).unwrap();
    assert_eq!(resolved["trainer"]["loss"], "margin");
    assert_eq!(resolved["trainer"]["epochs"], 2);

    let o = run(&["train", "--config", p(&cfg), "--epochs", "1", "--out", p(&dir.path().join("o2"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(read(dir.path().join("o2/run.tsv")).lines().count(), 2 + 1);

    std::fs::write(&cfg, "[trainer]\nepochz = 2\n").unwrap();
    let o = run(&["train", "--config", p(&cfg)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("epochz"));

    std::fs::write(&cfg, "[trainer]\nbatch_size = 0\n").unwrap();
    let o = run(&["train", "--config", p(&cfg), "--train", "x"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("batch_size"));
}

#[test]
fn unknown_loss_lists_valid_names() {
    let o = run(&["train", "--train", "x", "--loss", "hinge"]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    for name in ["margin", "ranknet", "listnet", "listmle", "approxndcg", "poolrank"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn train_data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1 qid:a 1:0.5\nnot a line\n").unwrap();
    assert_eq!(code(&run(&["train", "--train", p(&bad)])), 2);
    assert_eq!(code(&run(&["train", "--train", p(&dir.path().join("missing.txt"))])), 2);
    // no query has a positive
    let none = dir.path().join("none.txt");
    std::fs::write(&none, "0 qid:a 1:0.5\n0 qid:a 1:0.1\n").unwrap();
    assert_eq!(code(&run(&["train", "--train", p(&none)])), 2);
}

#[test]
fn eval_with_oracle_checkpoint_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("graded.txt");
    // feature 1 equals the label
    std::fs::write(
        &data,
        "0 qid:a 1:0 2:0.3\n2 qid:a 1:2 2:-1\n1 qid:a 1:1 2:0.5\n0 qid:b 1:0 2:0.9\n1 qid:b 1:1 2:0.1\n",
    )
    .unwrap();
    let model = dir.path().join("oracle.json");
    Scorer::from_params(poolrank::scorer::ScorerKind::Linear, &[2, 1], vec![1.0, 0.0, 0.0])
        .unwrap()
        .save(&model)
        .unwrap();
    let out = dir.path().join("ev");
    let o = run(&["eval", "--model", p(&model), "--data", p(&data), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "__aggregate__\tmrr=1\tndcg=1\tmap=1");
    let tsv = read(out.join("eval.tsv"));
    let lines: Vec<&str> = tsv.lines().collect();
    assert!(lines[0].starts_with("# config_sha256="));
    assert_eq!(lines[1], "qid\tmrr\tndcg\tmap");
    assert_eq!(lines.len(), 5);
    let json: serde_json::Value = serde_json::from_str(&read(out.join("eval.json"))).unwrap();
    assert!(json["meta"]["timestamp"].is_null());

    let o = run(&["eval", "--model", p(&model), "--data", p(&data), "--out", p(&out), "--timestamp"]);
    assert_eq!(code(&o), 0);
    let json: serde_json::Value = serde_json::from_str(&read(out.join("eval.json"))).unwrap();
    assert!(json["meta"]["timestamp"].as_u64().unwrap() > 0);
}

#[test]
fn eval_truth_mode_matches_library_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "7", "0.6");
    let run_dir = dir.path().join("run");
    let mut args = vec!["train", "--train", p(&data), "--out", p(&run_dir)];
    args.extend(FAST);
    assert_eq!(code(&run(&args)), 0);
    let model = run_dir.join("model.json");
    let out = dir.path().join("ev");
    let o = run(&["eval", "--model", p(&model), "--data", p(&data), "--labels", "truth", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let sc = Scorer::load(&model).unwrap();
    let ds = load_letor(&data).unwrap();
    let truth = GroundTruth::load(data.with_extension("txt.truth")).unwrap();
    let expect = evaluate(&sc, &ds, EvalLabels::GroundTruth(&truth), None, &Workers::serial()).unwrap();
    let json: serde_json::Value = serde_json::from_str(&read(out.join("eval.json"))).unwrap();
    assert_eq!(json["aggregate"]["mrr"].as_f64().unwrap(), expect.aggregate.mrr);
    assert_eq!(json["aggregate"]["map"].as_f64().unwrap(), expect.aggregate.map);
    assert_eq!(json["meta"]["labels"], "truth");
    let training = evaluate(&sc, &ds, EvalLabels::Training, None, &Workers::serial()).unwrap();
    assert_ne!(training.aggregate, expect.aggregate);
}

#[test]
fn eval_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "8", "0.6");
    let lonely = dir.path().join("lonely.txt");
    std::fs::copy(&data, &lonely).unwrap();
    let model = dir.path().join("m.json");
    Scorer::init(poolrank::scorer::ScorerKind::Linear, &[4, 1], 0).unwrap().save(&model).unwrap();
    let out = dir.path().join("ev");

    let o = run(&["eval", "--model", p(&model), "--data", p(&lonely), "--labels", "truth", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains(".truth"));

    let wide = dir.path().join("wide.json");
    Scorer::init(poolrank::scorer::ScorerKind::Linear, &[7, 1], 0).unwrap().save(&wide).unwrap();
    let o = run(&["eval", "--model", p(&wide), "--data", p(&data), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("dimension mismatch"));

    let o = run(&["eval", "--model", p(&dir.path().join("nope.json")), "--data", p(&data), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    let o = run(&["eval", "--model", p(&model), "--data", p(&data), "--labels", "gold", "--out", p(&out)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn sweep_and_ablate_tables() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_small(dir.path(), "9", "0.6");
    let out = dir.path().join("grid");
    let base = ["--train", p(&data), "--valid", p(&data), "--test", p(&data), "--test-labels", "truth"];
    let fast = ["--epochs", "1", "--negatives", "8", "--out", p(&out)];

    let mut args = vec!["sweep", "--kappa", "1,5,10,25"];
    args.extend(base);
    args.extend(fast);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let tsv = read(out.join("sweep.tsv"));
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), 2 + 4);
    assert!(lines[0].starts_with("# config_sha256="));
    assert_eq!(lines[1], "kappa\twindows\tmrr\tndcg\tmap\tbest_epoch");
    let kappas: Vec<&str> = lines[2..].iter().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(kappas, ["1", "5", "10", "25"]);

    let mut args = vec!["ablate"];
    args.extend(base);
    args.extend(fast);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let tsv = read(out.join("ablation.tsv"));
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines.len(), 2 + 15);
    assert!(lines[2].starts_with("0\t0\t0\t1\t"));
    assert!(lines[16].starts_with("1\t1\t1\t1\t"));

    let mut args = vec!["sweep"];
    args.extend(base);
    args.extend(fast);
    assert_eq!(code(&run(&args)), 1);
    let mut args = vec!["sweep", "--kappa", "0,5"];
    args.extend(base);
    args.extend(fast);
    assert_eq!(code(&run(&args)), 1);
    let mut args = vec!["ablate", "--train", p(&data)];
    args.extend(fast);
    assert_eq!(code(&run(&args)), 1);
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
}

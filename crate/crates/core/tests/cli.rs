use std::fs;
use std::path::{Path, PathBuf};

use oiecal::cli::{run_from, CliError};
use oiecal::corpus::{load_dataset, save_dataset};
use oiecal::dump::{save_dump, DumpRecord};
use oiecal::synthetic;
use serde_json::Value;

const TINY: &str = "word_dim = 8
predicate_dim = 4
hidden_dim = 8
num_layers = 1
mle_epochs = 3
calib_epochs = 2
batch_size = 16
beam_k = 3
patience = 0
max_iterations = 2
";

struct Run {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Run {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let (train, dev) = synthetic::generate(&synthetic::SyntheticConfig {
            train_sentences: 40,
            dev_sentences: 15,
            seed: 1,
        });
        save_dataset(&train, root.join("train.jsonl")).unwrap();
        save_dataset(&dev, root.join("dev.jsonl")).unwrap();
        fs::write(root.join("cfg.txt"), TINY).unwrap();
        Run { _dir: dir, root }
    }

    fn oiecal(&self, args: &[&str]) -> Result<(), CliError> {
        let p = |name: &str| self.root.join(name).display().to_string();
        let mut full = vec![
            "oiecal".to_string(),
            "--config".into(),
            p("cfg.txt"),
            "--run-dir".into(),
            p("run"),
            "--train".into(),
            p("train.jsonl"),
            "--dev".into(),
            p("dev.jsonl"),
        ];
        full.extend(args.iter().map(|s| s.to_string()));
        run_from(full)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&fs::read_to_string(self.path(name)).unwrap()).unwrap()
    }
}

#[test]
fn evaluating_gold_as_a_dump_gives_auc_one() {
    let run = Run::new();
    let dev = load_dataset(run.path("dev.jsonl")).unwrap();
    let records: Vec<DumpRecord> = dev
        .gold
        .values()
        .flatten()
        .map(|x| DumpRecord {
            sentence_id: x.sentence_id.clone(),
            predicate_index: None,
            predicate: x.predicate,
            args: x.args.clone(),
            confidence: 0.0,
            label_sequence: Default::default(),
            config_hash: None,
        })
        .collect();
    save_dump(&records, run.path("gold.jsonl")).unwrap();
    let dump = run.path("gold.jsonl").display().to_string();
    run.oiecal(&["evaluate", "--dump", &dump]).unwrap();
    let report = run.json("run/eval_gold.json");
    assert_eq!(report["auc"], 1.0);
    assert_eq!(report["best_f1"], 1.0);
}

#[test]
fn zero_iterations_keep_base_metrics() {
    let run = Run::new();
    run.oiecal(&["train"]).unwrap();
    run.oiecal(&["--set", "max_iterations=0", "iterate"]).unwrap();
    let train = run.json("run/train_metrics.json");
    let iterate = run.json("run/iterate_metrics.json");
    assert_eq!(iterate["base"]["auc"], train["dev"]["auc"]);
    assert_eq!(iterate["base"]["best_f1"], train["dev"]["best_f1"]);
    assert_eq!(iterate["iterations"].as_array().unwrap().len(), 0);
    assert_eq!(iterate["best_iteration"], 0);
}

#[test]
fn step_by_step_commands_produce_their_artifacts() {
    let run = Run::new();
    run.oiecal(&["train"]).unwrap();
    run.oiecal(&["generate", "--split", "train"]).unwrap();
    run.oiecal(&["generate", "--split", "dev"]).unwrap();
    run.oiecal(&["calibrate"]).unwrap();
    run.oiecal(&["rerank"]).unwrap();
    for name in [
        "base.ckpt",
        "train_dump.jsonl",
        "dev_dump.jsonl",
        "calibrated.ckpt",
        "pool.jsonl",
        "rerank_dev_dump.jsonl",
        "metrics.log",
    ] {
        assert!(run.path("run").join(name).exists(), "{name}");
    }
    let hash = run.json("run/train_metrics.json")["config_hash"].clone();
    for name in ["generate_dev_metrics.json", "calibrate_metrics.json", "rerank_dev_metrics.json"] {
        assert_eq!(run.json(&format!("run/{name}"))["config_hash"], hash, "{name}");
    }
    let first = fs::read_to_string(run.path("run/dev_dump.jsonl")).unwrap();
    assert!(first.contains(hash.as_str().unwrap()));
}

#[test]
fn mismatched_hash_is_refused_unless_forced() {
    let run = Run::new();
    run.oiecal(&["train"]).unwrap();
    let err = run.oiecal(&["--set", "max_args=3", "generate"]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    // The checkpoint's own config is used for decoding, so forcing works.
    run.oiecal(&["--force", "--set", "max_args=3", "generate"]).unwrap();
}

#[test]
fn failures_map_to_exit_codes() {
    let run = Run::new();
    let missing = run.oiecal(&["generate"]).unwrap_err();
    assert_eq!(missing.exit_code(), 3, "{missing}");
    let config = run.oiecal(&["--set", "hidden_dim=0", "train"]).unwrap_err();
    assert_eq!(config.exit_code(), 2, "{config}");
    let unknown = run.oiecal(&["--set", "colour=red", "train"]).unwrap_err();
    assert_eq!(unknown.exit_code(), 2);
    fs::write(run.path("bad.jsonl"), "{not json\n").unwrap();
    let bad = run.path("bad.jsonl").display().to_string();
    let data = run_from(["oiecal", "--train", &bad, "train"]).unwrap_err();
    assert_eq!(data.exit_code(), 5, "{data}");
}

fn iterate_outputs(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut names = vec!["iterate_metrics.json".to_string()];
    for t in 1..=2 {
        names.push(format!("iter_{t:03}/metrics.json"));
        names.push(format!("iter_{t:03}/pool.jsonl"));
    }
    names
        .into_iter()
        .map(|n| {
            let bytes = fs::read(root.join("run").join(&n)).unwrap();
            (n, bytes)
        })
        .collect()
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let whole = Run::new();
    whole.oiecal(&["train"]).unwrap();
    whole.oiecal(&["iterate"]).unwrap();

    let split = Run::new();
    split.oiecal(&["train"]).unwrap();
    split.oiecal(&["--set", "max_iterations=1", "iterate"]).unwrap();
    assert!(split.oiecal(&["iterate"]).is_err(), "existing manifest must not be overwritten silently");
    split.oiecal(&["iterate", "--resume"]).unwrap();

    assert_eq!(iterate_outputs(&whole.root), iterate_outputs(&split.root));
}

const BENCHMARK: &str = "word_id\tword\tpred\tpred_id\thead_pred_id\tsent_id\trun_id\tlabel
0\tObama\tborn\t2\t2\t0\t0\tA0-B
1\twas\tborn\t2\t2\t0\t0\tP-B
2\tborn\tborn\t2\t2\t0\t0\tP-I
3\tin\tborn\t2\t2\t0\t0\tO
4\tHawaii\tborn\t2\t2\t0\t0\tA1-B

0\tIt\trains\t1\t1\t1\t1\tA0-B
1\trains\trains\t1\t1\t1\t1\tP-B
2\t.\trains\t1\t1\t1\t1\tO
garbage row
";

#[test]
fn convert_is_deterministic_and_rejects_empty_dirs() {
    let run = Run::new();
    let src = run.path("oie");
    fs::create_dir_all(&src).unwrap();
    fs::write(src.join("dev.oie.conll"), BENCHMARK).unwrap();
    fs::write(src.join("train.oie.conll"), BENCHMARK).unwrap();
    fs::write(src.join("notes.txt"), "ignored").unwrap();
    let src_arg = src.display().to_string();
    let out = run.path("converted");
    let out_arg = out.display().to_string();

    run_from(["oiecal", "convert", &src_arg, "--out", &out_arg]).unwrap();
    let first = fs::read(out.join("train.jsonl")).unwrap();
    run_from(["oiecal", "convert", &src_arg, "--out", &out_arg]).unwrap();
    assert_eq!(first, fs::read(out.join("train.jsonl")).unwrap());

    let d = load_dataset(out.join("dev.jsonl")).unwrap();
    assert_eq!(d.sentences.len(), 2);
    assert_eq!(d.num_extractions(), 1);
    let x = &d.gold_for("dev-0")[0];
    assert_eq!((x.predicate.start, x.predicate.end, x.predicate.head), (1, 2, 2));

    let empty = run.path("empty");
    fs::create_dir_all(&empty).unwrap();
    let err = run_from(["oiecal", "convert", &empty.display().to_string(), "--out", &out_arg]).unwrap_err();
    assert_eq!(err.exit_code(), 5);
}

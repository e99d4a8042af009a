use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use taxo_induct::data::TaxonomyFile;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_taxo-induct"));
    c.env_remove("TAXO_LOG");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn dataset(dir: &Path, count: usize) {
    let o = run(
        &[
            "gen-synthetic",
            "--out",
            "data",
            "--seed",
            "5",
            "--count",
            &count.to_string(),
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

fn write_config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let text = format!(
        r#"{{
  "taxonomy_dir": "data/taxonomies",
  "embeddings": "data/embeddings.txt",
  "paths": "data/paths.tsv",
  "candidates": "data/candidates.tsv",
  "split": "data/split.tsv",
  "output_dir": "out"{extra},
  "train": {{"epochs": 2, "seed": 3}}
}}"#
    );
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn trained(dir: &Path) -> PathBuf {
    dataset(dir, 12);
    write_config(dir, "run.json", "");
    let o = run(&["train", "--config", "run.json"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("out/checkpoint.json")
}

fn first_taxonomy(dir: &Path) -> TaxonomyFile {
    let mut names: Vec<_> = fs::read_dir(dir.join("data/taxonomies"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    names.sort();
    taxo_induct::data::load_taxonomy_file(&names[0]).unwrap()
}

#[test]
fn gen_synthetic_writes_complete_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path(), 60);
    let files = fs::read_dir(tmp.path().join("data/taxonomies")).unwrap().count();
    assert_eq!(files, 60);
    for f in ["paths.tsv", "candidates.tsv", "split.tsv", "embeddings.txt"] {
        assert!(tmp.path().join("data").join(f).is_file(), "{f}");
    }
}

#[test]
fn gen_synthetic_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = run(
            &["gen-synthetic", "--out", out, "--seed", "9", "--count", "5"],
            tmp.path(),
        );
        assert!(o.status.success());
    }
    for f in ["paths.tsv", "candidates.tsv", "split.tsv", "embeddings.txt"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap()
        );
    }
}

#[test]
fn missing_embeddings_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path(), 4);
    let text = fs::read_to_string(write_config(tmp.path(), "run.json", ""))
        .unwrap()
        .replace("\"embeddings\": \"data/embeddings.txt\",\n", "");
    fs::write(tmp.path().join("run.json"), text).unwrap();
    let o = run(&["train", "--config", "run.json"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("embeddings"), "{}", stderr(&o));
}

#[test]
fn absent_embeddings_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path(), 4);
    fs::remove_file(tmp.path().join("data/embeddings.txt")).unwrap();
    write_config(tmp.path(), "run.json", "");
    let o = run(&["train", "--config", "run.json"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("embeddings"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path(), 4);
    write_config(tmp.path(), "run.json", ",\n  \"learning_rate\": 0.1");
    let o = run(&["train", "--config", "run.json"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("learning_rate"));
}

#[test]
fn malformed_data_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path(), 4);
    let paths = tmp.path().join("data/paths.tsv");
    let mut text = fs::read_to_string(&paths).unwrap();
    text.push_str("only one field\n");
    fs::write(&paths, text).unwrap();
    write_config(tmp.path(), "run.json", "");
    let o = run(&["train", "--config", "run.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn train_writes_checkpoint_and_deterministic_log() {
    let tmp = tempfile::tempdir().unwrap();
    trained(tmp.path());
    let first = fs::read_to_string(tmp.path().join("out/metrics.tsv")).unwrap();
    assert!(first.starts_with("epoch\tsplit\tPa\tRa\tF1a\tPe\tRe\tF1e\n"));
    assert_eq!(first.lines().count(), 1 + 2 + 1);
    let o = run(&["train", "--config", "run.json", "--output-dir", "again"], tmp.path());
    assert!(o.status.success());
    assert_eq!(first, fs::read_to_string(tmp.path().join("again/metrics.tsv")).unwrap());
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path(), 8);
    write_config(tmp.path(), "run.json", "");
    let o = run(
        &[
            "train",
            "--config",
            "run.json",
            "--epochs",
            "1",
            "--restriction",
            "full",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let log = fs::read_to_string(tmp.path().join("out/metrics.tsv")).unwrap();
    let splits: Vec<&str> = log.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(splits, ["validation", "test-partial", "test-full"]);
}

#[test]
fn induct_re_emits_a_spanning_tree() {
    let tmp = tempfile::tempdir().unwrap();
    trained(tmp.path());
    let gold = first_taxonomy(tmp.path());
    let terms: Vec<String> = gold.terms().into_iter().map(|t| t.surface).collect();
    fs::write(tmp.path().join("vocab.txt"), terms.join("\n")).unwrap();
    let o = run(
        &[
            "induct",
            "--checkpoint",
            "out/checkpoint.json",
            "--vocab",
            "vocab.txt",
            "--mode",
            "RE",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let tree = TaxonomyFile::parse("out", Path::new("stdout"), &text).unwrap();
    assert_eq!(tree.edges.len(), terms.len() - 1);
    assert_eq!(tree.terms().len(), terms.len());
}

#[test]
fn induct_partial_without_candidates_leaves_all_but_root() {
    let tmp = tempfile::tempdir().unwrap();
    trained(tmp.path());
    fs::write(tmp.path().join("empty.tsv"), "").unwrap();
    fs::write(
        tmp.path().join("vocab.txt"),
        "Alpha\nbeta\n# comment\n\ngamma delta\nepsilon\n",
    )
    .unwrap();
    for mode in ["NR", "RE"] {
        let o = run(
            &[
                "induct",
                "--checkpoint",
                "out/checkpoint.json",
                "--vocab",
                "vocab.txt",
                "--candidates",
                "empty.tsv",
                "--restriction",
                "partial",
                "--mode",
                mode,
            ],
            tmp.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        let text = stdout(&o);
        let unattached: Vec<&str> = text.lines().filter_map(|l| l.strip_prefix("# unattached: ")).collect();
        assert_eq!(unattached.len(), 3, "{mode}: {text}");
        assert_eq!(text.lines().count(), 3);
    }
}

#[test]
fn eval_of_gold_predictions_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path(), 6);
    write_config(tmp.path(), "run.json", "");
    let o = run(
        &[
            "eval",
            "--predicted",
            "data/taxonomies",
            "--config",
            "run.json",
            "--split",
            "train",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let cells: Vec<&str> = row.split('\t').collect();
    assert_eq!(cells[..2], ["train", "predicted"]);
    assert!(cells[2..].iter().all(|c| *c == "1.0000"), "{row}");
}

#[test]
fn eval_reports_partial_and_full_under_restriction() {
    let tmp = tempfile::tempdir().unwrap();
    trained(tmp.path());
    let o = run(
        &["eval", "--checkpoint", "out/checkpoint.json", "--restriction", "full"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let labels: Vec<String> = stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(1).unwrap().to_string())
        .collect();
    assert_eq!(labels, ["partial", "full"]);
}

#[test]
fn checkpoint_version_mismatch_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let ck = trained(tmp.path());
    let text = fs::read_to_string(&ck)
        .unwrap()
        .replacen("\"version\":1", "\"version\":2", 1);
    fs::write(tmp.path().join("old.json"), text).unwrap();
    fs::write(tmp.path().join("vocab.txt"), "a\nb\n").unwrap();
    let o = run(&["eval", "--checkpoint", "old.json"], tmp.path());
    assert_eq!(o.status.code(), Some(3));
    let o = run(
        &["induct", "--checkpoint", "old.json", "--vocab", "vocab.txt"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3));
}

/// Every rooted tree on three labelled nodes as `(child, parent)` lists.
fn three_node_trees() -> Vec<Vec<(usize, usize)>> {
    let mut trees = Vec::new();
    for parents in 0..27usize {
        let p = [parents % 3, parents / 3 % 3, parents / 9];
        for root in 0..3 {
            let edges: Vec<(usize, usize)> = (0..3).filter(|&c| c != root).map(|c| (c, p[c])).collect();
            if edges.iter().any(|&(c, q)| c == q) || p[root] != root {
                continue;
            }
            let reaches_root = (0..3).all(|mut n| {
                for _ in 0..3 {
                    if n == root {
                        return true;
                    }
                    n = p[n];
                }
                n == root
            });
            if reaches_root {
                trees.push(edges);
            }
        }
    }
    trees
}

#[test]
fn baseline_mst_matches_brute_force_on_three_terms() {
    let tmp = tempfile::tempdir().unwrap();
    let names = ["cat", "feline", "animal"];
    fs::create_dir(tmp.path().join("tax")).unwrap();
    fs::write(tmp.path().join("tax/chain.tsv"), "cat\tanimal\nfeline\tanimal\n").unwrap();
    let weights = [[0.0, 0.9, 0.6], [0.05, 0.0, 0.8], [0.1, 0.2, 0.0]];
    let mut scores = String::new();
    for x in 0..3 {
        for y in 0..3 {
            if x != y {
                scores.push_str(&format!("{}\t{}\t{}\n", names[x], names[y], weights[x][y]));
            }
        }
    }
    fs::write(tmp.path().join("scores.tsv"), scores).unwrap();
    let o = run(
        &[
            "baseline-mst",
            "--pair-scores",
            "scores.tsv",
            "--taxonomy-dir",
            "tax",
            "--out",
            "mst",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));

    let best = three_node_trees()
        .into_iter()
        .max_by(|a, b| {
            let w = |t: &Vec<(usize, usize)>| t.iter().map(|&(c, p)| weights[c][p]).sum::<f64>();
            w(a).total_cmp(&w(b))
        })
        .unwrap();
    let mut expected: Vec<(String, String)> = best
        .iter()
        .map(|&(c, p)| (names[c].to_string(), names[p].to_string()))
        .collect();
    expected.sort();
    let got = taxo_induct::data::load_taxonomy_file(&tmp.path().join("mst/chain.tsv")).unwrap();
    let mut edges = got.edges.clone();
    edges.sort();
    assert_eq!(edges, expected);
    assert_eq!(
        expected,
        [("cat".into(), "feline".into()), ("feline".into(), "animal".into())]
    );
}

#[test]
fn three_node_enumeration_is_complete() {
    assert_eq!(three_node_trees().len(), 9);
}

#[test]
fn baseline_mst_trains_detector_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    dataset(tmp.path(), 8);
    write_config(tmp.path(), "run.json", "");
    let o = run(&["baseline-mst", "--config", "run.json", "--epochs", "1"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("test\tmst\t"));
}

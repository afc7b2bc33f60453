//! Behavior of the `forge` binary: exit codes, determinism, provenance.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const RAW: &str = "u1 i1 i2 i3 i4 i5 i6\nu2 i2 i3 i7 i8 i1\nu3 i1 i6 i9 i2 i3 i4\nu4 i5 i7 i2 i9 i1\nu5 i3 i4 i5 i6 i7 i8\nu6 i9 i1\n";

fn forge(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn setup_split(dir: &Path) {
    write(dir, "raw.txt", RAW);
    let out = forge(
        &["ingest", "--input", "raw.txt", "--dataset", "Beauty", "--out", "split"],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn ingest_writes_split_dir_with_provenance_headers() {
    let tmp = TempDir::new().unwrap();
    setup_split(tmp.path());
    for name in [
        "train.txt",
        "val.txt",
        "test.txt",
        "users.txt",
        "meta.txt",
        "truth_val.tsv",
        "truth_test.tsv",
    ] {
        let text = std::fs::read_to_string(tmp.path().join("split").join(name)).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("# forge "), "{name}: {first}");
        assert!(first.contains("dataset=Beauty"), "{name}: {first}");
        assert!(first.contains("input=raw.txt:"), "{name}: {first}");
    }
}

#[test]
fn unknown_method_flag_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    setup_split(tmp.path());
    let out = forge(
        &["index", "--method", "semantic", "--split-dir", "split", "--out", "x.txt"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn beam_smaller_than_k_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    setup_split(tmp.path());
    let out = forge(
        &["index", "--method", "sequential", "--split-dir", "split", "--out", "idx.txt"],
        tmp.path(),
    );
    assert!(out.status.success());
    let out = forge(
        &[
            "generate", "--split-dir", "split", "--index", "idx.txt", "--out", "p.tsv",
            "--k", "5", "--beam", "2",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    let out = forge(
        &["ingest", "--input", "nope.txt", "--dataset", "d", "--out", "split"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_data_is_a_data_error() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "bad.txt", "lonelyuser\n");
    let out = forge(
        &["ingest", "--input", "bad.txt", "--dataset", "d", "--out", "split"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "raw.txt", RAW);
    let args = [
        "pipeline", "--input", "raw.txt", "--dataset", "Beauty", "--out", "runA",
        "--clusters", "2", "--max-leaf", "3", "--seed", "7", "--top-k", "3", "--beam", "6",
        "--k", "1,3",
    ];
    let mut args_b: Vec<&str> = args.to_vec();
    args_b[6] = "runB";
    assert!(forge(&args, tmp.path()).status.success());
    assert!(forge(&args_b, tmp.path()).status.success());
    for entry in walk(tmp.path().join("runA").as_path()) {
        let rel = entry.strip_prefix(tmp.path().join("runA").as_path()).unwrap();
        let a = std::fs::read(&entry).unwrap();
        let b = std::fs::read(tmp.path().join("runB").join(rel)).unwrap();
        assert_eq!(a, b, "{} differs between reruns", rel.display());
    }
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in std::fs::read_dir(current).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files.sort();
    files
}

#[test]
fn config_file_values_apply_and_flags_win() {
    let tmp = TempDir::new().unwrap();
    setup_split(tmp.path());
    write(tmp.path(), "conf.txt", "seed=5\nstart-id=2001\n");
    // Config supplies start-id 2001.
    let out = forge(
        &[
            "index", "--config", "conf.txt", "--method", "sequential", "--split-dir", "split",
            "--out", "a.txt",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(tmp.path().join("a.txt")).unwrap();
    assert!(text.contains("i1 2001"), "{text}");
    // Flag overrides config.
    let out = forge(
        &[
            "index", "--config", "conf.txt", "--method", "sequential", "--split-dir", "split",
            "--out", "b.txt", "--start-id", "3001",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(tmp.path().join("b.txt")).unwrap();
    assert!(text.contains("i1 3001"), "{text}");
}

#[test]
fn eval_reports_metrics_for_handmade_files() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "preds.tsv", "q1\ta b c\nq2\tx y z\n");
    write(tmp.path(), "truth.tsv", "q1\ta\nq2\tmiss\n");
    let out = forge(
        &["eval", "--predictions", "preds.tsv", "--truth", "truth.tsv", "--k", "1,3"],
        tmp.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("metric group=all k=1 hr=0.500000"), "{stdout}");
}

#[test]
fn eval_groups_file_splits_reporting() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "preds.tsv", "q1\ta\nq2\tb\n");
    write(tmp.path(), "truth.tsv", "q1\ta\nq2\ta\n");
    write(tmp.path(), "groups.tsv", "q1\tseen\nq2\tunseen\n");
    let out = forge(
        &[
            "eval", "--predictions", "preds.tsv", "--truth", "truth.tsv", "--k", "1",
            "--groups", "groups.tsv",
        ],
        tmp.path(),
    );
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("metric group=seen k=1 hr=1.000000"), "{stdout}");
    assert!(stdout.contains("metric group=unseen k=1 hr=0.000000"), "{stdout}");
}

#[test]
fn generate_candidates_restrict_the_catalog() {
    let tmp = TempDir::new().unwrap();
    setup_split(tmp.path());
    let out = forge(
        &["index", "--method", "sequential", "--split-dir", "split", "--out", "idx.txt"],
        tmp.path(),
    );
    assert!(out.status.success());
    write(tmp.path(), "cands.txt", "i6\ni7\n");
    let out = forge(
        &[
            "generate", "--split-dir", "split", "--index", "idx.txt", "--out", "p.tsv",
            "--k", "2", "--beam", "4", "--candidates", "cands.txt",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(tmp.path().join("p.tsv")).unwrap();
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        let (_, items) = line.split_once('\t').unwrap();
        for item in items.split(' ') {
            assert!(item == "i6" || item == "i7", "unexpected item {item}");
        }
    }
}

#[test]
fn threads_flag_does_not_change_output() {
    let tmp = TempDir::new().unwrap();
    setup_split(tmp.path());
    let out = forge(
        &["index", "--method", "sequential", "--split-dir", "split", "--out", "idx.txt"],
        tmp.path(),
    );
    assert!(out.status.success());
    for (threads, name) in [("1", "p1.tsv"), ("4", "p4.tsv")] {
        let out = forge(
            &[
                "--threads", threads, "generate", "--split-dir", "split", "--index", "idx.txt",
                "--out", name, "--k", "3", "--beam", "6",
            ],
            tmp.path(),
        );
        assert!(out.status.success());
    }
    let p1 = std::fs::read(tmp.path().join("p1.tsv")).unwrap();
    let p4 = std::fs::read(tmp.path().join("p4.tsv")).unwrap();
    assert_eq!(p1, p4);
}

#[test]
fn stats_prints_summary() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "raw.txt", RAW);
    let out = forge(&["stats", "--input", "raw.txt", "--dataset", "Beauty"], tmp.path());
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("users              6"), "{stdout}");
    assert!(stdout.contains("items              9"), "{stdout}");
    assert!(stdout.contains("interactions       30"), "{stdout}");
}

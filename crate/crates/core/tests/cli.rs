use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn lexalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexalign"))
        .args(args)
        .output()
        .unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn toy(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy").join(name)
}

struct T1 {
    dir: TempDir,
}

impl T1 {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("src.txt"), "das haus\ndas buch\n").unwrap();
        fs::write(dir.path().join("tgt.txt"), "the house\nthe book\n").unwrap();
        fs::write(dir.path().join("gold.txt"), "1 1 1 S\n1 2 2 S\n2 1 1 S\n2 2 2 S\n").unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> String {
        path_str(&self.dir.path().join(name)).to_owned()
    }

    fn train(&self, extra: &[&str]) -> Output {
        let (s, t, m) = (self.path("src.txt"), self.path("tgt.txt"), self.path("model.tsv"));
        let mut args = vec!["train", "-s", &s, "-t", &t, "-o", &m];
        args.extend_from_slice(extra);
        lexalign(&args)
    }
}

#[test]
fn train_writes_model_and_trace() {
    let t1 = T1::new();
    let out = t1.train(&["--iters", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let model = fs::read_to_string(t1.path("model.tsv")).unwrap();
    assert!(model.starts_with("# lexalign translation table"));
    assert!(model.contains("# iterations: 10"));
    let trace = fs::read_to_string(t1.path("model.tsv.trace")).unwrap();
    assert_eq!(trace.lines().count(), 10);
}

#[test]
fn train_with_smoothing_records_it() {
    let t1 = T1::new();
    let out = t1.train(&["--strategy", "add-one", "--lambda", "1.0"]);
    assert!(out.status.success());
    let model = fs::read_to_string(t1.path("model.tsv")).unwrap();
    assert!(model.contains("# strategy: add-one"));
    assert!(model.contains("# lambda: 1"));
}

#[test]
fn align_after_one_iteration() {
    let t1 = T1::new();
    assert!(t1.train(&["--iters", "1"]).status.success());
    let (s, t, m) = (t1.path("src.txt"), t1.path("tgt.txt"), t1.path("model.tsv"));
    let out = lexalign(&["align", "-m", &m, "-s", &s, "-t", &t]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().next(), Some("2-2"));
    let out = lexalign(&["align", "-m", &m, "-s", &s, "-t", &t, "--emit-null"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().next(), Some("0-1 2-2"));
}

#[test]
fn align_warns_on_unknown_tokens() {
    let t1 = T1::new();
    assert!(t1.train(&[]).status.success());
    fs::write(t1.dir.path().join("new_src.txt"), "das auto\n").unwrap();
    fs::write(t1.dir.path().join("new_tgt.txt"), "the car\n").unwrap();
    let (s, t, m) = (t1.path("new_src.txt"), t1.path("new_tgt.txt"), t1.path("model.tsv"));
    let out = lexalign(&["align", "-m", &m, "-s", &s, "-t", &t, "--emit-null"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);
}

#[test]
fn eval_prints_table_and_tsv() {
    let t1 = T1::new();
    assert!(t1.train(&[]).status.success());
    let (s, t, m, a, o) = (
        t1.path("src.txt"),
        t1.path("tgt.txt"),
        t1.path("model.tsv"),
        t1.path("gold.txt"),
        t1.path("eval.tsv"),
    );
    let out = lexalign(&["eval", "-m", &m, "-s", &s, "-t", &t, "-a", &a, "-o", &o]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("AER"));
    let tsv = fs::read_to_string(&o).unwrap();
    assert!(tsv.lines().any(|l| l.starts_with("aer\t")));
}

#[test]
fn tune_reports_scale() {
    let t1 = T1::new();
    let (s, t, a) = (t1.path("src.txt"), t1.path("tgt.txt"), t1.path("gold.txt"));
    let out = lexalign(&[
        "tune",
        "-s",
        &s,
        "-t",
        &t,
        "-a",
        &a,
        "--objective",
        "error-count",
        "--grid",
        "0,0.5,1,2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("lambda\t")));
    assert!(text.contains("value_at_zero"));
}

#[test]
fn missing_file_is_a_data_error() {
    let t1 = T1::new();
    let m = t1.path("model.tsv");
    let out = lexalign(&["train", "-s", "/nonexistent/a", "-t", "/nonexistent/b", "-o", &m]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn empty_corpus_fails() {
    let t1 = T1::new();
    fs::write(t1.dir.path().join("empty.txt"), "").unwrap();
    let (e, m) = (t1.path("empty.txt"), t1.path("model.tsv"));
    assert!(t1.train(&[]).status.success());
    let out = lexalign(&["align", "-m", &m, "-s", &e, "-t", &e]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(lexalign(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(lexalign(&["frobnicate"]).status.code(), Some(1));
    let t1 = T1::new();
    assert_eq!(t1.train(&["--strategy", "add-two"]).status.code(), Some(1));
    assert_eq!(lexalign(&["--help"]).status.code(), Some(0));
}

fn experiment(out: &Path, extra: &[&str]) -> Output {
    let (s, t, a) = (toy("source.txt"), toy("target.txt"), toy("annotations.txt"));
    let mut args = vec![
        "experiment",
        "-s",
        path_str(&s),
        "-t",
        path_str(&t),
        "-a",
        path_str(&a),
        "-o",
        path_str(out),
    ];
    args.extend_from_slice(extra);
    lexalign(&args)
}

#[test]
fn experiment_single_cell_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let extra = ["--strategies", "add-one", "--objectives", "error-count", "--seed", "3"];
    assert!(experiment(&a, &extra).status.success());
    assert!(experiment(&b, &extra).status.success());
    let report = fs::read(a.join("report.tsv")).unwrap();
    assert_eq!(report, fs::read(b.join("report.tsv")).unwrap());
    assert_eq!(
        fs::read(a.join("report.txt")).unwrap(),
        fs::read(b.join("report.txt")).unwrap()
    );
    assert_eq!(String::from_utf8(report).unwrap().lines().count(), 3);
}

#[test]
fn failed_cells_keep_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    // a negative grid point fails validation inside every tuning leg
    let out = experiment(
        dir.path(),
        &[
            "--strategies",
            "add-one,add-dice",
            "--objectives",
            "ml-annotated",
            "--grid=-1,0,1",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    let tsv = fs::read_to_string(dir.path().join("report.tsv")).unwrap();
    let rows: Vec<&str> = tsv.lines().skip(1).collect();
    assert!(rows[0].starts_with("baseline\t"));
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r.contains("\tfailed\t")));
}

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn formality(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formality"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn with_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_formality"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn bundle() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic/pipeline.toml")
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(formality(&[]).status.code(), Some(1));
    assert_eq!(formality(&["mine", "--bogus"]).status.code(), Some(1));
    assert_eq!(formality(&["run"]).status.code(), Some(1));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(formality(&["--help"]).status.code(), Some(0));
    let v = formality(&["--version"]);
    assert_eq!(v.status.code(), Some(0));
    assert!(stdout(&v).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn missing_input_exits_2() {
    let o = formality(&["best-window", "--scores", "/definitely/not/here.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/definitely/not/here.txt"));
}

#[test]
fn best_window_reports_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("acc.tsv");
    fs::write(&scores, "ck1\t0.1\nck2\t0.5\nck3\t0.6\nck4\t0.2\n").unwrap();
    let path = scores.to_str().unwrap();
    let o = formality(&["best-window", "--scores", path, "--window", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("start=1\n"), "{out}");
    assert!(out.contains("checkpoints=ck2,ck3\n"), "{out}");
    let too_wide = formality(&["best-window", "--scores", path, "--window", "5"]);
    assert_eq!(too_wide.status.code(), Some(1));
}

#[test]
fn prep_streams_tsv_from_stdin() {
    let o = with_stdin(
        &["prep"],
        "Hello there .\tHallo da .\nhello .\tHallo .\nSame .\tSame .\n",
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "Hello there .\tHallo da .\n");
    let stats = String::from_utf8_lossy(&o.stderr);
    assert!(
        stats.contains("input=3\n") && stats.contains("output=1\n"),
        "{stats}"
    );
    assert!(
        stats.contains("dropped.identical=1\n") && stats.contains("dropped.case=1\n"),
        "{stats}"
    );
}

#[test]
fn score_counts_correct_incorrect_and_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_owned()
    };
    let hyps = write(
        "hyps",
        "Wie geht es Ihnen ?\nWie geht es dir ?\nWie geht es ?\n",
    );
    let refs_f = "Wie geht es [F]Ihnen[/F] ?\n".repeat(3);
    let refs_i = "Wie geht es [I]dir[/I] ?\n".repeat(3);
    let formal = write("ref.f", &refs_f);
    let informal = write("ref.i", &refs_i);
    let o = formality(&[
        "score",
        "--hyps",
        &hyps,
        "--formal-refs",
        &formal,
        "--informal-refs",
        &informal,
        "--context",
        "F",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let out = stdout(&o);
    assert!(out.contains("accuracy=0.5\n"), "{out}");
    assert!(out.contains("skipped=1\n"), "{out}");
}

#[test]
fn run_on_bundle_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let o = formality(&[
        "--config",
        bundle().to_str().unwrap(),
        "--threads",
        "2",
        "run",
        "--output-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("status=ok\n"), "{manifest}");
    assert!(
        manifest.contains("artifact.evaluation/oracle.tsv="),
        "{manifest}"
    );
    assert!(stdout(&o).starts_with("config_hash="));
}

#[test]
fn run_with_missing_corpus_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(bundle()).unwrap();
    let broken = text.replace("supervised/train.en", "supervised/missing.en");
    assert_ne!(broken, text);
    let cfg = dir.path().join("pipeline.toml");
    fs::write(&cfg, broken).unwrap();
    let o = formality(&["--config", cfg.to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_writes_a_runnable_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let o = formality(&["synth", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let ours = fs::read(dir.path().join("supervised/train.de")).unwrap();
    let shipped = fs::read(bundle().with_file_name("supervised/train.de")).unwrap();
    assert_eq!(ours, shipped, "the shipped bundle is stale");
}

use std::fs;
use std::path::{Path, PathBuf};

use formality_core::pipeline::{run_pipeline, PipelineConfig};
use formality_core::textio::{read_lines, write_lines};

fn bundle_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic")
}

/// Copies the shipped bundle so a test can tamper with it.
fn copy_bundle(to: &Path) {
    for sub in ["supervised", "pivot", "eval"] {
        fs::create_dir_all(to.join(sub)).unwrap();
        for entry in fs::read_dir(bundle_dir().join(sub)).unwrap() {
            let path = entry.unwrap().path();
            fs::copy(&path, to.join(sub).join(path.file_name().unwrap())).unwrap();
        }
    }
    fs::copy(bundle_dir().join("pipeline.toml"), to.join("pipeline.toml")).unwrap();
}

#[test]
fn missing_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    copy_bundle(dir.path());
    fs::remove_file(dir.path().join("pivot/b.es")).unwrap();
    let cfg = PipelineConfig::load(&dir.path().join("pipeline.toml")).unwrap();
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
    assert!(err.to_string().contains("b.es"), "{err}");
}

#[test]
fn empty_pivot_seeds_fail_the_zero_shot_stage() {
    let dir = tempfile::tempdir().unwrap();
    copy_bundle(dir.path());
    // No source of pair B matches pair A any more.
    let path = dir.path().join("pivot/b.en");
    let shifted: Vec<String> = read_lines(&path)
        .unwrap()
        .iter()
        .map(|l| format!("zz {l}"))
        .collect();
    write_lines(&path, &shifted).unwrap();
    let cfg = PipelineConfig::load(&dir.path().join("pipeline.toml")).unwrap();
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err}");
    let manifest = fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("status=failed\n"), "{manifest}");
    assert!(
        manifest.contains("failed_stage=zero_shot/pivot\n"),
        "{manifest}"
    );
    // Stages before the failure still left their artifacts.
    assert!(dir.path().join("out/supervised/labeled.tsv").exists());
}

#[test]
fn config_hash_ignores_output_dir() {
    let mut cfg = PipelineConfig::load(&bundle_dir().join("pipeline.toml")).unwrap();
    let before = cfg.hash();
    cfg.output_dir = PathBuf::from("/elsewhere");
    assert_eq!(cfg.hash(), before);
    cfg.seed += 1;
    assert_ne!(cfg.hash(), before);
}

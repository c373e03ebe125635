use std::fs;
use std::io::Write;
use std::path::Path;

use qprobe::runner::{
    config_hash, load_results, run_experiment, run_experiment_with, Approach, ExperimentConfig, RunOptions, CELL_LOG,
    RESULTS_JSONL, RESULTS_TSV,
};
use qprobe::synthetic::{write_synthetic_experiment, SyntheticSetup};

fn small_setup() -> SyntheticSetup {
    SyntheticSetup {
        per_language: 60,
        n_layers: 2,
        dim: 8,
        ..SyntheticSetup::default()
    }
}

fn config_in(dir: &Path) -> ExperimentConfig {
    let mut cfg = write_synthetic_experiment(&dir.join("data"), &small_setup()).unwrap();
    cfg.hyperparameters.probe.max_epochs = 10;
    cfg.output_dir = dir.join("out");
    cfg
}

#[test]
fn interrupted_run_resumes_to_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path());
    let expected = cfg.expected_cell_count();
    // 2 languages × 2 tasks × (dummy + linear + 2 probe layers) × 4 variants
    assert_eq!(expected, 64);

    let partial = run_experiment_with(&cfg, &RunOptions { max_new_cells: Some(10) }).unwrap();
    assert!(!partial.complete);
    assert_eq!(partial.results.len(), 10);
    assert!(!cfg.output_dir.join(RESULTS_TSV).exists());

    // simulate a crash in the middle of a write
    let log = cfg.output_dir.join(CELL_LOG);
    fs::OpenOptions::new().append(true).open(&log).unwrap().write_all(b"{\"config_hash\":\"ab").unwrap();

    let resumed = run_experiment_with(&cfg, &RunOptions::default()).unwrap();
    assert!(resumed.complete);
    assert_eq!(resumed.resumed_cells, 10);
    assert_eq!(resumed.results.len(), expected);
    let log_text = fs::read_to_string(&log).unwrap();
    assert_eq!(log_text.lines().count(), expected);
    assert!(log_text.ends_with('\n'));

    let mut fresh_cfg = cfg.clone();
    fresh_cfg.output_dir = dir.path().join("fresh");
    let fresh = run_experiment(&fresh_cfg).unwrap();
    assert_eq!(fresh, resumed.results);
    assert_eq!(
        fs::read(cfg.output_dir.join(RESULTS_TSV)).unwrap(),
        fs::read(fresh_cfg.output_dir.join(RESULTS_TSV)).unwrap()
    );
    assert_eq!(load_results(&cfg.output_dir.join(RESULTS_JSONL)).unwrap(), fresh);

    // a completed run replays entirely from the log
    let again = run_experiment_with(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(again.resumed_cells, expected);
    assert_eq!(again.results, fresh);
}

#[test]
fn rows_carry_selectivity_and_split_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path());
    cfg.approaches = vec![Approach::Dummy, Approach::Linear];
    let rows = run_experiment(&cfg).unwrap();
    assert_eq!(rows.len(), cfg.expected_cell_count());
    for r in &rows {
        assert!(r.error.is_none(), "{}: {:?}", r.key(), r.error);
        assert_eq!(r.n_train + r.n_val + r.n_test, 60);
        assert!(r.wall_ms.is_none());
        if r.is_real() {
            assert!(r.selectivity.is_none());
        } else {
            assert!(r.control_seed.is_some());
        }
    }
    let linear_real = rows
        .iter()
        .find(|r| r.approach == Approach::Linear && r.is_real())
        .unwrap();
    assert!(linear_real.selectivity_mean.is_some());
}

#[test]
fn config_hash_tracks_inputs_not_locations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path());
    let h = config_hash(&cfg).unwrap();

    let mut moved = cfg.clone();
    moved.output_dir = dir.path().join("elsewhere");
    moved.workers = Some(1);
    assert_eq!(config_hash(&moved).unwrap(), h);

    let mut reseeded = cfg.clone();
    reseeded.seed += 1;
    assert_ne!(config_hash(&reseeded).unwrap(), h);

    let mut text = fs::read_to_string(&cfg.paths.corpus).unwrap();
    text.push('\n');
    let copy = dir.path().join("corpus-copy.jsonl");
    fs::write(&copy, text).unwrap();
    let mut edited = cfg.clone();
    edited.paths.corpus = copy;
    assert_ne!(config_hash(&edited).unwrap(), h);
}

#[test]
fn stale_log_rows_are_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path());
    cfg.approaches = vec![Approach::Dummy];
    run_experiment(&cfg).unwrap();
    cfg.seed += 1;
    let outcome = run_experiment_with(&cfg, &RunOptions::default()).unwrap();
    assert_eq!(outcome.resumed_cells, 0);
    assert!(outcome.complete);
}

#[test]
fn toml_config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_in(dir.path());
    let path = dir.path().join("experiment.toml");
    fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    assert_eq!(ExperimentConfig::load(&path).unwrap(), cfg);
}

#[test]
fn missing_embeddings_fail_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(dir.path());
    cfg.paths.embeddings.remove("tst");
    let err = run_experiment(&cfg).unwrap_err();
    assert!(err.is_validation(), "{err}");
    assert!(!cfg.output_dir.join(CELL_LOG).exists());

    let mut cfg = config_in(dir.path());
    cfg.layers = Some("1..5".parse().unwrap());
    assert!(run_experiment(&cfg).unwrap_err().is_validation());
}

use opennas::engine::{
    run_search, Algorithm, EngineError, EvaluatorSpec, RunOptions, RunStatus, SearchConfig,
};
use opennas::stats::{aggregate_records, aggregate_stats, StatsError};
use opennas::PsoConfig;
use std::fs;
use std::path::Path;

fn options(spec: &str, out: &Path, runs: usize, seed: u64) -> RunOptions {
    let mut o = RunOptions::new(spec.parse::<EvaluatorSpec>().unwrap(), out);
    o.runs = runs;
    o.seed = seed;
    o
}

fn stub(mode: &str) -> String {
    format!(
        "extern:python3 {}/tests/fixtures/stub_trainer.py {mode}",
        env!("CARGO_MANIFEST_DIR")
    )
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn five_runs_persist_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let config = SearchConfig::load(Algorithm::Pso, "pso_b").unwrap();
    let first = run_search(&config, &options("surrogate:target", &tmp.path().join("a"), 5, 40)).unwrap();
    let second = run_search(&config, &options("surrogate:target", &tmp.path().join("b"), 5, 40)).unwrap();
    assert_eq!(first.len(), 5);
    for (r, (a, b)) in first.iter().zip(&second).enumerate() {
        assert!(a.succeeded());
        assert_eq!(a.summary.seed, 40 + r as u64);
        assert_eq!(a.dir.file_name().unwrap(), format!("run_{r:03}").as_str());
        for name in ["config.toml", "history.csv", "best_arch.json"] {
            assert_eq!(read(&a.dir, name), read(&b.dir, name), "{name} of run {r}");
        }
        let snapshot = SearchConfig::parse(Algorithm::Pso, &read(&a.dir, "config.toml"), "snap").unwrap();
        assert_eq!(snapshot.seed(), 40 + r as u64);
        assert_eq!(a.summary.evaluations, 211);
        let best = opennas::Architecture::from_document(&read(&a.dir, "best_arch.json")).unwrap();
        assert_eq!(Some(best), a.best);
        assert!(!a.dir.join("pheromones.json").exists());
    }
}

#[test]
fn persisted_stats_reproduce_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let config = SearchConfig::load(Algorithm::Aco, "aco_b").unwrap();
    let records = run_search(&config, &options("surrogate:paramband", tmp.path(), 4, 9)).unwrap();
    let live = aggregate_records(&records).unwrap();
    let dirs: Vec<_> = records.iter().map(|r| r.dir.clone()).collect();
    let persisted = aggregate_stats(&dirs).unwrap();
    assert_eq!(live.acc_max.to_bits(), persisted.acc_max.to_bits());
    assert_eq!(live.acc_mean.to_bits(), persisted.acc_mean.to_bits());
    assert_eq!(live.acc_stdev.to_bits(), persisted.acc_stdev.to_bits());
    assert_eq!(live.time_mean_minutes.to_bits(), persisted.time_mean_minutes.to_bits());
    assert_eq!(live, persisted);
    for r in &records {
        assert!(r.dir.join("pheromones.json").exists());
        assert_eq!(r.summary.layer_count, r.summary.raw_layers.map(|n| n + 1));
    }
}

#[test]
fn single_run_has_zero_stdev() {
    let tmp = tempfile::tempdir().unwrap();
    let config = SearchConfig::load(Algorithm::Pso, "pso_b").unwrap();
    let records = run_search(&config, &options("surrogate:target", tmp.path(), 1, 0)).unwrap();
    let row = aggregate_stats(&[&records[0].dir]).unwrap();
    assert_eq!(row.acc_stdev, 0.0);
    assert_eq!(row.acc_max, row.acc_mean);
}

#[test]
fn parallel_runs_match_sequential_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = SearchConfig::load(Algorithm::Pso, "pso_a").unwrap();
    let seq = run_search(&config, &options("surrogate:target", &tmp.path().join("s"), 4, 2)).unwrap();
    let mut o = options("surrogate:target", &tmp.path().join("p"), 4, 2);
    o.parallel_runs = 4;
    let par = run_search(&config, &o).unwrap();
    for (a, b) in seq.iter().zip(&par) {
        assert_eq!(read(&a.dir, "history.csv"), read(&b.dir, "history.csv"));
        assert_eq!(read(&a.dir, "best_arch.json"), read(&b.dir, "best_arch.json"));
    }
}

#[test]
fn parallel_runs_are_refused_for_extern_trainers() {
    let tmp = tempfile::tempdir().unwrap();
    let config = SearchConfig::load(Algorithm::Pso, "pso_b").unwrap();
    let mut o = options(&stub("echo"), tmp.path(), 2, 0);
    o.parallel_runs = 2;
    let err = run_search(&config, &o).unwrap_err();
    assert!(matches!(err, EngineError::Usage(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn a_failed_run_does_not_abort_its_siblings() {
    let tmp = tempfile::tempdir().unwrap();
    let marker = tmp.path().join("started");
    let config = SearchConfig::Pso(PsoConfig {
        swarm_size: 2,
        iterations: 1,
        ..PsoConfig::preset_b()
    });
    let spec = stub(&format!("flaky {}", marker.display()));
    let records = run_search(&config, &options(&spec, &tmp.path().join("out"), 2, 0)).unwrap();
    assert_eq!(records[0].summary.status, RunStatus::Failed);
    assert!(records[0].summary.error.as_deref().unwrap().contains("first start fails"));
    assert!(!records[0].dir.join("best_arch.json").exists());
    assert!(records[0].dir.join("summary.json").exists());
    assert_eq!(records[1].summary.status, RunStatus::Ok);
    assert_eq!(records[1].summary.evaluations, 5);
    // PSO candidates travel materialized: the echoed param_count is the
    // expanded layer count, which must match the reported convention
    let best = records[1].best.as_ref().unwrap();
    let sent = records[1].summary.final_report.as_ref().unwrap().param_count as usize;
    assert_eq!(records[1].summary.layer_count, Some(sent + 1));
    assert!(sent >= best.len());

    let row = aggregate_records(&records).unwrap();
    assert_eq!(row.runs, 1);
    let dirs: Vec<_> = records.iter().map(|r| r.dir.clone()).collect();
    assert_eq!(aggregate_stats(&dirs).unwrap(), row);
}

#[test]
fn stats_refuse_mixed_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = SearchConfig::load(Algorithm::Pso, "pso_a").unwrap();
    let b = SearchConfig::load(Algorithm::Pso, "pso_b").unwrap();
    let ra = run_search(&a, &options("surrogate:target", &tmp.path().join("a"), 1, 0)).unwrap();
    let rb = run_search(&b, &options("surrogate:target", &tmp.path().join("b"), 1, 0)).unwrap();
    let err = aggregate_stats(&[&ra[0].dir, &rb[0].dir]).unwrap_err();
    assert!(matches!(err, StatsError::Mismatch { .. }));
}

#[test]
fn unreadable_target_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = SearchConfig::load(Algorithm::Pso, "pso_b").unwrap();
    let spec = format!("surrogate:target={}", tmp.path().join("missing.json").display());
    let err = run_search(&config, &options(&spec, tmp.path(), 1, 0)).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

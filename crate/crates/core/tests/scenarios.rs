use std::path::Path;

use polcomp::harness::scenario::{aggregate, batch_member};
use polcomp::harness::{run_batch, run_scenario, ScenarioConfig, ScenarioKind};

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn default_runs_start_well_above_the_floor() {
    let mut cfg = ScenarioConfig::default();
    cfg.run.batch_size = 20;
    let b = run_batch(&cfg).unwrap();
    let summaries: Vec<_> = b.runs.iter().map(|r| r.as_ref().unwrap()).collect();
    assert!(summaries.iter().all(|s| s.initial_qber > 0.30));
    let median_initial = {
        let mut q: Vec<f64> = summaries.iter().map(|s| s.initial_qber).collect();
        q.sort_by(f64::total_cmp);
        q[10]
    };
    assert!(median_initial > 0.45, "{median_initial}");
    let ended_low = summaries.iter().filter(|s| s.final_qber <= 0.08).count();
    assert!(ended_low >= 14, "{ended_low}/20 ended at or below 8%");
}

#[test]
fn batch_of_one_matches_the_single_run() {
    let mut cfg = ScenarioConfig::default();
    cfg.run.batch_size = 1;
    cfg.run.seed = 77;
    cfg.run.duration = 600.0;
    let b = run_batch(&cfg).unwrap();
    let single = run_scenario(&batch_member(&cfg, 0)).unwrap().summary;
    let s = b.runs[0].as_ref().unwrap();
    assert_eq!(s, &single);
    let a = &b.aggregate;
    assert_eq!(a.runs, 1);
    assert_eq!(a.failed_runs, 0);
    assert_eq!(a.median_iters_to_floor, single.iters_to_floor.map(|n| n as f64));
    let q = a.final_qber_quantiles.unwrap();
    assert!(q.iter().all(|&x| x == single.final_qber));
}

#[test]
fn batch_aggregates_are_reproducible() {
    let mut cfg = ScenarioConfig::default();
    cfg.run.batch_size = 16;
    cfg.run.duration = 500.0;
    let a = run_batch(&cfg).unwrap();
    let b = run_batch(&cfg).unwrap();
    assert_eq!(a.aggregate, b.aggregate);
    assert_eq!(a.runs, b.runs);
    let again = aggregate(&a.runs, cfg.run.success_iterations);
    assert_eq!(again, a.aggregate);
}

#[test]
fn drift_only_log_has_no_jumps() {
    let mut cfg = ScenarioConfig::default();
    cfg.run.kind = ScenarioKind::DriftLog;
    cfg.run.duration = 72.0 * 3600.0;
    cfg.fiber.jump_rate = 0.0;
    let r = run_scenario(&cfg).unwrap();
    let d = r.drift.unwrap();
    assert_eq!(d.jumps, 0);
    assert!(d.jump_rows.is_empty());
    assert!(d.max_smooth_step < 6.0 * d.step_scale);
    // consecutive rows never jump across the sphere
    for w in r.trace.records.windows(2) {
        let dot: f64 = (0..3).map(|i| w[0].stokes[i] * w[1].stokes[i]).sum();
        assert!(dot > 0.99);
    }
}

#[test]
fn static_drift_log_is_constant() {
    let mut cfg = ScenarioConfig::default();
    cfg.run.kind = ScenarioKind::DriftLog;
    cfg.run.duration = 3600.0;
    cfg.fiber.drift_sigma = 0.0;
    cfg.fiber.jump_rate = 0.0;
    let r = run_scenario(&cfg).unwrap();
    let first = r.trace.records[0].stokes;
    assert!(r.trace.records.iter().all(|rec| rec.stokes == first));
    // compensator parked at the ideal setting: only the floor remains
    assert!(r.trace.records.iter().all(|rec| (rec.qber_true - 0.04).abs() < 1e-5));
}

#[test]
fn shipped_configs_run() {
    for name in ["optimize.toml", "measured_ch1.toml"] {
        let mut cfg = ScenarioConfig::load(&configs().join(name)).unwrap();
        cfg.run.output_prefix = None;
        cfg.run.duration = 300.0;
        let r = run_scenario(&cfg).unwrap();
        assert!(r.summary.iterations > 0, "{name}");
    }
}

#[test]
fn config_file_round_trip() {
    let cfg = ScenarioConfig::load(&configs().join("optimize.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("again.toml");
    std::fs::write(&path, cfg.to_toml_string()).unwrap();
    let mut back = ScenarioConfig::load(&path).unwrap();
    back.base_dir = cfg.base_dir.clone();
    assert_eq!(back, cfg);
}

#[test]
fn scripted_jump_is_recorded() {
    let mut cfg = ScenarioConfig::default();
    cfg.fiber.drift_sigma = 0.0;
    cfg.fiber.jump_rate = 0.0;
    cfg.disturbance.at_iteration = Some(10);
    cfg.run.duration = 600.0;
    let r = run_scenario(&cfg).unwrap();
    let jumps = &r.summary.jumps;
    assert_eq!(jumps.len(), 1);
    let j = &jumps[0];
    assert!(j.scripted);
    // applied just before the 10th iteration
    assert_eq!(j.iteration, 9);
    let rise = j.qber_after.unwrap() - j.qber_before.unwrap();
    assert!((rise - 0.03).abs() < 1e-6, "{rise}");
}

#[test]
fn stepped_session_reproduces_a_run() {
    use polcomp::harness::scenario::Session;
    let mut cfg = ScenarioConfig::default();
    cfg.run.seed = 5;
    cfg.disturbance.at_iteration = Some(4);
    let mut session = Session::new(&cfg).unwrap();
    for _ in 0..12 {
        session.step().unwrap();
    }
    cfg.run.duration = 12.0 * session.iteration_time() + 0.5;
    let stepped = session.finish();
    let run = run_scenario(&cfg).unwrap();
    assert_eq!(stepped.trace, run.trace);
    assert_eq!(stepped.summary, run.summary);
}

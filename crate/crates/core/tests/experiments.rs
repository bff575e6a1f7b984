use cantor_harmonic::experiments::config::SequenceConfig;
use cantor_harmonic::experiments::runs::{delta_analysis, fit_log_decay, harnack_analysis};
use cantor_harmonic::experiments::*;
use cantor_harmonic::stats::BootstrapConfig;
use cantor_harmonic::*;

fn small(depth: usize, walkers: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.wos.depth = depth;
    c.campaign.walkers = walkers;
    c.workers = 1;
    c.bootstrap.resamples = 50;
    c
}

#[test]
fn rerun_reproduces_metrics_bit_identically() {
    let mut c = small(4, 20_000);
    c.sequence = SequenceConfig::constant(1.0 / 3.0);
    let a = run_gap_test(&c).unwrap();
    let b = run_gap_test(&c).unwrap();
    assert!(a.result.same_metrics(&b.result));
    assert_eq!(a.tables[0].1, b.tables[0].1);
}

#[test]
fn worker_count_does_not_change_tables() {
    let c = small(4, 10_000);
    let a = run_sample(&c).unwrap();
    let mut c3 = c.clone();
    c3.workers = 3;
    let b = run_sample(&c3).unwrap();
    assert_eq!(a.tables[0].1, b.tables[0].1);
    assert_eq!(a.result.metrics, b.result.metrics);
}

#[test]
fn synthetic_uniform_gap_is_zero() {
    for seq in [
        SequenceConfig::constant(0.25),
        SequenceConfig::constant(1.0 / 3.0),
        SequenceConfig {
            kind: cantor_harmonic::experiments::config::SequenceForm::Periodic,
            values: vec![0.2, 0.3],
            ..SequenceConfig::default()
        },
    ] {
        let mut c = small(6, 1);
        c.sequence = seq;
        c.gap.synthetic_uniform = true;
        let r = run_gap_test(&c).unwrap().result;
        assert!(r.metrics["gap"].value.abs() < 1e-12, "{:?}", r.metrics["gap"]);
        assert!(r.metrics["gap"].uncertainty < 1e-12, "{:?}", r.metrics["gap"]);
        assert!(!r.checks["dim_omega_plus_3sigma_below_dim_cantor"]);
        assert_eq!(r.timing.walkers, 0);
    }
}

#[test]
fn product_measure_harnack_is_flat() {
    let t = CylinderMeasureTable::synthetic_product(5, [1, 2, 3, 4]).unwrap();
    let (scans, fit) = harnack_analysis(&t, 1, 1, 3, None).unwrap();
    assert!(scans.iter().all(|s| s.max_abs_deviation.abs() < 1e-12));
    assert_eq!(fit.slope, 0.0);
    assert_eq!(fit.q_hat, 1.0);
    assert!(fit.non_decaying);
    assert!(fit.r_squared.is_nan());
}

#[test]
fn decay_fit_recovers_geometric_rate() {
    let ks = [1.0, 2.0, 3.0, 4.0];
    let ds: Vec<f64> = ks.iter().map(|k| 3.0 * 0.5f64.powf(*k)).collect();
    let f = fit_log_decay(&ks, &ds, &[0.01; 4]).unwrap();
    assert!((f.q_hat - 0.5).abs() < 1e-12);
    assert!((f.r_squared - 1.0).abs() < 1e-12);
    assert!(!f.non_decaying);
    let up = fit_log_decay(&[1.0, 2.0], &[0.1, 0.2], &[0.01, 0.01]).unwrap();
    assert!(up.non_decaying && up.q_hat > 1.0);
    assert!(fit_log_decay(&[1.0, 2.0], &[0.1, 0.0], &[0.0, 0.0]).is_err());
}

#[test]
fn uniform_measure_has_no_entropy_oscillation() {
    let t = CylinderMeasureTable::synthetic_uniform(5).unwrap();
    let d = delta_analysis(&t, 1, 3, BootstrapConfig::default()).unwrap();
    assert_eq!(d.rows.len(), 3 + 4 * 3);
    assert!(d.rows.iter().all(|r| r.delta.abs() < 1e-12 && r.std_dev == 0.0));
    assert!(!d.root_decreasing);
}

#[test]
fn truncation_beyond_depth_gives_identical_tables() {
    let a = ScaleSequence::constant(0.25).unwrap();
    let b = ScaleSequence::explicit_prefix(vec![0.25, 0.25, 0.25, 0.4]).unwrap();
    let ta = run_campaign(&a, WosParams::defaults(&a, 3), 5_000, 21, 1).unwrap();
    let tb = run_campaign(&b, WosParams::defaults(&b, 3), 5_000, 21, 1).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn outputs_round_trip_and_rerender_identically() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(5, 20_000);
    let out = run_harnack_scan(&c).unwrap();
    let files = write_outputs(dir.path(), &out, true).unwrap();
    let json = dir.path().join("harnack.json");
    assert!(files.contains(&json));
    let svg_path = dir.path().join("harnack_decay.svg");
    let first = std::fs::read_to_string(&svg_path).unwrap();
    std::fs::remove_file(&svg_path).unwrap();
    render_saved(&json).unwrap();
    assert_eq!(std::fs::read_to_string(&svg_path).unwrap(), first);

    let back = ExperimentResult::load(&json).unwrap();
    assert_eq!(back, out.result);
    let table = CylinderMeasureTable::load(&dir.path().join("harnack_table.csv")).unwrap();
    assert_eq!(table, out.tables[0].1);
    for m in back.metrics.values() {
        assert!(m.uncertainty.is_finite() || m.value.is_nan());
    }
}

#[test]
fn saved_table_can_be_reanalysed() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(4, 20_000);
    let direct = run_dims(&c).unwrap();
    let path = dir.path().join("t.csv");
    direct.tables[0].1.save(&path).unwrap();
    let mut again = c.clone();
    again.campaign.table = Some(path.clone());
    let reused = run_dims(&again).unwrap();
    assert_eq!(reused.result.metrics, direct.result.metrics);
    assert_eq!(reused.result.timing.walkers, 0);

    let mut wrong = again.clone();
    wrong.sequence = SequenceConfig::constant(0.3);
    assert!(matches!(run_dims(&wrong), Err(Error::Config(_))));
    let mut deeper = again;
    deeper.wos.depth = 5;
    assert!(matches!(run_dims(&deeper), Err(Error::DepthMismatch(4, 5))));
}

#[test]
fn continuity_sweep_reports_every_delta_and_control() {
    let mut c = small(4, 20_000);
    c.continuity.deltas = vec![0.05, 0.02];
    let r = run_continuity_sweep(&c).unwrap();
    assert_eq!(r.tables.len(), 4);
    for key in [
        "difference_control",
        "difference_delta_0.05",
        "difference_delta_0.02",
        "difference_over_delta_delta_0.05",
        "codim_max_deviation_delta_0.02",
    ] {
        assert!(r.result.metrics.contains_key(key), "{key}");
    }
    assert!(r.result.checks.contains_key("monotone_within_ci"));
    assert_eq!(r.result.timing.walkers, 4 * 20_000);
    let p = &r.result.plots[0];
    assert_eq!(p.series[0].points.len(), 3);
}

#[test]
fn preconditions_fail_before_sampling() {
    let mut c = small(4, u64::MAX);
    c.harnack.k_max = 3;
    let start = std::time::Instant::now();
    assert!(matches!(run_harnack_scan(&c), Err(Error::Config(_))));
    c.wos.depth = 4;
    assert!(matches!(run_oracle_compare(&c), Err(Error::CostGuard(_))));
    c.continuity.deltas = vec![0.3];
    assert!(run_continuity_sweep(&c).is_err());
    assert!(start.elapsed().as_secs() < 5);
}

#[test]
fn oracle_compare_small() {
    let mut c = small(1, 20_000);
    c.oracle.walkers = 20_000;
    c.oracle.richardson = true;
    let r = run_oracle_compare(&c).unwrap();
    assert!(r.result.checks["joint_ci_consistent"]);
    assert!(r.result.metrics.contains_key("richardson_max_abs_difference"));
    assert!(r.tables[1].1.header().oracle);
}

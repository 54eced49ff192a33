use wkm_core::distributions::sample_stream;
use wkm_core::experiments::{run_convergence, run_tailscan, MetricKind, ScenarioConfig};
use wkm_core::theory::{evaluate_tradeoff_bound, truncation_analysis};
use wkm_core::validation::{bootstrap_null_robust, grid_robust_distance, hybrid_validate, BootstrapOutcome};
use wkm_core::{
    BoundConstants, CoreGate, DistributionModel, EmpiricalCdf, ExhaustionSpec, Sequential, StreamKey, TailPolicy, ValidationPolicy,
};

const Q: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 2.5];

fn policy(seed: u64) -> ValidationPolicy {
    ValidationPolicy {
        core: CoreGate::Bootstrap { alpha: 0.05 },
        tail: TailPolicy { var_level: 0.01, test_level: 0.05 },
        q_grid: Q.to_vec(),
        exhaustion: ExhaustionSpec::Absolute,
        bootstrap: 200,
        refinement: 8,
        seed,
    }
}

#[test]
fn bootstrap_gate_matches_a_manual_null() {
    let t = DistributionModel::student_t(3.0, 0.0, 1.0).unwrap();
    let x = sample_stream(&t, StreamKey::new(1), 800).unwrap();
    let v = hybrid_validate(&x, &t, &policy(9), &Sequential).unwrap();
    let null =
        bootstrap_null_robust(&t, 800, &ExhaustionSpec::Absolute, &Q, 200, StreamKey::new(9).child_label("bootstrap"), 8, &Sequential)
            .unwrap();
    let observed = grid_robust_distance(&EmpiricalCdf::new(x).unwrap(), &t, &ExhaustionSpec::Absolute, &Q, 8).unwrap().d_rob;
    let manual = BootstrapOutcome::from_null(observed, &null, 0.05, 9).unwrap();
    assert_eq!(v.grid.d_rob, observed);
    assert_eq!(v.core_threshold, manual.critical_value);
    assert_eq!(v.core_pass, manual.passes());
}

#[test]
fn misspecified_light_tails_are_rejected() {
    let t = DistributionModel::student_t(2.5, 0.0, 1.0).unwrap();
    let g = DistributionModel::gaussian(0.0, 5f64.sqrt()).unwrap();
    let x = sample_stream(&t, StreamKey::new(2), 2000).unwrap();
    let v = hybrid_validate(&x, &g, &policy(3), &Sequential).unwrap();
    assert!(!v.accept);
    assert!(!v.core_pass);
}

#[test]
fn convergence_rows_cover_the_grid_in_order() {
    let mut cfg = ScenarioConfig::new("small", DistributionModel::pareto(2.8, 1.0).unwrap(), 1.2, 5);
    cfg.n_grid = vec![20, 80];
    cfg.m = 200;
    cfg.repetitions = 2;
    let rows = run_convergence(&cfg, &Sequential).unwrap();
    assert_eq!(rows.len(), 8);
    let keys: Vec<_> = rows.iter().map(|r| (r.n, r.metric, r.floor)).collect();
    assert_eq!(
        keys,
        vec![
            (20, MetricKind::Weighted, false),
            (20, MetricKind::Weighted, true),
            (20, MetricKind::Ks, false),
            (20, MetricKind::Ks, true),
            (80, MetricKind::Weighted, false),
            (80, MetricKind::Weighted, true),
            (80, MetricKind::Ks, false),
            (80, MetricKind::Ks, true),
        ]
    );
    assert!(rows.iter().all(|r| r.mean > 0.0 && r.stderr >= 0.0 && r.m == 200));
    let again = run_convergence(&cfg, &Sequential).unwrap();
    assert_eq!(rows, again);
}

#[test]
fn tailscan_rows_agree_with_direct_evaluation() {
    let m = DistributionModel::student_t(2.5, 0.0, 1.0).unwrap();
    let consts = BoundConstants::default();
    let rows = run_tailscan(&m, &ExhaustionSpec::Absolute, 0.45, &[1.0, 10.0, 100.0], 1000, 1.2, &consts).unwrap();
    for row in &rows {
        let ta = truncation_analysis(&m, &ExhaustionSpec::Absolute, row.r, 0.45).unwrap();
        assert_eq!(row.tail_remainder, ta.tail_remainder);
        assert_eq!(row.bound.unwrap(), evaluate_tradeoff_bound(&ta, 1000, 1.2, &consts).unwrap());
    }
    assert!(rows.windows(2).all(|w| w[1].tail_remainder < w[0].tail_remainder));
}

use sqmean::harness::{
    compare_naive, crafted_point_mass_config, parse_results, render_results, run_experiment,
    run_sweep, verify, EstimatorSpec, ExperimentConfig, Format, Ratio,
};
use sqmean::{Error, Policy};

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

const PARETO_SIGNED: &str = r#"{
    "distribution": {"kind": "discretized-pareto", "alpha": 2.5, "xmin": 1, "step": 0.05, "cap": 1000},
    "query": {"kind": "affine", "scale": -1, "shift": 2},
    "estimator": {"name": "signed-mean", "n": 256, "zeta": 0.05},
    "oracle": {"model": "vstat", "policy": "adversarial-seeded-random-sign"},
    "trials": 6,
    "seed": 99
}"#;

#[test]
fn same_config_same_bytes() {
    let c = config(PARETO_SIGNED);
    let a = render_results(&run_experiment(&c).unwrap(), Format::Csv).unwrap();
    let b = render_results(&run_experiment(&c).unwrap(), Format::Csv).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 7);
}

#[test]
fn different_seeds_differ_under_random_sign() {
    let c = config(PARETO_SIGNED);
    let mut d = c.clone();
    d.seed = 100;
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&d).unwrap();
    assert_ne!(a, b);
    for r in a.iter().chain(&b) {
        assert!(r.realized_error <= r.theoretical_bound);
        assert_eq!(r.bits, 0);
    }
}

#[test]
fn sweep_rows_follow_grid_order() {
    let mut c = verify::determinism_config();
    c.trials = 2;
    let rows = run_sweep(&c).unwrap();
    assert_eq!(rows.len(), 4 * 2 * 2);
    assert_eq!(rows[0].policy, "honest-exact");
    assert_eq!((rows[0].n, rows[2].n), (64, 1024));
    assert_eq!(rows[15].policy, "adversarial-seeded-random-sign");
    let json = render_results(&rows, Format::Json).unwrap();
    assert_eq!(parse_results(&json, Format::Json).unwrap(), rows);
}

#[test]
fn validation_happens_before_any_trial() {
    let mut c = config(PARETO_SIGNED);
    c.bound = Some(0.1);
    assert!(matches!(run_experiment(&c), Err(Error::Config(_))));
    let mut c = verify::determinism_config();
    c.sweep.as_mut().unwrap().n.push(8);
    assert!(matches!(run_sweep(&c), Err(Error::Config(_))));
}

#[test]
fn comm_sim_experiment_reports_bits() {
    let c = config(
        r#"{
        "distribution": {"kind": "uniform-grid", "lo": 0, "hi": 1, "step": 0.125},
        "estimator": {"name": "naive-mean", "n": 50},
        "oracle": {"model": "comm-sim", "q_total": 1, "delta": 0.05},
        "trials": 3
    }"#,
    );
    let rows = run_experiment(&c).unwrap();
    let groups = (3.0 * (2.0f64 / 0.05).ln()).ceil() as u64;
    for r in rows {
        assert_eq!(r.bits, groups * 8 * 50);
        assert_eq!(r.queries, 1);
        assert_eq!(r.policy, "comm-sim");
    }
}

#[test]
fn comparison_examples() {
    let cmp = compare_naive(&crafted_point_mass_config(
        1e4,
        10_000,
        0.1,
        Policy::AdversarialUp,
    ))
    .unwrap();
    assert_eq!(cmp.naive_error, 50.0);
    assert!(cmp.estimator_error <= 0.1);
    assert!(cmp.ratio.at_least(500.0));

    let cmp = compare_naive(&crafted_point_mass_config(
        1e4,
        10_000,
        0.1,
        Policy::HonestExact,
    ))
    .unwrap();
    assert_eq!(cmp.naive_error, 0.0);
    assert_eq!(cmp.ratio, Ratio::Undefined);

    let mut c = crafted_point_mass_config(1e4, 10_000, 0.1, Policy::AdversarialUp);
    c.estimator = EstimatorSpec::NaiveMean { n: 10 };
    assert!(compare_naive(&c).is_err());
}

#[test]
fn relative_accuracy_and_known_bound_configs() {
    let c = config(
        r#"{
        "distribution": {"kind": "discretized-lognormal", "mu": 0, "sigma": 0.75, "step": 0.02, "cap": 60},
        "estimator": {"name": "known-bound-mean", "eps": 0.1},
        "oracle": {"model": "vstat", "policy": "adversarial-down"},
        "bound": 2.0,
        "trials": 2
    }"#,
    );
    for r in run_experiment(&c).unwrap() {
        assert!(r.realized_error <= 0.1);
        assert!(r.queries as f64 <= 3.0 * 20f64.log2());
    }
    let c = config(
        r#"{
        "distribution": {"kind": "discretized-gaussian", "mean": -3, "std_dev": 2, "step": 0.05},
        "estimator": {"name": "relative-accuracy-mean", "eps": 0.3, "zeta": 0.05},
        "oracle": {"model": "stat", "policy": "adversarial-up"},
        "trials": 2
    }"#,
    );
    for r in run_experiment(&c).unwrap() {
        assert!(r.realized_error <= r.theoretical_bound);
    }
}

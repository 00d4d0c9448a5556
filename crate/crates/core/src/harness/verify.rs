//! End-to-end property suites, one function per acceptance criterion.
//!
//! Each suite draws its random instances from `ChaCha8Rng` with a fixed seed,
//! checks every trial against the exact brute-force answer and reports the
//! number of violations.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dist::{
    exact_lower_tail, exact_moments, exact_tail, second_moment_about, FiniteDistribution, Query,
};
use crate::error::Result;
use crate::estimators::{
    ceil_param, dyadic_mean, known_bound_mean, quantile_search, signed_mean, vector_mean,
    VstatFactory, VECTOR_QUERY_CONSTANT,
};
use crate::oracles::{
    vstat_tolerance, vstat_via_comm, CommOracle, CommPlan, Policy, QueryLog, VstatOracle,
};

use super::config::{EstimatorSpec, ExperimentConfig, OracleModel, OracleSpec, SweepSpec};
use super::generate::{generate_distribution, DistributionSpec};
use super::report::{emit_results, Format};
use super::run::{compare_naive, crafted_point_mass_config, run_sweep, splitmix64};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {} {}: {}", self.id, self.name, self.detail)
    }
}

fn outcome(id: u8, name: &'static str, violations: usize, detail: String) -> Outcome {
    Outcome {
        id,
        name,
        passed: violations == 0,
        detail: format!("{violations} violations; {detail}"),
    }
}

fn rng_for(suite: u64, case: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(
        suite.wrapping_mul(0x1_0000_0001) ^ splitmix64(case),
    ))
}

/// Random weights with occasional dominant atoms and near-zero entries.
fn random_weights(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k)
        .map(|_| {
            let u: f64 = rng.random::<f64>();
            match rng.random_range(0..4) {
                0 => u * 1e-3,
                1 => u * 10.0,
                _ => u + 1e-6,
            }
        })
        .collect();
    if k > 1 && rng.random_bool(0.3) {
        let j = rng.random_range(0..k);
        w[j] += 5.0 * k as f64;
    }
    w
}

/// A random distribution on at most `max_support` points together with a
/// query on it. `shape` selects the value family: 0 uniform on `[0, 1]`,
/// 1 heavy right tail, 2 few distinct values (ties), 3 near-zero mass.
pub fn random_nonneg_instance(
    rng: &mut ChaCha8Rng,
    max_support: usize,
) -> (FiniteDistribution, Query) {
    let k = rng.random_range(1..=max_support);
    let weights = random_weights(rng, k);
    let shape = rng.random_range(0..4);
    let levels = rng.random_range(1..=8) as f64;
    let values: Vec<f64> = (0..k)
        .map(|_| {
            let u: f64 = rng.random::<f64>();
            match shape {
                0 => u,
                1 => u.powi(6),
                2 => (u * levels).floor() / levels,
                _ => {
                    if rng.random_bool(0.7) {
                        0.0
                    } else {
                        u * u
                    }
                }
            }
        })
        .collect();
    // Support points are just labels 0..k; the query carries the values.
    let support: Vec<f64> = (0..k).map(|i| i as f64).collect();
    let dist =
        FiniteDistribution::from_weighted(support.into_iter().zip(weights)).expect("valid weights");
    let q = Query::new(values).expect("finite values");
    (dist, q)
}

/// A random real-valued query: nonnegative family shifted and scaled to
/// straddle zero, sometimes with a heavy tail on one side.
pub fn random_signed_instance(
    rng: &mut ChaCha8Rng,
    max_support: usize,
) -> (FiniteDistribution, Query) {
    let (dist, q) = random_nonneg_instance(rng, max_support);
    let scale = 10f64.powf(rng.random_range(-0.5..1.5));
    let shift: f64 = rng.random_range(-1.0..1.0);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let q = q.map(|v| sign * scale * (v + shift)).expect("finite");
    (dist, q)
}

/// Criterion 1: quantile search contract and query budget.
pub fn quantile_contract() -> Outcome {
    const CASES: u64 = 500;
    let results: Vec<(usize, usize)> = (0..CASES)
        .into_par_iter()
        .map(|case| {
            let mut rng = rng_for(1, case);
            let (dist, q) = random_nonneg_instance(&mut rng, 128);
            let dist = Arc::new(dist);
            let p: f64 = rng.random_range(0.02..=1.0);
            let delta = p / 2.0 * rng.random_range(0.05..=1.0);
            let n = ceil_param(4.0 * p / (delta * delta));
            let z = q.distinct_values().len();
            let budget = (z as f64).log2().ceil() as u64 + 1;
            let mut bad = 0;
            for (j, policy) in Policy::ALL.into_iter().enumerate() {
                let mut o = VstatOracle::new(dist.clone(), n, policy, case * 4 + j as u64).unwrap();
                let r = quantile_search(&mut o, &q, p, delta).unwrap();
                let ge = exact_tail(&dist, &q, r.point, false).unwrap();
                let gt = exact_tail(&dist, &q, r.point, true).unwrap();
                if !(ge >= p - delta && gt < p && r.queries_used <= budget) {
                    bad += 1;
                }
            }
            (bad, Policy::ALL.len())
        })
        .collect();
    let bad: usize = results.iter().map(|r| r.0).sum();
    let runs: usize = results.iter().map(|r| r.1).sum();
    outcome(
        1,
        "quantile contract",
        bad,
        format!("{runs} searches over {CASES} distributions"),
    )
}

/// Criterion 2: dyadic bound, exact query count and non-adaptivity.
pub fn dyadic_bound() -> Outcome {
    const CASES: u64 = 100;
    const NS: [u64; 5] = [16, 64, 256, 1024, 4096];
    let results: Vec<(usize, usize, usize)> = (0..CASES)
        .into_par_iter()
        .map(|case| {
            let mut rng = rng_for(2, case);
            let (dist, q) = random_nonneg_instance(&mut rng, 128);
            let q = q.declare(0.0, 1.0).unwrap();
            let dist = Arc::new(dist);
            let s = exact_moments(&dist, &q).unwrap().rms();
            let (mut bad, mut adaptive, mut runs) = (0, 0, 0);
            for n in NS {
                let nf = n as f64;
                let bound = 4.0 / nf + 2.0 * s * nf.log2() / nf.sqrt();
                let mut reference: Option<Vec<Vec<f64>>> = None;
                for (j, policy) in Policy::ALL.into_iter().enumerate() {
                    let o = VstatOracle::new(dist.clone(), n, policy, case * 8 + j as u64).unwrap();
                    let mut log = QueryLog::new(o);
                    let r = dyadic_mean(&mut log, &q).unwrap();
                    runs += 1;
                    if !(r.realized_error <= bound && r.queries_used == n.ilog2() as u64) {
                        bad += 1;
                    }
                    match &reference {
                        None => reference = Some(log.queries),
                        Some(first) if *first != log.queries => adaptive += 1,
                        Some(_) => {}
                    }
                }
            }
            (bad, adaptive, runs)
        })
        .collect();
    let bad: usize = results.iter().map(|r| r.0 + r.1).sum();
    let adaptive: usize = results.iter().map(|r| r.1).sum();
    let runs: usize = results.iter().map(|r| r.2).sum();
    outcome(
        2,
        "dyadic bound",
        bad,
        format!("{runs} runs, {adaptive} answer-dependent query sequences"),
    )
}

/// Criterion 3: known second-moment bound estimator.
pub fn known_bound() -> Outcome {
    const CASES: u64 = 50;
    let mut runs = 0;
    let mut bad = 0;
    for divisor in [16.0, 32.0] {
        let results: Vec<(usize, usize)> = (0..CASES)
            .into_par_iter()
            .map(|case| {
                let mut rng = rng_for(3, case + 1000 * divisor as u64);
                let (dist, q) = random_nonneg_instance(&mut rng, 128);
                let scale = 10f64.powf(rng.random_range(-1.0..2.0));
                let q = q.map(|v| v * scale).unwrap();
                let dist = Arc::new(dist);
                let rms = exact_moments(&dist, &q).unwrap().rms();
                let b = if rms > 0.0 {
                    rms * rng.random_range(1.0..2.0)
                } else {
                    scale
                };
                let eps = b / divisor;
                let expected_n = ceil_param((8.0 * b * (b / eps).log2() / eps).powi(2));
                let budget = 3.0 * (b / eps).log2();
                let mut bad = 0;
                for (j, policy) in Policy::ALL.into_iter().enumerate() {
                    let mut f = VstatFactory::new(dist.clone(), policy, case * 4 + j as u64);
                    let r = known_bound_mean(&mut f, &q, b, eps).unwrap();
                    if !(r.realized_error <= eps
                        && r.queries_used as f64 <= budget
                        && r.oracle_parameter == expected_n)
                    {
                        bad += 1;
                    }
                }
                (bad, Policy::ALL.len())
            })
            .collect();
        bad += results.iter().map(|r| r.0).sum::<usize>();
        runs += results.iter().map(|r| r.1).sum::<usize>();
    }
    outcome(
        3,
        "known-bound estimator",
        bad,
        format!("{runs} runs at eps in {{B/16, B/32}}"),
    )
}

/// Criterion 4: signed mean within `8 sigma log2(8n)/sqrt(n) + zeta`.
pub fn signed_mean_bound() -> Outcome {
    const CASES: u64 = 100;
    const ZETA: f64 = 0.01;
    let results: Vec<(usize, usize, u64)> = (0..CASES)
        .into_par_iter()
        .map(|case| {
            let mut rng = rng_for(4, case);
            let (dist, q) = random_signed_instance(&mut rng, 128);
            let dist = Arc::new(dist);
            let m = exact_moments(&dist, &q).unwrap();
            let b = 1.5 * m.rms();
            let (mut bad, mut runs, mut max_q) = (0, 0, 0);
            for n in [64u64, 1024] {
                let nf = n as f64;
                let bound = 8.0 * m.std_dev * (8.0 * nf).log2() / nf.sqrt() + ZETA;
                let budget = 3.0 * (4.0 * nf * b / (ZETA * ZETA)).log2() + 4.0;
                for (j, policy) in Policy::ALL.into_iter().enumerate() {
                    let mut f = VstatFactory::new(dist.clone(), policy, case * 8 + j as u64);
                    let r = signed_mean(&mut f, &q, n, ZETA, b).unwrap();
                    runs += 1;
                    max_q = max_q.max(r.queries_used);
                    if !(r.realized_error <= bound && r.queries_used as f64 <= budget) {
                        bad += 1;
                    }
                }
            }
            (bad, runs, max_q)
        })
        .collect();
    let bad = results.iter().map(|r| r.0).sum();
    let runs: usize = results.iter().map(|r| r.1).sum();
    let max_q = results.iter().map(|r| r.2).max().unwrap_or(0);
    outcome(
        4,
        "signed-mean theorem",
        bad,
        format!("{runs} runs, at most {max_q} queries"),
    )
}

/// Criterion 5: every approximate median `a` satisfies
/// `E[(z - a)^2] <= 4 Var(z)`.
pub fn median_shift() -> Outcome {
    const CASES: u64 = 1000;
    let results: Vec<(usize, usize)> = (0..CASES)
        .into_par_iter()
        .map(|case| {
            let mut rng = rng_for(5, case);
            let (dist, q) = random_signed_instance(&mut rng, 128);
            let var = exact_moments(&dist, &q).unwrap().variance;
            let third = 1.0 / 3.0;
            let (mut bad, mut checked) = (0, 0);
            for a in q.distinct_values() {
                let upper = exact_tail(&dist, &q, a, false).unwrap();
                let lower = exact_lower_tail(&dist, &q, a).unwrap();
                if upper >= third && lower >= third {
                    checked += 1;
                    let lhs = second_moment_about(&dist, &q, a).unwrap();
                    if lhs > 4.0 * var * (1.0 + 1e-9) {
                        bad += 1;
                    }
                }
            }
            (bad, checked)
        })
        .collect();
    let bad = results.iter().map(|r| r.0).sum();
    let checked: usize = results.iter().map(|r| r.1).sum();
    outcome(
        5,
        "median-shift lemma",
        bad,
        format!("{checked} medians over {CASES} distributions"),
    )
}

/// Coordinate marginals used by criterion 6: 32 discretized Gaussians with
/// total variance 0.99 and means spread over `[-0.5, 0.5]`.
pub fn vector_instance() -> Vec<Arc<FiniteDistribution>> {
    const D: usize = 32;
    let sd = (0.99 / D as f64).sqrt();
    (0..D)
        .map(|i| {
            let mean = (i as f64 / (D - 1) as f64) - 0.5;
            let spec = DistributionSpec::DiscretizedGaussian {
                mean,
                std_dev: sd,
                step: 0.01,
                cap_sigmas: 6.0,
            };
            Arc::new(generate_distribution(&spec).expect("valid gaussian"))
        })
        .collect()
}

/// Criterion 6: vector mean within `eps` in l2 at `d = 32`, `B = 4`,
/// `eps = 0.25`.
pub fn vector_mean_bound() -> Outcome {
    const B: f64 = 4.0;
    const EPS: f64 = 0.25;
    let coords = vector_instance();
    let d = coords.len() as f64;
    let budget = VECTOR_QUERY_CONSTANT * d * (d * B / EPS).log2();
    let results: Vec<(bool, f64, u64)> = Policy::ALL
        .par_iter()
        .enumerate()
        .map(|(j, &policy)| {
            let v = vector_mean(
                |i, dist| {
                    Ok(VstatFactory::new(
                        dist.clone(),
                        policy,
                        (j * 1000 + i) as u64,
                    ))
                },
                &coords,
                EPS,
                B,
            )
            .unwrap();
            let ok = v.l2_error <= EPS && v.queries_used as f64 <= budget;
            (ok, v.l2_error, v.queries_used)
        })
        .collect();
    let bad = results.iter().filter(|r| !r.0).count();
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let max_q = results.iter().map(|r| r.2).max().unwrap_or(0);
    outcome(
        6,
        "vector mean",
        bad,
        format!("worst l2 error {worst:.4}, at most {max_q} queries of budget {budget:.0} (C = {VECTOR_QUERY_CONSTANT})"),
    )
}

/// Criterion 7: VSTAT simulated from one-bit samples.
pub fn comm_simulation() -> Outcome {
    const RUNS: u64 = 200;
    const Q_TOTAL: u64 = 20;
    const N: u64 = 100;
    const DELTA: f64 = 0.1;
    let plan = CommPlan::new(N, Q_TOTAL, DELTA).unwrap();
    let expected_bits = plan.bits_per_query() * Q_TOTAL;
    let results: Vec<(bool, bool)> = (0..RUNS)
        .into_par_iter()
        .map(|run| {
            let mut rng = rng_for(7, run);
            let k = rng.random_range(1..=64);
            let weights = random_weights(&mut rng, k);
            let dist = Arc::new(
                FiniteDistribution::from_weighted((0..k).map(|i| i as f64).zip(weights)).unwrap(),
            );
            let mut comm = CommOracle::new(dist.clone(), splitmix64(run)).unwrap();
            let mut violated = false;
            for _ in 0..Q_TOTAL {
                let values: Vec<f64> = (0..k)
                    .map(|_| match rng.random_range(0..3) {
                        0 => rng.random::<f64>(),
                        1 => f64::from(rng.random_bool(0.5) as u8),
                        _ => rng.random::<f64>().powi(4),
                    })
                    .collect();
                let q = Query::new(values).unwrap();
                let p = crate::dist::exact_mean(&dist, &q).unwrap().clamp(0.0, 1.0);
                let answer = vstat_via_comm(&mut comm, &q, N, Q_TOTAL, DELTA).unwrap();
                if (answer - p).abs() > vstat_tolerance(p, N).unwrap() {
                    violated = true;
                }
            }
            (violated, comm.ledger().bits_consumed == expected_bits)
        })
        .collect();
    let failures = results.iter().filter(|r| r.0).count();
    let bit_mismatch = results.iter().filter(|r| !r.1).count();
    let fraction = failures as f64 / RUNS as f64;
    let rm = plan.bits_per_query() as f64;
    let rm_cap = 64.0 * N as f64 * (2.0 * Q_TOTAL as f64 / DELTA).ln();
    let mut bad = bit_mismatch;
    if fraction > 0.15 {
        bad += 1;
    }
    if rm > rm_cap {
        bad += 1;
    }
    outcome(
        7,
        "COMM simulation",
        bad,
        format!(
            "{failures}/{RUNS} runs with a tolerance violation ({fraction:.3} <= 0.15), r*m = {} * {} = {rm} <= {rm_cap:.0}, {expected_bits} bits per run",
            plan.groups, plan.bits_per_group
        ),
    )
}

/// Criterion 8: naive estimator pays the range, signed mean does not.
pub fn heavy_tail_comparison() -> Outcome {
    const R: f64 = 1e4;
    const N: u64 = 10_000;
    let config = crafted_point_mass_config(R, N, 0.1, Policy::AdversarialUp);
    match compare_naive(&config) {
        Ok(cmp) => {
            let ok = cmp.naive_error >= R / (2.0 * N as f64)
                && cmp.estimator_error <= 0.1
                && cmp.ratio.at_least(500.0);
            outcome(
                8,
                "heavy-tail comparison",
                usize::from(!ok),
                format!(
                    "naive error {}, signed-mean error {}, ratio {}",
                    cmp.naive_error, cmp.estimator_error, cmp.ratio
                ),
            )
        }
        Err(e) => outcome(8, "heavy-tail comparison", 1, format!("error: {e}")),
    }
}

/// Sweep used by the determinism check.
pub fn determinism_config() -> ExperimentConfig {
    ExperimentConfig {
        distribution: DistributionSpec::DiscretizedLognormal {
            mu: 0.0,
            sigma: 1.0,
            step: 0.05,
            cap: 100.0,
        },
        query: Default::default(),
        estimator: EstimatorSpec::SignedMean { n: 64, zeta: 0.05 },
        oracle: OracleSpec {
            model: OracleModel::Vstat,
            policy: Policy::HonestExact,
        },
        bound: None,
        bound_slack: 1.5,
        trials: 8,
        seed: 2024,
        sweep: Some(SweepSpec {
            n: vec![64, 1024],
            eps: vec![],
            policies: Policy::ALL.to_vec(),
        }),
        timing: false,
    }
}

/// Criterion 9: a sweep run twice writes byte-identical files. Output goes
/// under `dir`.
pub fn determinism(dir: &Path) -> Outcome {
    let config = determinism_config();
    let run = |tag: &str| -> Result<Vec<Vec<u8>>> {
        let rows = run_sweep(&config)?;
        let mut out = Vec::new();
        for format in [Format::Csv, Format::Json] {
            let path = dir.join(format!("sweep-{tag}.{format}"));
            emit_results(&rows, format, &path)?;
            out.push(std::fs::read(&path)?);
        }
        Ok(out)
    };
    match (run("a"), run("b")) {
        (Ok(a), Ok(b)) => {
            let same = a == b;
            outcome(
                9,
                "determinism",
                usize::from(!same),
                format!(
                    "csv {} bytes, json {} bytes, identical: {same}",
                    a[0].len(),
                    a[1].len()
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(9, "determinism", 1, format!("error: {e}")),
    }
}

/// All suites in order.
pub fn run_all(dir: &Path) -> Vec<Outcome> {
    vec![
        quantile_contract(),
        dyadic_bound(),
        known_bound(),
        signed_mean_bound(),
        median_shift(),
        vector_mean_bound(),
        comm_simulation(),
        heavy_tail_comparison(),
        determinism(dir),
    ]
}

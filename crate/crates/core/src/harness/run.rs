use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{FiniteDistribution, Query};
use crate::error::{Error, Result};
use crate::estimators::{
    dyadic_mean, known_bound_mean, naive_mean, nonneg_mean, relative_accuracy_mean, signed_mean,
    vector_mean, EstimateReport, OracleFactory,
};
use crate::oracles::{
    BudgetLedger, CommOracle, CommSimOracle, Policy, StatOracle, StatisticalOracle, VstatOracle,
};

use super::config::{EstimatorSpec, ExperimentConfig, Instance, OracleModel, OracleSpec};
use super::report::ResultRow;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial`: `splitmix64(seed ^ splitmix64(trial))`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial))
}

/// Any of the configured oracle models.
#[derive(Debug, Clone)]
pub enum HarnessOracle {
    Vstat(VstatOracle),
    Stat(StatOracle),
    CommSim(CommSimOracle),
}

impl StatisticalOracle for HarnessOracle {
    fn answer(&mut self, q: &Query) -> Result<f64> {
        match self {
            HarnessOracle::Vstat(o) => o.answer(q),
            HarnessOracle::Stat(o) => o.answer(q),
            HarnessOracle::CommSim(o) => o.answer(q),
        }
    }

    fn parameter(&self) -> u64 {
        match self {
            HarnessOracle::Vstat(o) => o.parameter(),
            HarnessOracle::Stat(o) => o.parameter(),
            HarnessOracle::CommSim(o) => o.parameter(),
        }
    }

    fn tolerance(&self, p: f64) -> f64 {
        match self {
            HarnessOracle::Vstat(o) => o.tolerance(p),
            HarnessOracle::Stat(o) => o.tolerance(p),
            HarnessOracle::CommSim(o) => o.tolerance(p),
        }
    }

    fn distribution(&self) -> &FiniteDistribution {
        match self {
            HarnessOracle::Vstat(o) => o.distribution(),
            HarnessOracle::Stat(o) => o.distribution(),
            HarnessOracle::CommSim(o) => o.distribution(),
        }
    }

    fn ledger(&self) -> BudgetLedger {
        match self {
            HarnessOracle::Vstat(o) => o.ledger(),
            HarnessOracle::Stat(o) => o.ledger(),
            HarnessOracle::CommSim(o) => o.ledger(),
        }
    }
}

/// Builds oracles of the configured model, seeding the k-th with `seed + k`.
#[derive(Debug, Clone)]
pub struct HarnessFactory {
    dist: Arc<FiniteDistribution>,
    spec: OracleSpec,
    next_seed: u64,
}

impl HarnessFactory {
    pub fn new(dist: Arc<FiniteDistribution>, spec: OracleSpec, seed: u64) -> Self {
        Self {
            dist,
            spec,
            next_seed: seed,
        }
    }
}

impl OracleFactory for HarnessFactory {
    type Oracle = HarnessOracle;

    fn distribution(&self) -> &FiniteDistribution {
        &self.dist
    }

    fn build(&mut self, n: u64) -> Result<HarnessOracle> {
        let seed = self.next_seed;
        self.next_seed = self.next_seed.wrapping_add(1);
        let dist = self.dist.clone();
        Ok(match self.spec.model {
            OracleModel::Vstat => {
                HarnessOracle::Vstat(VstatOracle::new(dist, n, self.spec.policy, seed)?)
            }
            OracleModel::Stat => {
                HarnessOracle::Stat(StatOracle::for_parameter(dist, n, self.spec.policy, seed)?)
            }
            OracleModel::CommSim { q_total, delta } => HarnessOracle::CommSim(CommSimOracle::new(
                CommOracle::new(dist, seed)?,
                n,
                q_total,
                delta,
            )?),
        })
    }
}

/// One trial: its result row plus the estimate and the exact mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub row: ResultRow,
    pub estimate: Vec<f64>,
    pub truth: Vec<f64>,
    pub notes: String,
}

fn run_estimator(
    estimator: &EstimatorSpec,
    oracle: OracleSpec,
    inst: &Instance,
    seed: u64,
) -> Result<(EstimateReport, Vec<f64>, Vec<f64>)> {
    let dist = &inst.coordinates[0];
    let q = &inst.query;
    let b = inst.bound;
    let mut factory = HarnessFactory::new(dist.clone(), oracle, seed);
    let report = match *estimator {
        EstimatorSpec::NaiveMean { n } => naive_mean(&mut factory.build(n)?, q)?,
        EstimatorSpec::DyadicMean { n } => dyadic_mean(&mut factory.build(n)?, q)?,
        EstimatorSpec::KnownBoundMean { eps } => known_bound_mean(&mut factory, q, b, eps)?,
        EstimatorSpec::NonnegMean { n, zeta } => nonneg_mean(&mut factory, q, n, zeta, b)?,
        EstimatorSpec::SignedMean { n, zeta } => signed_mean(&mut factory, q, n, zeta, b)?,
        EstimatorSpec::RelativeAccuracyMean { eps, zeta } => {
            relative_accuracy_mean(&mut factory, q, eps, zeta, b)?
        }
        EstimatorSpec::VectorMean { eps } => {
            let v = vector_mean(
                |i, d| {
                    Ok(HarnessFactory::new(
                        d.clone(),
                        oracle,
                        splitmix64(seed ^ i as u64),
                    ))
                },
                &inst.coordinates,
                eps,
                b,
            )?;
            let report = EstimateReport {
                value: f64::NAN,
                true_value: f64::NAN,
                realized_error: v.l2_error,
                theoretical_bound: v.theoretical_bound,
                queries_used: v.queries_used,
                bits_used: v.bits_used,
                oracle_parameter: v.oracle_parameter,
                notes: format!("d={}", v.estimate.len()),
            };
            return Ok((report, v.estimate, v.truth));
        }
    };
    let (value, truth) = (report.value, report.true_value);
    Ok((report, vec![value], vec![truth]))
}

fn run_trial(config: &ExperimentConfig, inst: &Instance, trial: u64) -> Result<TrialRecord> {
    let start = Instant::now();
    let seed = trial_seed(config.seed, trial);
    let (report, estimate, truth) = run_estimator(&config.estimator, config.oracle, inst, seed)?;
    let wall_time_ms = if config.timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    Ok(TrialRecord {
        row: ResultRow {
            trial,
            estimator: config.estimator.name().to_string(),
            policy: config.oracle.label().to_string(),
            n: report.oracle_parameter,
            realized_error: report.realized_error,
            theoretical_bound: report.theoretical_bound,
            queries: report.queries_used,
            bits: report.bits_used,
            wall_time_ms,
        },
        estimate,
        truth,
        notes: report.notes,
    })
}

/// Runs every trial of `config` (trials in parallel, results in trial order).
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    if config.sweep.is_some() {
        return Err(Error::Config("config has a sweep; use run_sweep".into()));
    }
    let inst = config.validate()?;
    (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, &inst, t))
        .collect()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Ok(run_trials(config)?.into_iter().map(|r| r.row).collect())
}

/// Runs every configuration of the sweep grid in order. All of them are
/// validated before the first trial runs.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let configs = config.expand_sweep()?;
    for c in &configs {
        c.validate()?;
    }
    let mut rows = Vec::new();
    for c in &configs {
        rows.extend(run_experiment(c)?);
    }
    Ok(rows)
}

/// `naive error / estimator error`, with the zero-denominator cases named.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Ratio {
    Finite(f64),
    /// Estimator error 0, naive error positive.
    Infinite,
    /// Both errors 0.
    Undefined,
}

impl Ratio {
    pub fn of(num: f64, den: f64) -> Ratio {
        if den > 0.0 {
            Ratio::Finite(num / den)
        } else if num > 0.0 {
            Ratio::Infinite
        } else {
            Ratio::Undefined
        }
    }

    pub fn at_least(self, x: f64) -> bool {
        match self {
            Ratio::Finite(r) => r >= x,
            Ratio::Infinite => true,
            Ratio::Undefined => false,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Finite(r) => write!(f, "{r}"),
            Ratio::Infinite => f.write_str("inf"),
            Ratio::Undefined => f.write_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Per trial, the naive row followed by the estimator row.
    pub rows: Vec<ResultRow>,
    pub policy: String,
    pub naive_error: f64,
    pub estimator_error: f64,
    /// Ratio of the mean naive error to the mean estimator error.
    pub ratio: Ratio,
}

/// Runs `naive-mean` next to the configured estimator on the same instance,
/// policy and trial seeds. The naive oracle uses the estimator's `n`.
pub fn compare_naive(config: &ExperimentConfig) -> Result<Comparison> {
    if matches!(
        config.estimator,
        EstimatorSpec::NaiveMean { .. } | EstimatorSpec::VectorMean { .. }
    ) {
        return Err(Error::Config(format!(
            "compare needs a scalar range-independent estimator, got {}",
            config.estimator.name()
        )));
    }
    let records = run_trials(config)?;
    let mut naive_cfg = config.clone();
    naive_cfg.estimator = EstimatorSpec::NaiveMean {
        n: records[0].row.n,
    };
    let naive = run_trials(&naive_cfg)?;
    let mut rows = Vec::with_capacity(2 * records.len());
    for (a, b) in naive.iter().zip(&records) {
        rows.push(a.row.clone());
        rows.push(b.row.clone());
    }
    let mean =
        |v: &[TrialRecord]| v.iter().map(|r| r.row.realized_error).sum::<f64>() / v.len() as f64;
    let naive_error = mean(&naive);
    let estimator_error = mean(&records);
    Ok(Comparison {
        rows,
        policy: config.oracle.label().to_string(),
        naive_error,
        estimator_error,
        ratio: Ratio::of(naive_error, estimator_error),
    })
}

/// The point mass at `R/2` with declared range `[0, R]` used to show range
/// dependence of the naive estimator.
pub fn crafted_point_mass_config(
    range: f64,
    n: u64,
    zeta: f64,
    policy: Policy,
) -> ExperimentConfig {
    use super::config::{QueryKind, QuerySpec};
    use super::generate::DistributionSpec;
    ExperimentConfig {
        distribution: DistributionSpec::PointMass { value: range / 2.0 },
        query: QuerySpec {
            kind: QueryKind::Identity,
            declared_range: Some([0.0, range]),
        },
        estimator: EstimatorSpec::SignedMean { n, zeta },
        oracle: OracleSpec {
            model: OracleModel::Vstat,
            policy,
        },
        bound: None,
        bound_slack: 1.5,
        trials: 1,
        seed: 0,
        sweep: None,
        timing: false,
    }
}

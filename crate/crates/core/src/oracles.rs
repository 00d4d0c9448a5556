//! Simulated data-access oracles.
//!
//! * [`VstatOracle`]: answers within `max{1/n, sqrt(p(1-p)/n)}` of the exact
//!   expectation `p` of a `[0, 1]`-valued query.
//! * [`StatOracle`]: answers within a flat tolerance `tau`.
//! * [`CommOracle`]: draws one fresh sample per call and reveals one bit of it.
//! * [`CommSimOracle`]: answers VSTAT queries using only COMM bits.
//!
//! The honest policy answers exactly. The adversarial policies answer at the
//! edge of the allowed tolerance (clamped to `[0, 1]`). They are oblivious:
//! the direction depends only on the policy and the oracle's own random stream.
//!
//! All randomness comes from `ChaCha8Rng` seeded with `seed_from_u64`, so a
//! seed fixes every answer sequence across builds and platforms.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{exact_mean, FiniteDistribution, Query};
use crate::error::{invalid, Error, Result};

/// Group-count multiplier for the COMM simulation of VSTAT: a query uses
/// `ceil(COMM_GROUP_FACTOR * ln(2 q_total / delta))` independent groups.
/// Frozen from `examples/calibrate_comm.rs`.
pub const COMM_GROUP_FACTOR: f64 = 3.0;

/// Bits per group as a multiple of the simulated VSTAT parameter `n`.
/// Frozen from `examples/calibrate_comm.rs`.
pub const COMM_BITS_FACTOR: u64 = 8;

/// How an SQ oracle chooses its answer inside the permitted tolerance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    #[default]
    HonestExact,
    AdversarialUp,
    AdversarialDown,
    #[serde(rename = "adversarial-seeded-random-sign")]
    AdversarialRandomSign,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::HonestExact,
        Policy::AdversarialUp,
        Policy::AdversarialDown,
        Policy::AdversarialRandomSign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::HonestExact => "honest-exact",
            Policy::AdversarialUp => "adversarial-up",
            Policy::AdversarialDown => "adversarial-down",
            Policy::AdversarialRandomSign => "adversarial-seeded-random-sign",
        }
    }

    fn perturb(self, p: f64, tol: f64, rng: &mut ChaCha8Rng) -> f64 {
        let up = match self {
            Policy::HonestExact => return p,
            Policy::AdversarialUp => true,
            Policy::AdversarialDown => false,
            Policy::AdversarialRandomSign => rng.random_bool(0.5),
        };
        if up {
            (p + tol).min(1.0)
        } else {
            (p - tol).max(0.0)
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid(format!("unknown oracle policy {s:?}")))
    }
}

/// Counters of oracle usage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub queries_asked: u64,
    pub bits_consumed: u64,
    pub samples_drawn: u64,
}

impl BudgetLedger {
    /// Usage accumulated since `earlier` was recorded.
    pub fn since(&self, earlier: &BudgetLedger) -> BudgetLedger {
        BudgetLedger {
            queries_asked: self.queries_asked - earlier.queries_asked,
            bits_consumed: self.bits_consumed - earlier.bits_consumed,
            samples_drawn: self.samples_drawn - earlier.samples_drawn,
        }
    }

    pub fn add(&mut self, other: &BudgetLedger) {
        self.queries_asked += other.queries_asked;
        self.bits_consumed += other.bits_consumed;
        self.samples_drawn += other.samples_drawn;
    }
}

/// `max(1/n, sqrt(p(1-p)/n))`.
pub fn vstat_tolerance(p: f64, n: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("probability {p} outside [0, 1]")));
    }
    if n == 0 {
        return Err(invalid("VSTAT parameter must be at least 1"));
    }
    let n = n as f64;
    Ok((1.0 / n).max((p * (1.0 - p) / n).sqrt()))
}

/// Any oracle that answers `[0, 1]`-valued statistical queries at least as
/// accurately as `VSTAT(parameter())`.
pub trait StatisticalOracle {
    fn answer(&mut self, q: &Query) -> Result<f64>;

    /// The VSTAT parameter `n` whose contract this oracle honors.
    fn parameter(&self) -> u64;

    /// Permitted deviation from the exact expectation `p`.
    fn tolerance(&self, p: f64) -> f64;

    fn distribution(&self) -> &FiniteDistribution;

    fn ledger(&self) -> BudgetLedger;
}

impl<O: StatisticalOracle + ?Sized> StatisticalOracle for Box<O> {
    fn answer(&mut self, q: &Query) -> Result<f64> {
        (**self).answer(q)
    }
    fn parameter(&self) -> u64 {
        (**self).parameter()
    }
    fn tolerance(&self, p: f64) -> f64 {
        (**self).tolerance(p)
    }
    fn distribution(&self) -> &FiniteDistribution {
        (**self).distribution()
    }
    fn ledger(&self) -> BudgetLedger {
        (**self).ledger()
    }
}

impl<O: StatisticalOracle + ?Sized> StatisticalOracle for &mut O {
    fn answer(&mut self, q: &Query) -> Result<f64> {
        (**self).answer(q)
    }
    fn parameter(&self) -> u64 {
        (**self).parameter()
    }
    fn tolerance(&self, p: f64) -> f64 {
        (**self).tolerance(p)
    }
    fn distribution(&self) -> &FiniteDistribution {
        (**self).distribution()
    }
    fn ledger(&self) -> BudgetLedger {
        (**self).ledger()
    }
}

/// Exact expectation of a statistical query, after checking the input contract.
fn statistical_expectation(dist: &FiniteDistribution, q: &Query) -> Result<f64> {
    q.check_bound(dist)?;
    if !q.in_unit_interval() {
        return Err(Error::ContractViolation(format!(
            "statistical query values must lie in [0, 1], got [{}, {}]",
            q.min_value(),
            q.max_value()
        )));
    }
    Ok(exact_mean(dist, q)?.clamp(0.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct VstatOracle {
    dist: Arc<FiniteDistribution>,
    n: u64,
    policy: Policy,
    rng: ChaCha8Rng,
    ledger: BudgetLedger,
}

impl VstatOracle {
    pub fn new(dist: Arc<FiniteDistribution>, n: u64, policy: Policy, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("VSTAT parameter must be at least 1"));
        }
        Ok(Self {
            dist,
            n,
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ledger: BudgetLedger::default(),
        })
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }
}

impl StatisticalOracle for VstatOracle {
    fn answer(&mut self, q: &Query) -> Result<f64> {
        let p = statistical_expectation(&self.dist, q)?;
        self.ledger.queries_asked += 1;
        let tol = vstat_tolerance(p, self.n)?;
        Ok(self.policy.perturb(p, tol, &mut self.rng))
    }

    fn parameter(&self) -> u64 {
        self.n
    }

    fn tolerance(&self, p: f64) -> f64 {
        vstat_tolerance(p.clamp(0.0, 1.0), self.n).expect("n >= 1")
    }

    fn distribution(&self) -> &FiniteDistribution {
        &self.dist
    }

    fn ledger(&self) -> BudgetLedger {
        self.ledger
    }
}

/// `STAT(tau)`. Since `tau <= 1/n` implies the VSTAT(n) contract, it serves
/// estimators as a VSTAT oracle with parameter `floor(1/tau)`.
#[derive(Debug, Clone)]
pub struct StatOracle {
    dist: Arc<FiniteDistribution>,
    tau: f64,
    n: u64,
    policy: Policy,
    rng: ChaCha8Rng,
    ledger: BudgetLedger,
}

impl StatOracle {
    pub fn new(dist: Arc<FiniteDistribution>, tau: f64, policy: Policy, seed: u64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(invalid(format!("STAT tolerance {tau} must lie in (0, 1)")));
        }
        let mut n = (1.0 / tau).floor() as u64;
        while n > 1 && 1.0 / (n as f64) < tau {
            n -= 1;
        }
        Ok(Self {
            dist,
            tau,
            n: n.max(1),
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ledger: BudgetLedger::default(),
        })
    }

    /// `STAT(1/n)`, the weakest STAT oracle that meets the VSTAT(n) contract.
    pub fn for_parameter(
        dist: Arc<FiniteDistribution>,
        n: u64,
        policy: Policy,
        seed: u64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(invalid("STAT simulation of VSTAT(n) needs n >= 2"));
        }
        let mut oracle = Self::new(dist, 1.0 / n as f64, policy, seed)?;
        oracle.n = n;
        Ok(oracle)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl StatisticalOracle for StatOracle {
    fn answer(&mut self, q: &Query) -> Result<f64> {
        let p = statistical_expectation(&self.dist, q)?;
        self.ledger.queries_asked += 1;
        Ok(self.policy.perturb(p, self.tau, &mut self.rng))
    }

    fn parameter(&self) -> u64 {
        self.n
    }

    fn tolerance(&self, _p: f64) -> f64 {
        self.tau
    }

    fn distribution(&self) -> &FiniteDistribution {
        &self.dist
    }

    fn ledger(&self) -> BudgetLedger {
        self.ledger
    }
}

/// One-bit sampling oracle: each call evaluates a Boolean function on one
/// fresh independent sample.
#[derive(Debug, Clone)]
pub struct CommOracle {
    dist: Arc<FiniteDistribution>,
    sampler: WeightedIndex<f64>,
    rng: ChaCha8Rng,
    ledger: BudgetLedger,
}

impl CommOracle {
    pub fn new(dist: Arc<FiniteDistribution>, seed: u64) -> Result<Self> {
        let sampler = WeightedIndex::new(dist.weights().iter().copied())
            .map_err(|e| invalid(format!("cannot sample from distribution: {e}")))?;
        Ok(Self {
            dist,
            sampler,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ledger: BudgetLedger::default(),
        })
    }

    pub fn distribution(&self) -> &FiniteDistribution {
        &self.dist
    }

    pub fn ledger(&self) -> BudgetLedger {
        self.ledger
    }

    fn draw(&mut self) -> usize {
        self.ledger.samples_drawn += 1;
        self.ledger.bits_consumed += 1;
        self.sampler.sample(&mut self.rng)
    }

    pub fn query(&mut self, h: &Query) -> Result<bool> {
        h.check_bound(&self.dist)?;
        if !h.is_binary() {
            return Err(invalid("COMM queries must be {0, 1}-valued"));
        }
        let i = self.draw();
        Ok(h.values()[i] == 1.0)
    }

    /// One bit with expectation exactly `D[q]`: draws `theta` uniformly from
    /// `(0, 1]` and asks the Boolean query `1{q(x) >= theta}`.
    pub fn randomized_rounding_bit(&mut self, q: &Query) -> Result<bool> {
        Ok(self.randomized_rounding_ones(q, 1)? == 1)
    }

    /// Number of ones among `count` randomized-rounding bits for `q`.
    pub fn randomized_rounding_ones(&mut self, q: &Query, count: u64) -> Result<u64> {
        q.check_bound(&self.dist)?;
        if !q.in_unit_interval() {
            return Err(invalid("randomized rounding needs query values in [0, 1]"));
        }
        let mut ones = 0;
        for _ in 0..count {
            let theta = 1.0 - self.rng.random::<f64>();
            let i = self.draw();
            if q.values()[i] >= theta {
                ones += 1;
            }
        }
        Ok(ones)
    }
}

/// Sizes used to answer one VSTAT(n) query from COMM bits: the answer is the
/// median of `groups` group means, each over `bits_per_group` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommPlan {
    pub groups: u64,
    pub bits_per_group: u64,
}

impl CommPlan {
    pub fn new(n: u64, q_total: u64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("delta {delta} must lie in (0, 1)")));
        }
        if n == 0 || q_total == 0 {
            return Err(invalid("n and q_total must be positive"));
        }
        let groups = (COMM_GROUP_FACTOR * (2.0 * q_total as f64 / delta).ln()).ceil() as u64;
        Ok(Self {
            groups: groups.max(1),
            bits_per_group: COMM_BITS_FACTOR * n,
        })
    }

    pub fn bits_per_query(&self) -> u64 {
        self.groups * self.bits_per_group
    }
}

/// Answers a VSTAT(n) query using `CommPlan::new(n, q_total, delta)` COMM bits.
/// With probability at least `1 - delta / q_total` the answer honors the
/// VSTAT(n) contract.
pub fn vstat_via_comm(
    comm: &mut CommOracle,
    q: &Query,
    n: u64,
    q_total: u64,
    delta: f64,
) -> Result<f64> {
    let plan = CommPlan::new(n, q_total, delta)?;
    let mut means = Vec::with_capacity(plan.groups as usize);
    for _ in 0..plan.groups {
        let ones = comm.randomized_rounding_ones(q, plan.bits_per_group)?;
        means.push(ones as f64 / plan.bits_per_group as f64);
    }
    means.sort_by(f64::total_cmp);
    let mid = means.len() / 2;
    Ok(if means.len() % 2 == 1 {
        means[mid]
    } else {
        0.5 * (means[mid - 1] + means[mid])
    })
}

/// VSTAT(n) answered through [`vstat_via_comm`]. `q_total` is the number of
/// queries the union bound is taken over.
#[derive(Debug, Clone)]
pub struct CommSimOracle {
    comm: CommOracle,
    n: u64,
    q_total: u64,
    delta: f64,
    queries: u64,
}

impl CommSimOracle {
    pub fn new(comm: CommOracle, n: u64, q_total: u64, delta: f64) -> Result<Self> {
        CommPlan::new(n, q_total, delta)?;
        Ok(Self {
            comm,
            n,
            q_total,
            delta,
            queries: 0,
        })
    }

    pub fn plan(&self) -> CommPlan {
        CommPlan::new(self.n, self.q_total, self.delta).expect("validated at construction")
    }
}

impl StatisticalOracle for CommSimOracle {
    fn answer(&mut self, q: &Query) -> Result<f64> {
        let v = vstat_via_comm(&mut self.comm, q, self.n, self.q_total, self.delta)?;
        self.queries += 1;
        Ok(v)
    }

    fn parameter(&self) -> u64 {
        self.n
    }

    fn tolerance(&self, p: f64) -> f64 {
        vstat_tolerance(p.clamp(0.0, 1.0), self.n).expect("n >= 1")
    }

    fn distribution(&self) -> &FiniteDistribution {
        self.comm.distribution()
    }

    fn ledger(&self) -> BudgetLedger {
        BudgetLedger {
            queries_asked: self.queries,
            ..self.comm.ledger()
        }
    }
}

/// Wraps an oracle and records every query function and answer.
#[derive(Debug, Clone)]
pub struct QueryLog<O> {
    inner: O,
    pub queries: Vec<Vec<f64>>,
    pub answers: Vec<f64>,
}

impl<O: StatisticalOracle> QueryLog<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            queries: Vec::new(),
            answers: Vec::new(),
        }
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: StatisticalOracle> StatisticalOracle for QueryLog<O> {
    fn answer(&mut self, q: &Query) -> Result<f64> {
        let v = self.inner.answer(q)?;
        self.queries.push(q.values().to_vec());
        self.answers.push(v);
        Ok(v)
    }
    fn parameter(&self) -> u64 {
        self.inner.parameter()
    }
    fn tolerance(&self, p: f64) -> f64 {
        self.inner.tolerance(p)
    }
    fn distribution(&self) -> &FiniteDistribution {
        self.inner.distribution()
    }
    fn ledger(&self) -> BudgetLedger {
        self.inner.ledger()
    }
}

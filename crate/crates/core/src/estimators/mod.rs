//! Mean and quantile estimators over statistical-query oracles.
//!
//! Every mean estimator returns an [`EstimateReport`] carrying the estimate,
//! the exact mean (from [`crate::dist::exact_moments`]), the realized error,
//! the guaranteed error bound, and the oracle usage. All logarithms in bounds
//! are base 2.

mod baseline;
mod dyadic;
mod general;
mod quantile;
mod vector;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{exact_moments, FiniteDistribution, Moments, Query};
use crate::error::{invalid, Error, Result};
use crate::oracles::{BudgetLedger, StatisticalOracle};

pub use baseline::naive_mean;
pub use dyadic::{dyadic_mean, known_bound_mean, known_bound_parameter};
pub use general::{
    nonneg_mean, relative_accuracy_mean, relative_accuracy_parameter, signed_mean,
    MEDIAN_ORACLE_PARAMETER,
};
pub use quantile::{
    approximate_median, grid_quantile, quantile_search, tail_quantile, QuantileResult, SearchStep,
    GRID_SNAP,
};
pub use vector::{vector_mean, VectorEstimate, VECTOR_QUERY_CONSTANT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub value: f64,
    pub true_value: f64,
    pub realized_error: f64,
    pub theoretical_bound: f64,
    pub queries_used: u64,
    pub bits_used: u64,
    /// VSTAT parameter of the main oracle the estimator ran against.
    pub oracle_parameter: u64,
    pub notes: String,
}

impl EstimateReport {
    pub(crate) fn new(
        value: f64,
        true_value: f64,
        theoretical_bound: f64,
        usage: BudgetLedger,
        oracle_parameter: u64,
        notes: String,
    ) -> Self {
        Self {
            value,
            true_value,
            realized_error: (value - true_value).abs(),
            theoretical_bound,
            queries_used: usage.queries_asked,
            bits_used: usage.bits_consumed,
            oracle_parameter,
            notes,
        }
    }

    /// `realized_error <= theoretical_bound`, up to floating-point rounding of
    /// the order of the magnitudes involved.
    pub fn within_bound(&self) -> bool {
        let slack = 1e-9 * (1.0 + self.true_value.abs() + self.theoretical_bound);
        self.realized_error <= self.theoretical_bound + slack
    }
}

/// Source of fresh oracles for one fixed distribution. Estimators that need
/// an oracle of a particular strength ask the factory for `VSTAT(n)`.
pub trait OracleFactory {
    type Oracle: StatisticalOracle;

    fn distribution(&self) -> &FiniteDistribution;

    fn build(&mut self, n: u64) -> Result<Self::Oracle>;
}

/// Factory handing out honest or adversarial [`crate::oracles::VstatOracle`]s
/// with seeds `seed, seed + 1, ...`.
#[derive(Debug, Clone)]
pub struct VstatFactory {
    dist: Arc<FiniteDistribution>,
    policy: crate::oracles::Policy,
    next_seed: u64,
}

impl VstatFactory {
    pub fn new(dist: Arc<FiniteDistribution>, policy: crate::oracles::Policy, seed: u64) -> Self {
        Self {
            dist,
            policy,
            next_seed: seed,
        }
    }
}

impl OracleFactory for VstatFactory {
    type Oracle = crate::oracles::VstatOracle;

    fn distribution(&self) -> &FiniteDistribution {
        &self.dist
    }

    fn build(&mut self, n: u64) -> Result<Self::Oracle> {
        let seed = self.next_seed;
        self.next_seed = self.next_seed.wrapping_add(1);
        crate::oracles::VstatOracle::new(self.dist.clone(), n, self.policy, seed)
    }
}

/// Ceiling that ignores floating-point noise just above an integer, so that
/// e.g. `4 * 0.5 / (1/6)^2` gives 72 rather than 73.
pub fn ceil_param(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

pub(crate) fn floor_log2(n: u64) -> u32 {
    63 - n.leading_zeros()
}

pub(crate) fn moments_of(dist: &FiniteDistribution, q: &Query) -> Result<Moments> {
    exact_moments(dist, q)
}

pub(crate) fn check_second_moment(m: &Moments, bound: f64) -> Result<()> {
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(invalid(format!(
            "second-moment bound B = {bound} must be positive"
        )));
    }
    if m.second_moment > bound * bound * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "D[q^2] = {} exceeds B^2 = {}",
            m.second_moment,
            bound * bound
        )));
    }
    Ok(())
}

pub(crate) fn check_nonnegative(q: &Query) -> Result<()> {
    if q.min_value() < 0.0 {
        return Err(invalid(format!(
            "query takes negative value {}",
            q.min_value()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_param_ignores_rounding_noise() {
        assert_eq!(ceil_param(4.0 * 0.5 / (1.0f64 / 6.0).powi(2)), 72);
        assert_eq!(ceil_param(72.5), 73);
        assert_eq!(ceil_param(1.0), 1);
        assert_eq!(ceil_param(262144.0), 262144);
    }

    #[test]
    fn floor_log2_values() {
        assert_eq!(floor_log2(1), 0);
        assert_eq!(floor_log2(16), 4);
        assert_eq!(floor_log2(17), 4);
        assert_eq!(floor_log2(1023), 9);
    }
}

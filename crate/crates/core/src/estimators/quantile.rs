//! Approximate quantiles by binary search with threshold queries.
//!
//! For candidates `z_0 < z_1 < ... < z_{k-1}` covering the range of the query,
//! the search keeps a bracket `lo < hi` where the VSTAT estimate of
//! `Pr[q >= z_lo]` was at least `p - delta/2` and that of `Pr[q >= z_hi]` was
//! below it (`hi = k` is a sentinel that always fails). `z_0` passes without
//! being asked: `Pr[q >= z_0] = 1` and VSTAT(4p/delta^2) answers it with at
//! least `1 - delta^2/(4p) >= p - delta/2`. The search stops when `hi = lo + 1`
//! after at most `ceil(log2 k)` queries.
//!
//! With oracle parameter at least `4p/delta^2`, the returned `a = z_lo`
//! satisfies `Pr[q >= a] >= p - delta` and `Pr[q > a] < p`.

use serde::{Deserialize, Serialize};

use crate::dist::{exact_tail, Query};
use crate::error::{invalid, Result};
use crate::oracles::{BudgetLedger, StatisticalOracle};

use super::ceil_param;

/// Values within this fraction of a grid step below a grid point are treated
/// as lying on it by [`grid_quantile`].
pub const GRID_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub lo: usize,
    pub hi: usize,
    pub probe: usize,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileResult {
    pub point: f64,
    /// Exact `Pr[q >= point]`.
    pub tail_at_point: f64,
    /// Exact probability above `point`: `Pr[q > point]`, or for
    /// [`grid_quantile`] `Pr[q >= point + zeta]`.
    pub strict_tail_at_point: f64,
    pub queries_used: u64,
    /// Sorted candidate set the search ran over.
    pub candidates: Vec<f64>,
    pub index: usize,
    pub threshold: f64,
    pub trace: Vec<SearchStep>,
}

fn check_quantile_params<O: StatisticalOracle>(oracle: &O, p: f64, delta: f64) -> Result<()> {
    if !(delta > 0.0 && 2.0 * delta <= p && p <= 1.0) {
        return Err(invalid(format!(
            "need 1 >= p >= 2 delta > 0, got p = {p}, delta = {delta}"
        )));
    }
    let needed = 4.0 * p / (delta * delta);
    if (oracle.parameter() as f64) < needed * (1.0 - 1e-9) {
        return Err(invalid(format!(
            "quantile search needs VSTAT({}), oracle has parameter {}",
            ceil_param(needed),
            oracle.parameter()
        )));
    }
    Ok(())
}

struct Search {
    index: usize,
    trace: Vec<SearchStep>,
    usage: BudgetLedger,
}

fn threshold_search<O: StatisticalOracle>(
    oracle: &mut O,
    q: &Query,
    candidates: &[f64],
    threshold: f64,
) -> Result<Search> {
    let before = oracle.ledger();
    let mut trace = Vec::new();
    let (mut lo, mut hi) = (0usize, candidates.len());
    while hi - lo > 1 {
        let probe = lo + (hi - lo) / 2;
        let cut = candidates[probe];
        let indicator = q.map(|v| if v >= cut { 1.0 } else { 0.0 })?;
        let estimate = oracle.answer(&indicator)?;
        trace.push(SearchStep {
            lo,
            hi,
            probe,
            estimate,
        });
        if estimate >= threshold {
            lo = probe;
        } else {
            hi = probe;
        }
    }
    Ok(Search {
        index: lo,
        trace,
        usage: oracle.ledger().since(&before),
    })
}

/// Finds `a` in the range of `q` with `Pr[q >= a] >= p - delta` and
/// `Pr[q > a] < p`, given an oracle with parameter at least `4p/delta^2`.
pub fn quantile_search<O: StatisticalOracle>(
    oracle: &mut O,
    q: &Query,
    p: f64,
    delta: f64,
) -> Result<QuantileResult> {
    check_quantile_params(oracle, p, delta)?;
    q.check_bound(oracle.distribution())?;
    let candidates = q.distinct_values();
    let threshold = p - delta / 2.0;
    let search = threshold_search(oracle, q, &candidates, threshold)?;
    let point = candidates[search.index];
    let dist = oracle.distribution();
    Ok(QuantileResult {
        point,
        tail_at_point: exact_tail(dist, q, point, false)?,
        strict_tail_at_point: exact_tail(dist, q, point, true)?,
        queries_used: search.usage.queries_asked,
        candidates,
        index: search.index,
        threshold,
        trace: search.trace,
    })
}

/// Finds `a` with `Pr[q >= a] >= 8/n` and `Pr[q > a] < 16/n` using an oracle
/// with parameter `n >= 32`.
pub fn tail_quantile<O: StatisticalOracle>(
    oracle: &mut O,
    q: &Query,
    n: u64,
) -> Result<QuantileResult> {
    if n < 32 {
        return Err(invalid(format!("tail_quantile needs n >= 32, got {n}")));
    }
    let nf = n as f64;
    let (p, delta) = (16.0 / nf, 8.0 / nf);
    assert_eq!(ceil_param(4.0 * p / (delta * delta)), n);
    quantile_search(oracle, q, p, delta)
}

/// Point `a` with `Pr[q >= a] >= 1/3` and `Pr[q <= a] > 1/2`: the
/// `p = 1/2, delta = 1/6` quantile, needing an oracle parameter of at least 72.
pub fn approximate_median<O: StatisticalOracle>(
    oracle: &mut O,
    q: &Query,
) -> Result<QuantileResult> {
    quantile_search(oracle, q, 0.5, 1.0 / 6.0)
}

/// Quantile search over the grid `{k zeta : -B <= k zeta <= B}` for a query
/// with values in `[-B, B]`. Returns a grid point `a` with
/// `Pr[q >= a] >= p - delta` and `Pr[q >= a + zeta] < p` using at most
/// `ceil(log2(2B/zeta)) + 1` queries.
pub fn grid_quantile<O: StatisticalOracle>(
    oracle: &mut O,
    q: &Query,
    bound: f64,
    zeta: f64,
    p: f64,
    delta: f64,
) -> Result<QuantileResult> {
    check_quantile_params(oracle, p, delta)?;
    q.check_bound(oracle.distribution())?;
    if !(zeta > 0.0) || !(bound > 0.0) || zeta >= 2.0 * bound {
        return Err(invalid(format!(
            "need 0 < zeta < 2B, got zeta = {zeta}, B = {bound}"
        )));
    }
    let slack = GRID_SNAP * zeta;
    if q.min_value() < -bound - slack || q.max_value() > bound + slack {
        return Err(invalid(format!(
            "query values must lie in [-{bound}, {bound}]"
        )));
    }

    let k_min = (-bound / zeta - GRID_SNAP).ceil() as i64;
    let k_max = (bound / zeta + GRID_SNAP).floor() as i64;
    let candidates: Vec<f64> = (k_min..=k_max).map(|k| k as f64 * zeta).collect();
    // snap every value down onto the grid so threshold tests compare grid indices
    let snapped = q.map(|v| {
        let k = ((v / zeta + GRID_SNAP).floor() as i64).clamp(k_min, k_max);
        k as f64 * zeta
    })?;

    let threshold = p - delta / 2.0;
    let search = threshold_search(oracle, &snapped, &candidates, threshold)?;
    let point = candidates[search.index];
    let above = candidates
        .get(search.index + 1)
        .copied()
        .unwrap_or(f64::INFINITY);
    let dist = oracle.distribution();
    Ok(QuantileResult {
        point,
        tail_at_point: exact_tail(dist, &snapped, point, false)?,
        strict_tail_at_point: exact_tail(dist, &snapped, above, false)?,
        queries_used: search.usage.queries_asked,
        candidates,
        index: search.index,
        threshold,
        trace: search.trace,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dist::{exact_lower_tail, FiniteDistribution};
    use crate::oracles::{Policy, VstatOracle};

    fn uniform(k: u32) -> Arc<FiniteDistribution> {
        let pts: Vec<f64> = (1..=k).map(f64::from).collect();
        Arc::new(FiniteDistribution::uniform(&pts).unwrap())
    }

    #[test]
    fn uniform_eight_median() {
        let d = uniform(8);
        let q = Query::identity(&d);
        let n = ceil_param(4.0 * 0.5 / 0.0625);
        let mut o = VstatOracle::new(d.clone(), n, Policy::HonestExact, 0).unwrap();
        let r = quantile_search(&mut o, &q, 0.5, 0.25).unwrap();
        assert_eq!(r.point, 6.0);
        assert_eq!(r.tail_at_point, 0.375);
        assert_eq!(r.strict_tail_at_point, 0.25);
        assert!(r.queries_used <= 4);
    }

    #[test]
    fn single_point_range() {
        let d = Arc::new(FiniteDistribution::point_mass(7.0).unwrap());
        let q = Query::identity(&d);
        let mut o = VstatOracle::new(d.clone(), 1000, Policy::AdversarialDown, 0).unwrap();
        let r = quantile_search(&mut o, &q, 0.3, 0.1).unwrap();
        assert_eq!((r.point, r.queries_used), (7.0, 0));
        let r = tail_quantile(&mut o, &q, 64).unwrap();
        assert_eq!(r.point, 7.0);
    }

    #[test]
    fn parameter_checks() {
        let d = uniform(4);
        let q = Query::identity(&d);
        let mut weak = VstatOracle::new(d.clone(), 10, Policy::HonestExact, 0).unwrap();
        assert!(quantile_search(&mut weak, &q, 0.5, 0.25).is_err());
        let mut o = VstatOracle::new(d.clone(), 10_000, Policy::HonestExact, 0).unwrap();
        assert!(quantile_search(&mut o, &q, 0.3, 0.2).is_err());
        assert!(quantile_search(&mut o, &q, 1.1, 0.2).is_err());
        assert!(tail_quantile(&mut o, &q, 31).is_err());
    }

    #[test]
    fn tail_quantile_on_uniform_hundred() {
        let d = uniform(100);
        let q = Query::identity(&d);
        for policy in Policy::ALL {
            let mut o = VstatOracle::new(d.clone(), 64, policy, 5).unwrap();
            let r = tail_quantile(&mut o, &q, 64).unwrap();
            assert!(r.tail_at_point >= 0.125, "{policy}");
            assert!(r.strict_tail_at_point < 0.25, "{policy}");
            assert!(r.queries_used <= 8);
        }
    }

    #[test]
    fn median_of_symmetric_two_point() {
        let d = Arc::new(FiniteDistribution::uniform(&[-1.0, 1.0]).unwrap());
        let q = Query::identity(&d);
        for policy in Policy::ALL {
            let mut o = VstatOracle::new(d.clone(), 72, policy, 1).unwrap();
            let r = approximate_median(&mut o, &q).unwrap();
            assert!(r.tail_at_point >= 1.0 / 3.0);
            assert!(exact_lower_tail(&d, &q, r.point).unwrap() >= 1.0 / 3.0);
        }
        let mut weak = VstatOracle::new(d.clone(), 6, Policy::HonestExact, 1).unwrap();
        assert!(approximate_median(&mut weak, &q).is_err());
    }

    #[test]
    fn grid_quantile_examples() {
        let d = Arc::new(FiniteDistribution::uniform(&[-1.0, 1.0]).unwrap());
        let q = Query::identity(&d);
        let mut o = VstatOracle::new(d.clone(), 32, Policy::HonestExact, 0).unwrap();
        let r = grid_quantile(&mut o, &q, 1.0, 0.5, 0.5, 0.25).unwrap();
        assert!(r.point == 0.5 || r.point == 1.0, "{}", r.point);
        assert!(r.tail_at_point >= 0.25 && r.strict_tail_at_point < 0.5);
        assert!(r.queries_used <= 3);

        let d = Arc::new(FiniteDistribution::point_mass(0.3).unwrap());
        let q = Query::identity(&d);
        let mut o = VstatOracle::new(d.clone(), 32, Policy::HonestExact, 0).unwrap();
        let r = grid_quantile(&mut o, &q, 1.0, 0.1, 0.5, 0.25).unwrap();
        assert!((r.point - 0.3).abs() < 1e-12, "{}", r.point);

        assert!(grid_quantile(&mut o, &q, 1.0, 2.0, 0.5, 0.25).is_err());
        assert!(grid_quantile(&mut o, &q, 0.2, 0.1, 0.5, 0.25).is_err());
    }

    #[test]
    fn bracket_is_sound() {
        let d = uniform(37);
        let q = Query::identity(&d);
        for policy in Policy::ALL {
            let mut o = VstatOracle::new(d.clone(), 400, policy, 2).unwrap();
            let r = quantile_search(&mut o, &q, 0.4, 0.1).unwrap();
            let mut est: Vec<Option<f64>> = vec![None; r.candidates.len() + 1];
            for step in &r.trace {
                if step.lo > 0 {
                    assert!(est[step.lo].unwrap() >= r.threshold);
                }
                if step.hi < r.candidates.len() {
                    assert!(est[step.hi].unwrap() < r.threshold);
                }
                est[step.probe] = Some(step.estimate);
            }
            let last = r.trace.last().unwrap();
            let (lo, hi) = if last.estimate >= r.threshold {
                (last.probe, last.hi)
            } else {
                (last.lo, last.probe)
            };
            assert_eq!(lo, r.index);
            assert_eq!(hi, lo + 1);
            assert!(r.queries_used <= (37f64).log2().ceil() as u64);
        }
    }
}

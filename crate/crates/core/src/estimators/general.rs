//! Adaptive mean estimation with error proportional to the standard deviation.
//!
//! [`nonneg_mean`] discretizes a nonnegative query, cuts it at an upper
//! quantile found with [`tail_quantile`], and estimates the remainder with
//! the dyadic decomposition. Its error scales with `sqrt(D[q^2])` and the
//! query count is logarithmic in the second-moment bound `B`.
//!
//! [`signed_mean`] shifts by an approximate median `a`. Then
//! `E[(q - a)^2] <= 4 Var(q)`, and the parts above and below `a` are each
//! estimated with [`nonneg_mean`], so the error scales with the standard
//! deviation.

use crate::dist::{discretize_round_down, Query};
use crate::error::{invalid, Result};
use crate::oracles::{BudgetLedger, StatisticalOracle};

use super::dyadic::dyadic_levels;
use super::{
    approximate_median, check_nonnegative, check_second_moment, floor_log2, moments_of,
    tail_quantile, EstimateReport, OracleFactory,
};

/// Oracle parameter used to find the approximate median (`4p/delta^2` with
/// `p = 1/2`, `delta = 1/6`).
pub const MEDIAN_ORACLE_PARAMETER: u64 = 72;

fn check_common(n: u64, zeta: f64) -> Result<()> {
    if n < 32 {
        return Err(invalid(format!("n = {n} must be at least 32")));
    }
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(invalid(format!("zeta = {zeta} must be positive")));
    }
    Ok(())
}

/// Nonnegative-mean core run against an existing `VSTAT(n)` oracle.
/// Returns `(estimate, usage, cut point)`.
fn nonneg_core<O: StatisticalOracle>(
    oracle: &mut O,
    q: &Query,
    n: u64,
    zeta: f64,
    bound: f64,
) -> Result<(f64, BudgetLedger, f64)> {
    if q.is_degenerate() {
        return Ok((q.declared_lo(), BudgetLedger::default(), q.declared_lo()));
    }
    let before = oracle.ledger();
    // Chebyshev: truncating at 2B^2/zeta moves the mean by at most zeta/2,
    // rounding down to multiples of zeta/2 by less than zeta/2.
    let cap = 2.0 * bound * bound / zeta;
    let psi = discretize_round_down(q, zeta / 2.0, cap)?;
    let cut = tail_quantile(oracle, &psi, n)?.point;
    let psi_cut = psi.map(|v| v.min(cut))?.declare(0.0, cut)?;
    let (value, _) = dyadic_levels(oracle, &psi_cut, floor_log2(n))?;
    Ok((value, oracle.ledger().since(&before), cut))
}

/// Estimates the mean of a nonnegative query with `D[q^2] <= B^2` within
/// `2 s log2(8n)/sqrt(n) + zeta`, `s = sqrt(D[q^2])`, using about
/// `log2(4 B^2 n / zeta^2)` queries to `VSTAT(n)`.
pub fn nonneg_mean<F: OracleFactory>(
    factory: &mut F,
    q: &Query,
    n: u64,
    zeta: f64,
    bound: f64,
) -> Result<EstimateReport> {
    check_common(n, zeta)?;
    let m = moments_of(factory.distribution(), q)?;
    check_nonnegative(q)?;
    check_second_moment(&m, bound)?;
    let nf = n as f64;
    let theoretical = 2.0 * m.rms() * (8.0 * nf).log2() / nf.sqrt() + zeta;

    let mut oracle = factory.build(n)?;
    let (value, usage, cut) = nonneg_core(&mut oracle, q, n, zeta, bound)?;
    Ok(EstimateReport::new(
        value,
        m.mean,
        theoretical,
        usage,
        n,
        format!("cut={cut}"),
    ))
}

/// Estimates the mean of a real query with `D[q^2] <= B^2` within
/// `8 sigma log2(8n)/sqrt(n) + zeta`.
///
/// The approximate median `a` is searched over the exact range of `q` with
/// `VSTAT(72)`; both halves `max(q - a, 0)` and `max(a - q, 0)` go through
/// the nonnegative estimator with `VSTAT(n)`, precision `zeta/2` and
/// second-moment bound `B + |a|`.
pub fn signed_mean<F: OracleFactory>(
    factory: &mut F,
    q: &Query,
    n: u64,
    zeta: f64,
    bound: f64,
) -> Result<EstimateReport> {
    check_common(n, zeta)?;
    let m = moments_of(factory.distribution(), q)?;
    check_second_moment(&m, bound)?;
    let nf = n as f64;
    let theoretical = 8.0 * m.std_dev * (8.0 * nf).log2() / nf.sqrt() + zeta;

    if q.is_degenerate() {
        return Ok(EstimateReport::new(
            q.declared_lo(),
            m.mean,
            theoretical,
            BudgetLedger::default(),
            n,
            "degenerate declared range".into(),
        ));
    }

    let mut usage = BudgetLedger::default();
    let mut median_oracle = factory.build(MEDIAN_ORACLE_PARAMETER)?;
    let median = approximate_median(&mut median_oracle, q)?.point;
    usage.add(&median_oracle.ledger());

    let above = q.map(|v| (v - median).max(0.0))?;
    let below = q.map(|v| (median - v).max(0.0))?;
    let half_bound = bound + median.abs();
    let mut oracle = factory.build(n)?;
    let (up, _, _) = nonneg_core(&mut oracle, &above, n, zeta / 2.0, half_bound)?;
    let (down, _, _) = nonneg_core(&mut oracle, &below, n, zeta / 2.0, half_bound)?;
    usage.add(&oracle.ledger());

    Ok(EstimateReport::new(
        median + up - down,
        m.mean,
        theoretical,
        usage,
        n,
        format!("median={median}"),
    ))
}

/// Smallest `n >= 32` with `8 log2(8n)/sqrt(n) <= eps`.
pub fn relative_accuracy_parameter(eps: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps = {eps} must lie in (0, 1)")));
    }
    let ok = |n: u64| 8.0 * (8.0 * n as f64).log2() / (n as f64).sqrt() <= eps;
    if ok(32) {
        return Ok(32);
    }
    let mut hi = 64u64;
    while !ok(hi) {
        hi *= 2;
    }
    // !ok(lo) and ok(hi); the ratio is decreasing in n
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Estimates the mean within `eps * sigma + zeta` by running [`signed_mean`]
/// with the smallest `n` for which `8 log2(8n)/sqrt(n) <= eps`.
pub fn relative_accuracy_mean<F: OracleFactory>(
    factory: &mut F,
    q: &Query,
    eps: f64,
    zeta: f64,
    bound: f64,
) -> Result<EstimateReport> {
    if !(bound > zeta) {
        return Err(invalid(format!(
            "need B > zeta, got B = {bound}, zeta = {zeta}"
        )));
    }
    let n = relative_accuracy_parameter(eps)?;
    let mut report = signed_mean(factory, q, n, zeta, bound)?;
    let sigma = moments_of(factory.distribution(), q)?.std_dev;
    report.theoretical_bound = eps * sigma + zeta;
    Ok(report)
}

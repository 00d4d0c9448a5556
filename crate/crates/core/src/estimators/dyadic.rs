//! Non-adaptive estimation by dyadic decomposition of the range.
//!
//! A nonnegative query scaled to `[0, 1]` is split into the pieces taking
//! values in `(2^-i, 2^-i+1]`. Each piece, rescaled by `2^(i-1)`, again has
//! range `[0, 1]` and its mean is at most `4^i * D[q^2]`, so VSTAT answers it
//! with error proportional to `sqrt(D[q^2])` rather than to the range. The
//! pieces below `2^-t` are dropped.

use crate::dist::{clamp, Query};
use crate::error::{invalid, Result};
use crate::oracles::{BudgetLedger, StatisticalOracle};

use super::{
    ceil_param, check_nonnegative, check_second_moment, floor_log2, moments_of, EstimateReport,
    OracleFactory,
};

/// Runs the first `levels` dyadic pieces of `q` (scaled by its declared upper
/// end) against `oracle` and returns the recombined estimate.
pub(crate) fn dyadic_levels<O: StatisticalOracle>(
    oracle: &mut O,
    q: &Query,
    levels: u32,
) -> Result<(f64, BudgetLedger)> {
    q.check_bound(oracle.distribution())?;
    check_nonnegative(q)?;
    let range = q.declared_hi();
    let before = oracle.ledger();
    if range == 0.0 {
        return Ok((0.0, BudgetLedger::default()));
    }
    let scaled: Vec<f64> = q.values().iter().map(|&v| (v / range).min(1.0)).collect();

    let mut acc = 0.0;
    for i in 1..=levels {
        let lower = 0.5f64.powi(i as i32);
        let upper = 2.0 * lower;
        let stretch = 0.5 / lower;
        let piece = scaled
            .iter()
            .map(|&u| {
                if u > lower && u <= upper {
                    (stretch * u).min(1.0)
                } else {
                    0.0
                }
            })
            .collect();
        let piece = Query::with_range(piece, 0.0, 1.0)?;
        acc += upper * oracle.answer(&piece)?;
    }
    Ok((range * acc, oracle.ledger().since(&before)))
}

/// Estimates the mean of a nonnegative query with declared range `[0, R]`
/// using `floor(log2 n)` non-adaptive queries to `VSTAT(n)`.
///
/// Guarantee: `|D[q] - v| <= 4R/n + 2 s log2(n) / sqrt(n)` with `s = sqrt(D[q^2])`.
pub fn dyadic_mean<O: StatisticalOracle>(oracle: &mut O, q: &Query) -> Result<EstimateReport> {
    let n = oracle.parameter();
    if n < 2 {
        return Err(invalid("dyadic_mean needs an oracle parameter n >= 2"));
    }
    let m = moments_of(oracle.distribution(), q)?;
    check_nonnegative(q)?;
    let (value, usage) = dyadic_levels(oracle, q, floor_log2(n))?;
    let range = q.declared_hi();
    let nf = n as f64;
    let bound = 4.0 * range / nf + 2.0 * m.rms() * nf.log2() / nf.sqrt();
    Ok(EstimateReport::new(
        value,
        m.mean,
        bound,
        usage,
        n,
        format!("levels={}", floor_log2(n)),
    ))
}

/// VSTAT parameter used by [`known_bound_mean`]:
/// `ceil((8 B log2(B/eps) / eps)^2)`.
pub fn known_bound_parameter(bound: f64, eps: f64) -> u64 {
    let l = (bound / eps).log2();
    ceil_param((8.0 * bound * l / eps).powi(2))
}

/// Estimates the mean of a nonnegative query within `eps` given `D[q^2] <= B^2`
/// and `eps <= B/16`, using at most `3 log2(B/eps)` non-adaptive queries.
///
/// The query is scaled by `1/B`, truncated at `4B/eps` and decomposed
/// dyadically. Only the top `floor(3 log2(B/eps))` levels are asked; the
/// dropped bottom pieces contribute less than `eps/2` because the truncation
/// level shrinks as `(eps/B)^3` relative to the range.
pub fn known_bound_mean<F: OracleFactory>(
    factory: &mut F,
    q: &Query,
    bound: f64,
    eps: f64,
) -> Result<EstimateReport> {
    if !(eps > 0.0) {
        return Err(invalid(format!("eps = {eps} must be positive")));
    }
    if !(bound > 0.0) || !bound.is_finite() {
        return Err(invalid(format!("B = {bound} must be positive")));
    }
    if eps > bound / 16.0 {
        return Err(invalid(format!(
            "eps = {eps} exceeds B/16 = {}",
            bound / 16.0
        )));
    }
    let dist = factory.distribution();
    let m = moments_of(dist, q)?;
    check_nonnegative(q)?;
    check_second_moment(&m, bound)?;

    let rel_eps = eps / bound;
    let log_ratio = (1.0 / rel_eps).log2();
    let cut = 4.0 / rel_eps;
    let n = known_bound_parameter(bound, eps);
    let levels = floor_log2(n).min((3.0 * log_ratio + 1e-9).floor() as u32);

    let truncated = q
        .map(|v| clamp(v / bound, cut).expect("cut > 0"))?
        .declare(0.0, cut)?;
    let mut oracle = factory.build(n)?;
    let (scaled_value, usage) = dyadic_levels(&mut oracle, &truncated, levels)?;

    Ok(EstimateReport::new(
        bound * scaled_value,
        m.mean,
        eps,
        usage,
        n,
        format!("levels={levels} cut={cut}"),
    ))
}

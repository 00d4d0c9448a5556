use crate::dist::{exact_mean, Query};
use crate::error::Result;
use crate::oracles::{BudgetLedger, StatisticalOracle};

use super::EstimateReport;

/// Rescales the declared range of `q` to `[0, 1]`, asks one query and maps
/// the answer back. Its error scales with the declared range length.
pub fn naive_mean<O: StatisticalOracle>(oracle: &mut O, q: &Query) -> Result<EstimateReport> {
    let dist = oracle.distribution();
    q.check_bound(dist)?;
    let true_value = exact_mean(dist, q)?;
    let (lo, hi) = (q.declared_lo(), q.declared_hi());
    let n = oracle.parameter();
    if q.is_degenerate() {
        return Ok(EstimateReport::new(
            lo,
            true_value,
            0.0,
            BudgetLedger::default(),
            n,
            "degenerate declared range".into(),
        ));
    }

    let range = hi - lo;
    let scaled = q.map(|v| ((v - lo) / range).clamp(0.0, 1.0))?;
    let p = exact_mean(dist, &scaled)?.clamp(0.0, 1.0);
    let before = oracle.ledger();
    let answer = oracle.answer(&scaled)?;
    let usage = oracle.ledger().since(&before);

    Ok(EstimateReport::new(
        lo + range * answer,
        true_value,
        range * oracle.tolerance(p),
        usage,
        n,
        format!("range={range}"),
    ))
}

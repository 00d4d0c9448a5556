use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{exact_moments, FiniteDistribution, Query};
use crate::error::{invalid, Error, Result};

use super::{relative_accuracy_mean, EstimateReport, OracleFactory};

/// Constant `C` in the total query budget `C * d * log2(d B / eps)` of
/// [`vector_mean`].
pub const VECTOR_QUERY_CONSTANT: f64 = 16.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorEstimate {
    pub estimate: Vec<f64>,
    pub truth: Vec<f64>,
    pub l2_error: f64,
    pub theoretical_bound: f64,
    pub queries_used: u64,
    pub bits_used: u64,
    pub oracle_parameter: u64,
    pub coordinates: Vec<EstimateReport>,
}

impl VectorEstimate {
    pub fn query_budget(&self, bound: f64) -> f64 {
        let d = self.estimate.len() as f64;
        VECTOR_QUERY_CONSTANT * d * (d * bound / self.theoretical_bound).log2()
    }
}

/// Estimates the mean vector of a product distribution within `eps` in the
/// l2 norm, given `sum_i E[x_i^2] <= B^2` and `sum_i Var(x_i) <= 1`.
///
/// Each coordinate runs [`relative_accuracy_mean`] with relative accuracy
/// `eps/2` and additive precision `eps / (2 sqrt(d))`, so the per-coordinate
/// errors `e_i <= (eps/2) sigma_i + eps/(2 sqrt(d))` sum in l2 to at most `eps`.
/// `make_factory(i, dist_i)` supplies the oracles for coordinate `i`.
pub fn vector_mean<F, M>(
    mut make_factory: M,
    coordinates: &[Arc<FiniteDistribution>],
    eps: f64,
    bound: f64,
) -> Result<VectorEstimate>
where
    F: OracleFactory,
    M: FnMut(usize, &Arc<FiniteDistribution>) -> Result<F>,
{
    if coordinates.is_empty() {
        return Err(invalid("vector_mean needs at least one coordinate"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps = {eps} must lie in (0, 1)")));
    }
    if !(bound > eps) {
        return Err(invalid(format!("need B > eps, got B = {bound}")));
    }
    let mut total_var = 0.0;
    let mut total_second = 0.0;
    for d in coordinates {
        let m = exact_moments(d, &Query::identity(d))?;
        total_var += m.variance;
        total_second += m.second_moment;
    }
    if total_var > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!(
            "total variance {total_var} exceeds 1"
        )));
    }
    if total_second > bound * bound * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "E[|x|^2] = {total_second} exceeds B^2 = {}",
            bound * bound
        )));
    }

    let dim = coordinates.len() as f64;
    let zeta = eps / (2.0 * dim.sqrt());
    let mut reports = Vec::with_capacity(coordinates.len());
    for (i, d) in coordinates.iter().enumerate() {
        let mut factory = make_factory(i, d)?;
        let q = Query::identity(d);
        reports.push(relative_accuracy_mean(
            &mut factory,
            &q,
            eps / 2.0,
            zeta,
            bound,
        )?);
    }

    let estimate: Vec<f64> = reports.iter().map(|r| r.value).collect();
    let truth: Vec<f64> = reports.iter().map(|r| r.true_value).collect();
    let l2_error = estimate
        .iter()
        .zip(&truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(VectorEstimate {
        l2_error,
        theoretical_bound: eps,
        queries_used: reports.iter().map(|r| r.queries_used).sum(),
        bits_used: reports.iter().map(|r| r.bits_used).sum(),
        oracle_parameter: reports
            .iter()
            .map(|r| r.oracle_parameter)
            .max()
            .unwrap_or(0),
        estimate,
        truth,
        coordinates: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::VstatFactory;
    use crate::oracles::Policy;

    #[test]
    fn point_mass_vector() {
        let coords: Vec<_> = (0..32)
            .map(|i| Arc::new(FiniteDistribution::point_mass(0.1 * i as f64 - 1.0).unwrap()))
            .collect();
        let b = coords
            .iter()
            .map(|d| d.support()[0].powi(2))
            .sum::<f64>()
            .sqrt()
            + 1.0;
        let r = vector_mean(
            |i, d| {
                Ok(VstatFactory::new(
                    d.clone(),
                    Policy::AdversarialUp,
                    i as u64,
                ))
            },
            &coords,
            0.25,
            b,
        )
        .unwrap();
        assert!(r.l2_error <= 0.25);
        assert_eq!(r.estimate.len(), 32);
    }

    #[test]
    fn zero_vector() {
        let point = Arc::new(FiniteDistribution::point_mass(0.0).unwrap());
        let coords: Vec<_> = (0..4).map(|_| point.clone()).collect();
        let r = vector_mean(
            |_, d| Ok(VstatFactory::new(d.clone(), Policy::HonestExact, 0)),
            &coords,
            0.5,
            1.0,
        )
        .unwrap();
        assert!(r.estimate.iter().map(|x| x * x).sum::<f64>().sqrt() <= 0.5);
    }

    #[test]
    fn preconditions() {
        let wide = Arc::new(FiniteDistribution::uniform(&[-2.0, 2.0]).unwrap());
        let mk = |_: usize, d: &Arc<FiniteDistribution>| {
            Ok(VstatFactory::new(d.clone(), Policy::HonestExact, 0))
        };
        assert!(matches!(
            vector_mean(mk, std::slice::from_ref(&wide), 0.25, 10.0),
            Err(Error::Precondition(_))
        ));
        let unit = Arc::new(FiniteDistribution::uniform(&[-0.5, 0.5]).unwrap());
        assert!(vector_mean(mk, std::slice::from_ref(&unit), 1.5, 10.0).is_err());
        assert!(vector_mean(mk, std::slice::from_ref(&unit), 0.25, 0.2).is_err());
        assert!(matches!(
            vector_mean(mk, &[unit], 0.25, 0.3),
            Err(Error::Precondition(_))
        ));
    }
}

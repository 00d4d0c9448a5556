//! Distribution generators.
//!
//! Continuous families are discretized onto a grid by midpoint mass
//! assignment: the grid point `x` receives the probability of
//! `(x - step/2, x + step/2]`. The first point also receives everything below
//! it and the last point (the cap) everything above it, so no mass is lost.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, LogNormal, Normal, Pareto};

use crate::dist::FiniteDistribution;
use crate::error::{invalid, Error, Result};

/// Largest number of grid points a discretized family may have.
pub const MAX_GRID_POINTS: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistributionSpec {
    /// Equal weights on `lo, lo + step, ...` up to `hi`.
    UniformGrid {
        lo: f64,
        hi: f64,
        step: f64,
    },
    /// Mass `p` on `hi` and `1 - p` on `lo`.
    TwoPoint {
        lo: f64,
        hi: f64,
        p: f64,
    },
    PointMass {
        value: f64,
    },
    /// Grid centered at `mean`, truncated at `mean +- cap_sigmas * std_dev`.
    DiscretizedGaussian {
        mean: f64,
        std_dev: f64,
        step: f64,
        #[serde(default = "default_cap_sigmas")]
        cap_sigmas: f64,
    },
    /// Grid `0, step, ...` truncated at `cap`.
    DiscretizedLognormal {
        mu: f64,
        sigma: f64,
        step: f64,
        cap: f64,
    },
    /// Grid `xmin, xmin + step, ...` truncated at `cap`. Needs `alpha > 2`.
    DiscretizedPareto {
        alpha: f64,
        xmin: f64,
        step: f64,
        cap: f64,
    },
    /// `value weight` lines, see [`FiniteDistribution::parse`].
    EmpiricalFile {
        path: PathBuf,
    },
    /// `d` independent discretized Gaussians with common mean and variance
    /// `total_variance / d` each.
    GaussianProduct {
        d: usize,
        mean: f64,
        total_variance: f64,
        step: f64,
        #[serde(default = "default_cap_sigmas")]
        cap_sigmas: f64,
    },
    /// Independent coordinates with the given marginals.
    Product {
        coordinates: Vec<DistributionSpec>,
    },
}

fn default_cap_sigmas() -> f64 {
    6.0
}

impl DistributionSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            DistributionSpec::UniformGrid { .. } => "uniform-grid",
            DistributionSpec::TwoPoint { .. } => "two-point",
            DistributionSpec::PointMass { .. } => "point-mass",
            DistributionSpec::DiscretizedGaussian { .. } => "discretized-gaussian",
            DistributionSpec::DiscretizedLognormal { .. } => "discretized-lognormal",
            DistributionSpec::DiscretizedPareto { .. } => "discretized-pareto",
            DistributionSpec::EmpiricalFile { .. } => "empirical-file",
            DistributionSpec::GaussianProduct { .. } => "gaussian-product",
            DistributionSpec::Product { .. } => "product",
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(
            self,
            DistributionSpec::GaussianProduct { .. } | DistributionSpec::Product { .. }
        )
    }

    /// Mean and second moment of the continuous family before discretization.
    pub fn analytic_moments(&self) -> Option<(f64, f64)> {
        match *self {
            DistributionSpec::DiscretizedGaussian { mean, std_dev, .. } => {
                Some((mean, mean * mean + std_dev * std_dev))
            }
            DistributionSpec::DiscretizedLognormal { mu, sigma, .. } => {
                let s2 = sigma * sigma;
                Some(((mu + s2 / 2.0).exp(), (2.0 * mu + 2.0 * s2).exp()))
            }
            DistributionSpec::DiscretizedPareto { alpha, xmin, .. } => Some((
                alpha * xmin / (alpha - 1.0),
                alpha * xmin * xmin / (alpha - 2.0),
            )),
            _ => None,
        }
    }
}

/// Builds the distribution described by a scalar `spec`.
pub fn generate_distribution(spec: &DistributionSpec) -> Result<FiniteDistribution> {
    match spec {
        DistributionSpec::UniformGrid { lo, hi, step } => uniform_grid(*lo, *hi, *step),
        DistributionSpec::TwoPoint { lo, hi, p } => {
            if !(0.0..=1.0).contains(p) {
                return Err(invalid(format!("two-point p = {p} outside [0, 1]")));
            }
            if !(lo < hi) {
                return Err(invalid(format!("two-point needs lo < hi, got {lo}, {hi}")));
            }
            FiniteDistribution::from_weighted(
                [(*lo, 1.0 - p), (*hi, *p)]
                    .into_iter()
                    .filter(|&(_, w)| w > 0.0),
            )
        }
        DistributionSpec::PointMass { value } => FiniteDistribution::point_mass(*value),
        DistributionSpec::DiscretizedGaussian {
            mean,
            std_dev,
            step,
            cap_sigmas,
        } => discretized_gaussian(*mean, *std_dev, *step, *cap_sigmas),
        DistributionSpec::DiscretizedLognormal {
            mu,
            sigma,
            step,
            cap,
        } => {
            check_grid(*step, *cap)?;
            let law =
                LogNormal::new(*mu, *sigma).map_err(|e| invalid(format!("lognormal: {e}")))?;
            discretize(&law, 0.0, *cap, *step, law_median_lognormal(*mu))
        }
        DistributionSpec::DiscretizedPareto {
            alpha,
            xmin,
            step,
            cap,
        } => {
            if !(*alpha > 2.0) {
                return Err(invalid(format!(
                    "pareto shape alpha = {alpha} must exceed 2 for a finite second moment"
                )));
            }
            check_grid(*step, *cap)?;
            if !(*xmin > 0.0 && xmin < cap) {
                return Err(invalid(format!(
                    "pareto needs 0 < xmin < cap, got xmin = {xmin}"
                )));
            }
            let law = Pareto::new(*xmin, *alpha).map_err(|e| invalid(format!("pareto: {e}")))?;
            discretize(&law, *xmin, *cap, *step, xmin * 2f64.powf(1.0 / alpha))
        }
        DistributionSpec::EmpiricalFile { path } => FiniteDistribution::from_file(path),
        DistributionSpec::GaussianProduct { .. } | DistributionSpec::Product { .. } => {
            Err(Error::Config(format!(
                "{} describes a vector; use generate_coordinates",
                spec.kind()
            )))
        }
    }
}

/// Coordinate marginals of a product spec. A scalar spec gives one coordinate.
pub fn generate_coordinates(spec: &DistributionSpec) -> Result<Vec<FiniteDistribution>> {
    match spec {
        DistributionSpec::GaussianProduct {
            d,
            mean,
            total_variance,
            step,
            cap_sigmas,
        } => {
            if *d == 0 {
                return Err(invalid("gaussian-product needs d >= 1"));
            }
            if !(*total_variance > 0.0) {
                return Err(invalid("gaussian-product needs a positive total variance"));
            }
            let sd = (total_variance / *d as f64).sqrt();
            let coord = discretized_gaussian(*mean, sd, *step, *cap_sigmas)?;
            Ok(vec![coord; *d])
        }
        DistributionSpec::Product { coordinates } => {
            if coordinates.is_empty() {
                return Err(invalid("product needs at least one coordinate"));
            }
            coordinates.iter().map(generate_distribution).collect()
        }
        _ => Ok(vec![generate_distribution(spec)?]),
    }
}

fn check_grid(step: f64, cap: f64) -> Result<()> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(invalid(format!("grid step {step} must be positive")));
    }
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(invalid(format!("cap {cap} must be positive")));
    }
    Ok(())
}

fn grid_len(lo: f64, hi: f64, step: f64) -> Result<usize> {
    let k = ((hi - lo) / step + 1e-9).floor();
    if !(k >= 0.0) || k as usize + 1 > MAX_GRID_POINTS {
        return Err(invalid(format!(
            "grid over [{lo}, {hi}] with step {step} exceeds {MAX_GRID_POINTS} points"
        )));
    }
    Ok(k as usize + 1)
}

fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<FiniteDistribution> {
    if !(step > 0.0) || !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!(
            "uniform-grid needs lo <= hi and step > 0, got {lo}, {hi}, {step}"
        )));
    }
    let k = grid_len(lo, hi, step)?;
    let points: Vec<f64> = (0..k).map(|i| lo + i as f64 * step).collect();
    FiniteDistribution::uniform(&points)
}

fn discretized_gaussian(
    mean: f64,
    sd: f64,
    step: f64,
    cap_sigmas: f64,
) -> Result<FiniteDistribution> {
    if !(cap_sigmas > 0.0) {
        return Err(invalid(format!(
            "cap_sigmas = {cap_sigmas} must be positive"
        )));
    }
    check_grid(step, sd * cap_sigmas)?;
    let law = Normal::new(mean, sd).map_err(|e| invalid(format!("gaussian: {e}")))?;
    let half = (cap_sigmas * sd / step + 1e-9).floor() * step;
    discretize(&law, mean - half, mean + half, step, mean)
}

fn law_median_lognormal(mu: f64) -> f64 {
    mu.exp()
}

/// Midpoint mass assignment on `lo, lo + step, ...` up to the last grid point
/// not above `cap`. Probabilities above `median` are computed from the
/// survival function to avoid cancellation in the upper tail.
fn discretize<L: ContinuousCDF<f64, f64>>(
    law: &L,
    lo: f64,
    cap: f64,
    step: f64,
    median: f64,
) -> Result<FiniteDistribution> {
    let k = grid_len(lo, cap, step)?;
    let mass = |a: f64, b: f64| -> f64 {
        if a >= median {
            law.sf(a) - law.sf(b)
        } else {
            law.cdf(b) - law.cdf(a)
        }
    };
    let point = |i: usize| lo + i as f64 * step;
    let mut pairs = Vec::with_capacity(k);
    for i in 0..k {
        let x = point(i);
        let w = if k == 1 {
            1.0
        } else if i == 0 {
            law.cdf(x + step / 2.0)
        } else if i + 1 == k {
            law.sf(x - step / 2.0)
        } else {
            mass(x - step / 2.0, x + step / 2.0)
        };
        if w > 0.0 {
            pairs.push((x, w));
        }
    }
    FiniteDistribution::from_weighted(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{exact_moments, Query};

    fn moments(d: &FiniteDistribution) -> crate::dist::Moments {
        exact_moments(d, &Query::identity(d)).unwrap()
    }

    #[test]
    fn simple_kinds() {
        let d = generate_distribution(&DistributionSpec::TwoPoint {
            lo: 0.0,
            hi: 1.0,
            p: 0.5,
        })
        .unwrap();
        assert_eq!(d.support(), &[0.0, 1.0]);
        assert_eq!(d.weights(), &[0.5, 0.5]);
        let d = generate_distribution(&DistributionSpec::PointMass { value: 7.0 }).unwrap();
        assert_eq!((d.support(), d.weights()), (&[7.0][..], &[1.0][..]));
        let d = generate_distribution(&DistributionSpec::UniformGrid {
            lo: 1.0,
            hi: 2.0,
            step: 0.25,
        })
        .unwrap();
        assert_eq!(d.len(), 5);
    }

    #[test]
    fn pareto_mean_close_to_continuous() {
        let spec = DistributionSpec::DiscretizedPareto {
            alpha: 2.5,
            xmin: 1.0,
            step: 0.01,
            cap: 1e4,
        };
        let m = moments(&generate_distribution(&spec).unwrap());
        let (mean, _) = spec.analytic_moments().unwrap();
        assert!((mean - 5.0 / 3.0).abs() < 1e-12);
        assert!((m.mean - mean).abs() <= 0.01 * mean, "{}", m.mean);
    }

    #[test]
    fn pareto_with_infinite_variance_rejected() {
        for alpha in [2.0, 1.5] {
            let spec = DistributionSpec::DiscretizedPareto {
                alpha,
                xmin: 1.0,
                step: 0.1,
                cap: 100.0,
            };
            assert!(matches!(
                generate_distribution(&spec),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn second_moments_within_analytic_plus_slack() {
        let specs = [
            DistributionSpec::DiscretizedGaussian {
                mean: 1.0,
                std_dev: 2.0,
                step: 0.05,
                cap_sigmas: 6.0,
            },
            DistributionSpec::DiscretizedLognormal {
                mu: 0.0,
                sigma: 1.0,
                step: 0.01,
                cap: 1e3,
            },
            DistributionSpec::DiscretizedPareto {
                alpha: 3.0,
                xmin: 2.0,
                step: 0.01,
                cap: 1e3,
            },
        ];
        for spec in specs {
            let d = generate_distribution(&spec).unwrap();
            let m = moments(&d);
            let (mean, second) = spec.analytic_moments().unwrap();
            let step = match spec {
                DistributionSpec::DiscretizedGaussian { step, .. }
                | DistributionSpec::DiscretizedLognormal { step, .. }
                | DistributionSpec::DiscretizedPareto { step, .. } => step,
                _ => unreachable!(),
            };
            // Moving mass by at most step/2 changes sqrt(E[x^2]) by at most step/2.
            let slack = second.sqrt() * step + step * step;
            assert!(
                m.second_moment <= second + slack,
                "{}: {} vs {second}",
                spec.kind(),
                m.second_moment
            );
            assert!(
                (m.mean - mean).abs() <= 0.02 * mean.abs().max(1.0),
                "{}",
                spec.kind()
            );
            assert!(m.second_moment.is_finite());
        }
    }

    #[test]
    fn gaussian_is_symmetric_and_product_splits_variance() {
        let spec = DistributionSpec::GaussianProduct {
            d: 4,
            mean: 0.0,
            total_variance: 1.0,
            step: 0.01,
            cap_sigmas: 6.0,
        };
        let coords = generate_coordinates(&spec).unwrap();
        assert_eq!(coords.len(), 4);
        let total: f64 = coords.iter().map(|c| moments(c).variance).sum();
        assert!((total - 1.0).abs() < 0.01, "{total}");
        assert!(moments(&coords[0]).mean.abs() < 1e-12);
        assert!(generate_distribution(&spec).is_err());
    }

    #[test]
    fn empirical_file_and_spec_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.txt");
        std::fs::write(&path, "# x w\n1 1\n3 3\n").unwrap();
        let spec: DistributionSpec =
            serde_json::from_str(&format!(r#"{{"kind":"empirical-file","path":{:?}}}"#, path))
                .unwrap();
        let d = generate_distribution(&spec).unwrap();
        assert_eq!(d.weights(), &[0.25, 0.75]);
        let missing = DistributionSpec::EmpiricalFile {
            path: dir.path().join("nope"),
        };
        assert!(matches!(generate_distribution(&missing), Err(Error::Io(_))));
    }
}

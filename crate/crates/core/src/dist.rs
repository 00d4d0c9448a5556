//! Exact finite-support probability machinery.
//!
//! A [`FiniteDistribution`] is a list of support points with probability
//! weights. A [`Query`] attaches one real value to every support point. All
//! expectations, tails and quantiles are computed exactly by enumeration, so
//! these routines serve as ground truth for every oracle and estimator in the
//! crate.

use std::path::Path;

use crate::error::{invalid, Error, Result};

/// Absolute tolerance on the total weight accepted by [`FiniteDistribution::new`].
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in iter {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A probability distribution over finitely many real points.
///
/// Support points are strictly increasing; duplicates passed to a constructor
/// are merged and their weights summed. Weights are nonnegative and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl FiniteDistribution {
    /// Builds a distribution whose weights already sum to one (within
    /// [`WEIGHT_SUM_TOLERANCE`]). Points need not be sorted.
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(invalid(format!(
                "{} support points but {} weights",
                support.len(),
                weights.len()
            )));
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(invalid(format!("weights sum to {total}, expected 1")));
        }
        Self::from_weighted(support.into_iter().zip(weights))
    }

    /// Builds a distribution from `(point, weight)` pairs, renormalizing the
    /// weights to sum to one.
    pub fn from_weighted<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return Err(invalid("distribution support is empty"));
        }
        for &(x, w) in &pairs {
            if !x.is_finite() {
                return Err(invalid(format!("support point {x} is not finite")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(invalid(format!(
                    "weight {w} at point {x} is not a nonnegative number"
                )));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut support: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            // -0.0 and 0.0 are the same point
            match support.last() {
                Some(&last) if last == x => *weights.last_mut().unwrap() += w,
                _ => {
                    support.push(x);
                    weights.push(w);
                }
            }
        }

        let total = compensated_sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(invalid("weights sum to zero"));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { support, weights })
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        Self::from_weighted([(x, 1.0)])
    }

    /// Uniform distribution over the given points (duplicates accumulate mass).
    pub fn uniform(points: &[f64]) -> Result<Self> {
        Self::from_weighted(points.iter().map(|&x| (x, 1.0)))
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support
            .iter()
            .copied()
            .zip(self.weights.iter().copied())
    }

    /// Parses the plain-text format: one `value weight` pair per line, `#`
    /// starts a comment. Weights are renormalized.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let parse = |field: Option<&str>, what: &str| -> Result<f64> {
                let field = field.ok_or_else(|| Error::Parse {
                    line: idx + 1,
                    msg: format!("missing {what}"),
                })?;
                field.parse::<f64>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    msg: format!("bad {what} {field:?}: {e}"),
                })
            };
            let value = parse(fields.next(), "value")?;
            let weight = parse(fields.next(), "weight")?;
            if fields.next().is_some() {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: "expected exactly two fields".into(),
                });
            }
            pairs.push((value, weight));
        }
        Self::from_weighted(pairs)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Serializes in the format read by [`FiniteDistribution::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (x, w) in self.iter() {
            out.push_str(&format!("{x:e} {w:e}\n"));
        }
        out
    }
}

/// A real-valued function on the support of a distribution, stored as one
/// value per support point together with a declared range.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    values: Vec<f64>,
    declared_lo: f64,
    declared_hi: f64,
}

impl Query {
    /// Query with the tightest declared range `[min, max]`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("query has no values"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("query value {v} is not finite")));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            values,
            declared_lo: lo,
            declared_hi: hi,
        })
    }

    /// Query with an explicitly declared range, which must contain every value.
    pub fn with_range(values: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        Self::new(values)?.declare(lo, hi)
    }

    pub fn identity(dist: &FiniteDistribution) -> Self {
        Self::new(dist.support().to_vec()).expect("support is non-empty and finite")
    }

    pub fn constant(dist: &FiniteDistribution, c: f64) -> Result<Self> {
        Self::new(vec![c; dist.len()])
    }

    pub fn from_fn(dist: &FiniteDistribution, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(dist.support().iter().map(|&x| f(x)).collect())
    }

    /// Pointwise transform; the result gets the tightest declared range.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Replaces the declared range. Fails if it does not contain every value.
    pub fn declare(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid(format!(
                "declared range [{lo}, {hi}] is not a finite interval"
            )));
        }
        if self.min_value() < lo || self.max_value() > hi {
            return Err(invalid(format!(
                "declared range [{lo}, {hi}] does not contain values in [{}, {}]",
                self.min_value(),
                self.max_value()
            )));
        }
        self.declared_lo = lo;
        self.declared_hi = hi;
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn declared_lo(&self) -> f64 {
        self.declared_lo
    }

    pub fn declared_hi(&self) -> f64 {
        self.declared_hi
    }

    pub fn range_len(&self) -> f64 {
        self.declared_hi - self.declared_lo
    }

    /// True when the declared range is a single value.
    pub fn is_degenerate(&self) -> bool {
        self.declared_lo == self.declared_hi
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sorted distinct values taken by the query, i.e. its finite range.
    pub fn distinct_values(&self) -> Vec<f64> {
        let mut z = self.values.clone();
        z.sort_by(f64::total_cmp);
        z.dedup();
        z
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn in_unit_interval(&self) -> bool {
        self.values.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    pub fn check_bound(&self, dist: &FiniteDistribution) -> Result<()> {
        if self.values.len() != dist.len() {
            return Err(Error::QueryMismatch {
                query: self.values.len(),
                support: dist.len(),
            });
        }
        Ok(())
    }
}

/// Exact first and second moments of a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    pub std_dev: f64,
}

impl Moments {
    /// Root of the second moment, `sqrt(D[q^2])`.
    pub fn rms(&self) -> f64 {
        self.second_moment.sqrt()
    }
}

/// `z` clipped to `[-a, a]`.
///
/// When `|z| > a` the result is `±a`, except in rare rounding ties where no
/// float `r` gives `±a + r == z`; there it is one ulp closer to zero.
pub fn clamp(z: f64, a: f64) -> Result<f64> {
    Ok(split(z, a)?.0)
}

/// The part of `z` clipped off by [`clamp`], so that
/// `clamp(z, a) + residual(z, a) == z` exactly.
pub fn residual(z: f64, a: f64) -> Result<f64> {
    Ok(split(z, a)?.1)
}

fn split(z: f64, a: f64) -> Result<(f64, f64)> {
    if !(a >= 0.0) {
        return Err(invalid(format!("clamp level {a} must be nonnegative")));
    }
    let mut c = z.clamp(-a, a);
    if c == z || !z.is_finite() {
        return Ok((c, z - c));
    }
    for _ in 0..2 {
        if let Some(r) = exact_complement(z, c) {
            return Ok((c, r));
        }
        c = if c > 0.0 { c.next_down() } else { c.next_up() };
    }
    Ok((c, z - c))
}

/// A float `r` near `z - c` with `c + r == z`, if one exists.
fn exact_complement(z: f64, c: f64) -> Option<f64> {
    let r = z - c;
    let (mut up, mut down) = (r, r);
    std::iter::once(r)
        .chain((0..4).flat_map(|_| {
            up = up.next_up();
            down = down.next_down();
            [up, down]
        }))
        .find(|&cand| c + cand == z)
}

pub fn exact_moments(dist: &FiniteDistribution, q: &Query) -> Result<Moments> {
    q.check_bound(dist)?;
    let mean = compensated_sum(dist.weights().iter().zip(q.values()).map(|(w, v)| w * v));
    let second_moment = compensated_sum(
        dist.weights()
            .iter()
            .zip(q.values())
            .map(|(w, v)| w * v * v),
    );
    // two-pass form avoids the cancellation in second_moment - mean^2
    let variance = compensated_sum(
        dist.weights()
            .iter()
            .zip(q.values())
            .map(|(w, v)| w * (v - mean) * (v - mean)),
    )
    .max(0.0);
    Ok(Moments {
        mean,
        second_moment,
        variance,
        std_dev: variance.sqrt(),
    })
}

pub fn exact_mean(dist: &FiniteDistribution, q: &Query) -> Result<f64> {
    Ok(exact_moments(dist, q)?.mean)
}

/// `Pr[q >= t]`, or `Pr[q > t]` when `strict`.
pub fn exact_tail(dist: &FiniteDistribution, q: &Query, t: f64, strict: bool) -> Result<f64> {
    q.check_bound(dist)?;
    let tail = compensated_sum(
        dist.weights()
            .iter()
            .zip(q.values())
            .filter(|(_, &v)| if strict { v > t } else { v >= t })
            .map(|(&w, _)| w),
    );
    Ok(tail.min(1.0))
}

/// `Pr[q <= t]`.
pub fn exact_lower_tail(dist: &FiniteDistribution, q: &Query, t: f64) -> Result<f64> {
    Ok((1.0 - exact_tail(dist, q, t, true)?).max(0.0))
}

/// `E[(q - a)^2]`.
pub fn second_moment_about(dist: &FiniteDistribution, q: &Query, a: f64) -> Result<f64> {
    q.check_bound(dist)?;
    Ok(compensated_sum(
        dist.weights()
            .iter()
            .zip(q.values())
            .map(|(w, v)| w * (v - a) * (v - a)),
    ))
}

/// Largest multiple of `step` that does not exceed `v`, robust to the
/// rounding of `v / step`.
pub(crate) fn floor_to_grid(v: f64, step: f64) -> f64 {
    let mut k = (v / step).floor();
    if k * step > v {
        k -= 1.0;
    } else if (k + 1.0) * step <= v {
        k += 1.0;
    }
    k * step
}

/// Rounds every value down to a multiple of `step` after truncating at `cap`.
/// The result is declared on `[0, cap]`.
pub fn discretize_round_down(q: &Query, step: f64, cap: f64) -> Result<Query> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(invalid(format!("step {step} must be positive")));
    }
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(invalid(format!("cap {cap} must be positive")));
    }
    if q.min_value() < 0.0 {
        return Err(invalid("discretize_round_down needs nonnegative values"));
    }
    q.map(|v| floor_to_grid(v.min(cap), step))?
        .declare(0.0, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_point() -> FiniteDistribution {
        FiniteDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn clamp_and_residual_examples() {
        assert_eq!(clamp(3.0, 2.0).unwrap(), 2.0);
        assert_eq!(clamp(-5.0, 2.0).unwrap(), -2.0);
        assert_eq!(clamp(1.5, 2.0).unwrap(), 1.5);
        assert_eq!(residual(3.0, 2.0).unwrap(), 1.0);
        assert_eq!(residual(1.5, 2.0).unwrap(), 0.0);
        assert_eq!(residual(-5.0, 2.0).unwrap(), -3.0);
        assert!(matches!(clamp(1.0, -0.1), Err(Error::InvalidArgument(_))));
        assert!(residual(1.0, -1.0).is_err());
    }

    #[test]
    fn clamp_residual_exact_on_rounding_ties() {
        for (z, a) in [
            (268044.60620943067, 316.36886270335526),
            (-7.298908295407287e5, 5.323769076768658e2),
            (-8.88103351654498e5, 5.51069794757117e2),
        ] {
            let (c, r) = (clamp(z, a).unwrap(), residual(z, a).unwrap());
            assert_eq!(c + r, z);
            assert!(c.abs() <= a && c.abs() >= a.next_down());
        }
    }

    #[test]
    fn construction_merges_and_sorts() {
        let d = FiniteDistribution::from_weighted([(2.0, 1.0), (1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert_eq!(d.support(), &[1.0, 2.0]);
        assert!((d.weights()[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(FiniteDistribution::from_weighted(Vec::<(f64, f64)>::new()).is_err());
        assert!(FiniteDistribution::from_weighted([(1.0, -0.5), (2.0, 1.5)]).is_err());
        assert!(FiniteDistribution::from_weighted([(f64::NAN, 1.0)]).is_err());
        assert!(FiniteDistribution::from_weighted([(1.0, 0.0)]).is_err());
        assert!(FiniteDistribution::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(FiniteDistribution::new(vec![1.0], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn moments_examples() {
        let d = two_point();
        let m = exact_moments(&d, &Query::identity(&d)).unwrap();
        assert_eq!((m.mean, m.second_moment, m.variance), (0.5, 0.5, 0.25));

        let d = FiniteDistribution::point_mass(7.0).unwrap();
        let m = exact_moments(&d, &Query::identity(&d)).unwrap();
        assert_eq!((m.mean, m.variance, m.std_dev), (7.0, 0.0, 0.0));

        let d = FiniteDistribution::uniform(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = exact_moments(&d, &Query::identity(&d)).unwrap();
        assert_eq!(m.mean, 2.5);
        assert_eq!(m.second_moment, 7.5);
        assert_eq!(m.variance, 1.25);
    }

    #[test]
    fn tail_examples() {
        let pts: Vec<f64> = (1..=8).map(f64::from).collect();
        let d = FiniteDistribution::uniform(&pts).unwrap();
        let q = Query::identity(&d);
        assert_eq!(exact_tail(&d, &q, 6.0, false).unwrap(), 0.375);
        assert_eq!(exact_tail(&d, &q, -1e300, false).unwrap(), 1.0);

        let d = FiniteDistribution::point_mass(7.0).unwrap();
        let q = Query::identity(&d);
        assert_eq!(exact_tail(&d, &q, 7.0, true).unwrap(), 0.0);
        assert_eq!(exact_tail(&d, &q, 7.0, false).unwrap(), 1.0);
    }

    #[test]
    fn mismatched_query_is_rejected() {
        let d = two_point();
        let q = Query::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            exact_moments(&d, &q),
            Err(Error::QueryMismatch {
                query: 3,
                support: 2
            })
        ));
    }

    #[test]
    fn discretize_examples() {
        let q = Query::new(vec![0.31, 0.99]).unwrap();
        assert_eq!(
            discretize_round_down(&q, 0.25, 10.0).unwrap().values(),
            &[0.25, 0.75]
        );

        let q = Query::new(vec![15.0]).unwrap();
        let r = discretize_round_down(&q, 0.5, 8.0).unwrap();
        assert_eq!(r.values(), &[8.0]);
        assert_eq!((r.declared_lo(), r.declared_hi()), (0.0, 8.0));

        // step zeta/2 and cap 2B/zeta with B = 1, zeta = 0.1
        let (b, zeta) = (1.0, 0.1);
        let q = Query::new(vec![0.31]).unwrap();
        let r = discretize_round_down(&q, zeta / 2.0, 2.0 * b / zeta).unwrap();
        assert!((r.values()[0] - 0.30).abs() < 1e-12);
        assert_eq!(r.declared_hi(), 20.0);

        assert!(discretize_round_down(&q, 0.0, 1.0).is_err());
        assert!(discretize_round_down(&q, 0.1, -1.0).is_err());
        let neg = Query::new(vec![-0.1]).unwrap();
        assert!(discretize_round_down(&neg, 0.1, 1.0).is_err());
    }

    #[test]
    fn floor_to_grid_never_overshoots() {
        for (v, s) in [
            (0.3, 0.1),
            (0.7, 0.1),
            (0.31, 0.05),
            (1e-17, 1e-18),
            (5.0, 0.5),
        ] {
            let f = floor_to_grid(v, s);
            assert!(f <= v && v - f < s, "v={v} s={s} f={f}");
        }
    }

    #[test]
    fn parse_text_format() {
        let text = "# header\n0 1\n1 3 # trailing\n\n";
        let d = FiniteDistribution::parse(text).unwrap();
        assert_eq!(d.support(), &[0.0, 1.0]);
        assert_eq!(d.weights(), &[0.25, 0.75]);
        assert!(matches!(
            FiniteDistribution::parse("1 x\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(FiniteDistribution::parse("1 2 3\n").is_err());
        let back = FiniteDistribution::parse(&d.to_text()).unwrap();
        assert_eq!(back, d);
    }

    fn arb_dist() -> impl Strategy<Value = FiniteDistribution> {
        prop::collection::vec((-100.0f64..100.0, 0.0f64..1.0), 1..40)
            .prop_filter_map("positive mass", |pairs| {
                FiniteDistribution::from_weighted(pairs).ok()
            })
    }

    proptest! {
        #[test]
        fn clamp_residual_decompose(z in -1e6f64..1e6, a in 0.0f64..1e3) {
            let c = clamp(z, a).unwrap();
            let r = residual(z, a).unwrap();
            prop_assert_eq!(c + r, z);
            prop_assert!(c.abs() <= a);
        }

        #[test]
        fn moments_match_naive_sum(d in arb_dist()) {
            let q = Query::identity(&d);
            let m = exact_moments(&d, &q).unwrap();
            let mut mean = 0.0;
            let mut second = 0.0;
            for (x, w) in d.iter() {
                mean += w * x;
                second += w * x * x;
            }
            let scale = second.abs().max(1e-300);
            prop_assert!((m.mean - mean).abs() <= 1e-9 * mean.abs().max(m.second_moment.sqrt()).max(1e-300));
            prop_assert!((m.second_moment - second).abs() <= 1e-9 * scale);
            prop_assert!((m.variance - (m.second_moment - m.mean * m.mean)).abs() <= 1e-9 * m.second_moment.max(1e-300));
            prop_assert!(m.variance >= 0.0);
            prop_assert!((m.std_dev * m.std_dev - m.variance).abs() <= 1e-12 * m.variance.max(1.0));
        }

        #[test]
        fn tail_monotone(d in arb_dist(), t1 in -120.0f64..120.0, t2 in -120.0f64..120.0) {
            let q = Query::identity(&d);
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(exact_tail(&d, &q, hi, false).unwrap() <= exact_tail(&d, &q, lo, false).unwrap());
            prop_assert!(exact_tail(&d, &q, lo, true).unwrap() <= exact_tail(&d, &q, lo, false).unwrap());
        }

        #[test]
        fn discretization_error_is_controlled(
            d in arb_dist(),
            step in 0.01f64..5.0,
            cap in 1.0f64..80.0,
        ) {
            let q = Query::from_fn(&d, f64::abs).unwrap();
            let r = discretize_round_down(&q, step, cap).unwrap();
            for (&before, &after) in q.values().iter().zip(r.values()) {
                prop_assert!(after <= before);
                prop_assert!(before - after < step + (before - cap).max(0.0));
            }
            let m = exact_moments(&d, &q).unwrap();
            let mean_after = exact_mean(&d, &r).unwrap();
            let residual_mass = exact_mean(&d, &q.map(|v| residual(v, cap).unwrap()).unwrap()).unwrap();
            // Chebyshev: E[r_cap] <= E[q^2] / cap
            prop_assert!(residual_mass <= m.second_moment / cap + 1e-9);
            prop_assert!(m.mean - mean_after <= step + residual_mass + 1e-9);
            prop_assert!(m.mean - mean_after >= -1e-9);
        }

        #[test]
        fn median_shift_bound(d in arb_dist()) {
            let q = Query::identity(&d);
            let m = exact_moments(&d, &q).unwrap();
            for &a in d.support() {
                let upper = exact_tail(&d, &q, a, false).unwrap();
                let lower = exact_lower_tail(&d, &q, a).unwrap();
                if upper >= 1.0 / 3.0 && lower >= 1.0 / 3.0 {
                    let shifted = second_moment_about(&d, &q, a).unwrap();
                    prop_assert!(shifted <= 4.0 * m.variance * (1.0 + 1e-9) + 1e-300);
                }
            }
        }
    }
}

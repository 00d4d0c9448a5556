use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dist::{exact_moments, FiniteDistribution, Query};
use crate::error::{Error, Result};
use crate::estimators::relative_accuracy_parameter;
use crate::oracles::Policy;

use super::generate::{generate_coordinates, DistributionSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QueryKind {
    Identity,
    /// `scale * x + shift`.
    Affine {
        scale: f64,
        shift: f64,
    },
    Absolute,
    /// One value per support point in increasing support order; `#` comments.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    #[serde(flatten)]
    pub kind: QueryKind,
    /// Declared `[lo, hi]`; defaults to the tight range of the values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_range: Option<[f64; 2]>,
}

impl Default for QuerySpec {
    fn default() -> Self {
        Self {
            kind: QueryKind::Identity,
            declared_range: None,
        }
    }
}

impl QuerySpec {
    pub fn build(&self, dist: &FiniteDistribution) -> Result<Query> {
        let q = match &self.kind {
            QueryKind::Identity => Query::identity(dist),
            QueryKind::Affine { scale, shift } => Query::from_fn(dist, |x| scale * x + shift)?,
            QueryKind::Absolute => Query::from_fn(dist, f64::abs)?,
            QueryKind::File { path } => {
                let values = read_query_file(path)?;
                if values.len() != dist.len() {
                    return Err(Error::QueryMismatch {
                        query: values.len(),
                        support: dist.len(),
                    });
                }
                Query::new(values)?
            }
        };
        match self.declared_range {
            Some([lo, hi]) => q.declare(lo, hi),
            None => Ok(q),
        }
    }
}

fn read_query_file(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|e| Error::Parse {
            line: i + 1,
            msg: format!("{e}"),
        })?;
        values.push(v);
    }
    Ok(values)
}

/// Estimator and its parameters. `n` is the VSTAT parameter; estimators
/// without `n` derive it from their accuracy target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    NaiveMean { n: u64 },
    DyadicMean { n: u64 },
    KnownBoundMean { eps: f64 },
    NonnegMean { n: u64, zeta: f64 },
    SignedMean { n: u64, zeta: f64 },
    RelativeAccuracyMean { eps: f64, zeta: f64 },
    VectorMean { eps: f64 },
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::NaiveMean { .. } => "naive-mean",
            EstimatorSpec::DyadicMean { .. } => "dyadic-mean",
            EstimatorSpec::KnownBoundMean { .. } => "known-bound-mean",
            EstimatorSpec::NonnegMean { .. } => "nonneg-mean",
            EstimatorSpec::SignedMean { .. } => "signed-mean",
            EstimatorSpec::RelativeAccuracyMean { .. } => "relative-accuracy-mean",
            EstimatorSpec::VectorMean { .. } => "vector-mean",
        }
    }

    pub fn n(&self) -> Option<u64> {
        match *self {
            EstimatorSpec::NaiveMean { n }
            | EstimatorSpec::DyadicMean { n }
            | EstimatorSpec::NonnegMean { n, .. }
            | EstimatorSpec::SignedMean { n, .. } => Some(n),
            _ => None,
        }
    }

    pub fn with_n(&self, new_n: u64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            EstimatorSpec::NaiveMean { n }
            | EstimatorSpec::DyadicMean { n }
            | EstimatorSpec::NonnegMean { n, .. }
            | EstimatorSpec::SignedMean { n, .. } => *n = new_n,
            _ => return Err(Error::Config(format!("{} takes no n", self.name()))),
        }
        Ok(out)
    }

    pub fn with_eps(&self, new_eps: f64) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            EstimatorSpec::KnownBoundMean { eps }
            | EstimatorSpec::RelativeAccuracyMean { eps, .. }
            | EstimatorSpec::VectorMean { eps } => *eps = new_eps,
            _ => return Err(Error::Config(format!("{} takes no eps", self.name()))),
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum OracleModel {
    Vstat,
    /// `STAT(1/n)` for each requested `VSTAT(n)`.
    Stat,
    /// VSTAT answered from one-bit samples; `q_total` and `delta` size the
    /// union bound.
    CommSim {
        q_total: u64,
        delta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    #[serde(flatten)]
    pub model: OracleModel,
    /// Ignored by `comm-sim`, whose answers come from samples.
    #[serde(default)]
    pub policy: Policy,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            model: OracleModel::Vstat,
            policy: Policy::HonestExact,
        }
    }
}

impl OracleSpec {
    /// Policy label used in result rows.
    pub fn label(&self) -> &'static str {
        match self.model {
            OracleModel::CommSim { .. } => "comm-sim",
            _ => self.policy.name(),
        }
    }
}

/// Grid swept by [`super::run_sweep`]. Empty lists keep the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default)]
    pub n: Vec<u64>,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub policies: Vec<Policy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    #[serde(default)]
    pub query: QuerySpec,
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    /// Second-moment bound `B`. When absent it is `bound_slack * sqrt(E[q^2])`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default = "default_slack")]
    pub bound_slack: f64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Record wall-clock times. Off by default so outputs are reproducible.
    #[serde(default)]
    pub timing: bool,
}

fn default_slack() -> f64 {
    1.5
}

fn default_trials() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Every configuration a sweep expands to, in policy, n, eps order.
    pub fn expand_sweep(&self) -> Result<Vec<ExperimentConfig>> {
        let Some(sweep) = &self.sweep else {
            let mut c = self.clone();
            c.sweep = None;
            return Ok(vec![c]);
        };
        let policies = if sweep.policies.is_empty() {
            vec![self.oracle.policy]
        } else {
            sweep.policies.clone()
        };
        let ns: Vec<Option<u64>> = if sweep.n.is_empty() {
            vec![None]
        } else {
            sweep.n.iter().copied().map(Some).collect()
        };
        let epss: Vec<Option<f64>> = if sweep.eps.is_empty() {
            vec![None]
        } else {
            sweep.eps.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for &policy in &policies {
            for &n in &ns {
                for &eps in &epss {
                    let mut c = self.clone();
                    c.sweep = None;
                    c.oracle.policy = policy;
                    if let Some(n) = n {
                        c.estimator = c.estimator.with_n(n)?;
                    }
                    if let Some(eps) = eps {
                        c.estimator = c.estimator.with_eps(eps)?;
                    }
                    out.push(c);
                }
            }
        }
        Ok(out)
    }

    /// Generates the distribution and query and checks every estimator
    /// precondition, without touching an oracle.
    pub fn validate(&self) -> Result<Instance> {
        let cfg = |msg: String| Error::Config(msg);
        if self.trials == 0 {
            return Err(cfg("trials must be positive".into()));
        }
        if !(self.bound_slack >= 1.0) {
            return Err(cfg(format!(
                "bound_slack = {} must be at least 1",
                self.bound_slack
            )));
        }
        match self.oracle.model {
            OracleModel::CommSim { q_total, delta } => {
                if q_total == 0 || !(delta > 0.0 && delta < 1.0) {
                    return Err(cfg(format!(
                        "comm-sim needs q_total >= 1 and delta in (0, 1), got {q_total}, {delta}"
                    )));
                }
            }
            OracleModel::Vstat | OracleModel::Stat => {}
        }
        let is_vector = matches!(self.estimator, EstimatorSpec::VectorMean { .. });
        if is_vector != self.distribution.is_product() {
            return Err(cfg(format!(
                "{} does not apply to a {} distribution",
                self.estimator.name(),
                self.distribution.kind()
            )));
        }
        let coordinates: Vec<Arc<FiniteDistribution>> = generate_coordinates(&self.distribution)?
            .into_iter()
            .map(Arc::new)
            .collect();
        if is_vector {
            return self.validate_vector(coordinates);
        }

        let dist = coordinates[0].clone();
        let query = self.query.build(&dist)?;
        let m = exact_moments(&dist, &query)?;
        let bound = match self.bound {
            Some(b) => b,
            None => self.bound_slack * m.rms(),
        };
        let nonneg = query.declared_lo() >= 0.0;
        let second_ok = m.second_moment <= bound * bound * (1.0 + 1e-12);
        let need = |ok: bool, msg: String| if ok { Ok(()) } else { Err(cfg(msg)) };
        let name = self.estimator.name();
        match self.estimator {
            EstimatorSpec::NaiveMean { n } => need(n >= 1, format!("{name} needs n >= 1"))?,
            EstimatorSpec::DyadicMean { n } => {
                need(n >= 2, format!("{name} needs n >= 2"))?;
                need(nonneg, format!("{name} needs a nonnegative declared range"))?;
            }
            EstimatorSpec::KnownBoundMean { eps } => {
                need(bound > 0.0, format!("{name} needs B > 0"))?;
                need(
                    eps > 0.0 && eps <= bound / 16.0,
                    format!("{name} needs 0 < eps <= B/16, B = {bound}"),
                )?;
                need(nonneg, format!("{name} needs a nonnegative declared range"))?;
                need(
                    second_ok,
                    format!(
                        "E[q^2] = {} exceeds B^2 = {}",
                        m.second_moment,
                        bound * bound
                    ),
                )?;
            }
            EstimatorSpec::NonnegMean { n, zeta } | EstimatorSpec::SignedMean { n, zeta } => {
                need(n >= 32, format!("{name} needs n >= 32"))?;
                need(zeta > 0.0, format!("{name} needs zeta > 0"))?;
                if matches!(self.estimator, EstimatorSpec::NonnegMean { .. }) {
                    need(nonneg, format!("{name} needs a nonnegative declared range"))?;
                }
                need(
                    second_ok,
                    format!(
                        "E[q^2] = {} exceeds B^2 = {}",
                        m.second_moment,
                        bound * bound
                    ),
                )?;
            }
            EstimatorSpec::RelativeAccuracyMean { eps, zeta } => {
                need(
                    eps > 0.0 && eps < 1.0,
                    format!("{name} needs eps in (0, 1)"),
                )?;
                need(
                    zeta > 0.0 && bound > zeta,
                    format!("{name} needs 0 < zeta < B"),
                )?;
                need(
                    second_ok,
                    format!(
                        "E[q^2] = {} exceeds B^2 = {}",
                        m.second_moment,
                        bound * bound
                    ),
                )?;
                relative_accuracy_parameter(eps)?;
            }
            EstimatorSpec::VectorMean { .. } => unreachable!("handled above"),
        }
        Ok(Instance {
            coordinates: vec![dist],
            query,
            bound,
        })
    }

    fn validate_vector(&self, coordinates: Vec<Arc<FiniteDistribution>>) -> Result<Instance> {
        let EstimatorSpec::VectorMean { eps } = self.estimator else {
            unreachable!("only called for vector-mean");
        };
        if self.query != QuerySpec::default() {
            return Err(Error::Config(
                "vector-mean uses the identity query on each coordinate".into(),
            ));
        }
        let mut second = 0.0;
        let mut var = 0.0;
        for c in &coordinates {
            let m = exact_moments(c, &Query::identity(c))?;
            second += m.second_moment;
            var += m.variance;
        }
        let bound = match self.bound {
            Some(b) => b,
            None => self.bound_slack * second.sqrt(),
        };
        let checks = [
            (
                eps > 0.0 && eps < 1.0,
                format!("eps = {eps} must lie in (0, 1)"),
            ),
            (bound > eps, format!("need B > eps, got B = {bound}")),
            (
                var <= 1.0 + 1e-12,
                format!("total variance {var} exceeds 1"),
            ),
            (
                second <= bound * bound * (1.0 + 1e-12),
                format!("E[|x|^2] = {second} exceeds B^2 = {}", bound * bound),
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(msg));
            }
        }
        let query = Query::identity(&coordinates[0]);
        Ok(Instance {
            coordinates,
            query,
            bound,
        })
    }
}

/// Validated inputs of one experiment.
#[derive(Debug, Clone)]
pub struct Instance {
    /// One entry for scalar experiments, `d` for vector ones.
    pub coordinates: Vec<Arc<FiniteDistribution>>,
    pub query: Query,
    pub bound: f64,
}

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::continuum::OracleParams;
use crate::error::{Error, Result};
use crate::fermat::Alpha;
use crate::sampler::{DensitySpec, DomainSpec, ManifoldSpec};

/// Distance engine for sampled clouds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Exact up to `exact_max_n`, kNN-restricted above.
    #[default]
    Auto,
    Exact,
    Knn,
}

/// Settings shared by all experiments. Fields an experiment does not use are
/// ignored; unset optional fields take experiment-specific defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub domain: DomainSpec,
    pub density: DensitySpec,
    pub manifold: Option<ManifoldSpec>,
    pub alpha: f64,
    /// Dimension of the unit cube used by `mu`.
    pub dim: Option<usize>,
    /// Sample intensities (Poisson) or sizes (i.i.d.), strictly increasing.
    pub schedule: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    /// Query pair `[x, y]` (or `[centre]` for balls).
    pub query: Option<Vec<Vec<f64>>>,
    pub out: Option<PathBuf>,
    pub engine: Engine,
    /// `k = ceil(knn_c * ln n)` for the restricted engine.
    pub knn_c: f64,
    pub exact_max_n: f64,
    pub oracle: OracleParams,
    /// Ball threshold on the scaled distance `n^beta * D`.
    pub t: Option<f64>,
    /// Time constant estimate used by shape and manifold runs.
    pub mu: Option<f64>,
    /// Neighbour counts tried by `knn`.
    pub ks: Option<Vec<usize>>,
    pub epsilon: f64,
    /// Source particles per replicate for `knn`.
    pub sources: usize,
    /// Targets per source for `knn`.
    pub targets: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: String::new(),
            domain: DomainSpec::unit_cube(2),
            density: DensitySpec::Uniform { value: 1.0 },
            manifold: None,
            alpha: 2.0,
            dim: None,
            schedule: vec![1e3, 4e3, 1.6e4, 6.4e4],
            reps: 16,
            seed: 0,
            query: None,
            out: None,
            engine: Engine::Auto,
            knn_c: 10.0,
            exact_max_n: 2e4,
            oracle: OracleParams {
                h: 1.0 / 200.0,
                r: 5,
                ..OracleParams::default()
            },
            t: None,
            mu: None,
            ks: None,
            epsilon: 0.01,
            sources: 20,
            targets: 50,
        }
    }
}

impl ExperimentConfig {
    /// Parses JSON, naming the offending field on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Format(format!("config field `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn alpha(&self) -> Result<Alpha> {
        Alpha::new(self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha()?;
        if self.schedule.is_empty() {
            return Err(Error::param("schedule", "must not be empty"));
        }
        if self.schedule.iter().any(|n| !(n.is_finite() && *n >= 1.0)) {
            return Err(Error::param("schedule", "entries must be finite and >= 1"));
        }
        if self.schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("schedule", "must be strictly increasing"));
        }
        if self.reps == 0 {
            return Err(Error::param("reps", "must be at least 1"));
        }
        if !(self.knn_c.is_finite() && self.knn_c > 0.0) {
            return Err(Error::param("knn_c", "must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param("epsilon", "must lie in (0, 1)"));
        }
        if let Some(t) = self.t {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::param("t", "must be positive"));
            }
        }
        if let Some(mu) = self.mu {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::param("mu", "must be positive"));
            }
        }
        if let Some(q) = &self.query {
            if q.is_empty() || q.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
                return Err(Error::param("query", "points must be finite"));
            }
        }
        self.domain.validate()
    }

    /// The query pair, or `default` when unset.
    pub(crate) fn pair(&self, default: [&[f64]; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
        match &self.query {
            None => Ok((default[0].to_vec(), default[1].to_vec())),
            Some(q) if q.len() == 2 && q[0].len() == q[1].len() => Ok((q[0].clone(), q[1].clone())),
            Some(_) => Err(Error::param("query", "expected two points of equal dimension")),
        }
    }

    /// File stem for outputs: the experiment kind, suffixed with the
    /// scenario name when set.
    pub(crate) fn stem(&self, kind: &str) -> String {
        if self.scenario.is_empty() {
            kind.to_string()
        } else {
            format!("{kind}_{}", self.scenario)
        }
    }
}

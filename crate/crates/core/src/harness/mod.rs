//! Monte Carlo experiments.
//!
//! Every experiment takes an [`ExperimentConfig`], runs its replicates on a
//! worker pool (size from `FERMAT_WORKERS`, default all cores) and returns a
//! report that can be written as CSV tables, a JSON sidecar and SVG plots.
//! Each `(n, replicate)` task draws from its own random stream keyed by the
//! seed, so outputs do not depend on the number of workers.

mod config;
mod geodesic;
mod knn;
mod output;
mod ratio;
mod shape;
pub mod stats;

use std::time::Instant;

use serde::Serialize;

pub use config::{Engine, ExperimentConfig};
pub use geodesic::{run_geodesic_convergence, GeodesicRecord, GeodesicReport, GeodesicSummary};
pub use knn::{run_knn_sufficiency, KnnReport, KnnRow};
pub use output::{OutputFiles, Table};
pub use ratio::{
    estimate_mu, run_convergence, run_manifold, ConvergenceRecord, ConvergenceReport, ManifoldRecord,
    ManifoldReport, MuReport, MuRow, MuSample, RatioSummary,
};
pub use shape::{run_shape, ShapeRecord, ShapeReport};

use crate::error::{Error, Result};
use crate::fermat::{exact_distance, restricted_distance, Alpha, DistanceResult, GraphMode, KnnGraph};
use crate::point::{PointCloud, SpatialIndex};

/// Worker count from `FERMAT_WORKERS`, if set to a positive integer.
pub fn configured_workers() -> Option<usize> {
    std::env::var("FERMAT_WORKERS").ok()?.trim().parse().ok().filter(|&w| w > 0)
}

/// Runs `f` on a pool sized by `FERMAT_WORKERS`.
pub fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = configured_workers() {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::param("FERMAT_WORKERS", e.to_string()))?;
    Ok(pool.install(f))
}

/// Seed of the `(n, replicate)` task of an experiment.
pub fn task_seed(seed: u64, tag: &str, n: f64, replicate: usize) -> u64 {
    crate::rng::derive_key(seed, tag, &[n.to_bits(), replicate as u64])
}

/// Which distance engine ran at a given `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EngineUse {
    pub n: f64,
    pub method: &'static str,
    /// Neighbours per particle for the restricted engine.
    pub k: Option<usize>,
}

impl EngineUse {
    pub(crate) fn choose(config: &ExperimentConfig, n: f64) -> Self {
        let knn = match config.engine {
            Engine::Exact => false,
            Engine::Knn => true,
            Engine::Auto => n > config.exact_max_n,
        };
        if knn {
            Self {
                n,
                method: "knn",
                k: Some((config.knn_c * n.ln()).ceil().max(1.0) as usize),
            }
        } else {
            Self {
                n,
                method: "exact",
                k: None,
            }
        }
    }

    /// Anchored distance between `x` and `y` on `cloud`.
    pub(crate) fn distance(&self, cloud: &PointCloud, alpha: Alpha, x: &[f64], y: &[f64]) -> Result<DistanceResult> {
        if cloud.len() < 2 {
            return Err(Error::param("n", format!("sample has {} particles; increase n", cloud.len())));
        }
        let index = SpatialIndex::build(cloud)?;
        match self.k {
            None => exact_distance(&index, alpha, x, y),
            Some(k) => {
                let graph = KnnGraph::build(&index, alpha, k, GraphMode::Directed)?;
                restricted_distance(&graph, &index, alpha, x, y)
            }
        }
    }
}

/// Wall time of one task, reported in sidecars only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskTiming {
    pub n: f64,
    pub replicate: usize,
    pub wall_time_s: f64,
}

pub(crate) fn timed<T>(n: f64, replicate: usize, f: impl FnOnce() -> Result<T>) -> Result<(T, TaskTiming)> {
    let start = Instant::now();
    let out = f()?;
    Ok((
        out,
        TaskTiming {
            n,
            replicate,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    ))
}

pub(crate) fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::NonFinite(format!("{what}: {values:?}")));
    }
    Ok(())
}

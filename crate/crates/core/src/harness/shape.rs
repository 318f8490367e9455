use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::output::{cell, Bundle, OutputFiles, Table};
use super::stats::{linear_fit, median};
use super::{task_seed, timed, EngineUse, ExperimentConfig, TaskTiming};
use crate::continuum::{build_grid_oracle, Beta, GridOracle};
use crate::error::{Error, Result};
use crate::fermat::{fermat_ball, restricted_ball, Alpha, FermatBall, GraphMode, KnnGraph};
use crate::point::{PointCloud, SpatialIndex};
use crate::sampler::{sample_poisson, DensitySpec};
use crate::svg::{Plot, PALETTE};

/// Half-angle of the cones used for the axis-ratio fit, in degrees.
const CONE_DEG: f64 = 20.0;
/// The outer continuum ball of radius `OUTER_MARGIN * t / mu` must not touch
/// the domain boundary.
const OUTER_MARGIN: f64 = 1.2;
/// Fit windows end at this fraction of the way to the domain boundary.
const FIT_EXTENT: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeRecord {
    pub n: f64,
    pub replicate: usize,
    pub ball_size: usize,
    /// Smallest `eps` with every lattice node of the inner continuum ball
    /// covered (1-NN) by a sample-ball particle.
    pub epsilon_in: f64,
    /// Smallest `eps` with every sample-ball particle inside the outer
    /// continuum ball.
    pub epsilon_out: f64,
    pub epsilon: f64,
    /// Slope of `n^beta D` against radius along `-axis` over the slope along
    /// `+axis`, on radius windows matched in units of the local spacing. `None` when a cone holds fewer than 3 ball
    /// particles.
    pub axis_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShapeSummary {
    pub n: f64,
    pub median_epsilon: f64,
    pub median_epsilon_in: f64,
    pub median_epsilon_out: f64,
    /// Over replicates with a defined axis ratio.
    pub median_axis_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShapeReport {
    pub config: ExperimentConfig,
    pub beta: f64,
    pub center: Vec<f64>,
    pub t: f64,
    pub mu: f64,
    pub axis: usize,
    /// `(f(+axis) / f(-axis))^beta` near the centre.
    pub expected_axis_ratio: f64,
    /// Same ratio read off the continuum ball radii.
    pub oracle_axis_ratio: f64,
    pub records: Vec<ShapeRecord>,
    pub summary: Vec<ShapeSummary>,
    /// Replicate 0 at the largest `n`: scaled ball particles and the
    /// continuum level set `t / mu`.
    pub overlay: (Vec<Vec<f64>>, Vec<Vec<f64>>),
    pub engines: Vec<EngineUse>,
    pub timings: Vec<TaskTiming>,
    pub wall_time_s: f64,
}

impl ShapeReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(
            "shape",
            &["n", "replicate", "ball_size", "epsilon_in", "epsilon_out", "epsilon", "axis_ratio"],
        );
        for r in &self.records {
            t.push(vec![
                cell(r.n),
                cell(r.replicate),
                cell(r.ball_size),
                cell(r.epsilon_in),
                cell(r.epsilon_out),
                cell(r.epsilon),
                r.axis_ratio.map(cell).unwrap_or_default(),
            ]);
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(
            "shape_summary",
            &["n", "median_epsilon", "median_epsilon_in", "median_epsilon_out", "median_axis_ratio"],
        );
        for s in &self.summary {
            t.push(vec![
                cell(s.n),
                cell(s.median_epsilon),
                cell(s.median_epsilon_in),
                cell(s.median_epsilon_out),
                s.median_axis_ratio.map(cell).unwrap_or_default(),
            ]);
        }
        t
    }

    pub fn write(&self, dir: &std::path::Path) -> Result<OutputFiles> {
        let mut svgs = Vec::new();
        let mut eps = Plot::new("shape sandwich", "n", "median smallest epsilon").log_x();
        let xs: Vec<f64> = self.summary.iter().map(|s| s.n).collect();
        let ys: Vec<f64> = self.summary.iter().map(|s| s.median_epsilon).collect();
        eps.line(&xs, &ys, PALETTE[0], None);
        eps.scatter(xs.iter().zip(&ys).map(|(&a, &b)| [a, b]), PALETTE[0], 3.0);
        svgs.push(("", eps.render()));
        if self.center.len() == 2 {
            let mut ov = Plot::new("sample ball and continuum level t/mu", "x", "y").equal_aspect();
            ov.scatter(self.overlay.0.iter().map(|p| [p[0], p[1]]), PALETTE[0], 1.0);
            ov.scatter(self.overlay.1.iter().map(|p| [p[0], p[1]]), PALETTE[1], 1.0);
            svgs.push(("_overlay", ov.render()));
        }
        Bundle {
            config: &self.config,
            kind: "shape",
            tables: vec![("", self.table()), ("_summary", self.summary_table())],
            metadata: json!({
                "beta": self.beta,
                "center": self.center,
                "t": self.t,
                "mu": self.mu,
                "axis": self.axis,
                "expected_axis_ratio": self.expected_axis_ratio,
                "oracle_axis_ratio": self.oracle_axis_ratio,
                "inclusion_surrogate": "inner: every lattice node z with D(z) < (1/mu - eps) t has its nearest particle in the sample ball; \
                    outer: every sample-ball particle p has D(p) < (1/mu + eps) t, D interpolated from the oracle field",
                "axis_ratio_fit": format!(
                    "(sum n^beta D / sum r) over ball particles within {CONE_DEG} degrees of -axis, divided by the same over +axis; \
                     radii restricted to [1, u_max] times the local spacing (n f)^(-1/d) on each side, u_max reaching {FIT_EXTENT} of the way to the boundary on the tighter side"
                ),
                "engines": self.engines,
                "timing": self.timings,
            }),
            svgs,
            wall_time_s: self.wall_time_s,
        }
        .write(dir)
    }
}

fn ball(engine: &EngineUse, index: &SpatialIndex<'_>, alpha: Alpha, x: &[f64], t: f64) -> Result<FermatBall> {
    match engine.k {
        None => fermat_ball(index, alpha, x, t),
        Some(k) => {
            let graph = KnnGraph::build(index, alpha, k, GraphMode::Directed)?;
            restricted_ball(&graph, index, x, t)
        }
    }
}

/// Least-squares slope of scaled distance against radius over ball
/// particles inside the cone around `sign * e_axis` with radius in
/// `[r_lo, r_hi]`.
fn cone_slope(cloud: &PointCloud, ball: &FermatBall, scale: f64, x: &[f64], axis: usize, sign: f64, r_lo: f64, r_hi: f64) -> Option<f64> {
    let cos_max = CONE_DEG.to_radians().cos();
    let (mut rs, mut ds) = (Vec::new(), Vec::new());
    for &(p, d) in &ball.members {
        let q = cloud.point(p);
        let r = q.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if r >= r_lo && r <= r_hi && sign * (q[axis] - x[axis]) / r >= cos_max {
            rs.push(r);
            ds.push(scale * d);
        }
    }
    if rs.len() < 3 {
        return None;
    }
    linear_fit(&rs, &ds).map(|(s, _)| s)
}

fn default_axis(spec: &DensitySpec, dim: usize) -> usize {
    match spec {
        DensitySpec::TwoMedia { axis, .. } if *axis < dim => *axis,
        _ => usize::from(dim > 1),
    }
}

/// Sandwich of the sample Fermat ball between scaled continuum balls, with
/// the smallest `eps` per replicate.
pub fn run_shape(config: &ExperimentConfig) -> Result<ShapeReport> {
    config.validate()?;
    let start = Instant::now();
    let alpha = config.alpha()?;
    let domain = &config.domain;
    let dim = domain.dim();
    if dim > 3 {
        return Err(Error::param("domain", "oracle-backed experiments support at most 3 dimensions"));
    }
    let mu = match config.mu {
        Some(m) => m,
        None if alpha.value() == 1.0 => 1.0,
        None => return Err(Error::param("mu", "required for alpha > 1; estimate it with the mu experiment")),
    };
    let density = config.density.build(domain)?;
    let beta = alpha.beta(dim);
    let (lo, hi) = domain.bounding_box();
    let center = match &config.query {
        None => lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>(),
        Some(q) if q.len() == 1 && q[0].len() == dim => q[0].clone(),
        Some(_) => return Err(Error::param("query", "expected a single centre point")),
    };
    let oracle = build_grid_oracle(domain, &density, Beta::new(beta)?, config.oracle)?;
    let field = oracle.distance_field(&center)?;
    let to_boundary = (0..oracle.node_count())
        .filter(|&v| oracle.is_boundary(v))
        .map(|v| field[v])
        .fold(f64::INFINITY, f64::min);
    let t = config.t.unwrap_or(mu * to_boundary / (1.25 * OUTER_MARGIN));
    if OUTER_MARGIN * t / mu >= to_boundary {
        return Err(Error::param(
            "t",
            format!("outer continuum ball reaches the domain boundary; use t < {}", mu * to_boundary / OUTER_MARGIN),
        ));
    }
    let axis = default_axis(&config.density, dim);
    let mut e = vec![0.0; dim];
    e[axis] = 0.1 * (hi[axis] - lo[axis]);
    let plus: Vec<f64> = center.iter().zip(&e).map(|(c, d)| c + d).collect();
    let minus: Vec<f64> = center.iter().zip(&e).map(|(c, d)| c - d).collect();
    let expected_axis_ratio = (density.evaluate(&plus) / density.evaluate(&minus)).powf(beta);
    let (r_plus, r_minus) = oracle_radii(&oracle, &field, &center, axis, t / mu);
    let oracle_axis_ratio = r_plus / r_minus;
    // Radius windows covering the same range in units of the local particle
    // spacing (n f)^(-1/d) on both sides, so finite-size corrections of the
    // passage time cancel in the ratio.
    let (f_plus, f_minus) = (density.evaluate(&plus), density.evaluate(&minus));
    let root = |f: f64| f.powf(1.0 / dim as f64);
    let u_hi = FIT_EXTENT
        * (ray_to_boundary(domain, &center, axis, 1.0) * root(f_plus))
            .min(ray_to_boundary(domain, &center, axis, -1.0) * root(f_minus));
    let (r_hi_plus, r_hi_minus) = (u_hi / root(f_plus), u_hi / root(f_minus));
    // Search reach covering both windows with room for fluctuations.
    let fit_reach = 1.5 * mu * (r_hi_plus * f_plus.powf(-beta)).max(r_hi_minus * f_minus.powf(-beta));
    // Nodes of the continuum ball of radius t / mu, which contains every
    // inner ball.
    let inner_nodes: Vec<usize> = (0..oracle.node_count()).filter(|&v| field[v] < t / mu).collect();
    let ring: Vec<Vec<f64>> = inner_nodes
        .iter()
        .filter(|&&v| field[v] >= t / mu - 1.5 * oracle.h() * density.lower_bound().powf(-beta))
        .map(|&v| oracle.node_point(v))
        .collect();
    let engines: Vec<EngineUse> = config.schedule.iter().map(|&n| EngineUse::choose(config, n)).collect();
    let last_n = *config.schedule.last().unwrap();
    let tasks: Vec<(f64, usize)> = config
        .schedule
        .iter()
        .flat_map(|&n| (0..config.reps).map(move |r| (n, r)))
        .collect();
    let results: Vec<((ShapeRecord, Option<Vec<Vec<f64>>>), TaskTiming)> = super::with_workers(|| {
        tasks
            .into_par_iter()
            .map(|(n, rep)| {
                timed(n, rep, || {
                    let batch = sample_poisson(domain, &density, n, task_seed(config.seed, "shape", n, rep))?;
                    let cloud = &batch.cloud;
                    if cloud.len() < 2 {
                        return Err(Error::param("n", format!("sample has {} particles; increase n", cloud.len())));
                    }
                    let index = SpatialIndex::build(cloud)?;
                    let engine = engines.iter().find(|e| e.n == n).unwrap();
                    let scale = n.powf(beta);
                    let wide = ball(engine, &index, alpha, &center, fit_reach.max(t) / scale)?;
                    let b = FermatBall {
                        center: wide.center,
                        members: wide.members.iter().copied().filter(|m| m.1 < t / scale).collect(),
                    };
                    let mut member = vec![false; cloud.len()];
                    let mut epsilon_out = f64::NEG_INFINITY;
                    for &(p, _) in &b.members {
                        member[p] = true;
                        epsilon_out = epsilon_out.max(oracle.interpolate(&field, cloud.point(p))? / t - 1.0 / mu);
                    }
                    let mut epsilon_in: f64 = 0.0;
                    for &v in &inner_nodes {
                        if !member[index.nearest(&oracle.node_point(v))?] {
                            epsilon_in = epsilon_in.max(1.0 / mu - field[v] / t);
                        }
                    }
                    let epsilon_out = epsilon_out.max(0.0);
                    let slope = |sign: f64, f: f64, r_hi: f64| {
                        let unit = (n * f).powf(-1.0 / dim as f64);
                        cone_slope(cloud, &wide, scale, &center, axis, sign, unit, r_hi)
                    };
                    let axis_ratio = match (slope(-1.0, f_minus, r_hi_minus), slope(1.0, f_plus, r_hi_plus)) {
                        (Some(m), Some(p)) if p > 0.0 => Some(m / p),
                        _ => None,
                    };
                    let rec = ShapeRecord {
                        n,
                        replicate: rep,
                        ball_size: b.len(),
                        epsilon_in,
                        epsilon_out,
                        epsilon: epsilon_in.max(epsilon_out),
                        axis_ratio,
                    };
                    super::check_finite("shape record", &[rec.epsilon, rec.axis_ratio.unwrap_or(0.0)])?;
                    let overlay = (n == last_n && rep == 0).then(|| {
                        b.members
                            .iter()
                            .map(|&(p, _)| cloud.point(p).to_vec())
                            .collect::<Vec<_>>()
                    });
                    Ok((rec, overlay))
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut records = Vec::new();
    let mut timings = Vec::new();
    let mut overlay_ball = Vec::new();
    for ((rec, ov), tm) in results {
        records.push(rec);
        timings.push(tm);
        if let Some(ov) = ov {
            overlay_ball = ov;
        }
    }
    let summary = config
        .schedule
        .iter()
        .map(|&n| {
            let col = |f: fn(&ShapeRecord) -> Option<f64>| {
                let xs: Vec<f64> = records.iter().filter(|r| r.n == n).filter_map(f).collect();
                (!xs.is_empty()).then(|| median(&xs))
            };
            ShapeSummary {
                n,
                median_epsilon: col(|r| Some(r.epsilon)).unwrap_or(f64::NAN),
                median_epsilon_in: col(|r| Some(r.epsilon_in)).unwrap_or(f64::NAN),
                median_epsilon_out: col(|r| Some(r.epsilon_out)).unwrap_or(f64::NAN),
                median_axis_ratio: col(|r| r.axis_ratio),
            }
        })
        .collect();
    Ok(ShapeReport {
        config: config.clone(),
        beta,
        center,
        t,
        mu,
        axis,
        expected_axis_ratio,
        oracle_axis_ratio,
        records,
        summary,
        overlay: (overlay_ball, ring),
        engines,
        timings,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Distance from `center` to the domain boundary along `sign * e_axis`.
fn ray_to_boundary(domain: &crate::sampler::DomainSpec, center: &[f64], axis: usize, sign: f64) -> f64 {
    let (lo, hi) = domain.bounding_box();
    let step = 1e-3 * (hi[axis] - lo[axis]);
    let mut p = center.to_vec();
    let mut s = 0.0;
    loop {
        p[axis] = center[axis] + sign * (s + step);
        if !domain.contains(&p) {
            return s;
        }
        s += step;
    }
}

/// Radii of the continuum ball `{D < level}` along `+axis` and `-axis`, with
/// the level crossing located by interpolating the field along the ray.
fn oracle_radii(oracle: &GridOracle, field: &[f64], center: &[f64], axis: usize, level: f64) -> (f64, f64) {
    let step = 0.25 * oracle.h();
    let radius = |sign: f64| {
        let mut p = center.to_vec();
        let mut prev = (0.0, 0.0);
        for i in 1.. {
            let s = i as f64 * step;
            p[axis] = center[axis] + sign * s;
            let Ok(d) = oracle.interpolate(field, &p) else { return prev.0 };
            if d >= level {
                let (s0, d0) = prev;
                return s0 + (level - d0) / (d - d0) * (s - s0);
            }
            prev = (s, d);
        }
        unreachable!()
    };
    (radius(1.0), radius(-1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::OracleParams;

    fn small(density: &str, alpha: f64, mu: Option<f64>) -> ExperimentConfig {
        ExperimentConfig {
            density: DensitySpec::parse(density).unwrap(),
            alpha,
            mu,
            schedule: vec![1000.0, 4000.0],
            reps: 3,
            seed: 5,
            oracle: OracleParams::new(0.02, 3),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn euclidean_ball_is_a_disk() {
        let rep = run_shape(&small("uniform", 1.0, None)).unwrap();
        assert_eq!(rep.mu, 1.0);
        assert!((rep.expected_axis_ratio - 1.0).abs() < 1e-12);
        assert!((rep.oracle_axis_ratio - 1.0).abs() < 0.02, "{}", rep.oracle_axis_ratio);
        let last = rep.summary.last().unwrap();
        assert!(last.median_epsilon < 0.1, "{last:?}");
        assert!((last.median_axis_ratio.unwrap() - 1.0).abs() < 0.1, "{last:?}");
        assert_eq!(rep.table().rows.len(), 6);
    }

    #[test]
    fn two_media_expected_ratio() {
        let rep = run_shape(&small("two_media", 2.0, Some(1.05))).unwrap();
        assert_eq!(rep.axis, 1);
        assert!((rep.expected_axis_ratio - 2.0).abs() < 1e-12);
        assert!((rep.oracle_axis_ratio - 2.0).abs() < 0.05, "{}", rep.oracle_axis_ratio);
    }

    #[test]
    fn rejects_large_t_and_missing_mu() {
        let mut cfg = small("uniform", 1.0, None);
        cfg.t = Some(0.6);
        assert!(run_shape(&cfg).unwrap_err().to_string().contains("boundary"));
        assert!(run_shape(&small("uniform", 2.0, None)).is_err());
    }
}

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::output::{cell, Bundle, OutputFiles, Table};
use super::stats::median;
use super::{check_finite, task_seed, timed, EngineUse, ExperimentConfig, TaskTiming};
use crate::continuum::{build_grid_oracle, continuum_geodesic, Beta};
use crate::error::{Error, Result};
use crate::fermat::path_statistics;
use crate::point::{curve_distance, resample_polyline, DEFAULT_CURVE_RESOLUTION};
use crate::sampler::sample_poisson;
use crate::svg::{Plot, PALETTE};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicRecord {
    pub n: f64,
    pub replicate: usize,
    /// Curve distance between the sample and oracle geodesics.
    pub curve_distance: f64,
    /// Mean offset of the sample geodesic from the chord, positive on the
    /// side the oracle geodesic bends to.
    pub signed_deviation: f64,
    pub arc_length: f64,
    pub hop_count: usize,
    pub max_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicSummary {
    pub n: f64,
    pub median_curve_distance: f64,
    pub median_signed_deviation: f64,
    pub fraction_positive: f64,
    pub max_arc_length: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GeodesicReport {
    pub config: ExperimentConfig,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub oracle_geodesic: Vec<Vec<f64>>,
    pub oracle_signed_deviation: f64,
    pub records: Vec<GeodesicRecord>,
    pub summary: Vec<GeodesicSummary>,
    /// Twice the largest arc length at the smallest `n`.
    pub arc_length_bound: f64,
    /// Sample geodesics of every replicate at the largest `n`.
    pub final_paths: Vec<Vec<Vec<f64>>>,
    pub engines: Vec<EngineUse>,
    pub timings: Vec<TaskTiming>,
    pub wall_time_s: f64,
}

impl GeodesicReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(
            "geodesic",
            &["n", "replicate", "curve_distance", "signed_deviation", "arc_length", "hop_count", "max_gap"],
        );
        for r in &self.records {
            t.push(vec![
                cell(r.n),
                cell(r.replicate),
                cell(r.curve_distance),
                cell(r.signed_deviation),
                cell(r.arc_length),
                cell(r.hop_count),
                cell(r.max_gap),
            ]);
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(
            "geodesic_summary",
            &["n", "median_curve_distance", "median_signed_deviation", "fraction_positive", "max_arc_length"],
        );
        for s in &self.summary {
            t.push(vec![
                cell(s.n),
                cell(s.median_curve_distance),
                cell(s.median_signed_deviation),
                cell(s.fraction_positive),
                cell(s.max_arc_length),
            ]);
        }
        t
    }

    pub fn arc_lengths_bounded(&self) -> bool {
        self.summary.iter().all(|s| s.max_arc_length <= self.arc_length_bound)
    }

    pub fn write(&self, dir: &std::path::Path) -> Result<OutputFiles> {
        let mut svgs = Vec::new();
        let mut conv = Plot::new("geodesic convergence", "n", "median curve distance").log_x();
        let xs: Vec<f64> = self.summary.iter().map(|s| s.n).collect();
        let ys: Vec<f64> = self.summary.iter().map(|s| s.median_curve_distance).collect();
        conv.line(&xs, &ys, PALETTE[0], None);
        conv.scatter(xs.iter().zip(&ys).map(|(&a, &b)| [a, b]), PALETTE[0], 3.0);
        svgs.push(("", conv.render()));
        if self.x.len() == 2 {
            let mut overlay = Plot::new("sample geodesics at the largest n", "x", "y").equal_aspect();
            for p in &self.final_paths {
                let (px, py): (Vec<f64>, Vec<f64>) = p.iter().map(|q| (q[0], q[1])).unzip();
                overlay.line(&px, &py, PALETTE[5], None);
            }
            let (ox, oy): (Vec<f64>, Vec<f64>) = self.oracle_geodesic.iter().map(|q| (q[0], q[1])).unzip();
            overlay.line(&ox, &oy, PALETTE[1], Some("oracle geodesic"));
            svgs.push(("_paths", overlay.render()));
        }
        Bundle {
            config: &self.config,
            kind: "geodesic",
            tables: vec![("", self.table()), ("_summary", self.summary_table())],
            metadata: json!({
                "query": [self.x, self.y],
                "oracle_signed_deviation": self.oracle_signed_deviation,
                "arc_length_bound": self.arc_length_bound,
                "arc_lengths_bounded": self.arc_lengths_bounded(),
                "curve_metric": format!("discrete Frechet on {DEFAULT_CURVE_RESOLUTION}-point arc-length resamplings, min over orientation"),
                "engines": self.engines,
                "timing": self.timings,
            }),
            svgs,
            wall_time_s: self.wall_time_s,
        }
        .write(dir)
    }
}

/// Unit vector perpendicular to the chord `x -> y`, pointing to the side
/// the reference polyline bends to on average. `None` if it does not bend.
fn bend_direction(x: &[f64], y: &[f64], reference: &[Vec<f64>]) -> Result<Option<Vec<f64>>> {
    let u: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - a).collect();
    let len = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if len == 0.0 {
        return Ok(None);
    }
    let u: Vec<f64> = u.iter().map(|v| v / len).collect();
    let pts = resample_polyline(reference, DEFAULT_CURVE_RESOLUTION)?;
    let mut m = vec![0.0; x.len()];
    for p in &pts {
        let off: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
        let along: f64 = off.iter().zip(&u).map(|(a, b)| a * b).sum();
        for i in 0..m.len() {
            m[i] += (off[i] - along * u[i]) / pts.len() as f64;
        }
    }
    let norm = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((norm > 1e-12).then(|| m.iter().map(|v| v / norm).collect()))
}

fn signed_offset(x: &[f64], nu: Option<&[f64]>, poly: &[Vec<f64>]) -> Result<f64> {
    let Some(nu) = nu else { return Ok(0.0) };
    let pts = resample_polyline(poly, DEFAULT_CURVE_RESOLUTION)?;
    Ok(pts
        .iter()
        .map(|p| p.iter().zip(x).zip(nu).map(|((a, b), c)| (a - b) * c).sum::<f64>())
        .sum::<f64>()
        / pts.len() as f64)
}

/// Distance between sample geodesics and the oracle geodesic as `n` grows.
pub fn run_geodesic_convergence(config: &ExperimentConfig) -> Result<GeodesicReport> {
    config.validate()?;
    let start = Instant::now();
    let alpha = config.alpha()?;
    let domain = &config.domain;
    let dim = domain.dim();
    if dim > 3 {
        return Err(Error::param("domain", "oracle-backed experiments support at most 3 dimensions"));
    }
    let density = config.density.build(domain)?;
    let beta = alpha.beta(dim);
    let (lo, hi) = domain.bounding_box();
    let at = |fx: f64, fy: f64| -> Vec<f64> {
        (0..dim)
            .map(|a| lo[a] + [fx, fy].get(a).copied().unwrap_or(0.5) * (hi[a] - lo[a]))
            .collect()
    };
    let (x, y) = config.pair([&at(0.1, 0.3), &at(0.9, 0.3)])?;
    let oracle = build_grid_oracle(domain, &density, Beta::new(beta)?, config.oracle)?;
    let oracle_geodesic = continuum_geodesic(&oracle, &x, &y)?;
    drop(oracle);
    let nu = bend_direction(&x, &y, &oracle_geodesic)?;
    let oracle_signed_deviation = signed_offset(&x, nu.as_deref(), &oracle_geodesic)?;
    let engines: Vec<EngineUse> = config.schedule.iter().map(|&n| EngineUse::choose(config, n)).collect();
    let last_n = *config.schedule.last().unwrap();
    let results: Vec<((GeodesicRecord, Option<Vec<Vec<f64>>>), TaskTiming)> = super::with_workers(|| {
        config
            .schedule
            .iter()
            .flat_map(|&n| (0..config.reps).map(move |r| (n, r)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(n, rep)| {
                timed(n, rep, || {
                    let batch = sample_poisson(domain, &density, n, task_seed(config.seed, "geodesic", n, rep))?;
                    let engine = engines.iter().find(|e| e.n == n).unwrap();
                    let res = engine.distance(&batch.cloud, alpha, &x, &y)?;
                    let poly = res.path.polyline(&batch.cloud);
                    let stats = path_statistics(&res.path, &batch.cloud);
                    let rec = GeodesicRecord {
                        n,
                        replicate: rep,
                        curve_distance: curve_distance(&poly, &oracle_geodesic, DEFAULT_CURVE_RESOLUTION)?.value(),
                        signed_deviation: signed_offset(&x, nu.as_deref(), &poly)?,
                        arc_length: stats.arc_length,
                        hop_count: stats.hop_count,
                        max_gap: stats.max_gap,
                    };
                    check_finite("geodesic record", &[rec.curve_distance, rec.arc_length, rec.max_gap])?;
                    if !rec.signed_deviation.is_finite() {
                        return Err(Error::NonFinite("signed deviation".into()));
                    }
                    Ok((rec, (n == last_n).then_some(poly)))
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut records = Vec::new();
    let mut final_paths = Vec::new();
    let mut timings = Vec::new();
    for ((rec, path), t) in results {
        records.push(rec);
        final_paths.extend(path);
        timings.push(t);
    }
    let summary: Vec<GeodesicSummary> = config
        .schedule
        .iter()
        .map(|&n| {
            let rs: Vec<&GeodesicRecord> = records.iter().filter(|r| r.n == n).collect();
            let cd: Vec<f64> = rs.iter().map(|r| r.curve_distance).collect();
            let sd: Vec<f64> = rs.iter().map(|r| r.signed_deviation).collect();
            GeodesicSummary {
                n,
                median_curve_distance: median(&cd),
                median_signed_deviation: median(&sd),
                fraction_positive: sd.iter().filter(|&&v| v > 0.0).count() as f64 / sd.len() as f64,
                max_arc_length: rs.iter().map(|r| r.arc_length).fold(0.0, f64::max),
            }
        })
        .collect();
    let arc_length_bound = 2.0 * summary[0].max_arc_length;
    Ok(GeodesicReport {
        config: config.clone(),
        x,
        y,
        oracle_geodesic,
        oracle_signed_deviation,
        records,
        summary,
        arc_length_bound,
        final_paths,
        engines,
        timings,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::DensitySpec;

    #[test]
    fn bend_direction_follows_reference() {
        let x = [0.0, 0.0];
        let y = [1.0, 0.0];
        let up = vec![vec![0.0, 0.0], vec![0.5, 0.2], vec![1.0, 0.0]];
        let nu = bend_direction(&x, &y, &up).unwrap().unwrap();
        assert!((nu[1] - 1.0).abs() < 1e-12 && nu[0].abs() < 1e-12);
        let down = vec![vec![0.0, 0.0], vec![0.5, -0.2], vec![1.0, 0.0]];
        assert!(signed_offset(&x, Some(&nu), &down).unwrap() < 0.0);
        let straight = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        assert!(bend_direction(&x, &y, &straight).unwrap().is_none());
    }

    #[test]
    fn small_bump_run() {
        let cfg = ExperimentConfig {
            density: DensitySpec::parse("gauss_bump").unwrap(),
            alpha: 3.0,
            schedule: vec![500.0, 1000.0],
            reps: 3,
            seed: 1,
            oracle: crate::continuum::OracleParams::new(0.02, 3),
            ..ExperimentConfig::default()
        };
        let rep = run_geodesic_convergence(&cfg).unwrap();
        assert_eq!(rep.records.len(), 6);
        assert_eq!(rep.final_paths.len(), 3);
        assert!(rep.oracle_signed_deviation > 0.0);
        assert!(rep.summary.iter().all(|s| s.median_curve_distance > 0.0));
    }
}

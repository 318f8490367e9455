//! Ratio experiments: the time constant, convergence of the scaled distance
//! to the continuum distance, and intrinsic-dimension scaling on manifolds.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::output::{cell, Bundle, OutputFiles, Table};
use super::stats::{iqr, mean, median, quantile};
use super::{check_finite, task_seed, timed, EngineUse, ExperimentConfig, TaskTiming};
use crate::continuum::{build_grid_oracle, continuum_distance, Beta};
use crate::error::{Error, Result};
use crate::fermat::path_statistics;
use crate::sampler::{sample_manifold, sample_poisson, DensitySpec, DomainSpec, ManifoldSpec};
use crate::svg::{Plot, PALETTE};

/// Location and spread of a replicate sample at one `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioSummary {
    pub n: f64,
    pub reps: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    /// `iqr / median`.
    pub dispersion: f64,
}

impl RatioSummary {
    fn of(n: f64, xs: &[f64]) -> Self {
        let m = median(xs);
        Self {
            n,
            reps: xs.len(),
            mean: mean(xs),
            median: m,
            q1: quantile(xs, 0.25),
            q3: quantile(xs, 0.75),
            iqr: iqr(xs),
            dispersion: iqr(xs) / m,
        }
    }

    const COLUMNS: [&'static str; 8] = ["n", "reps", "mean", "median", "q1", "q3", "iqr", "iqr_over_median"];

    fn row(&self) -> Vec<String> {
        vec![
            cell(self.n),
            cell(self.reps),
            cell(self.mean),
            cell(self.median),
            cell(self.q1),
            cell(self.q3),
            cell(self.iqr),
            cell(self.dispersion),
        ]
    }
}

fn summarize<T>(schedule: &[f64], items: &[T], n_of: impl Fn(&T) -> f64, value: impl Fn(&T) -> f64) -> Vec<RatioSummary> {
    schedule
        .iter()
        .map(|&n| {
            let xs: Vec<f64> = items.iter().filter(|r| n_of(r) == n).map(&value).collect();
            RatioSummary::of(n, &xs)
        })
        .collect()
}

fn ratio_plot(title: &str, ylabel: &str, series: &[(&str, &[RatioSummary])], reference: Option<f64>) -> String {
    let mut plot = Plot::new(title, "n", ylabel).log_x();
    for (i, (label, rows)) in series.iter().enumerate() {
        let xs: Vec<f64> = rows.iter().map(|r| r.n).collect();
        let c = PALETTE[i % PALETTE.len()];
        plot.band(&xs, &rows.iter().map(|r| r.q1).collect::<Vec<_>>(), &rows.iter().map(|r| r.q3).collect::<Vec<_>>(), c);
        plot.line(&xs, &rows.iter().map(|r| r.median).collect::<Vec<_>>(), c, Some(label));
    }
    if let (Some(m), Some(first)) = (reference, series.first()) {
        let xs = [first.1[0].n, first.1[first.1.len() - 1].n];
        plot.line(&xs, &[m, m], PALETTE[5], Some("mu"));
    }
    plot.render()
}

fn tasks(schedule: &[f64], reps: usize) -> Vec<(f64, usize)> {
    schedule.iter().flat_map(|&n| (0..reps).map(move |r| (n, r))).collect()
}

// ---------------------------------------------------------------- mu

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuSample {
    pub n: f64,
    pub replicate: usize,
    pub particles: usize,
    pub scaled_distance: f64,
    /// `n^beta * D / |x - y|`.
    pub mu: f64,
}

pub type MuRow = RatioSummary;

#[derive(Clone, Debug, Serialize)]
pub struct MuReport {
    pub config: ExperimentConfig,
    pub dim: usize,
    pub beta: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub samples: Vec<MuSample>,
    /// Per `n`; `mean` is the estimate of mu.
    pub rows: Vec<MuRow>,
    pub engines: Vec<EngineUse>,
    pub timings: Vec<TaskTiming>,
    pub wall_time_s: f64,
}

impl MuReport {
    /// Estimate at the largest `n`.
    pub fn mu_hat(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.mean)
    }

    pub fn summary_table(&self) -> Table {
        let mut cols = RatioSummary::COLUMNS.to_vec();
        cols[2] = "mu_hat";
        let mut t = Table::new("mu", &cols);
        self.rows.iter().for_each(|r| t.push(r.row()));
        t
    }

    pub fn samples_table(&self) -> Table {
        let mut t = Table::new("mu_samples", &["n", "replicate", "particles", "scaled_distance", "mu"]);
        for s in &self.samples {
            t.push(vec![cell(s.n), cell(s.replicate), cell(s.particles), cell(s.scaled_distance), cell(s.mu)]);
        }
        t
    }

    pub fn write(&self, dir: &std::path::Path) -> Result<OutputFiles> {
        Bundle {
            config: &self.config,
            kind: "mu",
            tables: vec![("", self.summary_table()), ("_samples", self.samples_table())],
            metadata: json!({
                "dim": self.dim,
                "beta": self.beta,
                "query": [self.x, self.y],
                "mu_hat": self.mu_hat(),
                "engines": self.engines,
                "timing": self.timings,
            }),
            svgs: vec![("", ratio_plot("time constant estimate", "n^beta D / |x - y|", &[("mu", &self.rows)], None))],
            wall_time_s: self.wall_time_s,
        }
        .write(dir)
    }
}

/// Estimates the time constant `mu(alpha, d)` from homogeneous samples on
/// `[0, 1]^d`: for each `n`, the mean over replicates of
/// `n^beta * D(x, y) / |x - y|`.
pub fn estimate_mu(config: &ExperimentConfig) -> Result<MuReport> {
    config.validate()?;
    let start = Instant::now();
    let alpha = config.alpha()?;
    let dim = config.dim.unwrap_or(config.domain.dim());
    if dim == 0 {
        return Err(Error::param("dim", "must be at least 1"));
    }
    let domain = DomainSpec::unit_cube(dim);
    let density = DensitySpec::Uniform { value: 1.0 }.build(&domain)?;
    let mut dx = vec![0.5; dim];
    let mut dy = vec![0.5; dim];
    dx[0] = 0.2;
    dy[0] = 0.8;
    let (x, y) = config.pair([&dx, &dy])?;
    if x.len() != dim || !domain.contains(&x) || !domain.contains(&y) {
        return Err(Error::param("query", "points must lie in the unit cube of the chosen dimension"));
    }
    let sep = crate::point::sq_dist(&x, &y).sqrt();
    if sep < 0.5 {
        return Err(Error::param("query", format!("|x - y| must be at least 0.5, got {sep}")));
    }
    let beta = alpha.beta(dim);
    let engines: Vec<EngineUse> = config.schedule.iter().map(|&n| EngineUse::choose(config, n)).collect();
    let results: Vec<(MuSample, TaskTiming)> = super::with_workers(|| {
        tasks(&config.schedule, config.reps)
            .into_par_iter()
            .map(|(n, rep)| {
                timed(n, rep, || {
                    let batch = sample_poisson(&domain, &density, n, task_seed(config.seed, "mu", n, rep))?;
                    let engine = engines.iter().find(|e| e.n == n).unwrap();
                    let res = engine.distance(&batch.cloud, alpha, &x, &y)?;
                    let scaled = n.powf(beta) * res.distance;
                    check_finite("scaled distance", &[scaled])?;
                    Ok(MuSample {
                        n,
                        replicate: rep,
                        particles: batch.cloud.len(),
                        scaled_distance: scaled,
                        mu: scaled / sep,
                    })
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let (samples, timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let rows = summarize(&config.schedule, &samples, |s| s.n, |s| s.mu);
    Ok(MuReport {
        config: config.clone(),
        dim,
        beta,
        x,
        y,
        samples,
        rows,
        engines,
        timings,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

// ---------------------------------------------------------------- convergence

/// One replicate of a convergence run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub n: f64,
    pub replicate: usize,
    /// `n^beta * D(x, y)`.
    pub scaled_distance: f64,
    pub oracle_distance: f64,
    /// `scaled_distance / oracle_distance`, an estimate of mu.
    pub ratio: f64,
    pub arc_length: f64,
    pub max_gap: f64,
    pub hop_count: usize,
}

impl ConvergenceRecord {
    pub const COLUMNS: [&'static str; 8] = [
        "n",
        "replicate",
        "scaled_distance",
        "oracle_distance",
        "ratio",
        "arc_length",
        "max_gap",
        "hop_count",
    ];

    fn row(&self) -> Vec<String> {
        vec![
            cell(self.n),
            cell(self.replicate),
            cell(self.scaled_distance),
            cell(self.oracle_distance),
            cell(self.ratio),
            cell(self.arc_length),
            cell(self.max_gap),
            cell(self.hop_count),
        ]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub config: ExperimentConfig,
    pub beta: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub oracle_distance: f64,
    pub records: Vec<ConvergenceRecord>,
    pub summary: Vec<RatioSummary>,
    pub engines: Vec<EngineUse>,
    pub timings: Vec<TaskTiming>,
    pub wall_time_s: f64,
}

impl ConvergenceReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new("convergence", &ConvergenceRecord::COLUMNS);
        self.records.iter().for_each(|r| t.push(r.row()));
        t
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new("convergence_summary", &RatioSummary::COLUMNS);
        self.summary.iter().for_each(|r| t.push(r.row()));
        t
    }

    /// Median ratio at the largest `n`.
    pub fn final_median(&self) -> f64 {
        self.summary.last().map_or(f64::NAN, |s| s.median)
    }

    pub fn write(&self, dir: &std::path::Path) -> Result<OutputFiles> {
        let label = self.config.density.name();
        Bundle {
            config: &self.config,
            kind: "convergence",
            tables: vec![("", self.table()), ("_summary", self.summary_table())],
            metadata: json!({
                "beta": self.beta,
                "query": [self.x, self.y],
                "oracle_distance": self.oracle_distance,
                "final_median_ratio": self.final_median(),
                "final_median_over_mu": self.config.mu.map(|m| self.final_median() / m),
                "engines": self.engines,
                "timing": self.timings,
            }),
            svgs: vec![("", ratio_plot("n^beta D / oracle", "ratio", &[(label, &self.summary)], self.config.mu))],
            wall_time_s: self.wall_time_s,
        }
        .write(dir)
    }
}

/// Scaled sample distance over the continuum oracle distance, per `n` and
/// replicate, on Poisson samples with intensity `n * f`.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport> {
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
    let (dx, dy) = default_pair(domain);
    let (x, y) = config.pair([&dx, &dy])?;
    let oracle = build_grid_oracle(domain, &density, Beta::new(beta)?, config.oracle)?;
    let oracle_distance = continuum_distance(&oracle, &x, &y)?.distance;
    if !(oracle_distance > 0.0) {
        return Err(Error::param("query", "query points snap to the same oracle node"));
    }
    drop(oracle);
    let engines: Vec<EngineUse> = config.schedule.iter().map(|&n| EngineUse::choose(config, n)).collect();
    let results: Vec<(ConvergenceRecord, TaskTiming)> = super::with_workers(|| {
        tasks(&config.schedule, config.reps)
            .into_par_iter()
            .map(|(n, rep)| {
                timed(n, rep, || {
                    let batch = sample_poisson(domain, &density, n, task_seed(config.seed, "convergence", n, rep))?;
                    let engine = engines.iter().find(|e| e.n == n).unwrap();
                    let res = engine.distance(&batch.cloud, alpha, &x, &y)?;
                    let stats = path_statistics(&res.path, &batch.cloud);
                    let scaled = n.powf(beta) * res.distance;
                    let rec = ConvergenceRecord {
                        n,
                        replicate: rep,
                        scaled_distance: scaled,
                        oracle_distance,
                        ratio: scaled / oracle_distance,
                        arc_length: stats.arc_length,
                        max_gap: stats.max_gap,
                        hop_count: stats.hop_count,
                    };
                    check_finite("convergence record", &[rec.scaled_distance, rec.ratio, rec.arc_length, rec.max_gap])?;
                    Ok(rec)
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let (records, timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = summarize(&config.schedule, &records, |r| r.n, |r| r.ratio);
    Ok(ConvergenceReport {
        config: config.clone(),
        beta,
        x,
        y,
        oracle_distance,
        records,
        summary,
        engines,
        timings,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Points at 20% and 80% of the bounding box along the first axis (30% and
/// 70% along the second when there is one, so planar pairs cross a
/// horizontal interface), centred in the remaining coordinates.
fn default_pair(domain: &DomainSpec) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = domain.bounding_box();
    let at = |fr: &[f64]| -> Vec<f64> {
        (0..lo.len())
            .map(|a| lo[a] + fr.get(a).copied().unwrap_or(0.5) * (hi[a] - lo[a]))
            .collect()
    };
    if lo.len() >= 2 {
        (at(&[0.3, 0.2]), at(&[0.7, 0.8]))
    } else {
        (at(&[0.2]), at(&[0.8]))
    }
}

// ---------------------------------------------------------------- manifold

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifoldRecord {
    pub n: f64,
    pub replicate: usize,
    pub distance: f64,
    pub oracle_distance: f64,
    /// `n^beta * D / oracle` with `beta = (alpha - 1) / d`, `d` intrinsic.
    pub ratio_intrinsic: f64,
    /// Same with the ambient dimension in place of `d`.
    pub ratio_ambient: f64,
    pub hop_count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ManifoldReport {
    pub config: ExperimentConfig,
    pub manifold: ManifoldSpec,
    pub beta_intrinsic: f64,
    pub beta_ambient: f64,
    pub isometry_error: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub oracle_distance: f64,
    pub records: Vec<ManifoldRecord>,
    pub intrinsic: Vec<RatioSummary>,
    pub ambient: Vec<RatioSummary>,
    pub engines: Vec<EngineUse>,
    pub timings: Vec<TaskTiming>,
    pub wall_time_s: f64,
}

impl ManifoldReport {
    /// `ln median(last n) - ln median(first n)` of a ratio series.
    pub fn log_drift(rows: &[RatioSummary]) -> f64 {
        match (rows.first(), rows.last()) {
            (Some(a), Some(b)) => b.median.ln() - a.median.ln(),
            _ => f64::NAN,
        }
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(
            "manifold",
            &["n", "replicate", "distance", "oracle_distance", "ratio_intrinsic", "ratio_ambient", "hop_count"],
        );
        for r in &self.records {
            t.push(vec![
                cell(r.n),
                cell(r.replicate),
                cell(r.distance),
                cell(r.oracle_distance),
                cell(r.ratio_intrinsic),
                cell(r.ratio_ambient),
                cell(r.hop_count),
            ]);
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        let mut cols = vec!["scaling"];
        cols.extend(RatioSummary::COLUMNS);
        let mut t = Table::new("manifold_summary", &cols);
        for (name, rows) in [("intrinsic", &self.intrinsic), ("ambient", &self.ambient)] {
            for r in rows {
                let mut row = vec![name.to_string()];
                row.extend(r.row());
                t.push(row);
            }
        }
        t
    }

    pub fn write(&self, dir: &std::path::Path) -> Result<OutputFiles> {
        Bundle {
            config: &self.config,
            kind: "manifold",
            tables: vec![("", self.table()), ("_summary", self.summary_table())],
            metadata: json!({
                "manifold": self.manifold,
                "beta_intrinsic": self.beta_intrinsic,
                "beta_ambient": self.beta_ambient,
                "isometry_error": self.isometry_error,
                "query_parameters": [self.x, self.y],
                "oracle_distance": self.oracle_distance,
                "log_drift_intrinsic": Self::log_drift(&self.intrinsic),
                "log_drift_ambient": Self::log_drift(&self.ambient),
                "engines": self.engines,
                "timing": self.timings,
            }),
            svgs: vec![(
                "",
                ratio_plot(
                    "manifold scaling",
                    "ratio",
                    &[("intrinsic beta", &self.intrinsic), ("ambient beta", &self.ambient)],
                    self.config.mu,
                ),
            )],
            wall_time_s: self.wall_time_s,
        }
        .write(dir)
    }
}

/// Sample distance on an embedded manifold against the parameter-space
/// oracle, scaled once with the intrinsic and once with the ambient
/// dimension.
pub fn run_manifold(config: &ExperimentConfig) -> Result<ManifoldReport> {
    config.validate()?;
    let start = Instant::now();
    let alpha = config.alpha()?;
    let manifold = config.manifold.clone().unwrap_or(ManifoldSpec::SwissRoll {
        a: 0.2,
        b: 0.04,
        length: 2.0,
        width: 0.5,
    });
    let isometry_error = manifold.check_isometry(100, 1e-6, config.seed)?;
    let pdom = manifold.parameter_domain();
    let density = config.density.build(&pdom)?;
    let (d, big_d) = (manifold.intrinsic_dim(), manifold.ambient_dim());
    let (beta, beta_ambient) = (alpha.beta(d), alpha.beta(big_d));
    let (lo, hi) = pdom.bounding_box();
    let at = |fr: f64| -> Vec<f64> {
        (0..d)
            .map(|a| lo[a] + if a == 0 { fr } else { 0.5 } * (hi[a] - lo[a]))
            .collect()
    };
    let (x, y) = config.pair([&at(0.2), &at(0.8)])?;
    let oracle = build_grid_oracle(&pdom, &density, Beta::new(beta)?, config.oracle)?;
    let oracle_distance = continuum_distance(&oracle, &x, &y)?.distance;
    drop(oracle);
    let (ax, ay) = (manifold.chart(&x), manifold.chart(&y));
    for n in &config.schedule {
        if n.fract() != 0.0 {
            return Err(Error::param("schedule", "manifold runs draw exactly n points; use integers"));
        }
    }
    let engines: Vec<EngineUse> = config.schedule.iter().map(|&n| EngineUse::choose(config, n)).collect();
    let results: Vec<(ManifoldRecord, TaskTiming)> = super::with_workers(|| {
        tasks(&config.schedule, config.reps)
            .into_par_iter()
            .map(|(n, rep)| {
                timed(n, rep, || {
                    let batch = sample_manifold(&manifold, &density, n as usize, task_seed(config.seed, "manifold", n, rep))?;
                    let engine = engines.iter().find(|e| e.n == n).unwrap();
                    let res = engine.distance(&batch.cloud, alpha, &ax, &ay)?;
                    let rec = ManifoldRecord {
                        n,
                        replicate: rep,
                        distance: res.distance,
                        oracle_distance,
                        ratio_intrinsic: n.powf(beta) * res.distance / oracle_distance,
                        ratio_ambient: n.powf(beta_ambient) * res.distance / oracle_distance,
                        hop_count: res.path.hops(),
                    };
                    check_finite("manifold record", &[rec.distance, rec.ratio_intrinsic, rec.ratio_ambient])?;
                    Ok(rec)
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let (records, timings): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let intrinsic = summarize(&config.schedule, &records, |r| r.n, |r| r.ratio_intrinsic);
    let ambient = summarize(&config.schedule, &records, |r| r.n, |r| r.ratio_ambient);
    Ok(ManifoldReport {
        config: config.clone(),
        manifold,
        beta_intrinsic: beta,
        beta_ambient,
        isometry_error,
        x,
        y,
        oracle_distance,
        records,
        intrinsic,
        ambient,
        engines,
        timings,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(schedule: Vec<f64>, reps: usize) -> ExperimentConfig {
        ExperimentConfig {
            schedule,
            reps,
            seed: 5,
            oracle: crate::continuum::OracleParams::new(0.02, 3),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn alpha_one_gives_unit_mu() {
        let cfg = ExperimentConfig { alpha: 1.0, ..small(vec![200.0, 800.0], 4) };
        let rep = estimate_mu(&cfg).unwrap();
        for s in &rep.samples {
            assert!((s.mu - 1.0).abs() < 0.2, "{s:?}");
        }
        assert_eq!(rep.rows.len(), 2);
        assert_eq!(rep.beta, 0.0);
    }

    #[test]
    fn mu_rejects_short_pairs() {
        let cfg = ExperimentConfig {
            query: Some(vec![vec![0.4, 0.5], vec![0.6, 0.5]]),
            ..small(vec![100.0], 1)
        };
        assert!(estimate_mu(&cfg).is_err());
    }

    #[test]
    fn convergence_records_are_consistent() {
        let cfg = small(vec![300.0, 600.0], 3);
        let rep = run_convergence(&cfg).unwrap();
        assert_eq!(rep.records.len(), 6);
        for r in &rep.records {
            assert!((r.ratio - r.scaled_distance / r.oracle_distance).abs() < 1e-15);
            assert!(r.hop_count >= 1 && r.arc_length >= r.max_gap);
        }
        let t = rep.table();
        assert_eq!(t.columns, ConvergenceRecord::COLUMNS);
        assert_eq!(t.rows.len(), 6);
    }

    #[test]
    fn convergence_is_seed_deterministic() {
        let cfg = small(vec![300.0], 2);
        let a = run_convergence(&cfg).unwrap().table().to_csv();
        let b = run_convergence(&cfg).unwrap().table().to_csv();
        assert_eq!(a, b);
        let other = run_convergence(&ExperimentConfig { seed: 6, ..cfg }).unwrap().table().to_csv();
        assert_ne!(a, other);
    }

    #[test]
    fn rotated_plane_matches_planar_run() {
        let base = ExperimentConfig {
            engine: super::super::Engine::Exact,
            ..small(vec![300.0], 2)
        };
        let planar = run_manifold(&ExperimentConfig {
            manifold: Some(ManifoldSpec::Identity { domain: DomainSpec::unit_cube(2) }),
            ..base.clone()
        })
        .unwrap();
        let rotated = run_manifold(&ExperimentConfig {
            manifold: Some(ManifoldSpec::parse("rotated_plane").unwrap()),
            ..base
        })
        .unwrap();
        for (p, r) in planar.records.iter().zip(&rotated.records) {
            assert!((p.distance - r.distance).abs() <= 1e-12 * p.distance);
            assert_eq!(p.hop_count, r.hop_count);
        }
    }
}

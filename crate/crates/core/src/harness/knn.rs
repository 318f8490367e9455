use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::output::{cell, Bundle, OutputFiles, Table};
use super::stats::linear_fit;
use super::{task_seed, timed, ExperimentConfig, TaskTiming};
use crate::error::{Error, Result};
use crate::fermat::{exact_single_source, restricted_single_source, GraphMode, KnnGraph, Stop};
use crate::point::SpatialIndex;
use crate::sampler::sample_poisson;
use crate::svg::{Plot, PALETTE};

/// Relative tolerance under which a restricted distance counts as equal to
/// the exact one.
pub const AGREEMENT_TOL: f64 = 1e-12;

const BASE_GRID: [usize; 24] = [
    2, 3, 4, 5, 6, 8, 10, 12, 15, 20, 25, 30, 40, 50, 60, 80, 100, 120, 150, 200, 250, 300, 400, 500,
];

/// Agreement of the restricted and exact distances at one `(n, k)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KnnRow {
    pub n: f64,
    pub k: usize,
    pub pairs: usize,
    pub agreeing: usize,
    pub agreement: f64,
    /// Largest `(D^k - D) / D` over reachable pairs.
    pub max_rel_gap: f64,
    pub unreachable: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct KnnReport {
    pub config: ExperimentConfig,
    pub rows: Vec<KnnRow>,
    /// Smallest grid `k` with agreement `>= 1 - epsilon`, per `n`.
    pub k_star: Vec<(f64, Option<usize>)>,
    /// Fit `k* = c_hat * ln(n / epsilon) + d_hat`.
    pub c_hat: Option<f64>,
    pub d_hat: Option<f64>,
    /// Pairs whose restricted distance increased with `k`, or agreed at some
    /// `k` and not at a larger one. Always zero for exact neighbour sets.
    pub monotonicity_violations: usize,
    pub timings: Vec<TaskTiming>,
    pub wall_time_s: f64,
}

impl KnnReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(
            "knn",
            &["n", "k", "pairs", "agreeing", "agreement", "max_rel_gap", "unreachable"],
        );
        for r in &self.rows {
            t.push(vec![
                cell(r.n),
                cell(r.k),
                cell(r.pairs),
                cell(r.agreeing),
                cell(r.agreement),
                cell(r.max_rel_gap),
                cell(r.unreachable),
            ]);
        }
        t
    }

    pub fn k_star_at(&self, n: f64) -> Option<usize> {
        self.k_star.iter().find(|(m, _)| *m == n).and_then(|(_, k)| *k)
    }

    /// True when agreement stays `>= 1 - epsilon` for every grid `k` at or
    /// above the fitted threshold.
    pub fn fit_holds(&self) -> bool {
        let (Some(c), Some(d)) = (self.c_hat, self.d_hat) else { return false };
        let eps = self.config.epsilon;
        self.rows
            .iter()
            .filter(|r| r.k as f64 >= c * (r.n / eps).ln() + d)
            .all(|r| r.agreement >= 1.0 - eps)
    }

    pub fn write(&self, dir: &std::path::Path) -> Result<OutputFiles> {
        let mut plot = Plot::new("restricted vs exact agreement", "k", "agreement").log_x();
        for (i, (n, _)) in self.k_star.iter().enumerate() {
            let rows: Vec<&KnnRow> = self.rows.iter().filter(|r| r.n == *n).collect();
            let xs: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.agreement).collect();
            plot.line(&xs, &ys, PALETTE[i % PALETTE.len()], Some(&format!("n={n}")));
        }
        Bundle {
            config: &self.config,
            kind: "knn",
            tables: vec![("", self.table())],
            metadata: json!({
                "epsilon": self.config.epsilon,
                "agreement_tolerance": AGREEMENT_TOL,
                "graph": "directed",
                "k_star": self.k_star,
                "c_hat": self.c_hat,
                "d_hat": self.d_hat,
                "fit_holds": self.fit_holds(),
                "monotonicity_violations": self.monotonicity_violations,
                "timing": self.timings,
            }),
            svgs: vec![("", plot.render())],
            wall_time_s: self.wall_time_s,
        }
        .write(dir)
    }
}

/// The `k` grid at `n`: the base grid plus `ceil(15 ln n)`, capped by both
/// that value and `n - 1`.
pub fn default_ks(n: usize) -> Vec<usize> {
    let cap = ((15.0 * (n as f64).ln()).ceil() as usize).min(n.saturating_sub(1)).max(1);
    let mut ks: Vec<usize> = BASE_GRID.iter().copied().filter(|&k| k < cap).collect();
    ks.push(cap);
    ks
}

struct TaskOut {
    /// Per grid `k`: agreeing pairs, unreachable pairs, largest relative gap.
    per_k: Vec<(usize, usize, f64)>,
    pairs: usize,
    violations: usize,
}

/// Fraction of source-target pairs whose kNN-restricted distance equals the
/// exact distance, over a grid of `k`.
pub fn run_knn_sufficiency(config: &ExperimentConfig) -> Result<KnnReport> {
    config.validate()?;
    let start = Instant::now();
    let alpha = config.alpha()?;
    let domain = &config.domain;
    let density = config.density.build(domain)?;
    if config.sources == 0 || config.targets == 0 {
        return Err(Error::param("sources", "sources and targets must be positive"));
    }
    if let Some(ks) = &config.ks {
        if ks.is_empty() || ks.contains(&0) || ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("ks", "must be positive and strictly increasing"));
        }
    }
    let grid = |n: f64| config.ks.clone().unwrap_or_else(|| default_ks(n.round() as usize));
    let tasks = tasks_of(config);
    let results: Vec<(TaskOut, TaskTiming)> = super::with_workers(|| {
        tasks
            .clone()
            .into_par_iter()
            .map(|(n, rep)| {
                timed(n, rep, || {
                    let seed = task_seed(config.seed, "knn", n, rep);
                    let batch = sample_poisson(domain, &density, n, seed)?;
                    let cloud = &batch.cloud;
                    let m = cloud.len();
                    if m < 2 {
                        return Err(Error::param("n", format!("sample has {m} particles; increase n")));
                    }
                    let ks = grid(n);
                    let k_max = *ks.last().unwrap();
                    let index = SpatialIndex::build(cloud)?;
                    let full = KnnGraph::build(&index, alpha, k_max, GraphMode::Directed)?;
                    let graphs: Vec<KnnGraph> = ks
                        .iter()
                        .map(|&k| if k >= full.k() { Ok(full.clone()) } else { full.truncated(k) })
                        .collect::<Result<_>>()?;
                    let mut rng = crate::rng::stream(seed, "knn-pairs", &[]);
                    let sources = sample(&mut rng, m, config.sources.min(m)).into_vec();
                    let mut out = TaskOut {
                        per_k: vec![(0, 0, 0.0); ks.len()],
                        pairs: 0,
                        violations: 0,
                    };
                    for &s in &sources {
                        let mut targets = sample(&mut rng, m - 1, config.targets.min(m - 1)).into_vec();
                        for t in &mut targets {
                            if *t >= s {
                                *t += 1;
                            }
                        }
                        let exact = exact_single_source(cloud, alpha, s, Stop::Never)?;
                        let restricted: Vec<Vec<f64>> = graphs
                            .iter()
                            .map(|g| restricted_single_source(g, s, Stop::Never).map(|sp| sp.dist))
                            .collect::<Result<_>>()?;
                        for &t in &targets {
                            let d = exact.dist[t];
                            out.pairs += 1;
                            let mut agreed = false;
                            let mut prev = f64::INFINITY;
                            for (i, dk) in restricted.iter().map(|r| r[t]).enumerate() {
                                let slot = &mut out.per_k[i];
                                if dk > prev {
                                    out.violations += 1;
                                }
                                prev = dk;
                                if !dk.is_finite() {
                                    slot.1 += 1;
                                    continue;
                                }
                                let gap = (dk - d) / d;
                                slot.2 = slot.2.max(gap);
                                if gap.abs() <= AGREEMENT_TOL {
                                    slot.0 += 1;
                                    agreed = true;
                                } else if agreed {
                                    out.violations += 1;
                                }
                            }
                        }
                    }
                    Ok(out)
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut rows = Vec::new();
    let mut k_star = Vec::new();
    let mut violations = 0;
    for &n in &config.schedule {
        let ks = grid(n);
        let outs: Vec<&TaskOut> = results
            .iter()
            .zip(&tasks)
            .filter(|(_, (m, _))| *m == n)
            .map(|(r, _)| &r.0)
            .collect();
        let pairs: usize = outs.iter().map(|o| o.pairs).sum();
        violations += outs.iter().map(|o| o.violations).sum::<usize>();
        for (i, &k) in ks.iter().enumerate() {
            let agreeing: usize = outs.iter().map(|o| o.per_k[i].0).sum();
            rows.push(KnnRow {
                n,
                k,
                pairs,
                agreeing,
                agreement: agreeing as f64 / pairs as f64,
                max_rel_gap: outs.iter().map(|o| o.per_k[i].2).fold(0.0, f64::max),
                unreachable: outs.iter().map(|o| o.per_k[i].1).sum(),
            });
        }
        let star = rows
            .iter()
            .filter(|r| r.n == n)
            .find(|r| r.agreement >= 1.0 - config.epsilon)
            .map(|r| r.k);
        k_star.push((n, star));
    }
    let found: Vec<(f64, f64)> = k_star
        .iter()
        .filter_map(|&(n, k)| k.map(|k| ((n / config.epsilon).ln(), k as f64)))
        .collect();
    let (c_hat, d_hat) = match found.len() {
        0 => (None, None),
        1 => (Some(found[0].1 / found[0].0), Some(0.0)),
        _ => {
            let (xs, ys): (Vec<f64>, Vec<f64>) = found.into_iter().unzip();
            match linear_fit(&xs, &ys) {
                Some((c, d)) => (Some(c), Some(d)),
                None => (None, None),
            }
        }
    };
    Ok(KnnReport {
        config: config.clone(),
        rows,
        k_star,
        c_hat,
        d_hat,
        monotonicity_violations: violations,
        timings: results.into_iter().map(|(_, t)| t).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn tasks_of(config: &ExperimentConfig) -> Vec<(f64, usize)> {
    config
        .schedule
        .iter()
        .flat_map(|&n| (0..config.reps).map(move |r| (n, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_capped() {
        assert_eq!(default_ks(10), vec![2, 3, 4, 5, 6, 8, 9]);
        let g = default_ks(1000);
        assert_eq!(*g.last().unwrap(), 104);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn full_graph_always_agrees() {
        let cfg = ExperimentConfig {
            schedule: vec![60.0],
            reps: 2,
            sources: 5,
            targets: 10,
            ks: Some(vec![1, 2, 4, 200]),
            ..ExperimentConfig::default()
        };
        let rep = run_knn_sufficiency(&cfg).unwrap();
        let last = rep.rows.last().unwrap();
        assert_eq!(last.agreement, 1.0);
        assert_eq!(rep.monotonicity_violations, 0);
        assert!(rep.rows.windows(2).all(|w| w[0].agreement <= w[1].agreement));
        assert_eq!(rep.table().rows.len(), 4);
    }

    #[test]
    fn small_run_finds_k_star() {
        let cfg = ExperimentConfig {
            schedule: vec![300.0, 1000.0],
            reps: 2,
            sources: 10,
            targets: 20,
            ..ExperimentConfig::default()
        };
        let rep = run_knn_sufficiency(&cfg).unwrap();
        assert!(rep.k_star_at(300.0).is_some());
        assert!(rep.k_star_at(1000.0).is_some());
        assert!(rep.c_hat.is_some());
        assert!(rep.fit_holds());
    }
}

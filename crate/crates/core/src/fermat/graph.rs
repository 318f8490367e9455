use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::check_threshold;
use super::search::{heap_dijkstra, ShortestPaths, Stop};
use super::{Alpha, DistanceMatrix, DistanceResult, FermatBall};
use crate::error::{Error, Result};
use crate::point::{FermatPath, SpatialIndex};

/// Edge orientation of a [`KnnGraph`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    /// `u -> v` iff `v` is among the `k` nearest neighbours of `u`.
    #[default]
    Directed,
    /// Union of both orientations.
    Undirected,
}

/// How to fold a possibly asymmetric all-pairs matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetrization {
    #[default]
    None,
    Min,
    Max,
}

/// k-nearest-neighbour graph with edge weights `|q - q'|^alpha`, stored as
/// CSR. Each adjacency list is sorted by increasing distance (ties by
/// lexicographic coordinates, then index).
#[derive(Clone, Debug)]
pub struct KnnGraph {
    n: usize,
    k: usize,
    alpha: Alpha,
    mode: GraphMode,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
}

impl KnnGraph {
    /// Builds the graph with `min(k, n - 1)` neighbours per particle.
    pub fn build(index: &SpatialIndex<'_>, alpha: Alpha, k: usize, mode: GraphMode) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "k must be at least 1"));
        }
        let cloud = index.cloud();
        let n = cloud.len();
        let k_eff = k.min(n - 1);
        let rows: Vec<Vec<(f64, usize)>> = (0..n)
            .into_par_iter()
            .map(|q| {
                if k_eff == 0 {
                    Ok(Vec::new())
                } else {
                    index.knn_with_sq_dist(q, k_eff)
                }
            })
            .collect::<Result<_>>()?;
        let rows = match mode {
            GraphMode::Directed => rows,
            GraphMode::Undirected => {
                let mut sym: Vec<Vec<(f64, usize)>> = rows.clone();
                for (u, row) in rows.iter().enumerate() {
                    for &(d2, v) in row {
                        sym[v].push((d2, u));
                    }
                }
                for (u, row) in sym.iter_mut().enumerate() {
                    row.sort_unstable_by(|&a, &b| crate::point::candidate_cmp(cloud, a, b));
                    row.dedup_by_key(|e| e.1);
                    debug_assert!(row.iter().all(|e| e.1 != u));
                }
                sym
            }
        };
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for (u, row) in rows.into_iter().enumerate() {
            for (d2, v) in row {
                let w = alpha.weight_sq(d2);
                if !w.is_finite() {
                    return Err(Error::NonFinite(format!("weight of edge {u} -> {v}")));
                }
                targets.push(v as u32);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        Ok(Self {
            n,
            k: k_eff,
            alpha,
            mode,
            offsets,
            targets,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Out-neighbours of `u` with weights, nearest first.
    pub fn neighbours(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.targets[r.clone()]
            .iter()
            .zip(&self.weights[r])
            .map(|(&v, &w)| (v as usize, w))
    }

    /// The graph for a smaller `k`, obtained by truncating sorted directed
    /// adjacency lists. Equal to building from scratch with `k`.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if self.mode != GraphMode::Directed {
            return Err(Error::param("k", "only directed graphs can be truncated"));
        }
        if k == 0 || k > self.k {
            return Err(Error::param("k", format!("need 1 <= k <= {}, got {k}", self.k)));
        }
        let mut offsets = Vec::with_capacity(self.n + 1);
        let mut targets = Vec::with_capacity(self.n * k);
        let mut weights = Vec::with_capacity(self.n * k);
        offsets.push(0);
        for u in 0..self.n {
            let s = self.offsets[u];
            targets.extend_from_slice(&self.targets[s..s + k]);
            weights.extend_from_slice(&self.weights[s..s + k]);
            offsets.push(targets.len());
        }
        Ok(Self {
            k,
            offsets,
            targets,
            weights,
            ..*self
        })
    }

    /// Same edges with orientation flipped. Adjacency of the result is sorted
    /// by source index, not distance.
    pub fn reversed(&self) -> Self {
        let mut counts = vec![0usize; self.n + 1];
        for &v in &self.targets {
            counts[v as usize + 1] += 1;
        }
        for i in 0..self.n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut targets = vec![0u32; self.targets.len()];
        let mut weights = vec![0.0; self.weights.len()];
        for u in 0..self.n {
            for (v, w) in self.neighbours(u) {
                let slot = fill[v];
                targets[slot] = u as u32;
                weights[slot] = w;
                fill[v] += 1;
            }
        }
        Self {
            offsets,
            targets,
            weights,
            ..*self
        }
    }

    fn check_cloud(&self, index: &SpatialIndex<'_>, alpha: Alpha) -> Result<()> {
        if index.cloud().len() != self.n {
            return Err(Error::param(
                "graph",
                format!("graph has {} nodes but the cloud has {}", self.n, index.cloud().len()),
            ));
        }
        if alpha != self.alpha {
            return Err(Error::param(
                "alpha",
                format!("graph was built with alpha {} but {} was requested", self.alpha.value(), alpha.value()),
            ));
        }
        Ok(())
    }
}

/// Binary-heap Dijkstra restricted to graph edges.
pub fn restricted_single_source(graph: &KnnGraph, source: usize, stop: Stop) -> Result<ShortestPaths> {
    if source >= graph.n {
        return Err(Error::param("source", format!("node {source} out of range")));
    }
    Ok(heap_dijkstra(graph.n, source, stop, |u, relax| {
        for (v, w) in graph.neighbours(u) {
            relax(v, w);
        }
    }))
}

/// Restricted distance between two particles.
pub fn restricted_distance_between(
    graph: &KnnGraph,
    index: &SpatialIndex<'_>,
    from: usize,
    to: usize,
) -> Result<DistanceResult> {
    let cloud = index.cloud();
    cloud.check_index(from)?;
    cloud.check_index(to)?;
    if from == to {
        return Ok(DistanceResult {
            distance: 0.0,
            path: FermatPath::single(from),
            scaled: None,
        });
    }
    let sp = restricted_single_source(graph, from, Stop::Target(to))?;
    let indices = sp.path_to(to).ok_or(Error::Unreachable { from, to })?;
    Ok(DistanceResult {
        distance: sp.dist[to],
        path: FermatPath::new(cloud, graph.alpha, indices)?,
        scaled: None,
    })
}

/// Shortest anchored path from `x` to `y` using only graph edges.
/// Returns [`Error::Unreachable`] when no such path exists.
pub fn restricted_distance(
    graph: &KnnGraph,
    index: &SpatialIndex<'_>,
    alpha: Alpha,
    x: &[f64],
    y: &[f64],
) -> Result<DistanceResult> {
    graph.check_cloud(index, alpha)?;
    let qx = index.nearest(x)?;
    let qy = index.nearest(y)?;
    restricted_distance_between(graph, index, qx, qy)
}

/// Fermat ball computed on the restricted graph.
pub fn restricted_ball(graph: &KnnGraph, index: &SpatialIndex<'_>, x: &[f64], t: f64) -> Result<FermatBall> {
    check_threshold(t)?;
    graph.check_cloud(index, graph.alpha)?;
    let center = index.nearest(x)?;
    let sp = restricted_single_source(graph, center, Stop::Threshold(t))?;
    Ok(FermatBall::from_paths(&sp, t))
}

/// All restricted distances; row `i` holds distances from particle `i`.
pub fn all_pairs_restricted(graph: &KnnGraph, symmetrization: Symmetrization) -> Result<DistanceMatrix> {
    let n = graph.n;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| restricted_single_source(graph, s, Stop::Never).map(|sp| sp.dist))
        .collect::<Result<_>>()?;
    let mut m = DistanceMatrix::from_rows(n, rows);
    if symmetrization != Symmetrization::None {
        let mut data = m.data().to_vec();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                let v = match symmetrization {
                    Symmetrization::Min => a.min(b),
                    Symmetrization::Max => a.max(b),
                    Symmetrization::None => unreachable!(),
                };
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        m = DistanceMatrix::new(n, data)?;
    }
    Ok(m)
}

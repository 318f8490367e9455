use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::exact_single_source;
use super::graph::{restricted_single_source, GraphMode, KnnGraph};
use super::search::Stop;
use super::{Alpha, DistanceMatrix};
use crate::error::{Error, Result};
use crate::point::PointCloud;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Distances from every particle to each landmark, `n x m`.
#[derive(Clone, Debug)]
pub struct LandmarkTable {
    landmarks: Vec<usize>,
    n: usize,
    /// column-major: `data[l * n + q] = D(q, landmark l)`
    data: Vec<f64>,
}

impl LandmarkTable {
    /// Builds a table from per-landmark distance columns.
    pub fn from_columns(n: usize, landmarks: Vec<usize>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if landmarks.is_empty() {
            return Err(Error::param("landmarks", "at least one landmark is required"));
        }
        if columns.len() != landmarks.len() || columns.iter().any(|c| c.len() != n) {
            return Err(Error::param("landmarks", "one column of n distances per landmark"));
        }
        if let Some(&l) = landmarks.iter().find(|&&l| l >= n) {
            return Err(Error::param("landmarks", format!("landmark {l} out of range")));
        }
        Ok(Self {
            landmarks,
            n,
            data: columns.into_iter().flatten().collect(),
        })
    }

    /// Exact distances: one dense search per landmark.
    pub fn exact(cloud: &PointCloud, alpha: Alpha, landmarks: &[usize]) -> Result<Self> {
        let columns = landmarks
            .par_iter()
            .map(|&l| exact_single_source(cloud, alpha, l, Stop::Never).map(|sp| sp.dist))
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(cloud.len(), landmarks.to_vec(), columns)
    }

    /// Restricted distances. For a directed graph each entry is the minimum
    /// of the two orientations, `min(D^k(q, l), D^k(l, q))`.
    pub fn restricted(graph: &KnnGraph, landmarks: &[usize]) -> Result<Self> {
        let reversed = (graph.mode() == GraphMode::Directed).then(|| graph.reversed());
        let columns = landmarks
            .par_iter()
            .map(|&l| {
                let mut col = restricted_single_source(graph, l, Stop::Never)?.dist;
                if let Some(rev) = &reversed {
                    let back = restricted_single_source(rev, l, Stop::Never)?.dist;
                    for (a, b) in col.iter_mut().zip(back) {
                        *a = a.min(b);
                    }
                }
                Ok(col)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(graph.n(), landmarks.to_vec(), columns)
    }

    /// Columns taken from a full matrix (`matrix[l][q]`).
    pub fn from_matrix(matrix: &DistanceMatrix, landmarks: &[usize]) -> Result<Self> {
        let n = matrix.order();
        let columns = landmarks
            .iter()
            .map(|&l| {
                if l >= n {
                    Err(Error::param("landmarks", format!("landmark {l} out of range")))
                } else {
                    Ok(matrix.row(l).to_vec())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(n, landmarks.to_vec(), columns)
    }

    pub fn landmarks(&self) -> &[usize] {
        &self.landmarks
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, q: usize, l: usize) -> f64 {
        self.data[l * self.n + q]
    }
}

/// `max_l |D(i,l) - D(j,l)| <= D(i,j) <= min_l D(i,l) + D(j,l)`.
pub fn landmark_bounds(table: &LandmarkTable, i: usize, j: usize) -> Result<LandmarkBounds> {
    if i >= table.n || j >= table.n {
        return Err(Error::param("pair", format!("({i}, {j}) out of range")));
    }
    let mut lower: f64 = 0.0;
    let mut upper = f64::INFINITY;
    for l in 0..table.landmarks.len() {
        let (a, b) = (table.get(i, l), table.get(j, l));
        upper = upper.min(a + b);
        match (a.is_finite(), b.is_finite()) {
            (true, true) => lower = lower.max((a - b).abs()),
            // one side reaches the landmark and the other does not
            (true, false) | (false, true) => lower = f64::INFINITY,
            (false, false) => {}
        }
    }
    Ok(LandmarkBounds {
        lower: lower.min(upper),
        upper,
    })
}

/// `m` distinct particle indices drawn uniformly, sorted.
pub fn choose_landmarks(n: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m == 0 || m > n {
        return Err(Error::param("m", format!("need 1 <= m <= {n}, got {m}")));
    }
    let mut rng = crate::rng::stream(seed, "landmarks", &[n as u64, m as u64]);
    let mut v = sample(&mut rng, n, m).into_vec();
    v.sort_unstable();
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landmark_endpoint_is_tight() {
        let c = PointCloud::from_rows(vec![[0.0], [0.4], [1.0], [1.7]]).unwrap();
        let a = Alpha::new(2.0).unwrap();
        let t = LandmarkTable::exact(&c, a, &[2]).unwrap();
        let b = landmark_bounds(&t, 0, 2).unwrap();
        let exact = exact_single_source(&c, a, 0, Stop::Never).unwrap().dist[2];
        assert_eq!(b.lower, exact);
        assert_eq!(b.upper, exact);
    }

    #[test]
    fn empty_landmarks_rejected() {
        let c = PointCloud::from_rows(vec![[0.0], [1.0]]).unwrap();
        assert!(LandmarkTable::exact(&c, Alpha::new(2.0).unwrap(), &[]).is_err());
    }

    #[test]
    fn restricted_table_uses_both_orientations() {
        let c = PointCloud::from_rows(vec![[0.0], [0.5], [1.0]]).unwrap();
        let idx = crate::point::SpatialIndex::build(&c).unwrap();
        let a = Alpha::new(2.0).unwrap();
        let g = KnnGraph::build(&idx, a, 1, GraphMode::Directed).unwrap();
        // from landmark 0 particle 2 is unreachable, but 2 reaches 0
        let t = LandmarkTable::restricted(&g, &[0]).unwrap();
        assert_eq!(t.get(2, 0), 0.5);
    }

    #[test]
    fn landmark_choice_is_reproducible() {
        let a = choose_landmarks(100, 10, 3).unwrap();
        assert_eq!(a, choose_landmarks(100, 10, 3).unwrap());
        assert_eq!(a.len(), 10);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(choose_landmarks(5, 6, 0).is_err());
    }
}

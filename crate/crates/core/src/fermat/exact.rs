use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::search::{ShortestPaths, Stop, NO_PRED};
use super::{Alpha, DistanceMatrix, DistanceResult};
use crate::error::{Error, Result};
use crate::point::{FermatPath, PointCloud, SpatialIndex};

/// Dijkstra on the complete graph with weights `|q_i - q_j|^alpha`.
///
/// The complete graph is dense, so this is the array variant: each step scans
/// the unsettled particles once, relaxing them from the node just settled and
/// picking the next minimum in the same pass. O(n^2) time, O(n) memory.
/// Ties on the tentative distance go to the lowest index, and predecessors
/// change only on strict improvement.
pub fn exact_single_source(
    cloud: &PointCloud,
    alpha: Alpha,
    source: usize,
    stop: Stop,
) -> Result<ShortestPaths> {
    cloud.check_index(source)?;
    if let Stop::Target(t) = stop {
        cloud.check_index(t)?;
    }
    let n = cloud.len();
    let dim = cloud.dim();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NO_PRED; n];
    let mut settled = Vec::with_capacity(n);

    // Unsettled particles, struct-of-arrays so the scan is cache friendly.
    let mut open_idx: Vec<u32> = (0..n as u32).filter(|&i| i as usize != source).collect();
    let mut open_pts: Vec<f64> = Vec::with_capacity(open_idx.len() * dim);
    for &i in &open_idx {
        open_pts.extend_from_slice(cloud.point(i as usize));
    }
    let mut open_dist = vec![f64::INFINITY; open_idx.len()];
    let mut open_pred = vec![NO_PRED; open_idx.len()];

    let mut cur = source;
    let mut cur_dist = 0.0;
    let mut cur_pt = cloud.point(source).to_vec();
    loop {
        dist[cur] = cur_dist;
        settled.push(cur);
        if stop == Stop::Target(cur) || open_idx.is_empty() {
            break;
        }
        let mut best_pos = usize::MAX;
        let mut best_dist = f64::INFINITY;
        let mut best_idx = u32::MAX;
        for pos in 0..open_idx.len() {
            let p = &open_pts[pos * dim..(pos + 1) * dim];
            let d2: f64 = match dim {
                1 => (p[0] - cur_pt[0]) * (p[0] - cur_pt[0]),
                2 => {
                    let (dx, dy) = (p[0] - cur_pt[0], p[1] - cur_pt[1]);
                    dx * dx + dy * dy
                }
                _ => p.iter().zip(&cur_pt).map(|(a, b)| (a - b) * (a - b)).sum(),
            };
            let cand = cur_dist + alpha.weight_sq(d2);
            if cand < open_dist[pos] {
                open_dist[pos] = cand;
                open_pred[pos] = cur as u32;
            }
            let dv = open_dist[pos];
            if dv < best_dist || (dv == best_dist && open_idx[pos] < best_idx) {
                best_dist = dv;
                best_pos = pos;
                best_idx = open_idx[pos];
            }
        }
        if !best_dist.is_finite() {
            if best_pos != usize::MAX {
                return Err(Error::NonFinite(format!(
                    "path weight from particle {source} overflowed; alpha {} is too large for this cloud",
                    alpha.value()
                )));
            }
            break;
        }
        if let Stop::Threshold(t) = stop {
            if best_dist >= t {
                break;
            }
        }
        cur = best_idx as usize;
        cur_dist = best_dist;
        pred[cur] = open_pred[best_pos];
        cur_pt.copy_from_slice(&open_pts[best_pos * dim..(best_pos + 1) * dim]);
        open_idx.swap_remove(best_pos);
        open_dist.swap_remove(best_pos);
        open_pred.swap_remove(best_pos);
        let last = open_idx.len();
        if best_pos != last {
            open_pts.copy_within(last * dim..(last + 1) * dim, best_pos * dim);
        }
        open_pts.truncate(last * dim);
    }
    Ok(ShortestPaths::new(source, dist, pred, settled))
}

/// Exact sample Fermat distance between two particles.
pub fn exact_distance_between(
    cloud: &PointCloud,
    alpha: Alpha,
    from: usize,
    to: usize,
) -> Result<DistanceResult> {
    cloud.check_index(from)?;
    cloud.check_index(to)?;
    if from == to {
        return Ok(DistanceResult {
            distance: 0.0,
            path: FermatPath::single(from),
            scaled: None,
        });
    }
    let sp = exact_single_source(cloud, alpha, from, Stop::Target(to))?;
    let indices = sp
        .path_to(to)
        .ok_or(Error::Unreachable { from, to })?;
    let path = FermatPath::new(cloud, alpha, indices)?;
    Ok(DistanceResult {
        distance: sp.dist[to],
        path,
        scaled: None,
    })
}

/// Exact sample Fermat distance between two query points, anchored to their
/// nearest particles. Coinciding anchors give distance 0.
pub fn exact_distance(
    index: &SpatialIndex<'_>,
    alpha: Alpha,
    x: &[f64],
    y: &[f64],
) -> Result<DistanceResult> {
    let qx = index.nearest(x)?;
    let qy = index.nearest(y)?;
    exact_distance_between(index.cloud(), alpha, qx, qy)
}

/// Particles of a sample Fermat ball with their distances from the anchor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FermatBall {
    pub center: usize,
    /// `(particle, distance)` sorted by particle index.
    pub members: Vec<(usize, f64)>,
}

impl FermatBall {
    pub fn indices(&self) -> Vec<usize> {
        self.members.iter().map(|m| m.0).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub(crate) fn from_paths(sp: &ShortestPaths, t: f64) -> Self {
        let mut members: Vec<(usize, f64)> = sp
            .settled
            .iter()
            .map(|&v| (v, sp.dist[v]))
            .filter(|&(_, d)| d < t)
            .collect();
        members.sort_unstable_by_key(|m| m.0);
        Self {
            center: sp.source,
            members,
        }
    }
}

pub(crate) fn check_threshold(t: f64) -> Result<()> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::param("t", format!("threshold must be > 0, got {t}")));
    }
    Ok(())
}

/// All particles at exact distance `< t` from the anchor of `x`.
pub fn fermat_ball(index: &SpatialIndex<'_>, alpha: Alpha, x: &[f64], t: f64) -> Result<FermatBall> {
    check_threshold(t)?;
    let center = index.nearest(x)?;
    let sp = exact_single_source(index.cloud(), alpha, center, Stop::Threshold(t))?;
    Ok(FermatBall::from_paths(&sp, t))
}

/// Full exact distance matrix, one dense search per row.
pub fn all_pairs_exact(cloud: &PointCloud, alpha: Alpha) -> Result<DistanceMatrix> {
    let n = cloud.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| exact_single_source(cloud, alpha, s, Stop::Never).map(|sp| sp.dist))
        .collect::<Result<_>>()?;
    Ok(DistanceMatrix::from_rows(n, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::from_rows(xs.iter().map(|&x| [x])).unwrap()
    }

    #[test]
    fn alpha_two_takes_the_middle_stop() {
        let c = line(&[0.0, 0.5, 1.0]);
        let idx = SpatialIndex::build(&c).unwrap();
        let r = exact_distance(&idx, Alpha::new(2.0).unwrap(), &[0.0], &[1.0]).unwrap();
        assert_eq!(r.distance, 0.5);
        assert_eq!(r.path.indices(), &[0, 1, 2]);
        assert_eq!(r.distance, r.path.cost());
    }

    #[test]
    fn same_anchor_is_zero() {
        let c = line(&[0.0, 5.0]);
        let idx = SpatialIndex::build(&c).unwrap();
        let r = exact_distance(&idx, Alpha::new(3.0).unwrap(), &[0.1], &[-0.2]).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.path.indices(), &[0]);
    }

    #[test]
    fn dimension_mismatch() {
        let c = line(&[0.0, 5.0]);
        let idx = SpatialIndex::build(&c).unwrap();
        assert!(exact_distance(&idx, Alpha::new(2.0).unwrap(), &[0.1, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn ball_edge_cases() {
        let c = line(&[0.0, 0.3, 0.7, 1.5]);
        let idx = SpatialIndex::build(&c).unwrap();
        let a = Alpha::new(2.0).unwrap();
        let tiny = fermat_ball(&idx, a, &[0.0], 0.3 * 0.3 * 0.5).unwrap();
        assert_eq!(tiny.indices(), vec![0]);
        let all = fermat_ball(&idx, a, &[0.0], f64::INFINITY).unwrap();
        assert_eq!(all.indices(), vec![0, 1, 2, 3]);
        assert!(fermat_ball(&idx, a, &[0.0], 0.0).is_err());
    }

    #[test]
    fn collinear_matrix() {
        let c = line(&[0.0, 1.0, 3.0]);
        let m = all_pairs_exact(&c, Alpha::new(2.0).unwrap()).unwrap();
        assert_eq!(m.get(0, 2), 5.0);
        assert_eq!(m.get(2, 0), 5.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn overflow_is_reported() {
        let c = line(&[0.0, 1e10]);
        let err = exact_distance_between(&c, Alpha::new(64.0).unwrap(), 0, 1).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }
}

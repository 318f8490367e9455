use std::cmp::Ordering;

use super::cloud::{candidate_cmp, sq_dist, PointCloud};
use crate::error::{Error, Result};

/// Above this ambient dimension the index answers queries by linear scan.
pub const BRUTE_FORCE_DIM: usize = 16;

const LEAF_SIZE: usize = 12;

/// Exact nearest-neighbour index over a [`PointCloud`].
///
/// Results are identical to a brute-force scan ordered by
/// (distance, lexicographic coordinates, index). Queries take `&self` and
/// may run concurrently.
#[derive(Debug, Clone)]
pub struct SpatialIndex<'a> {
    cloud: &'a PointCloud,
    tree: Option<KdTree>,
}

#[derive(Debug, Clone)]
struct KdTree {
    perm: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Leaf { start: u32, end: u32 },
    Split { axis: u32, value: f64, left: u32, right: u32 },
}

impl<'a> SpatialIndex<'a> {
    /// Kd-tree for `dim <= 16`, linear scan above.
    pub fn build(cloud: &'a PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let tree = (cloud.dim() <= BRUTE_FORCE_DIM).then(|| KdTree::build(cloud));
        Ok(Self { cloud, tree })
    }

    /// Index that always scans; useful as a reference.
    pub fn build_brute(cloud: &'a PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(Self { cloud, tree: None })
    }

    pub fn cloud(&self) -> &'a PointCloud {
        self.cloud
    }

    pub fn is_tree(&self) -> bool {
        self.tree.is_some()
    }

    /// The Voronoi anchor `q(x)`: the particle closest to `x`.
    pub fn nearest(&self, x: &[f64]) -> Result<usize> {
        self.cloud.check_dim(x)?;
        Ok(self.search(x, 1, None)[0].1)
    }

    /// The `k` particles closest to an arbitrary point, as `(squared distance, index)`.
    pub fn knn_point(&self, x: &[f64], k: usize) -> Result<Vec<(f64, usize)>> {
        self.cloud.check_dim(x)?;
        if k == 0 || k > self.cloud.len() {
            return Err(Error::param(
                "k",
                format!("need 1 <= k <= {}, got {k}", self.cloud.len()),
            ));
        }
        Ok(self.search(x, k, None))
    }

    /// The `k` nearest particles of particle `q`, excluding `q` itself.
    pub fn knn(&self, q: usize, k: usize) -> Result<Vec<usize>> {
        Ok(self.knn_with_sq_dist(q, k)?.into_iter().map(|(_, i)| i).collect())
    }

    /// Like [`knn`](Self::knn) but also returns squared distances.
    pub fn knn_with_sq_dist(&self, q: usize, k: usize) -> Result<Vec<(f64, usize)>> {
        self.cloud.check_index(q)?;
        let n = self.cloud.len();
        if k == 0 || k >= n {
            return Err(Error::param(
                "k",
                format!("need 1 <= k <= n-1 = {}, got {k}", n.saturating_sub(1)),
            ));
        }
        Ok(self.search(self.cloud.point(q), k, Some(q)))
    }

    fn search(&self, x: &[f64], k: usize, exclude: Option<usize>) -> Vec<(f64, usize)> {
        let mut best = Best::new(self.cloud, k);
        match &self.tree {
            Some(tree) => tree.search(self.cloud, x, 0, exclude, &mut best),
            None => {
                let n = self.cloud.len();
                if 4 * k >= n {
                    let mut all: Vec<(f64, usize)> = (0..n)
                        .filter(|&i| Some(i) != exclude)
                        .map(|i| (sq_dist(x, self.cloud.point(i)), i))
                        .collect();
                    all.sort_unstable_by(|&a, &b| candidate_cmp(self.cloud, a, b));
                    all.truncate(k);
                    return all;
                }
                for i in 0..n {
                    if Some(i) != exclude {
                        best.offer(sq_dist(x, self.cloud.point(i)), i);
                    }
                }
            }
        }
        best.items
    }
}

/// Bounded sorted candidate list.
struct Best<'c> {
    cloud: &'c PointCloud,
    k: usize,
    items: Vec<(f64, usize)>,
}

impl<'c> Best<'c> {
    fn new(cloud: &'c PointCloud, k: usize) -> Self {
        Self {
            cloud,
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    fn worst(&self) -> f64 {
        if self.items.len() < self.k {
            f64::INFINITY
        } else {
            self.items[self.k - 1].0
        }
    }

    #[inline]
    fn offer(&mut self, d2: f64, i: usize) {
        if d2 > self.worst() {
            return;
        }
        let cand = (d2, i);
        let pos = self
            .items
            .partition_point(|&c| candidate_cmp(self.cloud, c, cand) == Ordering::Less);
        if pos >= self.k {
            return;
        }
        self.items.insert(pos, cand);
        self.items.truncate(self.k);
    }
}

impl KdTree {
    fn build(cloud: &PointCloud) -> Self {
        let mut tree = KdTree {
            perm: (0..cloud.len() as u32).collect(),
            nodes: Vec::new(),
        };
        tree.build_node(cloud, 0, cloud.len());
        tree
    }

    fn build_node(&mut self, cloud: &PointCloud, start: usize, end: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf {
            start: start as u32,
            end: end as u32,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let dim = cloud.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in &self.perm[start..end] {
            for (a, &c) in cloud.point(i as usize).iter().enumerate() {
                lo[a] = lo[a].min(c);
                hi[a] = hi[a].max(c);
            }
        }
        let (axis, spread) = (0..dim)
            .map(|a| (a, hi[a] - lo[a]))
            .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if spread <= 0.0 {
            // all coincident
            return id;
        }
        let mid = start + (end - start) / 2;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            cloud.point(a as usize)[axis]
                .total_cmp(&cloud.point(b as usize)[axis])
                .then(a.cmp(&b))
        });
        let value = cloud.point(self.perm[mid] as usize)[axis];
        let left = self.build_node(cloud, start, mid);
        let right = self.build_node(cloud, mid, end);
        self.nodes[id as usize] = Node::Split {
            axis: axis as u32,
            value,
            left,
            right,
        };
        id
    }

    fn search(
        &self,
        cloud: &PointCloud,
        x: &[f64],
        node: u32,
        exclude: Option<usize>,
        best: &mut Best<'_>,
    ) {
        match self.nodes[node as usize] {
            Node::Leaf { start, end } => {
                for &i in &self.perm[start as usize..end as usize] {
                    let i = i as usize;
                    if Some(i) != exclude {
                        best.offer(sq_dist(x, cloud.point(i)), i);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                // left holds coords <= value, right holds coords >= value
                let diff = x[axis as usize] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(cloud, x, near, exclude, best);
                if diff * diff <= best.worst() {
                    self.search(cloud, x, far, exclude, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, dim: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n * dim).map(|_| rng.random::<f64>()).collect();
        PointCloud::new(dim, coords).unwrap()
    }

    /// Full sort over every particle, independent of the index code paths.
    fn sorted_scan(cloud: &PointCloud, x: &[f64], exclude: Option<usize>) -> Vec<usize> {
        let mut all: Vec<usize> = (0..cloud.len()).filter(|&i| Some(i) != exclude).collect();
        all.sort_by(|&a, &b| {
            let da: f64 = x.iter().zip(cloud.point(a)).map(|(p, q)| (p - q) * (p - q)).sum();
            let db: f64 = x.iter().zip(cloud.point(b)).map(|(p, q)| (p - q) * (p - q)).sum();
            da.partial_cmp(&db)
                .unwrap()
                .then_with(|| super::super::lex_cmp(cloud.point(a), cloud.point(b)))
                .then(a.cmp(&b))
        });
        all
    }

    #[test]
    fn empty_cloud_rejected() {
        let c = PointCloud::empty(2).unwrap();
        assert!(matches!(SpatialIndex::build(&c), Err(Error::EmptyCloud)));
    }

    #[test]
    fn single_point_is_always_nearest() {
        let c = PointCloud::from_rows(vec![[0.3, 0.7]]).unwrap();
        let idx = SpatialIndex::build(&c).unwrap();
        assert_eq!(idx.nearest(&[100.0, -5.0]).unwrap(), 0);
    }

    #[test]
    fn strictly_closer_point_wins() {
        let c = PointCloud::from_rows(vec![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let idx = SpatialIndex::build(&c).unwrap();
        assert_eq!(idx.nearest(&[0.4, 0.0]).unwrap(), 0);
    }

    #[test]
    fn anchor_tie_breaks_lexicographically() {
        let c = PointCloud::from_rows(vec![[2.0, 0.0], [0.0, 0.0]]).unwrap();
        let idx = SpatialIndex::build(&c).unwrap();
        assert_eq!(idx.nearest(&[1.0, 0.0]).unwrap(), 1);
        assert_eq!(idx.nearest(&[0.1, 0.0]).unwrap(), 1);
        assert_eq!(idx.nearest(&[2.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn anchor_dimension_mismatch() {
        let c = PointCloud::from_rows(vec![[0.0, 0.0]]).unwrap();
        let idx = SpatialIndex::build(&c).unwrap();
        assert!(matches!(
            idx.nearest(&[0.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn knn_collinear() {
        let c = PointCloud::from_rows(vec![[0.0], [1.0], [3.0]]).unwrap();
        let idx = SpatialIndex::build(&c).unwrap();
        assert_eq!(idx.knn(0, 2).unwrap(), vec![1, 2]);
        assert!(idx.knn(0, 3).is_err());
        assert!(idx.knn(0, 0).is_err());
    }

    #[test]
    fn knn_tie_prefers_lexicographically_smaller() {
        let c = PointCloud::from_rows(vec![[0.0], [0.5], [1.0]]).unwrap();
        let idx = SpatialIndex::build(&c).unwrap();
        assert_eq!(idx.knn(1, 1).unwrap(), vec![0]);
        assert_eq!(idx.knn(1, 2).unwrap(), vec![0, 2]);
    }

    #[test]
    fn duplicates_ordered_by_index() {
        let c = PointCloud::from_rows(vec![[1.0, 1.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        let idx = SpatialIndex::build(&c).unwrap();
        assert_eq!(idx.knn(2, 3).unwrap(), vec![0, 3, 1]);
        assert_eq!(idx.nearest(&[1.0, 1.0]).unwrap(), 0);
    }

    #[test]
    fn tree_matches_scan_2d() {
        let c = random_cloud(100, 2, 11);
        let idx = SpatialIndex::build(&c).unwrap();
        assert!(idx.is_tree());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let got: Vec<usize> = idx.knn_point(&x, 5).unwrap().iter().map(|p| p.1).collect();
            assert_eq!(got, sorted_scan(&c, &x, None)[..5]);
        }
    }

    #[test]
    fn knn_matches_full_sort_3d() {
        let c = random_cloud(200, 3, 3);
        let idx = SpatialIndex::build(&c).unwrap();
        for q in 0..c.len() {
            assert_eq!(idx.knn(q, 10).unwrap(), sorted_scan(&c, c.point(q), Some(q))[..10]);
        }
    }

    #[test]
    fn exhaustive_k_lists_everything() {
        let c = random_cloud(40, 2, 9);
        let idx = SpatialIndex::build(&c).unwrap();
        assert_eq!(idx.knn(7, 39).unwrap(), sorted_scan(&c, c.point(7), Some(7)));
    }

    #[test]
    fn grid_ties_match_scan() {
        // lattice points produce many exact distance ties
        let rows: Vec<[f64; 2]> = (0..15)
            .flat_map(|i| (0..15).map(move |j| [i as f64, j as f64]))
            .collect();
        let c = PointCloud::from_rows(rows).unwrap();
        let idx = SpatialIndex::build(&c).unwrap();
        for q in [0, 17, 112, 224] {
            assert_eq!(idx.knn(q, 20).unwrap(), sorted_scan(&c, c.point(q), Some(q))[..20]);
        }
    }

    #[test]
    fn high_dimension_uses_scan() {
        let c = random_cloud(60, 20, 1);
        let idx = SpatialIndex::build(&c).unwrap();
        assert!(!idx.is_tree());
        assert_eq!(idx.knn(3, 6).unwrap(), sorted_scan(&c, c.point(3), Some(3))[..6]);
    }
}

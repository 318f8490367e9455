use serde::{Deserialize, Serialize};

use super::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::fermat::Alpha;

/// An ordered chain of particles with its power-weighted cost and arc length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FermatPath {
    indices: Vec<usize>,
    cost: f64,
    arc_length: f64,
}

impl FermatPath {
    /// Validates the chain and computes cost and arc length, summing hops in
    /// order from the first particle.
    pub fn new(cloud: &PointCloud, alpha: Alpha, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::param("path", "a path holds at least one particle"));
        }
        for &i in &indices {
            cloud.check_index(i)?;
        }
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::param(
                "path",
                format!("particle {} repeated consecutively", w[0]),
            ));
        }
        let (mut cost, mut arc_length) = (0.0, 0.0);
        for w in indices.windows(2) {
            let d2 = cloud.sq_dist(w[0], w[1]);
            cost += alpha.weight_sq(d2);
            arc_length += d2.sqrt();
        }
        Ok(Self {
            indices,
            cost,
            arc_length,
        })
    }

    pub fn single(index: usize) -> Self {
        Self {
            indices: vec![index],
            cost: 0.0,
            arc_length: 0.0,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn arc_length(&self) -> f64 {
        self.arc_length
    }

    pub fn first(&self) -> usize {
        self.indices[0]
    }

    pub fn last(&self) -> usize {
        *self.indices.last().unwrap()
    }

    /// Number of hops, `K - 1`.
    pub fn hops(&self) -> usize {
        self.indices.len() - 1
    }

    /// Vertex coordinates of the polygonal path.
    pub fn polyline(&self, cloud: &PointCloud) -> Vec<Vec<f64>> {
        self.indices.iter().map(|&i| cloud.point(i).to_vec()).collect()
    }
}

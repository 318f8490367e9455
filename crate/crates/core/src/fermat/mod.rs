//! Discrete Fermat distances on a particle cloud.
//!
//! * [`exact_distance`]: shortest power-weighted chain on the complete graph.
//! * [`restricted_distance`] / [`all_pairs_restricted`]: the same problem
//!   where every hop must go to one of the `k` nearest neighbours of the
//!   current particle ([`KnnGraph`]).
//! * [`landmark_bounds`]: triangle-inequality sandwich from a landmark table.
//! * [`fermat_ball`]: sublevel sets of the distance from a query point.

mod exact;
mod graph;
mod landmarks;
mod matrix;
pub(crate) mod search;

use serde::{Deserialize, Serialize};

pub use exact::{
    all_pairs_exact, exact_distance, exact_distance_between, exact_single_source, fermat_ball,
    FermatBall,
};
pub use graph::{
    all_pairs_restricted, restricted_ball, restricted_distance, restricted_distance_between,
    restricted_single_source, GraphMode, KnnGraph, Symmetrization,
};
pub use landmarks::{choose_landmarks, landmark_bounds, LandmarkBounds, LandmarkTable};
pub use matrix::DistanceMatrix;
pub use search::{ShortestPaths, Stop};

use crate::error::{Error, Result};
use crate::point::{FermatPath, PointCloud};

/// Power applied to hop lengths, `alpha >= 1`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub const MAX: f64 = 64.0;

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 1.0 {
            return Err(Error::param("alpha", format!("must be >= 1, got {value}")));
        }
        if value > Self::MAX {
            return Err(Error::param(
                "alpha",
                format!("values above {} are not supported, got {value}", Self::MAX),
            ));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `gap^alpha`.
    #[inline]
    pub fn weight(self, gap: f64) -> f64 {
        self.weight_sq(gap * gap)
    }

    /// `gap^alpha` from the squared gap.
    #[inline]
    pub fn weight_sq(self, d2: f64) -> f64 {
        match self.0 {
            a if a == 1.0 => d2.sqrt(),
            a if a == 2.0 => d2,
            a if a == 3.0 => d2 * d2.sqrt(),
            a if a == 4.0 => d2 * d2,
            a => d2.powf(0.5 * a),
        }
    }

    /// Scaling exponent `(alpha - 1) / d` for intrinsic dimension `d`.
    pub fn beta(self, intrinsic_dim: usize) -> f64 {
        (self.0 - 1.0) / intrinsic_dim as f64
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

/// Distance between two query points together with one optimal chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub distance: f64,
    pub path: FermatPath,
    /// `n^beta * distance` when a scale was requested.
    pub scaled: Option<f64>,
}

impl DistanceResult {
    pub fn with_scale(mut self, n: f64, beta: f64) -> Self {
        self.scaled = Some(n.powf(beta) * self.distance);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathStatistics {
    pub arc_length: f64,
    pub hop_count: usize,
    pub max_gap: f64,
}

pub fn path_statistics(path: &FermatPath, cloud: &PointCloud) -> PathStatistics {
    let max_gap = path
        .indices()
        .windows(2)
        .map(|w| cloud.dist(w[0], w[1]))
        .fold(0.0, f64::max);
    PathStatistics {
        arc_length: path.arc_length(),
        hop_count: path.hops(),
        max_gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_validation() {
        assert!(Alpha::new(0.99).is_err());
        assert!(Alpha::new(f64::NAN).is_err());
        assert!(Alpha::new(65.0).is_err());
        assert!(Alpha::new(1.0).is_ok());
        assert!(serde_json::from_str::<Alpha>("0.5").is_err());
        assert_eq!(serde_json::from_str::<Alpha>("2.5").unwrap().value(), 2.5);
    }

    #[test]
    fn weights_match_powf() {
        for a in [1.0, 1.5, 2.0, 3.0, 4.0, 7.25, 64.0] {
            let alpha = Alpha::new(a).unwrap();
            for g in [0.0, 1e-3, 0.37, 1.0, 2.9] {
                let expect = f64::powf(g, a);
                let got = alpha.weight(g);
                assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1e-300), "{a} {g}");
            }
        }
    }

    #[test]
    fn beta_formula() {
        assert_eq!(Alpha::new(2.0).unwrap().beta(2), 0.5);
        assert_eq!(Alpha::new(4.0).unwrap().beta(3), 1.0);
        assert_eq!(Alpha::new(1.0).unwrap().beta(5), 0.0);
    }

    #[test]
    fn statistics_of_short_paths() {
        let c = PointCloud::from_rows(vec![[0.0], [0.5], [1.0]]).unwrap();
        let a = Alpha::new(2.0).unwrap();
        let single = path_statistics(&FermatPath::single(1), &c);
        assert_eq!((single.arc_length, single.hop_count, single.max_gap), (0.0, 0, 0.0));
        let p = FermatPath::new(&c, a, vec![0, 1, 2]).unwrap();
        let s = path_statistics(&p, &c);
        assert_eq!((s.arc_length, s.hop_count, s.max_gap), (1.0, 2, 0.5));
    }
}

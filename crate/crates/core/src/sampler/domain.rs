use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bounded region `S` of `R^d` with a membership test.
///
/// Membership is tested on the closure; the boundary has measure zero, so
/// this does not affect sampling, and it lets lattice nodes on the boundary
/// take part in the continuum oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    /// Axis-aligned box `[lo, hi]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
}

impl DomainSpec {
    pub fn unit_cube(dim: usize) -> Self {
        DomainSpec::Box {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DomainSpec::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(Error::param("domain", "box needs lo and hi of equal, positive length"));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
                    return Err(Error::param("domain", "box needs finite lo < hi on every axis"));
                }
            }
            DomainSpec::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::param("domain", "ball needs a finite, non-empty center"));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::param("domain", "ball radius must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Box { lo, .. } => lo.len(),
            DomainSpec::Ball { center, .. } => center.len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match self {
            DomainSpec::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b),
            DomainSpec::Ball { center, radius } => {
                crate::point::sq_dist(x, center) <= radius * radius
            }
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            DomainSpec::Box { lo, hi } => (lo.clone(), hi.clone()),
            DomainSpec::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    pub fn bounding_volume(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter().zip(&hi).map(|(a, b)| b - a).product()
    }
}

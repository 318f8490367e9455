use std::cmp::Ordering;

use crate::error::{Error, Result};

/// A finite set of particles in `R^D`, stored row-major.
///
/// Particle indices are fixed at construction; nothing reorders them.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from flat row-major coordinates.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "ambient dimension must be at least 1"));
        }
        if coords.len() % dim != 0 {
            return Err(Error::param(
                "coords",
                format!("length {} is not a multiple of dimension {dim}", coords.len()),
            ));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!(
                "coordinate {} of particle {}",
                pos % dim,
                pos / dim
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: impl IntoIterator<Item = R>) -> Result<Self> {
        let mut dim = None;
        let mut coords = Vec::new();
        for (row_idx, row) in rows.into_iter().enumerate() {
            let row = row.as_ref();
            let d = *dim.get_or_insert(row.len());
            if row.len() != d {
                return Err(Error::Parse {
                    row: row_idx,
                    reason: format!("expected {d} columns, found {}", row.len()),
                });
            }
            coords.extend_from_slice(row);
        }
        match dim {
            None => Err(Error::EmptyCloud),
            Some(d) => Self::new(d, coords),
        }
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    #[inline]
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.point(i), self.point(j))
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.sq_dist(i, j).sqrt()
    }

    /// Returns a new cloud with `p` appended as the last particle.
    pub fn with_point(&self, p: &[f64]) -> Result<Self> {
        self.check_dim(p)?;
        let mut coords = self.coords.clone();
        coords.extend_from_slice(p);
        Self::new(self.dim, coords)
    }

    /// Applies `map` to every coordinate.
    pub fn map_coords(&self, map: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.dim, self.coords.iter().map(|&c| map(c)).collect())
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::param(
                "index",
                format!("particle {i} out of range for a cloud of {}", self.len()),
            ));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lexicographic order on coordinates.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            ord => return ord,
        }
    }
    a.len().cmp(&b.len())
}

/// Candidate order used by every neighbour query: squared distance, then
/// lexicographic coordinates, then index.
#[inline]
pub(crate) fn candidate_cmp(cloud: &PointCloud, a: (f64, usize), b: (f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then_with(|| lex_cmp(cloud.point(a.1), cloud.point(b.1)))
        .then(a.1.cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_rejected() {
        let err = PointCloud::from_rows(vec![vec![0.0, 1.0], vec![2.0]]).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(PointCloud::new(2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn no_rows_is_empty_error() {
        let rows: Vec<Vec<f64>> = vec![];
        assert!(matches!(PointCloud::from_rows(rows), Err(Error::EmptyCloud)));
    }

    #[test]
    fn with_point_keeps_indices() {
        let c = PointCloud::from_rows(vec![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let c2 = c.with_point(&[5.0, 5.0]).unwrap();
        assert_eq!(c2.point(0), c.point(0));
        assert_eq!(c2.point(1), c.point(1));
        assert_eq!(c2.point(2), &[5.0, 5.0]);
    }

    #[test]
    fn lexicographic_order() {
        assert_eq!(lex_cmp(&[0.0, 1.0], &[0.0, 2.0]), Ordering::Less);
        assert_eq!(lex_cmp(&[1.0, 0.0], &[0.0, 2.0]), Ordering::Greater);
        assert_eq!(lex_cmp(&[1.0, 2.0], &[1.0, 2.0]), Ordering::Equal);
    }
}

//! Geometric primitives: point clouds, the exact spatial index, Voronoi
//! anchoring, k-nearest neighbours, particle paths and the curve metric.

mod cloud;
mod curve;
mod index;
mod path;

pub use cloud::{lex_cmp, PointCloud};
pub(crate) use cloud::{candidate_cmp, sq_dist};
pub use curve::{curve_distance, resample_polyline, CurveMetricValue, DEFAULT_CURVE_RESOLUTION};
pub use index::{SpatialIndex, BRUTE_FORCE_DIM};
pub use path::FermatPath;

/// Free-function form of [`SpatialIndex::nearest`].
pub fn voronoi_anchor(index: &SpatialIndex<'_>, x: &[f64]) -> crate::Result<usize> {
    index.nearest(x)
}

/// Free-function form of [`SpatialIndex::knn`].
pub fn knn(index: &SpatialIndex<'_>, q_index: usize, k: usize) -> crate::Result<Vec<usize>> {
    index.knn(q_index, k)
}

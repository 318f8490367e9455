use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CURVE_RESOLUTION: usize = 256;

/// Discretized distance between two curves, minimized over parametrizations.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CurveMetricValue(pub f64);

impl CurveMetricValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Resamples a polyline at `count` points evenly spaced in arc length.
///
/// A polyline of zero length collapses to `count` copies of its first vertex.
pub fn resample_polyline<P: AsRef<[f64]>>(poly: &[P], count: usize) -> Result<Vec<Vec<f64>>> {
    let first = poly
        .first()
        .ok_or_else(|| Error::param("polyline", "a polyline needs at least one vertex"))?
        .as_ref();
    let dim = first.len();
    if let Some(bad) = poly.iter().position(|p| p.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: poly[bad].as_ref().len(),
        });
    }
    if count < 2 {
        return Err(Error::param("resolution", "resolution must be at least 2"));
    }
    let mut cumulative = Vec::with_capacity(poly.len());
    let mut total = 0.0;
    cumulative.push(0.0);
    for w in poly.windows(2) {
        let (a, b) = (w[0].as_ref(), w[1].as_ref());
        total += a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        cumulative.push(total);
    }
    if total == 0.0 {
        return Ok(vec![first.to_vec(); count]);
    }
    let last = poly.len() - 1;
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for s in 0..count {
        if s + 1 == count {
            out.push(poly[last].as_ref().to_vec());
            break;
        }
        let target = total * s as f64 / (count - 1) as f64;
        while seg + 1 < last && cumulative[seg + 1] < target {
            seg += 1;
        }
        let (s0, s1) = (cumulative[seg], cumulative[seg + 1]);
        let (a, b) = (poly[seg].as_ref(), poly[seg + 1].as_ref());
        let t = if s1 > s0 {
            ((target - s0) / (s1 - s0)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect());
    }
    Ok(out)
}

fn discrete_frechet(a: &[Vec<f64>], b: &[Vec<f64>], reverse_b: bool) -> f64 {
    let m = b.len();
    let bj = |j: usize| if reverse_b { &b[m - 1 - j] } else { &b[j] };
    let d = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, ai) in a.iter().enumerate() {
        for j in 0..m {
            let dij = d(ai, bj(j));
            cur[j] = match (i, j) {
                (0, 0) => dij,
                (0, _) => cur[j - 1].max(dij),
                (_, 0) => prev[0].max(dij),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(dij),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// Discrete Fréchet distance between arc-length resamplings of two
/// polylines, minimized over both orientations of the second curve.
pub fn curve_distance<P: AsRef<[f64]>, Q: AsRef<[f64]>>(
    gamma1: &[P],
    gamma2: &[Q],
    resolution: usize,
) -> Result<CurveMetricValue> {
    let a = resample_polyline(gamma1, resolution)?;
    let b = resample_polyline(gamma2, resolution)?;
    if a[0].len() != b[0].len() {
        return Err(Error::DimensionMismatch {
            expected: a[0].len(),
            got: b[0].len(),
        });
    }
    let forward = discrete_frechet(&a, &b, false);
    let backward = discrete_frechet(&a, &b, true);
    Ok(CurveMetricValue(forward.min(backward)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_curves() {
        let c = vec![vec![0.0, 0.0], vec![0.3, 0.9], vec![1.0, 1.0]];
        assert_eq!(curve_distance(&c, &c, 64).unwrap().value(), 0.0);
    }

    #[test]
    fn parallel_segments() {
        let a = vec![[0.0, 0.0], [1.0, 0.0]];
        let b = vec![[0.0, 1.0], [1.0, 1.0]];
        assert!((curve_distance(&a, &b, 256).unwrap().value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversal_is_free() {
        let a = vec![[0.0, 0.0], [1.0, 0.0]];
        let b = vec![[1.0, 0.0], [0.0, 0.0]];
        assert!(curve_distance(&a, &b, 256).unwrap().value() < 1e-15);
    }

    #[test]
    fn single_vertex_and_errors() {
        let a = vec![[0.0, 0.0]];
        let b = vec![[3.0, 4.0]];
        assert_eq!(curve_distance(&a, &b, 8).unwrap().value(), 5.0);
        let empty: Vec<[f64; 2]> = vec![];
        assert!(curve_distance(&empty, &b, 8).is_err());
        assert!(curve_distance(&a, &b, 1).is_err());
    }

    #[test]
    fn resampling_is_uniform_in_arc_length() {
        let poly = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 3.0]];
        let r = resample_polyline(&poly, 5).unwrap();
        assert_eq!(r[0], vec![0.0, 0.0]);
        assert_eq!(r[1], vec![1.0, 0.0]);
        assert_eq!(r[2], vec![1.0, 1.0]);
        assert_eq!(r[4], vec![1.0, 3.0]);
    }

    #[test]
    fn resolution_error_shrinks() {
        // V-shaped curve vs its chord: true distance is the apex height 0.5
        let a = vec![[0.0, 0.0], [0.5, 0.5], [1.0, 0.0]];
        let b = vec![[0.0, 0.0], [1.0, 0.0]];
        let coarse = (curve_distance(&a, &b, 8).unwrap().value() - 0.5).abs();
        let fine = (curve_distance(&a, &b, 512).unwrap().value() - 0.5).abs();
        assert!(fine <= coarse);
        assert!(fine < 0.01);
    }

    fn poly_strategy() -> impl Strategy<Value = Vec<[f64; 2]>> {
        prop::collection::vec([-1.0..1.0f64, -1.0..1.0f64], 1..6)
    }

    proptest! {
        #[test]
        fn symmetric_exactly(a in poly_strategy(), b in poly_strategy()) {
            let ab = curve_distance(&a, &b, 32).unwrap();
            let ba = curve_distance(&b, &a, 32).unwrap();
            prop_assert_eq!(ab, ba);
        }

        #[test]
        fn triangle_inequality(a in poly_strategy(), b in poly_strategy(), c in poly_strategy()) {
            let ac = curve_distance(&a, &c, 32).unwrap().value();
            let ab = curve_distance(&a, &b, 32).unwrap().value();
            let bc = curve_distance(&b, &c, 32).unwrap().value();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}

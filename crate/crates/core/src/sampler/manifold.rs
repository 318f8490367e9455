use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DomainSpec;
use crate::error::{Error, Result};

/// Isometric charts `phi: S subset R^d -> R^D` from the catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    /// `phi = id` on `domain`.
    Identity { domain: DomainSpec },
    /// Archimedean spiral `r(theta) = a + b theta` rolled along `z`, with the
    /// first chart coordinate equal to arc length along the spiral:
    /// `phi(u, v) = (r cos theta(u), v, r sin theta(u))`.
    SwissRoll {
        #[serde(default = "roll_a")]
        a: f64,
        #[serde(default = "roll_b")]
        b: f64,
        #[serde(default = "roll_length")]
        length: f64,
        #[serde(default = "roll_width")]
        width: f64,
    },
    /// `[lo, hi]^2` placed in `R^3` by a rotation and translation.
    RotatedPlane {
        #[serde(default = "plane_lo")]
        lo: Vec<f64>,
        #[serde(default = "plane_hi")]
        hi: Vec<f64>,
        /// Euler angles (z, y, x), radians.
        #[serde(default = "plane_angles")]
        angles: [f64; 3],
        #[serde(default = "plane_offset")]
        offset: [f64; 3],
    },
}

fn roll_a() -> f64 {
    0.2
}
fn roll_b() -> f64 {
    0.04
}
fn roll_length() -> f64 {
    2.0
}
fn roll_width() -> f64 {
    0.5
}
fn plane_lo() -> Vec<f64> {
    vec![0.0, 0.0]
}
fn plane_hi() -> Vec<f64> {
    vec![1.0, 1.0]
}
fn plane_angles() -> [f64; 3] {
    [0.3, 0.5, 0.7]
}
fn plane_offset() -> [f64; 3] {
    [0.1, -0.2, 0.3]
}

/// Arc length of `r = a + b theta` from 0 to `theta`.
fn spiral_arc_length(a: f64, b: f64, theta: f64) -> f64 {
    let prim = |rho: f64| {
        let h = (rho * rho + b * b).sqrt();
        (rho * h + b * b * (rho + h).ln()) / (2.0 * b)
    };
    prim(a + b * theta) - prim(a)
}

fn spiral_angle(a: f64, b: f64, s: f64) -> f64 {
    // Newton on s(theta) - s; ds/dtheta = sqrt(r^2 + b^2) >= a > 0
    let mut theta = s / a.max(1e-12);
    theta = theta.min(s / (a + b * theta).max(1e-12));
    for _ in 0..100 {
        let r = a + b * theta;
        let step = (spiral_arc_length(a, b, theta) - s) / (r * r + b * b).sqrt();
        theta -= step;
        if step.abs() <= 1e-15 * theta.abs().max(1.0) {
            break;
        }
    }
    theta
}

fn rotation(angles: [f64; 3]) -> [[f64; 3]; 3] {
    let (sz, cz) = angles[0].sin_cos();
    let (sy, cy) = angles[1].sin_cos();
    let (sx, cx) = angles[2].sin_cos();
    let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
    let mul = |p: [[f64; 3]; 3], q: [[f64; 3]; 3]| {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| p[i][k] * q[k][j]).sum();
            }
        }
        m
    };
    mul(mul(rz, ry), rx)
}

impl ManifoldSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.starts_with('{') {
            Ok(serde_json::from_str(text)?)
        } else {
            Ok(serde_json::from_value(serde_json::json!({ "type": text }))?)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldSpec::Identity { domain } => domain.validate(),
            ManifoldSpec::SwissRoll { a, b, length, width } => {
                for (name, v) in [("a", a), ("b", b), ("length", length), ("width", width)] {
                    if !(v.is_finite() && *v > 0.0) {
                        return Err(Error::param(name, "must be positive"));
                    }
                }
                Ok(())
            }
            ManifoldSpec::RotatedPlane { lo, hi, .. } => {
                if lo.len() != 2 || hi.len() != 2 {
                    return Err(Error::param("lo", "rotated plane charts are 2-dimensional"));
                }
                self.parameter_domain().validate()
            }
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            ManifoldSpec::Identity { domain } => domain.dim(),
            _ => 2,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldSpec::Identity { domain } => domain.dim(),
            _ => 3,
        }
    }

    pub fn parameter_domain(&self) -> DomainSpec {
        match self {
            ManifoldSpec::Identity { domain } => domain.clone(),
            ManifoldSpec::SwissRoll { length, width, .. } => DomainSpec::Box {
                lo: vec![0.0, 0.0],
                hi: vec![*length, *width],
            },
            ManifoldSpec::RotatedPlane { lo, hi, .. } => DomainSpec::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            },
        }
    }

    pub fn chart(&self, z: &[f64]) -> Vec<f64> {
        match self {
            ManifoldSpec::Identity { .. } => z.to_vec(),
            ManifoldSpec::SwissRoll { a, b, .. } => {
                let theta = spiral_angle(*a, *b, z[0]);
                let r = a + b * theta;
                vec![r * theta.cos(), z[1], r * theta.sin()]
            }
            ManifoldSpec::RotatedPlane { angles, offset, .. } => {
                let m = rotation(*angles);
                (0..3)
                    .map(|i| m[i][0] * z[0] + m[i][1] * z[1] + offset[i])
                    .collect()
            }
        }
    }

    /// Central-difference Jacobian `J` (D x d, row-major) at `z`.
    pub fn jacobian(&self, z: &[f64], step: f64) -> Vec<Vec<f64>> {
        let d = self.intrinsic_dim();
        let dd = self.ambient_dim();
        let mut jac = vec![vec![0.0; d]; dd];
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        for j in 0..d {
            zp[j] = z[j] + step;
            zm[j] = z[j] - step;
            let (p, m) = (self.chart(&zp), self.chart(&zm));
            for i in 0..dd {
                jac[i][j] = (p[i] - m[i]) / (2.0 * step);
            }
            zp[j] = z[j];
            zm[j] = z[j];
        }
        jac
    }

    /// Largest entry of `|J^T J - I|` over `samples` random interior
    /// parameter points. Errors if it exceeds `tol`.
    pub fn check_isometry(&self, samples: usize, tol: f64, seed: u64) -> Result<f64> {
        self.validate()?;
        let dom = self.parameter_domain();
        let (lo, hi) = dom.bounding_box();
        let d = self.intrinsic_dim();
        let step = 1e-5 * lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        let mut rng = crate::rng::stream(seed, "isometry", &[]);
        let mut worst: f64 = 0.0;
        let mut z = vec![0.0; d];
        let mut done = 0;
        let mut attempts = 0;
        while done < samples && attempts < 1000 * samples {
            attempts += 1;
            for a in 0..d {
                let margin = 2.0 * step;
                z[a] = rng.random_range(lo[a] + margin..hi[a] - margin);
            }
            if !dom.contains(&z) {
                continue;
            }
            done += 1;
            let jac = self.jacobian(&z, step);
            for p in 0..d {
                for q in 0..d {
                    let g: f64 = jac.iter().map(|row| row[p] * row[q]).sum();
                    let target = if p == q { 1.0 } else { 0.0 };
                    worst = worst.max((g - target).abs());
                }
            }
        }
        if worst > tol {
            return Err(Error::NotIsometric(format!(
                "max |J^T J - I| = {worst:e} exceeds {tol:e}"
            )));
        }
        Ok(worst)
    }
}

fn name_of(m: &ManifoldSpec) -> &'static str {
    match m {
        ManifoldSpec::Identity { .. } => "identity",
        ManifoldSpec::SwissRoll { .. } => "swiss_roll",
        ManifoldSpec::RotatedPlane { .. } => "rotated_plane",
    }
}

impl ManifoldSpec {
    pub fn name(&self) -> &'static str {
        name_of(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spiral_inversion() {
        for s in [0.0, 0.01, 0.7, 1.99] {
            let th = spiral_angle(0.2, 0.04, s);
            assert!((spiral_arc_length(0.2, 0.04, th) - s).abs() < 1e-13);
        }
    }

    #[test]
    fn swiss_roll_is_isometric() {
        let m = ManifoldSpec::parse("swiss_roll").unwrap();
        let err = m.check_isometry(100, 1e-6, 3).unwrap();
        assert!(err < 1e-6, "{err}");
        assert_eq!((m.intrinsic_dim(), m.ambient_dim()), (2, 3));
    }

    #[test]
    fn swiss_roll_layers_are_separated() {
        // consecutive turns of the roll sit 2 pi b apart
        let m = ManifoldSpec::parse("swiss_roll").unwrap();
        let ManifoldSpec::SwissRoll { a, b, .. } = m else { unreachable!() };
        let th = spiral_angle(a, b, 0.1);
        let s_next = spiral_arc_length(a, b, th + 2.0 * std::f64::consts::PI);
        if s_next < 2.0 {
            let p = m.chart(&[0.1, 0.0]);
            let q = m.chart(&[s_next, 0.0]);
            let gap = crate::point::sq_dist(&p, &q).sqrt();
            assert!((gap - 2.0 * std::f64::consts::PI * b).abs() < 1e-9);
        }
    }

    #[test]
    fn rotated_plane_preserves_distances() {
        let m = ManifoldSpec::parse("rotated_plane").unwrap();
        m.check_isometry(50, 1e-9, 1).unwrap();
        let (p, q) = ([0.1, 0.9], [0.8, 0.2]);
        let dp = crate::point::sq_dist(&m.chart(&p), &m.chart(&q)).sqrt();
        let dz = crate::point::sq_dist(&p, &q).sqrt();
        assert!((dp - dz).abs() < 1e-12);
    }

    #[test]
    fn invalid_roll_parameters() {
        let bad = ManifoldSpec::SwissRoll { a: -0.2, b: 0.04, length: 2.0, width: 0.5 };
        assert!(bad.check_isometry(10, 1e-6, 0).is_err());
        assert!(ManifoldSpec::parse(r#"{"type":"rotated_plane","lo":[0,0,0]}"#).unwrap().validate().is_err());
    }
}

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DomainSpec;
use crate::error::{Error, Result};

/// Catalog of densities with known bounds, selectable by name or JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// `f = value` everywhere.
    Uniform {
        #[serde(default = "one")]
        value: f64,
    },
    /// `f = a` where `x[axis] < split`, `f = b` elsewhere.
    TwoMedia {
        #[serde(default = "two_media_a")]
        a: f64,
        #[serde(default = "two_media_b")]
        b: f64,
        #[serde(default = "one_usize")]
        axis: usize,
        #[serde(default = "half")]
        split: f64,
    },
    /// `f = offset + slope . x`.
    Affine {
        #[serde(default = "one")]
        offset: f64,
        #[serde(default = "affine_slope")]
        slope: Vec<f64>,
    },
    /// `f = floor + peak * exp(-|x - center|^2 / (2 sigma^2))`.
    GaussBump {
        #[serde(default = "bump_center")]
        center: Vec<f64>,
        #[serde(default = "bump_sigma")]
        sigma: f64,
        #[serde(default = "bump_floor")]
        floor: f64,
        #[serde(default = "one")]
        peak: f64,
    },
    /// One-dimensional Gaussian mixture truncated to the domain and
    /// renormalized to a probability density.
    #[serde(rename = "gauss_mixture_1d")]
    GaussMixture1d {
        #[serde(default = "mixture_means")]
        means: Vec<f64>,
        #[serde(default = "mixture_sds")]
        sds: Vec<f64>,
        #[serde(default = "mixture_weights")]
        weights: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn half() -> f64 {
    0.5
}
fn two_media_a() -> f64 {
    0.4
}
fn two_media_b() -> f64 {
    1.6
}
fn affine_slope() -> Vec<f64> {
    vec![1.0, 0.0]
}
fn bump_center() -> Vec<f64> {
    vec![0.5, 0.6]
}
fn bump_sigma() -> f64 {
    0.15
}
fn bump_floor() -> f64 {
    0.2
}
fn mixture_means() -> Vec<f64> {
    vec![0.0, 10.0]
}
fn mixture_sds() -> Vec<f64> {
    vec![1.0, std::f64::consts::SQRT_2]
}
fn mixture_weights() -> Vec<f64> {
    vec![0.5, 0.5]
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A positive density or intensity on a domain, with bounds
/// `0 < lower <= f <= upper`.
#[derive(Clone)]
pub struct DensityField {
    name: String,
    spec: Option<DensitySpec>,
    domain: DomainSpec,
    lower: f64,
    upper: f64,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for DensityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityField")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

impl DensitySpec {
    /// Accepts either a JSON object or a bare catalog name with defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.starts_with('{') {
            Ok(serde_json::from_str(text)?)
        } else {
            Ok(serde_json::from_value(serde_json::json!({ "type": text }))?)
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DensitySpec::Uniform { .. } => "uniform",
            DensitySpec::TwoMedia { .. } => "two_media",
            DensitySpec::Affine { .. } => "affine",
            DensitySpec::GaussBump { .. } => "gauss_bump",
            DensitySpec::GaussMixture1d { .. } => "gauss_mixture_1d",
        }
    }

    /// Instantiates the density on `domain`, computing its bounds there.
    pub fn build(&self, domain: &DomainSpec) -> Result<DensityField> {
        domain.validate()?;
        let dim = domain.dim();
        let (lo, hi) = domain.bounding_box();
        let field = match self.clone() {
            DensitySpec::Uniform { value } => {
                positive("value", value)?;
                DensityField::new(self.name(), domain.clone(), value, value, move |_| value)
            }
            DensitySpec::TwoMedia { a, b, axis, split } => {
                positive("a", a)?;
                positive("b", b)?;
                if axis >= dim {
                    return Err(Error::param("axis", format!("axis {axis} >= dimension {dim}")));
                }
                DensityField::new(self.name(), domain.clone(), a.min(b), a.max(b), move |x| {
                    if x[axis] < split {
                        a
                    } else {
                        b
                    }
                })
            }
            DensitySpec::Affine { offset, slope } => {
                if slope.len() != dim {
                    return Err(Error::param("slope", format!("needs {dim} entries")));
                }
                let (mut fmin, mut fmax) = (offset, offset);
                for (a, s) in slope.iter().enumerate() {
                    let (u, v) = (s * lo[a], s * hi[a]);
                    fmin += u.min(v);
                    fmax += u.max(v);
                }
                if !(fmin > 0.0) {
                    return Err(Error::param("offset", format!("density reaches {fmin} <= 0 on the domain")));
                }
                DensityField::new(self.name(), domain.clone(), fmin, fmax, move |x| {
                    offset + x.iter().zip(&slope).map(|(a, b)| a * b).sum::<f64>()
                })
            }
            DensitySpec::GaussBump {
                center,
                sigma,
                floor,
                peak,
            } => {
                if center.len() != dim {
                    return Err(Error::param("center", format!("needs {dim} entries")));
                }
                positive("sigma", sigma)?;
                positive("floor", floor)?;
                if !(peak >= 0.0) {
                    return Err(Error::param("peak", "must be >= 0"));
                }
                let inv = 1.0 / (2.0 * sigma * sigma);
                DensityField::new(self.name(), domain.clone(), floor, floor + peak, move |x| {
                    floor + peak * (-crate::point::sq_dist(x, &center) * inv).exp()
                })
            }
            DensitySpec::GaussMixture1d { means, sds, weights } => {
                if dim != 1 {
                    return Err(Error::param("domain", "gauss_mixture_1d needs a 1-dimensional domain"));
                }
                if means.is_empty() || means.len() != sds.len() || means.len() != weights.len() {
                    return Err(Error::param("means", "means, sds and weights need equal, positive length"));
                }
                for &s in &sds {
                    positive("sds", s)?;
                }
                for &w in &weights {
                    positive("weights", w)?;
                }
                let total: f64 = weights.iter().sum();
                let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
                let (a, b) = (lo[0], hi[0]);
                let mass: f64 = (0..w.len())
                    .map(|i| {
                        w[i] * (std_normal_cdf((b - means[i]) / sds[i]) - std_normal_cdf((a - means[i]) / sds[i]))
                    })
                    .sum();
                // each component density peaks at 1/(sd sqrt(2 pi))
                let upper = w
                    .iter()
                    .zip(&sds)
                    .map(|(wt, s)| wt / (s * (2.0 * PI).sqrt()))
                    .sum::<f64>()
                    / mass;
                let eval = move |x: &[f64]| -> f64 {
                    let mut acc = 0.0;
                    for i in 0..w.len() {
                        let z = (x[0] - means[i]) / sds[i];
                        acc += w[i] * (-0.5 * z * z).exp() / (sds[i] * (2.0 * PI).sqrt());
                    }
                    acc / mass
                };
                let lower = (0..=20_000)
                    .map(|i| eval(&[a + (b - a) * i as f64 / 20_000.0]))
                    .fold(f64::INFINITY, f64::min)
                    * 0.99;
                if !(lower > 0.0) {
                    return Err(Error::param("means", "mixture density underflows to 0 on the domain"));
                }
                DensityField::new(self.name(), domain.clone(), lower, upper, eval)
            }
        };
        let mut field = field;
        field.spec = Some(self.clone());
        Ok(field)
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

impl DensityField {
    fn new(
        name: &str,
        domain: DomainSpec,
        lower: f64,
        upper: f64,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.to_string(),
            spec: None,
            domain,
            lower,
            upper,
            eval: Arc::new(eval),
        }
    }

    /// A user-supplied density. `lower` must be positive.
    pub fn custom(
        domain: DomainSpec,
        lower: f64,
        upper: f64,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        domain.validate()?;
        positive("lower_bound", lower)?;
        if !(upper.is_finite() && upper >= lower) {
            return Err(Error::param("upper_bound", "must be finite and >= lower_bound"));
        }
        Ok(Self::new("custom", domain, lower, upper, eval))
    }

    #[inline]
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The catalog entry this field was built from, if any.
    pub fn spec(&self) -> Option<&DensitySpec> {
        self.spec.as_ref()
    }

    /// `c * f`, with bounds scaled accordingly.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        positive("scale", c)?;
        let inner = self.eval.clone();
        Ok(Self {
            name: format!("{}*{c}", self.name),
            spec: None,
            domain: self.domain.clone(),
            lower: self.lower * c,
            upper: self.upper * c,
            eval: Arc::new(move |x| c * inner(x)),
        })
    }

    /// Spot-checks `lower <= f <= upper` at `samples` random points of the
    /// domain. Returns the first violation.
    pub fn check_bounds(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = crate::rng::stream(seed, "density-bounds", &[]);
        let (lo, hi) = self.domain.bounding_box();
        let mut x = vec![0.0; lo.len()];
        let mut checked = 0;
        let mut attempts = 0;
        while checked < samples && attempts < samples * 1000 {
            attempts += 1;
            for a in 0..x.len() {
                x[a] = rng.random_range(lo[a]..hi[a]);
            }
            if !self.domain.contains(&x) {
                continue;
            }
            checked += 1;
            let v = self.evaluate(&x);
            if !(v >= self.lower && v <= self.upper) {
                return Err(Error::EnvelopeViolated {
                    value: v,
                    at: x.clone(),
                    bound: if v > self.upper { self.upper } else { self.lower },
                });
            }
        }
        Ok(())
    }

    /// Midpoint-rule integral over the domain for `dim <= 3`.
    pub fn integrate(&self) -> Option<f64> {
        let dim = self.domain.dim();
        let cells = match dim {
            1 => 8192,
            2 => 400,
            3 => 64,
            _ => return None,
        };
        let (lo, hi) = self.domain.bounding_box();
        let widths: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / cells as f64).collect();
        let cell_volume: f64 = widths.iter().product();
        let total = (cells as usize).pow(dim as u32);
        let mut x = vec![0.0; dim];
        let mut sum = 0.0;
        for flat in 0..total {
            let mut rem = flat;
            for a in 0..dim {
                x[a] = lo[a] + (rem % cells as usize) as f64 * widths[a] + 0.5 * widths[a];
                rem /= cells as usize;
            }
            if self.domain.contains(&x) {
                sum += self.evaluate(&x);
            }
        }
        Some(sum * cell_volume)
    }
}

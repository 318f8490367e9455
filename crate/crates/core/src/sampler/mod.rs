//! Random inputs: Poisson point processes by thinning, i.i.d. samples by
//! rejection, and i.i.d. samples pushed through isometric charts.

mod density;
mod domain;
mod manifold;

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

pub use density::{DensityField, DensitySpec};
pub use domain::DomainSpec;
pub use manifold::ManifoldSpec;

use crate::error::{Error, Result};
use crate::point::PointCloud;
use crate::rng::StreamRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    PoissonHomogeneous,
    PoissonInhomogeneous,
    IidDensity,
    IidManifold,
}

/// A sampled cloud with everything needed to regenerate it.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub cloud: PointCloud,
    /// Intensity multiplier (Poisson) or sample count (i.i.d.).
    pub n_target: f64,
    pub seed: u64,
    pub provenance: Provenance,
    /// Chart-space points for manifold samples, index-aligned with `cloud`.
    pub parameter_cloud: Option<PointCloud>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    seed: u64,
    n_target: f64,
    provenance: Provenance,
    count: usize,
    dim: usize,
    parameter_file: Option<String>,
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn parameter_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".params.csv");
    PathBuf::from(s)
}

impl SampleBatch {
    /// Writes the cloud as CSV plus a `<file>.json` sidecar (and
    /// `<file>.params.csv` for manifold samples).
    pub fn save(&self, csv: &Path) -> Result<()> {
        crate::io::write_cloud_csv_file(&self.cloud, csv)?;
        let parameter_file = match &self.parameter_cloud {
            Some(p) => {
                let path = parameter_path(csv);
                crate::io::write_cloud_csv_file(p, &path)?;
                Some(path.file_name().unwrap().to_string_lossy().into_owned())
            }
            None => None,
        };
        let side = Sidecar {
            seed: self.seed,
            n_target: self.n_target,
            provenance: self.provenance,
            count: self.cloud.len(),
            dim: self.cloud.dim(),
            parameter_file,
        };
        std::fs::write(sidecar_path(csv), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(csv: &Path) -> Result<Self> {
        let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(csv))?)?;
        let cloud = if side.count == 0 {
            PointCloud::empty(side.dim)?
        } else {
            crate::io::read_cloud_csv_file(csv)?
        };
        if cloud.len() != side.count || cloud.dim() != side.dim {
            return Err(Error::Format("sidecar does not match the CSV contents".into()));
        }
        let parameter_cloud = match side.parameter_file {
            Some(name) => {
                let path = csv.parent().unwrap_or(Path::new(".")).join(name);
                Some(crate::io::read_cloud_csv_file(&path)?)
            }
            None => None,
        };
        Ok(Self {
            cloud,
            n_target: side.n_target,
            seed: side.seed,
            provenance: side.provenance,
            parameter_cloud,
        })
    }
}

fn uniform_in_box(rng: &mut StreamRng, lo: &[f64], hi: &[f64], out: &mut [f64]) {
    for a in 0..lo.len() {
        out[a] = lo[a] + (hi[a] - lo[a]) * rng.random::<f64>();
    }
}

fn check_density_dim(domain: &DomainSpec, density: &DensityField) -> Result<()> {
    domain.validate()?;
    if density.domain().dim() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: density.domain().dim(),
        });
    }
    Ok(())
}

/// Poisson point process on `domain` with intensity `n * f`.
///
/// Draws `N ~ Poisson(n * M_f * vol(box))` uniform points in the bounding
/// box and keeps each with probability `1[x in S] f(x) / M_f`.
pub fn sample_poisson(domain: &DomainSpec, intensity: &DensityField, n: f64, seed: u64) -> Result<SampleBatch> {
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::param("n", format!("must be positive, got {n}")));
    }
    check_density_dim(domain, intensity)?;
    let upper = intensity.upper_bound();
    let mean = n * upper * domain.bounding_volume();
    let mut rng = crate::rng::stream(seed, "poisson", &[]);
    let count = Poisson::new(mean)
        .map_err(|e| Error::param("n", format!("bad Poisson mean {mean}: {e}")))?
        .sample(&mut rng) as usize;
    let (lo, hi) = domain.bounding_box();
    let dim = domain.dim();
    let mut x = vec![0.0; dim];
    let mut coords = Vec::with_capacity(dim * (count / 2 + 1));
    let homogeneous = intensity.lower_bound() == upper;
    for _ in 0..count {
        uniform_in_box(&mut rng, &lo, &hi, &mut x);
        let u: f64 = rng.random();
        if !domain.contains(&x) {
            continue;
        }
        let f = intensity.evaluate(&x);
        if !f.is_finite() || f < 0.0 || f > upper {
            return Err(Error::EnvelopeViolated {
                value: f,
                at: x.clone(),
                bound: upper,
            });
        }
        if u * upper < f {
            coords.extend_from_slice(&x);
        }
    }
    Ok(SampleBatch {
        cloud: PointCloud::new(dim, coords)?,
        n_target: n,
        seed,
        provenance: if homogeneous {
            Provenance::PoissonHomogeneous
        } else {
            Provenance::PoissonInhomogeneous
        },
        parameter_cloud: None,
    })
}

const REJECTION_WINDOW: u64 = 10_000_000;

/// Exactly `n` i.i.d. points with density `f`, by rejection from the
/// envelope `M_f` on the bounding box.
///
/// For `dim <= 3` the density must integrate to 1 within 2% (checked by
/// quadrature).
pub fn sample_iid(domain: &DomainSpec, density: &DensityField, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::param("n", "sample size must be at least 1"));
    }
    check_density_dim(domain, density)?;
    if let Some(mass) = density.integrate() {
        if (mass - 1.0).abs() > 0.02 {
            return Err(Error::param(
                "density",
                format!("integrates to {mass:.4} over the domain, expected 1"),
            ));
        }
    }
    let upper = density.upper_bound();
    let (lo, hi) = domain.bounding_box();
    let dim = domain.dim();
    let mut rng = crate::rng::stream(seed, "iid", &[]);
    let mut x = vec![0.0; dim];
    let mut coords = Vec::with_capacity(n * dim);
    let (mut attempts, mut window_accepts) = (0u64, 0u64);
    while coords.len() < n * dim {
        uniform_in_box(&mut rng, &lo, &hi, &mut x);
        let u: f64 = rng.random();
        attempts += 1;
        if domain.contains(&x) {
            let f = density.evaluate(&x);
            if !f.is_finite() || f < 0.0 || f > upper {
                return Err(Error::EnvelopeViolated {
                    value: f,
                    at: x.clone(),
                    bound: upper,
                });
            }
            if u * upper < f {
                coords.extend_from_slice(&x);
                window_accepts += 1;
            }
        }
        if attempts % REJECTION_WINDOW == 0 {
            let rate = window_accepts as f64 / REJECTION_WINDOW as f64;
            if rate < 1e-6 {
                return Err(Error::PathologicalEnvelope { rate });
            }
            window_accepts = 0;
        }
    }
    Ok(SampleBatch {
        cloud: PointCloud::new(dim, coords)?,
        n_target: n as f64,
        seed,
        provenance: Provenance::IidDensity,
        parameter_cloud: None,
    })
}

/// `n` i.i.d. chart-space points with density `density_on_chart`, mapped
/// into the ambient space. The chart-space cloud is kept alongside.
pub fn sample_manifold(
    manifold: &ManifoldSpec,
    density_on_chart: &DensityField,
    n: usize,
    seed: u64,
) -> Result<SampleBatch> {
    manifold.check_isometry(100, 1e-6, seed)?;
    let params = sample_iid(&manifold.parameter_domain(), density_on_chart, n, seed)?;
    let mut coords = Vec::with_capacity(n * manifold.ambient_dim());
    for z in params.cloud.iter() {
        let p = manifold.chart(z);
        if p.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("chart image of {z:?}")));
        }
        coords.extend(p);
    }
    Ok(SampleBatch {
        cloud: PointCloud::new(manifold.ambient_dim(), coords)?,
        n_target: n as f64,
        seed,
        provenance: Provenance::IidManifold,
        parameter_cloud: Some(params.cloud),
    })
}

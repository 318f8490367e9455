//! Option structs shared by flags and `--config` files, and their merging.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use fermat_core::harness::ExperimentConfig;
use fermat_core::{DensitySpec, DomainSpec, Error, GraphMode, ManifoldSpec, Symmetrization};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

/// Exit status 2 for bad input, 3 for numerical failures.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Numerical(String),
}

impl Failure {
    pub fn missing(name: &str) -> Self {
        Failure::Validation(format!("missing required option --{}", name.replace('_', "-")))
    }

    pub fn invalid(name: &str, reason: impl std::fmt::Display) -> Self {
        Failure::Validation(format!("invalid `{name}`: {reason}"))
    }

    pub fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() || matches!(e, Error::Io(_)) {
            Failure::Validation(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (or directory for experiments).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with option values; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Comma-separated coordinates on the command line, an array in JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl FromStr for Point {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|e| format!("bad coordinate `{c}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Point)
    }
}

/// A catalog name or inline JSON; JSON objects are accepted in config files.
#[derive(Clone, Debug, PartialEq)]
pub struct Spec(pub String);

impl FromStr for Spec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(Spec(s.to_string()))
    }
}

impl std::ops::Deref for Spec {
    type Target = str;
    fn deref(&self) -> &str {
        &self.0
    }
}

impl Serialize for Spec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Spec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match Value::deserialize(d)? {
            Value::String(s) => Spec(s),
            other => Spec(other.to_string()),
        })
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleOpts {
    /// `unit_square`, `unit_cube:<d>` or JSON.
    #[arg(long)]
    pub domain: Option<Spec>,
    /// Catalog name or JSON.
    #[arg(long)]
    pub density: Option<Spec>,
    /// Catalog manifold; samples i.i.d. on its parameter domain.
    #[arg(long)]
    pub manifold: Option<Spec>,
    /// Intensity multiplier (Poisson) or sample size.
    #[arg(long)]
    pub n: Option<f64>,
    /// `poisson` or `iid`.
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistOpts {
    /// Point cloud CSV.
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<Point>,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<Point>,
    /// Also report `n^beta * D` for this `n`.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Intrinsic dimension for `beta` (default: ambient).
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnnDistOpts {
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<Point>,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<Point>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Neighbours per particle (default `ceil(10 ln n)`).
    #[arg(long)]
    pub k: Option<usize>,
    /// `directed` or `undirected`.
    #[arg(long)]
    pub graph: Option<String>,
    /// For restricted matrices: `none`, `min` or `max`.
    #[arg(long)]
    pub symmetrization: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkOpts {
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of landmarks (default `ceil(sqrt n)`).
    #[arg(long)]
    pub m: Option<usize>,
    /// Use restricted landmark distances with this `k`.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub graph: Option<String>,
    /// Pairs as `i-j,i-j,...`.
    #[arg(long)]
    pub pairs: Option<String>,
    /// Number of random pairs when `--pairs` is unset.
    #[arg(long)]
    pub count: Option<usize>,
    /// Add an exact-distance column.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub exact: Option<bool>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallOpts {
    #[arg(long)]
    pub cloud: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<Point>,
    /// Threshold on `D`, or on `n^beta * D` with `--scale n`.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub graph: Option<String>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleOpts {
    /// Saved oracle; otherwise one is built from the options below.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    #[arg(long)]
    pub domain: Option<Spec>,
    #[arg(long)]
    pub density: Option<Spec>,
    /// `beta = (alpha - 1) / dim`.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Lattice spacing.
    #[arg(long)]
    pub h: Option<f64>,
    /// Stencil radius.
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long)]
    pub node_cap: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<Point>,
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<Point>,
    #[arg(long)]
    pub t: Option<f64>,
}

/// Flags of `experiment`, each overriding the config field of the same name.
#[derive(Args, Clone, Debug, Default, Serialize)]
pub struct ExperimentFlags {
    /// Hop cost exponent, at least 1.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Comma-separated, e.g. `1e3,4e3,1.6e4`.
    #[arg(long)]
    pub schedule: Option<String>,
    /// Replicates per sample size.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Catalog name or JSON.
    #[arg(long)]
    pub density: Option<Spec>,
    #[arg(long)]
    pub domain: Option<Spec>,
    /// Catalog manifold, e.g. `swiss_roll`.
    #[arg(long)]
    pub manifold: Option<Spec>,
    /// `auto`, `exact` or `knn`.
    #[arg(long)]
    pub engine: Option<String>,
    #[arg(long)]
    pub knn_c: Option<f64>,
    #[arg(long)]
    pub exact_max_n: Option<f64>,
    /// Time constant used by `shape`.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Ball radius for `shape` (scaled units).
    #[arg(long)]
    pub t: Option<f64>,
    /// Target disagreement rate for `knn`.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub sources: Option<usize>,
    #[arg(long)]
    pub targets: Option<usize>,
    /// Comma-separated neighbour counts.
    #[arg(long)]
    pub ks: Option<String>,
    /// Points separated by `;`, coordinates by `,`.
    #[arg(long, allow_hyphen_values = true)]
    pub query: Option<String>,
    /// Suffix for output file names.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Oracle lattice spacing.
    #[arg(long)]
    pub h: Option<f64>,
    /// Oracle stencil radius.
    #[arg(long)]
    pub r: Option<usize>,
}

fn read_config(path: &Path) -> Result<Map<String, Value>, Failure> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Failure::invalid("config", "expected a JSON object")),
        Err(e) => Err(Failure::invalid("config", e)),
    }
}

fn deserialize_named<T: DeserializeOwned>(value: Value) -> Result<T, Failure> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        Failure::Validation(format!("config field `{path}`: {}", e.into_inner()))
    })
}

/// Merges `--config` values under the flags; `seed` and `out` may also come
/// from the config.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: T, mut common: Common) -> Result<(T, Common), Failure> {
    let Some(path) = common.config.clone() else {
        return Ok((flags, common));
    };
    let mut cfg = read_config(&path)?;
    if let Some(seed) = cfg.remove("seed") {
        let seed: u64 = deserialize_named(json!({ "seed": seed })).map(|w: SeedOut| w.seed.unwrap_or(0))?;
        common.seed.get_or_insert(seed);
    }
    if let Some(out) = cfg.remove("out") {
        let out: SeedOut = deserialize_named(json!({ "out": out }))?;
        if common.out.is_none() {
            common.out = out.out;
        }
    }
    if let Value::Object(f) = serde_json::to_value(&flags).map_err(Error::from)? {
        for (k, v) in f {
            if !v.is_null() {
                cfg.insert(k, v);
            }
        }
    }
    Ok((deserialize_named(Value::Object(cfg))?, common))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedOut {
    seed: Option<u64>,
    out: Option<PathBuf>,
}

fn parse_list(name: &str, s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| Failure::invalid(name, format!("`{c}`: {e}"))))
        .collect()
}

/// The config of an experiment: the `--config` file (if any) with flags on
/// top. The geodesic experiment defaults to the Gaussian bump density.
pub fn experiment_config(kind: &str, common: &Common, flags: &ExperimentFlags) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => read_config(p)?,
        None => Map::new(),
    };
    if kind == "geodesic" && !cfg.contains_key("density") && flags.density.is_none() {
        cfg.insert("density".into(), json!({"type": "gauss_bump"}));
    }
    let mut set = |k: &str, v: Value| {
        cfg.insert(k.into(), v);
    };
    if let Some(v) = flags.alpha {
        set("alpha", json!(v));
    }
    if let Some(v) = flags.dim {
        set("dim", json!(v));
    }
    if let Some(s) = &flags.schedule {
        set("schedule", json!(parse_list("schedule", s)?));
    }
    if let Some(v) = flags.reps {
        set("reps", json!(v));
    }
    if let Some(s) = &flags.density {
        set("density", to_value(&parse_density(Some(&s.0))?)?);
    }
    if let Some(s) = &flags.domain {
        set("domain", to_value(&parse_domain(Some(&s.0))?)?);
    }
    if let Some(s) = &flags.manifold {
        set("manifold", to_value(&ManifoldSpec::parse(&s.0)?)?);
    }
    if let Some(v) = &flags.engine {
        set("engine", json!(v));
    }
    if let Some(v) = flags.knn_c {
        set("knn_c", json!(v));
    }
    if let Some(v) = flags.exact_max_n {
        set("exact_max_n", json!(v));
    }
    if let Some(v) = flags.mu {
        set("mu", json!(v));
    }
    if let Some(v) = flags.t {
        set("t", json!(v));
    }
    if let Some(v) = flags.epsilon {
        set("epsilon", json!(v));
    }
    if let Some(v) = flags.sources {
        set("sources", json!(v));
    }
    if let Some(v) = flags.targets {
        set("targets", json!(v));
    }
    if let Some(s) = &flags.ks {
        let ks: Result<Vec<usize>, _> = s.split(',').map(|c| c.trim().parse::<usize>()).collect();
        set("ks", json!(ks.map_err(|e| Failure::invalid("ks", e))?));
    }
    if let Some(s) = &flags.query {
        let pts: Result<Vec<Vec<f64>>, _> = s.split(';').map(|p| parse_list("query", p)).collect();
        set("query", json!(pts?));
    }
    if let Some(v) = &flags.scenario {
        set("scenario", json!(v));
    }
    if let Some(v) = common.seed {
        set("seed", json!(v));
    }
    if let Some(v) = &common.out {
        set("out", json!(v));
    }
    if flags.h.is_some() || flags.r.is_some() {
        let oracle = cfg.entry("oracle").or_insert_with(|| json!({}));
        let Value::Object(o) = oracle else {
            return Err(Failure::Validation("config field `oracle`: expected an object".into()));
        };
        if let Some(h) = flags.h {
            o.insert("h".into(), json!(h));
        }
        if let Some(r) = flags.r {
            o.insert("r".into(), json!(r));
        }
    }
    Ok(ExperimentConfig::from_json(&Value::Object(cfg).to_string())?)
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::from(Error::from(e)))
}

/// `unit_square`, `unit_cube` (dimension 2), `unit_cube:<d>` or JSON.
pub fn parse_domain(s: Option<&str>) -> Result<DomainSpec, Failure> {
    let s = s.unwrap_or("unit_square").trim();
    let domain = if s.starts_with('{') {
        serde_json::from_str(s).map_err(|e| Failure::invalid("domain", e))?
    } else if s == "unit_square" || s == "unit_cube" {
        DomainSpec::unit_cube(2)
    } else if let Some(d) = s.strip_prefix("unit_cube:") {
        let d: usize = d.parse().map_err(|e| Failure::invalid("domain", e))?;
        DomainSpec::unit_cube(d)
    } else {
        return Err(Failure::invalid("domain", format!("unknown domain `{s}`")));
    };
    domain.validate()?;
    Ok(domain)
}

pub fn parse_density(s: Option<&str>) -> Result<DensitySpec, Failure> {
    match s {
        None => Ok(DensitySpec::Uniform { value: 1.0 }),
        Some(s) => DensitySpec::parse(s).map_err(|e| Failure::invalid("density", e)),
    }
}

pub fn parse_graph_mode(s: Option<&str>) -> Result<GraphMode, Failure> {
    match s.unwrap_or("directed") {
        "directed" => Ok(GraphMode::Directed),
        "undirected" => Ok(GraphMode::Undirected),
        other => Err(Failure::invalid("graph", format!("expected directed or undirected, got {other}"))),
    }
}

pub fn parse_symmetrization(s: Option<&str>) -> Result<Symmetrization, Failure> {
    match s.unwrap_or("none") {
        "none" => Ok(Symmetrization::None),
        "min" => Ok(Symmetrization::Min),
        "max" => Ok(Symmetrization::Max),
        other => Err(Failure::invalid("symmetrization", format!("expected none, min or max, got {other}"))),
    }
}

/// A sample size given as a float that must be a positive integer.
pub fn count(n: f64) -> Result<usize, Failure> {
    if n >= 1.0 && n.fract() == 0.0 && n.is_finite() {
        Ok(n as usize)
    } else {
        Err(Failure::invalid("n", format!("sample size must be a positive integer, got {n}")))
    }
}

pub fn parse_pairs(s: &str, n: usize) -> Result<Vec<(usize, usize)>, Failure> {
    s.split(',')
        .map(|p| {
            let (i, j) = p.split_once('-').ok_or_else(|| Failure::invalid("pairs", format!("`{p}` is not i-j")))?;
            let i: usize = i.trim().parse().map_err(|e| Failure::invalid("pairs", e))?;
            let j: usize = j.trim().parse().map_err(|e| Failure::invalid("pairs", e))?;
            if i >= n || j >= n {
                return Err(Failure::invalid("pairs", format!("index out of range for {n} particles")));
            }
            Ok((i, j))
        })
        .collect()
}

/// `count` pairs of distinct particles drawn from the seed.
pub fn random_pairs(n: usize, count: usize, seed: u64) -> Result<Vec<(usize, usize)>, Failure> {
    if n < 2 {
        return Err(Failure::invalid("cloud", "need at least two particles"));
    }
    Ok((0..count as u64)
        .map(|k| {
            let i = (fermat_core::rng::derive_key(seed, "pairs", &[k, 0]) % n as u64) as usize;
            let j = (fermat_core::rng::derive_key(seed, "pairs", &[k, 1]) % (n as u64 - 1)) as usize;
            (i, if j >= i { j + 1 } else { j })
        })
        .collect())
}

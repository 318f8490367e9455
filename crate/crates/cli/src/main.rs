//! Command-line front end for `fermat-core`.

mod opts;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fermat_core::continuum::{plane_svg, write_points_csv};
use fermat_core::fermat::{all_pairs_exact, choose_landmarks, restricted_ball, Alpha};
use fermat_core::harness::{
    estimate_mu, run_convergence, run_geodesic_convergence, run_knn_sufficiency, run_manifold, run_shape,
    ExperimentConfig, OutputFiles,
};
use fermat_core::io::{read_cloud_csv_file, write_cloud_csv};
use fermat_core::{
    all_pairs_restricted, build_grid_oracle, continuum_ball, continuum_distance, continuum_geodesic,
    exact_distance, fermat_ball, landmark_bounds, restricted_distance, sample_iid, sample_manifold,
    sample_poisson, Beta, DistanceResult, Error, GridOracle, KnnGraph, LandmarkTable, OracleParams,
    PointCloud, SpatialIndex,
};
use serde_json::json;

use opts::{
    parse_domain, parse_graph_mode, parse_symmetrization, resolve, BallOpts, Common, DistOpts, ExperimentFlags,
    Failure, KnnDistOpts, LandmarkOpts, OracleOpts, SampleOpts,
};

#[derive(Parser)]
#[command(name = "fermat", version, about = "Sample Fermat distances, continuum oracle and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a point cloud (Poisson, i.i.d. or on a manifold).
    Sample(With<SampleOpts>),
    /// Exact sample Fermat distance between two query points.
    Dist(With<DistOpts>),
    /// Distance restricted to k-nearest-neighbour edges.
    KnnDist(With<KnnDistOpts>),
    /// Full distance matrix (exact, or restricted with --k).
    AllPairs(With<KnnDistOpts>),
    /// Landmark lower and upper bounds for particle pairs.
    Landmarks(With<LandmarkOpts>),
    /// Particles of a sample Fermat ball.
    Ball(With<BallOpts>),
    /// Continuum oracle for the macroscopic Fermat distance.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Monte Carlo experiments.
    Experiment(ExperimentArgs),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Build a lattice oracle and save it.
    Build(With<OracleOpts>),
    /// Oracle distance between --x and --y.
    Dist(With<OracleOpts>),
    /// Lattice nodes within oracle distance --t of --x.
    Ball(With<OracleOpts>),
    /// Oracle geodesic from --x to --y.
    Geodesic(With<OracleOpts>),
}

#[derive(Args)]
struct With<T: Args> {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    opts: T,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: Kind,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    flags: ExperimentFlags,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Kind {
    Mu,
    Convergence,
    Geodesic,
    Shape,
    Knn,
    Manifold,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Sample(a) => sample(a),
        Command::Dist(a) => dist(a),
        Command::KnnDist(a) => knn_dist(a),
        Command::AllPairs(a) => all_pairs(a),
        Command::Landmarks(a) => landmarks(a),
        Command::Ball(a) => ball(a),
        Command::Oracle(c) => oracle(c),
        Command::Experiment(a) => experiment(a),
    }
}

/// Writes to `out`, or stdout when unset.
fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(Error::from)?;
            }
            Box::new(BufWriter::new(File::create(p).map_err(Error::from)?))
        }
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> Result<(), Failure> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    writeln!(w).map_err(Error::from)?;
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn sample(a: With<SampleOpts>) -> Result<(), Failure> {
    let (o, common) = resolve(a.opts, a.common)?;
    let seed = common.seed.unwrap_or(0);
    let n = o.n.ok_or_else(|| Failure::missing("n"))?;
    let batch = if let Some(m) = &o.manifold {
        let manifold = fermat_core::ManifoldSpec::parse(&m.0)?;
        let domain = manifold.parameter_domain();
        let density = opts::parse_density(o.density.as_deref())?.build(&domain)?;
        sample_manifold(&manifold, &density, opts::count(n)?, seed)?
    } else {
        let domain = parse_domain(o.domain.as_deref())?;
        let density = opts::parse_density(o.density.as_deref())?.build(&domain)?;
        match o.mode.as_deref().unwrap_or("poisson") {
            "poisson" => sample_poisson(&domain, &density, n, seed)?,
            "iid" => sample_iid(&domain, &density, opts::count(n)?, seed)?,
            other => return Err(Failure::invalid("mode", format!("expected poisson or iid, got {other}"))),
        }
    };
    match &common.out {
        Some(p) => batch.save(p)?,
        None => {
            let mut w = sink(None)?;
            write_cloud_csv(&batch.cloud, &mut w)?;
            w.flush().map_err(Error::from)?;
        }
    }
    eprintln!("{} particles", batch.cloud.len());
    Ok(())
}

fn load_cloud(path: Option<&PathBuf>) -> Result<PointCloud, Failure> {
    let path = path.ok_or_else(|| Failure::missing("cloud"))?;
    read_cloud_csv_file(path).map_err(|e| match e {
        fermat_core::Error::Io(io) => Failure::Validation(format!("{}: {io}", path.display())),
        e => e.into(),
    })
}

fn distance_json(res: &DistanceResult, cloud: &PointCloud, alpha: Alpha, scale: Option<f64>, dim: Option<usize>) -> serde_json::Value {
    let beta = alpha.beta(dim.unwrap_or(cloud.dim()));
    json!({
        "distance": res.distance,
        "scaled": scale.map(|n| n.powf(beta) * res.distance),
        "beta": beta,
        "path": res.path.indices(),
        "polyline": res.path.polyline(cloud),
        "statistics": fermat_core::path_statistics(&res.path, cloud),
    })
}

fn dist(a: With<DistOpts>) -> Result<(), Failure> {
    let (o, common) = resolve(a.opts, a.common)?;
    let cloud = load_cloud(o.cloud.as_ref())?;
    let alpha = Alpha::new(o.alpha.unwrap_or(2.0))?;
    let x = o.x.ok_or_else(|| Failure::missing("x"))?;
    let y = o.y.ok_or_else(|| Failure::missing("y"))?;
    let index = SpatialIndex::build(&cloud)?;
    let res = exact_distance(&index, alpha, &x.0, &y.0)?;
    emit_json(common.out.as_deref(), &distance_json(&res, &cloud, alpha, o.scale, o.dim))
}

fn build_graph<'a>(index: &SpatialIndex<'a>, alpha: Alpha, k: Option<usize>, graph: Option<&str>) -> Result<KnnGraph, Failure> {
    let n = index.cloud().len() as f64;
    let k = k.unwrap_or((10.0 * n.ln()).ceil().max(1.0) as usize);
    Ok(KnnGraph::build(index, alpha, k, parse_graph_mode(graph)?)?)
}

fn knn_dist(a: With<KnnDistOpts>) -> Result<(), Failure> {
    let (o, common) = resolve(a.opts, a.common)?;
    let cloud = load_cloud(o.cloud.as_ref())?;
    let alpha = Alpha::new(o.alpha.unwrap_or(2.0))?;
    let x = o.x.ok_or_else(|| Failure::missing("x"))?;
    let y = o.y.ok_or_else(|| Failure::missing("y"))?;
    let index = SpatialIndex::build(&cloud)?;
    let graph = build_graph(&index, alpha, o.k, o.graph.as_deref())?;
    let res = restricted_distance(&graph, &index, alpha, &x.0, &y.0)?;
    let mut v = distance_json(&res, &cloud, alpha, o.scale, o.dim);
    v["k"] = json!(graph.k());
    v["graph"] = json!(graph.mode());
    emit_json(common.out.as_deref(), &v)
}

fn all_pairs(a: With<KnnDistOpts>) -> Result<(), Failure> {
    let (o, common) = resolve(a.opts, a.common)?;
    let cloud = load_cloud(o.cloud.as_ref())?;
    let alpha = Alpha::new(o.alpha.unwrap_or(2.0))?;
    let matrix = match o.k {
        None => all_pairs_exact(&cloud, alpha)?,
        Some(_) => {
            let index = SpatialIndex::build(&cloud)?;
            let graph = build_graph(&index, alpha, o.k, o.graph.as_deref())?;
            all_pairs_restricted(&graph, parse_symmetrization(o.symmetrization.as_deref())?)?
        }
    };
    let unreachable = matrix.count_unreachable();
    let mut w = sink(common.out.as_deref())?;
    matrix.write_csv(&mut w)?;
    w.flush().map_err(Error::from)?;
    if unreachable > 0 {
        eprintln!("{unreachable} unreachable pairs written as inf");
    }
    Ok(())
}

fn landmarks(a: With<LandmarkOpts>) -> Result<(), Failure> {
    let (o, common) = resolve(a.opts, a.common)?;
    let seed = common.seed.unwrap_or(0);
    let cloud = load_cloud(o.cloud.as_ref())?;
    let alpha = Alpha::new(o.alpha.unwrap_or(2.0))?;
    let n = cloud.len();
    let m = o.m.unwrap_or(((n as f64).sqrt().ceil() as usize).clamp(1, n));
    let chosen = choose_landmarks(n, m, seed)?;
    let index = SpatialIndex::build(&cloud)?;
    let table = match o.k {
        None => LandmarkTable::exact(&cloud, alpha, &chosen)?,
        Some(_) => LandmarkTable::restricted(&build_graph(&index, alpha, o.k, o.graph.as_deref())?, &chosen)?,
    };
    let pairs = match &o.pairs {
        Some(p) => opts::parse_pairs(p, n)?,
        None => opts::random_pairs(n, o.count.unwrap_or(100), seed)?,
    };
    let with_exact = o.exact.unwrap_or(false);
    let mut w = sink(common.out.as_deref())?;
    let io = |e: std::io::Error| Failure::from(Error::from(e));
    writeln!(w, "i,j,lower,upper{}", if with_exact { ",exact" } else { "" }).map_err(io)?;
    for (i, j) in pairs {
        let b = landmark_bounds(&table, i, j)?;
        if with_exact {
            let d = fermat_core::exact_distance_between(&cloud, alpha, i, j)?.distance;
            writeln!(w, "{i},{j},{},{},{d}", b.lower, b.upper).map_err(io)?;
        } else {
            writeln!(w, "{i},{j},{},{}", b.lower, b.upper).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    Ok(())
}

fn ball(a: With<BallOpts>) -> Result<(), Failure> {
    let (o, common) = resolve(a.opts, a.common)?;
    let cloud = load_cloud(o.cloud.as_ref())?;
    let alpha = Alpha::new(o.alpha.unwrap_or(2.0))?;
    let x = o.x.ok_or_else(|| Failure::missing("x"))?;
    let mut t = o.t.ok_or_else(|| Failure::missing("t"))?;
    if let Some(n) = o.scale {
        t /= n.powf(alpha.beta(o.dim.unwrap_or(cloud.dim())));
    }
    let index = SpatialIndex::build(&cloud)?;
    let b = match o.k {
        None => fermat_ball(&index, alpha, &x.0, t)?,
        Some(_) => restricted_ball(&build_graph(&index, alpha, o.k, o.graph.as_deref())?, &index, &x.0, t)?,
    };
    let mut w = sink(common.out.as_deref())?;
    let io = |e: std::io::Error| Failure::from(Error::from(e));
    let coords: Vec<String> = (0..cloud.dim()).map(|a| format!("x{a}")).collect();
    writeln!(w, "index,distance,{}", coords.join(",")).map_err(io)?;
    for &(p, d) in &b.members {
        let c: Vec<String> = cloud.point(p).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{p},{d},{}", c.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)?;
    eprintln!("{} particles in the ball", b.len());
    Ok(())
}

fn load_or_build(o: &OracleOpts) -> Result<GridOracle, Failure> {
    if let Some(path) = &o.oracle {
        return Ok(GridOracle::load(path)?);
    }
    let domain = parse_domain(o.domain.as_deref())?;
    let density = opts::parse_density(o.density.as_deref())?.build(&domain)?;
    let beta = match (o.beta, o.alpha) {
        (Some(b), None) => Beta::new(b)?,
        (None, a) => Beta::from_alpha(Alpha::new(a.unwrap_or(2.0))?, o.dim.unwrap_or(domain.dim())),
        (Some(_), Some(_)) => return Err(Failure::invalid("beta", "give either --alpha or --beta, not both")),
    };
    let mut params = OracleParams::default();
    if let Some(h) = o.h {
        params.h = h;
    }
    if let Some(r) = o.r {
        params.r = r;
    }
    if let Some(cap) = o.node_cap {
        params.node_cap = cap;
    }
    Ok(build_grid_oracle(&domain, &density, beta, params)?)
}

fn svg_path(out: &Path) -> PathBuf {
    out.with_extension("svg")
}

fn oracle(c: OracleCommand) -> Result<(), Failure> {
    match c {
        OracleCommand::Build(a) => {
            let (o, common) = resolve(a.opts, a.common)?;
            let out = common.out.ok_or_else(|| Failure::missing("out"))?;
            let g = load_or_build(&o)?;
            g.save(&out)?;
            eprintln!("{} nodes, {} edges", g.node_count(), g.edge_count());
            Ok(())
        }
        OracleCommand::Dist(a) => {
            let (o, common) = resolve(a.opts, a.common)?;
            let g = load_or_build(&o)?;
            let x = o.x.ok_or_else(|| Failure::missing("x"))?;
            let y = o.y.ok_or_else(|| Failure::missing("y"))?;
            let res = continuum_distance(&g, &x.0, &y.0)?;
            emit_json(
                common.out.as_deref(),
                &json!({"distance": res.distance, "h": res.h, "r": res.r, "beta": g.beta().value(), "nodes": res.nodes.len()}),
            )
        }
        OracleCommand::Ball(a) => {
            let (o, common) = resolve(a.opts, a.common)?;
            let g = load_or_build(&o)?;
            let x = o.x.ok_or_else(|| Failure::missing("x"))?;
            let t = o.t.ok_or_else(|| Failure::missing("t"))?;
            let b = continuum_ball(&g, &x.0, t)?;
            let pts = b.points(&g);
            write_points_csv(&pts, sink(common.out.as_deref())?)?;
            if let (Some(out), 2) = (&common.out, g.dim()) {
                std::fs::write(svg_path(out), plane_svg("continuum ball", Some(&pts), None)?).map_err(Error::from)?;
            }
            eprintln!("{} nodes in the ball", b.len());
            Ok(())
        }
        OracleCommand::Geodesic(a) => {
            let (o, common) = resolve(a.opts, a.common)?;
            let g = load_or_build(&o)?;
            let x = o.x.ok_or_else(|| Failure::missing("x"))?;
            let y = o.y.ok_or_else(|| Failure::missing("y"))?;
            let path = continuum_geodesic(&g, &x.0, &y.0)?;
            write_points_csv(&path, sink(common.out.as_deref())?)?;
            if let (Some(out), 2) = (&common.out, g.dim()) {
                std::fs::write(svg_path(out), plane_svg("continuum geodesic", None, Some(&path))?).map_err(Error::from)?;
            }
            Ok(())
        }
    }
}

fn experiment(a: ExperimentArgs) -> Result<(), Failure> {
    let kind = match a.kind {
        Kind::Mu => "mu",
        Kind::Convergence => "convergence",
        Kind::Geodesic => "geodesic",
        Kind::Shape => "shape",
        Kind::Knn => "knn",
        Kind::Manifold => "manifold",
    };
    let cfg: ExperimentConfig = opts::experiment_config(kind, &a.common, &a.flags)?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let (files, summary): (OutputFiles, serde_json::Value) = match a.kind {
        Kind::Mu => {
            let r = estimate_mu(&cfg)?;
            (r.write(&dir)?, json!({"mu_hat": r.mu_hat()}))
        }
        Kind::Convergence => {
            let r = run_convergence(&cfg)?;
            (r.write(&dir)?, json!({"final_median_ratio": r.final_median(), "oracle_distance": r.oracle_distance}))
        }
        Kind::Geodesic => {
            let r = run_geodesic_convergence(&cfg)?;
            let last = r.summary.last().expect("non-empty schedule");
            (
                r.write(&dir)?,
                json!({
                    "median_curve_distance": r.summary.iter().map(|s| s.median_curve_distance).collect::<Vec<_>>(),
                    "fraction_positive_final": last.fraction_positive,
                    "arc_lengths_bounded": r.arc_lengths_bounded(),
                }),
            )
        }
        Kind::Shape => {
            let r = run_shape(&cfg)?;
            (
                r.write(&dir)?,
                json!({
                    "median_epsilon": r.summary.iter().map(|s| s.median_epsilon).collect::<Vec<_>>(),
                    "median_axis_ratio": r.summary.iter().map(|s| s.median_axis_ratio).collect::<Vec<_>>(),
                    "expected_axis_ratio": r.expected_axis_ratio,
                }),
            )
        }
        Kind::Knn => {
            let r = run_knn_sufficiency(&cfg)?;
            (
                r.write(&dir)?,
                json!({"k_star": r.k_star, "c_hat": r.c_hat, "d_hat": r.d_hat, "monotonicity_violations": r.monotonicity_violations}),
            )
        }
        Kind::Manifold => {
            let r = run_manifold(&cfg)?;
            (
                r.write(&dir)?,
                json!({
                    "final_median_intrinsic": r.intrinsic.last().map(|s| s.median),
                    "log_drift_ambient": fermat_core::harness::ManifoldReport::log_drift(&r.ambient),
                }),
            )
        }
    };
    let mut out = json!({"experiment": kind, "files": files});
    out["summary"] = summary;
    println!("{}", serde_json::to_string_pretty(&out).map_err(Error::from)?);
    Ok(())
}

//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion.
//!
//! The Monte Carlo criteria run the `fermat` binary at full scale, so this
//! target takes a long time. Lines marked `FAIL` are reported, and the test
//! only fails for criteria outside `KNOWN_FAILING`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use fermat_core::continuum::{build_grid_oracle, continuum_distance, Beta, OracleParams};
use fermat_core::fermat::{all_pairs_exact, choose_landmarks};
use fermat_core::rng::stream;
use fermat_core::{
    exact_distance, exact_distance_between, landmark_bounds, Alpha, DensitySpec, DomainSpec, LandmarkTable,
    PointCloud, SpatialIndex,
};
use rand::Rng;
use serde_json::Value;

const KNOWN_FAILING: &[usize] = &[];

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    secs: f64,
    budget: f64,
}

/// Writes past the test harness's output capture so the lines always show.
fn say(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn report(outcomes: &mut Vec<Outcome>, id: usize, name: &'static str, budget: f64, f: impl FnOnce() -> (bool, String)) {
    let start = Instant::now();
    let (pass, detail) = f();
    let secs = start.elapsed().as_secs_f64();
    let over = if secs > budget { ", over runtime budget" } else { "" };
    say(&format!(
        "{} {id:>2} {name}: {detail} [{secs:.0} s of {budget:.0} s{over}]",
        if pass { "PASS" } else { "FAIL" }
    ));
    outcomes.push(Outcome { id, name, pass, detail, secs, budget });
}

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_fermat"))
}

/// Runs `fermat experiment <kind> ...` and returns its JSON summary.
fn experiment(kind: &str, out: &Path, args: &[&str], workers: Option<usize>) -> Value {
    let mut cmd = Command::new(bin());
    cmd.arg("experiment").arg(kind).arg("--out").arg(out).args(args);
    if let Some(w) = workers {
        cmd.env("FERMAT_WORKERS", w.to_string());
    }
    let o = cmd.output().expect("spawn fermat");
    assert!(
        o.status.success(),
        "fermat experiment {kind} {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).expect("summary JSON")
}

/// Rows of a CSV written by the harness, keyed by header name.
fn read_table(path: &Path) -> Vec<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect())
        .collect()
}

fn col(rows: &[BTreeMap<String, String>], name: &str) -> Vec<f64> {
    rows.iter().map(|r| r[name].parse::<f64>().unwrap_or(f64::NAN)).collect()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn random_cloud(seed: u64, n: usize, dim: usize) -> PointCloud {
    let mut rng = stream(seed, "acceptance-cloud", &[n as u64, dim as u64]);
    PointCloud::new(dim, (0..n * dim).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn floyd_warshall(cloud: &PointCloud, alpha: Alpha) -> Vec<f64> {
    let n = cloud.len();
    let mut d: Vec<f64> = (0..n * n).map(|ij| alpha.weight(cloud.dist(ij / n, ij % n))).collect();
    for k in 0..n {
        for i in 0..n {
            let dik = d[i * n + k];
            for j in 0..n {
                d[i * n + j] = d[i * n + j].min(dik + d[k * n + j]);
            }
        }
    }
    d
}

fn oracle_equivalence() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    for seed in 0..18u64 {
        for dim in 1..=3usize {
            let alpha = Alpha::new([1.0, 2.0, 3.0][(seed % 3) as usize]).unwrap();
            let n = 20 + (seed as usize * 53 + dim * 29) % 281;
            let cloud = random_cloud(seed, n, dim);
            let fw = floyd_warshall(&cloud, alpha);
            let mut rng = stream(seed, "acceptance-fw", &[dim as u64]);
            for _ in 0..50 {
                let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
                let d = exact_distance_between(&cloud, alpha, i, j).unwrap().distance;
                worst = worst.max(rel(d, fw[i * n + j]));
            }
            instances += 1;
        }
    }
    (
        instances >= 50 && worst <= 1e-9,
        format!("{instances} instances, worst relative error {worst:.1e} (tol 1e-9)"),
    )
}

fn alpha_one() -> (bool, String) {
    let alpha = Alpha::new(1.0).unwrap();
    let cloud = random_cloud(100, 800, 2);
    let index = SpatialIndex::build(&cloud).unwrap();
    let mut rng = stream(100, "acceptance-queries", &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let y = [rng.random::<f64>(), rng.random::<f64>()];
        let d = exact_distance(&index, alpha, &x, &y).unwrap().distance;
        let e = cloud.dist(index.nearest(&x).unwrap(), index.nearest(&y).unwrap());
        worst = worst.max(rel(d, e));
    }
    (worst <= 1e-12, format!("1000 queries, worst relative error {worst:.1e} (tol 1e-12)"))
}

fn metric_properties() -> (bool, String) {
    let mut bad = 0usize;
    let mut worst_h: f64 = 0.0;
    for (seed, dim, a) in [(1u64, 1usize, 3.0), (2, 2, 2.0), (3, 3, 1.5)] {
        let alpha = Alpha::new(a).unwrap();
        let cloud = random_cloud(seed, 400, dim);
        let n = cloud.len();
        let m = all_pairs_exact(&cloud, alpha).unwrap();
        let mut rng = stream(seed, "acceptance-triples", &[]);
        for _ in 0..10_000 {
            let (i, j, k) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
            let ok = m.get(i, i) == 0.0
                && rel(m.get(i, j), m.get(j, i)) <= 1e-12
                && m.get(i, k) <= (m.get(i, j) + m.get(j, k)) * (1.0 + 1e-12);
            bad += usize::from(!ok);
        }
        for s in [0.125, 8.0] {
            let scaled = cloud.map_coords(|c| c * s).unwrap();
            let ms = all_pairs_exact(&scaled, alpha).unwrap();
            for (d, ds) in m.data().iter().zip(ms.data()) {
                worst_h = worst_h.max(rel(*ds, s.powf(a) * d));
            }
        }
    }
    (
        bad == 0 && worst_h <= 1e-12,
        format!("3 x 10^4 triples, {bad} violations; homogeneity error {worst_h:.1e} (tol 1e-12)"),
    )
}

fn landmark_sandwich() -> (bool, String) {
    let alpha = Alpha::new(2.0).unwrap();
    let cloud = random_cloud(200, 2000, 2);
    let n = cloud.len();
    let table = LandmarkTable::exact(&cloud, alpha, &choose_landmarks(n, 45, 200).unwrap()).unwrap();
    let mut rng = stream(200, "acceptance-landmarks", &[]);
    let (mut inside, mut tight, mut with_path) = (0, 0, 0);
    for _ in 0..1000 {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        let res = exact_distance_between(&cloud, alpha, i, j).unwrap();
        let d = res.distance;
        let b = landmark_bounds(&table, i, j).unwrap();
        if b.lower <= d * (1.0 + 1e-12) && d <= b.upper * (1.0 + 1e-12) {
            inside += 1;
        }
        let path = res.path.indices();
        if path.len() >= 3 {
            with_path += 1;
            let own = LandmarkTable::exact(&cloud, alpha, &[path[path.len() / 2]]).unwrap();
            if rel(landmark_bounds(&own, i, j).unwrap().upper, d) <= 1e-12 {
                tight += 1;
            }
        }
    }
    (
        inside == 1000 && tight == with_path,
        format!("{inside}/1000 pairs sandwiched; upper bound tight on {tight}/{with_path} injected path landmarks"),
    )
}

fn knn_restriction(dir: &Path) -> (bool, String) {
    let out = dir.join("knn");
    let s = experiment("knn", &out, &["--alpha", "2", "--schedule", "1e4", "--seed", "4"], None);
    let cap = (15.0 * 1e4f64.ln()).floor() as usize;
    let k_star = s["summary"]["k_star"][0][1].as_u64();
    let violations = s["summary"]["monotonicity_violations"].as_u64().unwrap();
    let rows = read_table(&out.join("knn.csv"));
    let best = col(&rows, "agreement").into_iter().fold(0.0, f64::max);
    let pass = k_star.is_some_and(|k| k as usize <= cap) && violations == 0;
    (
        pass,
        format!(
            "n=1e4: k* = {} (cap 15 ln n = {cap}), best agreement {best:.4}, {violations} monotonicity violations",
            k_star.map_or("none".into(), |k| k.to_string())
        ),
    )
}

fn consistency(dir: &Path) -> (bool, String) {
    let mut finals = Vec::new();
    let mut notes = Vec::new();
    let mut ok = true;
    for density in ["uniform", "two_media"] {
        let out = dir.join(format!("conv_{density}"));
        experiment("convergence", &out, &["--alpha", "2", "--density", density, "--seed", "6"], None);
        let rows = read_table(&out.join("convergence_summary.csv"));
        let disp = col(&rows, "iqr_over_median");
        let med = col(&rows, "median");
        ok &= strictly_decreasing(&disp);
        finals.push(*med.last().unwrap());
        notes.push(format!(
            "{density}: medians {} IQR/median {}",
            fmt(&med, 3),
            fmt(&disp, 3)
        ));
    }
    let gap = rel(finals[0], finals[1]);
    (
        ok && gap <= 0.05,
        format!("{}; final medians differ by {:.1}% (tol 5%)", notes.join("; "), 100.0 * gap),
    )
}

fn geodesic(dir: &Path) -> (bool, String) {
    let out = dir.join("geodesic");
    experiment(
        "geodesic",
        &out,
        &["--alpha", "3", "--density", "gauss_bump", "--schedule", "1e3,4e3,1.6e4", "--seed", "7"],
        None,
    );
    let rows = read_table(&out.join("geodesic_summary.csv"));
    let d = col(&rows, "median_curve_distance");
    let pos = *col(&rows, "fraction_positive").last().unwrap();
    (
        strictly_decreasing(&d) && pos >= 0.9,
        format!("median d_S {} ; positive bend at largest n {:.0}%", fmt(&d, 4), 100.0 * pos),
    )
}

fn shape(dir: &Path, mu: f64) -> (bool, String) {
    let mut ok = true;
    let mut notes = Vec::new();
    let mu = format!("{mu}");
    for density in ["uniform", "two_media"] {
        let out = dir.join(format!("shape_{density}"));
        let s = experiment(
            "shape",
            &out,
            &["--alpha", "2", "--density", density, "--mu", &mu, "--schedule", "1e3,4e3,1.6e4", "--seed", "8"],
            None,
        );
        let rows = read_table(&out.join("shape_summary.csv"));
        let eps = col(&rows, "median_epsilon");
        ok &= strictly_decreasing(&eps);
        let mut note = format!("{density}: median eps {}", fmt(&eps, 3));
        if density == "two_media" {
            let want = s["summary"]["expected_axis_ratio"].as_f64().unwrap();
            let got = *col(&rows, "median_axis_ratio").last().unwrap();
            ok &= (got / want - 1.0).abs() <= 0.05;
            note += &format!(", axis ratio {got:.3} vs {want:.3}");
        }
        notes.push(note);
    }
    (ok, notes.join("; "))
}

fn manifold(dir: &Path, mu: f64) -> (bool, String) {
    let out = dir.join("manifold");
    experiment("manifold", &out, &["--alpha", "2", "--manifold", "swiss_roll", "--seed", "9"], None);
    let rows = read_table(&out.join("manifold_summary.csv"));
    let by = |scaling: &str| {
        let rows: Vec<_> = rows.iter().filter(|r| r["scaling"] == scaling).cloned().collect();
        col(&rows, "median")
    };
    let (intrinsic, ambient) = (by("intrinsic"), by("ambient"));
    let off = (intrinsic.last().unwrap() / mu - 1.0).abs();
    let drift = (ambient.last().unwrap() / ambient[0]).ln().abs();
    (
        off <= 0.07 && drift > 0.3,
        format!(
            "intrinsic medians {} vs planar mu {mu:.3} ({:.1}% off, tol 7%); ambient log drift {drift:.2} (need > 0.3)",
            fmt(&intrinsic, 3),
            100.0 * off
        ),
    )
}

fn oracle_self_consistency() -> (bool, String) {
    let unit = DomainSpec::unit_cube(2);
    let beta = Beta::new(0.5).unwrap();
    let (x, y) = ([0.1f64, 0.2], [0.83f64, 0.61]);
    let len = ((y[0] - x[0]).powi(2) + (y[1] - x[1]).powi(2)).sqrt();
    let mut worst_c: f64 = 0.0;
    for c in [0.5, 3.0] {
        let f = DensitySpec::Uniform { value: c }.build(&unit).unwrap();
        let o = build_grid_oracle(&unit, &f, beta, OracleParams::new(1.0 / 200.0, 5)).unwrap();
        let d = continuum_distance(&o, &x, &y).unwrap().distance;
        worst_c = worst_c.max((d / (c.powf(-0.5) * len) - 1.0).abs());
    }
    let (a, b) = (0.4f64, 1.6f64);
    let f = DensitySpec::TwoMedia { a, b, axis: 1, split: 0.5 }.build(&unit).unwrap();
    let (x, y) = ([0.2f64, 0.1], [0.8f64, 0.9]);
    let cost = |t: f64| {
        a.powf(-0.5) * ((t - x[0]).powi(2) + (0.5 - x[1]).powi(2)).sqrt()
            + b.powf(-0.5) * ((y[0] - t).powi(2) + (y[1] - 0.5).powi(2)).sqrt()
    };
    let snell = (0..=100_000).map(|i| cost(i as f64 / 100_000.0)).fold(f64::INFINITY, f64::min);
    let vals: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&h| {
            let o = build_grid_oracle(&unit, &f, beta, OracleParams::new(h, 5)).unwrap();
            continuum_distance(&o, &x, &y).unwrap().distance
        })
        .collect();
    let snell_err = (vals[2] / snell - 1.0).abs();
    let steps: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
    let monotone = steps.iter().all(|s| *s <= 0.0) || steps.iter().all(|s| *s >= 0.0);
    let max_step = vals.windows(2).map(|w| rel(w[0], w[1])).fold(0.0, f64::max);
    (
        worst_c <= 0.01 && snell_err <= 0.01 && monotone && max_step < 0.01,
        format!(
            "constant density error {:.2}%, Snell error {:.2}%, refinement steps {} (monotone: {monotone})",
            100.0 * worst_c,
            100.0 * snell_err,
            steps.iter().map(|s| format!("{:+.2e}", s)).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn csv_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "csv") {
            files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
        }
    }
    files
}

fn determinism(dir: &Path) -> (bool, String) {
    let runs: [(&str, &[&str]); 6] = [
        ("mu", &["--schedule", "500,1000", "--reps", "4"]),
        ("convergence", &["--density", "two_media", "--schedule", "500,1000", "--reps", "4", "--h", "0.02", "--r", "3"]),
        ("geodesic", &["--alpha", "3", "--schedule", "500,1000", "--reps", "4", "--h", "0.02", "--r", "3"]),
        ("shape", &["--mu", "1.05", "--schedule", "1000", "--reps", "3", "--h", "0.02", "--r", "3"]),
        ("knn", &["--schedule", "500", "--reps", "2", "--sources", "5", "--targets", "20"]),
        ("manifold", &["--manifold", "swiss_roll", "--schedule", "500,1000", "--reps", "3"]),
    ];
    let mut differing = Vec::new();
    let mut compared = 0;
    for (kind, args) in runs {
        let mut args = args.to_vec();
        args.extend(["--seed", "11"]);
        let variants: Vec<_> = [(1, "a"), (1, "b"), (3, "c")]
            .iter()
            .map(|&(w, tag)| {
                let out = dir.join(format!("det_{kind}_{tag}"));
                experiment(kind, &out, &args, Some(w));
                csv_bytes(&out)
            })
            .collect();
        compared += variants[0].len();
        if variants[0].is_empty() || variants.iter().any(|v| v != &variants[0]) {
            differing.push(kind);
        }
    }
    (
        differing.is_empty(),
        format!("6 subcommands x 3 runs (1, 1 and 3 workers), {compared} CSVs compared, differing: {differing:?}"),
    )
}

fn fmt(v: &[f64], digits: usize) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.digits$}")).collect();
    format!("[{}]", parts.join(" "))
}

fn planar_mu(dir: &Path) -> f64 {
    let s = experiment("mu", &dir.join("mu"), &["--alpha", "2", "--seed", "3"], None);
    s["summary"]["mu_hat"].as_f64().unwrap()
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let mut out = Vec::new();
    report(&mut out, 1, "oracle equivalence", 60.0, oracle_equivalence);
    report(&mut out, 2, "alpha = 1 degeneracy", 10.0, alpha_one);
    report(&mut out, 3, "metric properties", 60.0, metric_properties);
    report(&mut out, 4, "kNN restriction", 300.0, || knn_restriction(dir));
    report(&mut out, 5, "landmark sandwich", 120.0, landmark_sandwich);
    report(&mut out, 6, "consistency collapse", 1200.0, || consistency(dir));
    report(&mut out, 7, "geodesic convergence", 600.0, || geodesic(dir));
    let start = Instant::now();
    let mu = planar_mu(dir);
    say(&format!("      planar mu estimate {mu:.4} ({:.0} s)", start.elapsed().as_secs_f64()));
    report(&mut out, 8, "shape sandwich", 600.0, || shape(dir, mu));
    report(&mut out, 9, "manifold intrinsic scaling", 900.0, || manifold(dir, mu));
    report(&mut out, 10, "continuum oracle self-consistency", 300.0, oracle_self_consistency);
    report(&mut out, 11, "determinism", 600.0, || determinism(dir));

    let unexpected: Vec<_> = out
        .iter()
        .filter(|o| !o.pass && !KNOWN_FAILING.contains(&o.id))
        .map(|o| format!("{} {}: {}", o.id, o.name, o.detail))
        .collect();
    let total: f64 = out.iter().map(|o| o.secs).sum();
    let budget: f64 = out.iter().map(|o| o.budget).sum();
    say(&format!(
        "acceptance: {} of {} criteria pass, {total:.0} s of {budget:.0} s",
        out.iter().filter(|o| o.pass).count(),
        out.len()
    ));
    assert!(unexpected.is_empty(), "unexpected failures: {unexpected:#?}");
}

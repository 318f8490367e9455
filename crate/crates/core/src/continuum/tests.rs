use super::*;
use crate::rng::stream;
use rand::Rng;

fn unit() -> DomainSpec {
    DomainSpec::unit_cube(2)
}

fn constant(c: f64) -> DensityField {
    DensitySpec::Uniform { value: c }.build(&unit()).unwrap()
}

fn two_media(a: f64, b: f64) -> DensityField {
    DensitySpec::TwoMedia { a, b, axis: 1, split: 0.5 }.build(&unit()).unwrap()
}

fn oracle(f: &DensityField, beta: f64, h: f64, r: usize) -> GridOracle {
    build_grid_oracle(&unit(), f, Beta::new(beta).unwrap(), OracleParams::new(h, r)).unwrap()
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-12 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

#[test]
fn stencil_sizes() {
    assert_eq!(stencil(1, 4), vec![vec![-1], vec![1]]);
    assert_eq!(stencil(2, 1).len(), 8);
    assert_eq!(stencil(2, 2).len(), 16);
    assert_eq!(stencil(3, 1).len(), 26);
    assert!(stencil(2, 5).iter().all(|o| o.iter().fold(0, |g, &c| gcd(g, c)) == 1));
}

#[test]
fn edge_weight_examples() {
    let h = 0.05;
    let o = oracle(&constant(1.0), 0.7, h, 2);
    let (u, v) = (o.snap(&[0.0, 0.0]).unwrap(), o.snap(&[h, h]).unwrap());
    assert!((o.edge(u, v).unwrap() - 2f64.sqrt() * h).abs() < 1e-15);

    // beta = 0 ignores f
    let bump = DensitySpec::parse("gauss_bump").unwrap().build(&unit()).unwrap();
    let o0 = oracle(&bump, 0.0, h, 2);
    for u in 0..o0.node_count() {
        let p = o0.node_point(u);
        for (v, w) in o0.edges(u) {
            let len = crate::point::sq_dist(&p, &o0.node_point(v)).sqrt();
            assert!((w - len).abs() <= 1e-12 * len);
        }
    }

    // constant region of a two-value density
    let o2 = oracle(&two_media(1.0, 4.0), 0.5, h, 1);
    let (u, v) = (o2.snap(&[0.2, 0.25]).unwrap(), o2.snap(&[0.25, 0.25]).unwrap());
    assert!((o2.edge(u, v).unwrap() - h).abs() < 1e-15);
}

#[test]
fn weights_are_symmetric_and_exact_for_constant_f() {
    let bump = DensitySpec::parse("gauss_bump").unwrap().build(&unit()).unwrap();
    let o = oracle(&bump, 1.0, 0.05, 3);
    for u in 0..o.node_count() {
        for (v, w) in o.edges(u) {
            assert_eq!(o.edge(v, u), Some(w));
        }
    }
    let c = 2.5;
    let beta = 0.5;
    let o = oracle(&constant(c), beta, 0.05, 3);
    for u in 0..o.node_count() {
        let p = o.node_point(u);
        for (v, w) in o.edges(u) {
            let want = c.powf(-beta) * crate::point::sq_dist(&p, &o.node_point(v)).sqrt();
            assert!((w - want).abs() <= 1e-12 * want);
        }
    }
}

#[test]
fn node_cap_and_bad_params() {
    let f = constant(1.0);
    let mut p = OracleParams::new(1e-3, 3);
    p.node_cap = 1000;
    assert!(matches!(
        build_grid_oracle(&unit(), &f, Beta::new(1.0).unwrap(), p),
        Err(Error::GridTooLarge { .. })
    ));
    assert!(build_grid_oracle(&unit(), &f, Beta::new(1.0).unwrap(), OracleParams::new(0.0, 3)).is_err());
    assert!(build_grid_oracle(&unit(), &f, Beta::new(1.0).unwrap(), OracleParams::new(0.1, 0)).is_err());
    assert!(Beta::new(-0.1).is_err());
}

#[test]
fn constant_density_is_scaled_euclidean() {
    let c: f64 = 3.0;
    let beta = 0.5;
    let (x, y) = ([0.1, 0.2], [0.83, 0.61]);
    let len = crate::point::sq_dist(&x, &y).sqrt();
    let h = len / 200.0;
    for r in [3, 5] {
        let o = build_grid_oracle(&unit(), &constant(c), Beta::new(beta).unwrap(), OracleParams::new(h, r)).unwrap();
        let res = continuum_distance(&o, &x, &y).unwrap();
        let want = c.powf(-beta) * len;
        assert!((res.distance / want - 1.0).abs() < 0.01, "r={r}: {} vs {want}", res.distance);
    }
}

#[test]
fn beta_zero_is_euclidean_and_ignores_f() {
    let mut rng = stream(1, "test", &[]);
    let bump = DensitySpec::parse("gauss_bump").unwrap().build(&unit()).unwrap();
    let a = oracle(&bump, 0.0, 0.02, 5);
    let b = oracle(&constant(1.0), 0.0, 0.02, 5);
    for _ in 0..20 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let y = [rng.random::<f64>(), rng.random::<f64>()];
        let ra = continuum_distance(&a, &x, &y).unwrap();
        let rb = continuum_distance(&b, &x, &y).unwrap();
        assert_eq!(ra.distance.to_bits(), rb.distance.to_bits());
        let (sx, sy) = (a.node_point(a.snap(&x).unwrap()), a.node_point(a.snap(&y).unwrap()));
        let e = crate::point::sq_dist(&sx, &sy).sqrt();
        assert!(ra.distance >= e * (1.0 - 1e-12) && ra.distance <= e * 1.01);
    }
}

#[test]
fn refraction_matches_snell_oracle() {
    let (a, b, beta) = (0.4f64, 1.6f64, 0.5);
    let (x, y) = ([0.2, 0.1], [0.8, 0.9]);
    let cost = |t: f64| {
        a.powf(-beta) * ((t - x[0]).powi(2) + (0.5 - x[1]).powi(2)).sqrt()
            + b.powf(-beta) * ((y[0] - t).powi(2) + (y[1] - 0.5).powi(2)).sqrt()
    };
    let want = golden_section(cost, 0.0, 1.0);
    let o = oracle(&two_media(a, b), beta, 0.01, 5);
    let got = continuum_distance(&o, &x, &y).unwrap().distance;
    assert!((got / want - 1.0).abs() < 0.01, "{got} vs {want}");
}

#[test]
fn refinement_changes_little_and_settles() {
    let f = two_media(0.4, 1.6);
    let (x, y) = ([0.2, 0.1], [0.8, 0.9]);
    let vals: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&h| continuum_distance(&oracle(&f, 0.5, h, 5), &x, &y).unwrap().distance)
        .collect();
    let d1 = (vals[1] - vals[0]).abs();
    let d2 = (vals[2] - vals[1]).abs();
    assert!(d1 / vals[0] < 0.01 && d2 / vals[1] < 0.01, "{vals:?}");
    assert!(d2 <= d1, "{vals:?}");
}

#[test]
fn symmetry_triangle_and_scaling() {
    let bump = DensitySpec::parse("gauss_bump").unwrap().build(&unit()).unwrap();
    let o = oracle(&bump, 1.0, 0.025, 3);
    let scaled = oracle(&bump.scaled(4.0).unwrap(), 1.0, 0.025, 3);
    let mut rng = stream(2, "test", &[]);
    let mut pt = || [rng.random::<f64>(), rng.random::<f64>()];
    for _ in 0..30 {
        let (x, y, z) = (pt(), pt(), pt());
        let dxy = continuum_distance(&o, &x, &y).unwrap();
        let dyx = continuum_distance(&o, &y, &x).unwrap();
        assert_eq!(dxy.distance.to_bits(), dyx.distance.to_bits());
        let mut back = dyx.nodes.clone();
        back.reverse();
        assert_eq!(dxy.nodes, back);
        let dxz = continuum_distance(&o, &x, &z).unwrap().distance;
        let dzy = continuum_distance(&o, &z, &y).unwrap().distance;
        assert!(dxy.distance <= (dxz + dzy) * (1.0 + 1e-12));
        let s = continuum_distance(&scaled, &x, &y).unwrap().distance;
        assert!((s - 0.25 * dxy.distance).abs() <= 1e-12 * dxy.distance);
    }
}

#[test]
fn result_distance_is_sum_of_path_weights() {
    let o = oracle(&two_media(0.4, 1.6), 0.5, 0.02, 3);
    let res = continuum_distance(&o, &[0.1, 0.1], &[0.9, 0.7]).unwrap();
    let sum = res.nodes.windows(2).fold(0.0, |acc, w| acc + o.edge(w[0], w[1]).unwrap());
    assert_eq!(sum.to_bits(), res.distance.to_bits());
    assert_eq!(res.geodesic.len(), res.nodes.len());
}

#[test]
fn geodesic_bends_toward_bump() {
    let bump = DensitySpec::parse("gauss_bump").unwrap().build(&unit()).unwrap();
    let (x, y) = ([0.1, 0.3], [0.9, 0.3]);
    let deviation = |h: f64| {
        let g = continuum_geodesic(&oracle(&bump, 1.0, h, 5), &x, &y).unwrap();
        g.iter().map(|p| p[1] - 0.3).fold(f64::NEG_INFINITY, f64::max)
    };
    let h = 0.02;
    let coarse = deviation(h);
    let fine = deviation(h / 2.0);
    assert!(coarse > 2.0 * h, "{coarse}");
    assert!((coarse - fine).abs() < 2.0 * h, "{coarse} vs {fine}");
}

#[test]
fn constant_geodesic_is_straight() {
    let o = oracle(&constant(1.0), 0.5, 0.01, 3);
    let (x, y) = ([0.1, 0.2], [0.9, 0.5]);
    let g = continuum_geodesic(&o, &x, &y).unwrap();
    let chord = [vec![0.1, 0.2], vec![0.9, 0.5]];
    let dev = crate::point::curve_distance(&g, &chord, 256).unwrap().value();
    assert!(dev <= o.h() * 2f64.sqrt(), "{dev}");
}

#[test]
fn balls() {
    let o = oracle(&constant(1.0), 0.5, 0.02, 3);
    let tiny = continuum_ball(&o, &[0.5, 0.5], 1e-9).unwrap();
    assert_eq!(tiny.members, vec![(tiny.center, 0.0)]);
    assert!(continuum_ball(&o, &[0.5, 0.5], 0.0).is_err());

    let (a, b, beta) = (0.4f64, 1.6f64, 0.5);
    let o = oracle(&two_media(a, b), beta, 0.005, 5);
    let t = 0.3;
    let ball = continuum_ball(&o, &[0.5, 0.5], t).unwrap();
    let up = ball.radius_along(&o, &[0.0, 1.0]);
    let down = ball.radius_along(&o, &[0.0, -1.0]);
    assert!((up - t * b.powf(beta)).abs() < 2.0 * o.h(), "{up}");
    assert!((down - t * a.powf(beta)).abs() < 2.0 * o.h(), "{down}");
    assert!((up / down / (b / a).powf(beta) - 1.0).abs() < 0.03);
}

#[test]
fn outside_points_fail() {
    let o = oracle(&constant(1.0), 0.5, 0.1, 1);
    assert!(matches!(o.snap(&[1.2, 0.5]), Err(Error::OutsideDomain(_))));
    assert!(o.snap(&[0.5]).is_err());
    let disk = DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 };
    let f = DensitySpec::Uniform { value: 1.0 }.build(&disk).unwrap();
    let od = build_grid_oracle(&disk, &f, Beta::new(0.0).unwrap(), OracleParams::new(0.1, 2)).unwrap();
    assert!(od.snap(&[0.9, 0.9]).is_err());
    let d = continuum_distance(&od, &[-0.7, 0.0], &[0.7, 0.0]).unwrap().distance;
    assert!((d - 1.4).abs() < 1e-12);
}

#[test]
fn interpolation_is_exact_on_linear_fields() {
    let o = oracle(&constant(1.0), 0.5, 0.1, 1);
    let field: Vec<f64> = (0..o.node_count())
        .map(|v| {
            let p = o.node_point(v);
            2.0 * p[0] - p[1] + 0.5
        })
        .collect();
    for x in [[0.33, 0.71], [1.0, 1.0], [0.0, 0.05]] {
        let got = o.interpolate(&field, &x).unwrap();
        assert!((got - (2.0 * x[0] - x[1] + 0.5)).abs() < 1e-12);
    }
}

#[test]
fn persist_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("o.bin");
    let o = oracle(&two_media(0.4, 1.6), 0.5, 0.05, 3);
    o.save(&path).unwrap();
    let back = GridOracle::load(&path).unwrap();
    assert_eq!(back.node_count(), o.node_count());
    assert_eq!(back.density_name(), "two_media");
    let (x, y) = ([0.1, 0.1], [0.9, 0.8]);
    assert_eq!(
        continuum_distance(&o, &x, &y).unwrap(),
        continuum_distance(&back, &x, &y).unwrap()
    );
    std::fs::write(&path, b"garbage!").unwrap();
    assert!(GridOracle::load(&path).is_err());
}

#[test]
fn svg_export() {
    let o = oracle(&constant(1.0), 0.5, 0.1, 2);
    let ball = continuum_ball(&o, &[0.5, 0.5], 0.3).unwrap();
    let g = continuum_geodesic(&o, &[0.1, 0.1], &[0.9, 0.9]).unwrap();
    let svg = plane_svg("ball", Some(&ball.points(&o)), Some(&g)).unwrap();
    assert!(svg.contains("<circle") && svg.contains("<polyline"));
}

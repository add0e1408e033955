use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use planeq::dbar::cauchy_remainder;
use planeq::equilibrium::{
    cavity_radius, classify_support, effective_potential, outer_radius, robin_constant, solve_exterior_map, CubicProblem,
};
use planeq::fekete::{descend_observed, energy, gradient, random_start, MinimizeOptions};
use planeq::measures::{log_potential_disk, log_potential_point, DiskMeasure};
use planeq::orthopoly::{build_orthopolys, compute_zeros, Precision};
use planeq::planarquad::{build_grid, cauchy_transform, inner_product, QuadSpec};
use planeq::schwarz::{branch_points, discriminant, distance_to_polyline, schwarz_branches};
use planeq::{PerturbedPotential, PointCharge, PointChargeMeasure};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `(alpha, beta, |a|)` with the cavity reaching past the outer circle.
fn exterior_params() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.2f64..2.0, 0.05f64..2.0, 0.01f64..3.0, 0.0f64..(2.0 * PI)).prop_map(|(alpha, beta, extra, phi)| {
        let r_out = ((1.0 + beta) / (2.0 * alpha)).sqrt();
        let r = cavity_radius(alpha, beta);
        (alpha, beta, r_out - r + extra, phi)
    })
}

fn laplacian(f: &dyn Fn(Complex64) -> f64, z: Complex64, h: f64) -> f64 {
    (f(z + h) + f(z - h) + f(z + c(0.0, h)) + f(z - c(0.0, h)) - 4.0 * f(z)) / (h * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn disk_potential_is_continuous_across_the_rim(cx in -2.0f64..2.0, cy in -2.0f64..2.0, r in 0.1f64..3.0, th in 0.0f64..(2.0 * PI)) {
        let d = DiskMeasure::new(c(cx, cy), r).unwrap();
        let e = Complex64::from_polar(1.0, th);
        let inner = log_potential_disk(&d, d.center + e * r * (1.0 - 1e-13));
        let outer = log_potential_disk(&d, d.center + e * r * (1.0 + 1e-13));
        prop_assert!((inner - outer).abs() < 1e-12 * (1.0 + inner.abs()));
    }

    #[test]
    fn disk_potential_laplacian(cx in -1.0f64..1.0, cy in -1.0f64..1.0, r in 0.5f64..2.0, rho in 0.0f64..0.8, th in 0.0f64..(2.0 * PI)) {
        let d = DiskMeasure::new(c(cx, cy), r).unwrap();
        let f = |z: Complex64| log_potential_disk(&d, z);
        let inside = d.center + Complex64::from_polar(rho * r, th);
        prop_assert!((laplacian(&f, inside, 1e-3) + 2.0 * PI).abs() < 1e-4);
        let outside = d.center + Complex64::from_polar((1.3 + rho) * r, th);
        let l1 = laplacian(&f, outside, 1e-2).abs();
        let l2 = laplacian(&f, outside, 5e-3).abs();
        prop_assert!(l1 < 1e-3 && l2 < 1e-3);
    }

    #[test]
    fn point_potential_far_field(x in -1.0f64..1.0, y in -1.0f64..1.0, b in 0.1f64..2.0, th in 0.0f64..(2.0 * PI)) {
        let nu = PointChargeMeasure::new(vec![
            PointCharge { location: c(x, y), beta: b },
            PointCharge { location: c(-y, 0.5 * x), beta: 0.5 },
        ]).unwrap();
        let mass = nu.total_mass();
        // |log|z - a| - log|z|| <= |a| / (|z| - |a|)
        let bound: f64 = nu.charges().iter().map(|q| q.beta * q.location.norm()).sum::<f64>() * 1.01;
        for r in [1e2, 1e4, 1e6] {
            let z = Complex64::from_polar(r, th);
            let dev = (log_potential_point(&nu, z).to_f64() - mass * (1.0 / r).ln()).abs() * r;
            prop_assert!(dev <= bound + 1e-8 * r, "{} {}", dev, bound);
        }
    }

    #[test]
    fn potential_is_admissible(alpha in 0.1f64..2.0, x in -2.0f64..2.0, b in 0.1f64..3.0, th in 0.0f64..(2.0 * PI)) {
        let p = PerturbedPotential::new(alpha, PointChargeMeasure::single(c(x, 0.3), b).unwrap(), 10.0, 2.0).unwrap();
        let vals: Vec<f64> = [10.0, 1e2, 1e3]
            .iter()
            .map(|&r| p.value(Complex64::from_polar(r, th)).to_f64() - r.ln())
            .collect();
        prop_assert!(vals[0] < vals[1] && vals[1] < vals[2]);
        prop_assert!(vals[2] > 1e5 * alpha);
    }

    #[test]
    fn exterior_map_solves_its_system((alpha, beta, t, phi) in exterior_params()) {
        let a = Complex64::from_polar(t, phi);
        let m = solve_exterior_map(alpha, beta, a).unwrap();
        for r in m.residuals(alpha, beta, a) {
            prop_assert!(r < 1e-10, "{:?}", m.residuals(alpha, beta, a));
        }
        prop_assert!((m.area() - PI / (2.0 * alpha)).abs() < 1e-10);
        let cp = CubicProblem { t, alpha, beta };
        let x = cp.solve().unwrap();
        prop_assert!(x > 0.0 && x < 1.0 && cp.g(x).abs() < 1e-12);
        prop_assert!((m.pole.norm_sqr() - x).abs() < 1e-12);
    }

    #[test]
    fn exterior_map_rotates_with_the_charge((alpha, beta, t, phi) in exterior_params(), theta in 0.0f64..(2.0 * PI)) {
        let a = Complex64::from_polar(t, phi);
        let rot = Complex64::from_polar(1.0, theta);
        let m = solve_exterior_map(alpha, beta, a).unwrap();
        let mr = solve_exterior_map(alpha, beta, a * rot).unwrap();
        prop_assert!((m.rho - mr.rho).abs() < 1e-12);
        prop_assert!((m.pole * rot - mr.pole).norm() < 1e-12);
        prop_assert!((m.v * rot * rot - mr.v).norm() < 1e-12);
        prop_assert!((m.u * rot - mr.u).norm() < 1e-12);
    }

    #[test]
    fn schwarz_identity_on_random_boundaries((alpha, beta, t, phi) in exterior_params()) {
        let m = solve_exterior_map(alpha, beta, Complex64::from_polar(t, phi)).unwrap();
        for z in m.boundary_samples(90) {
            let b = schwarz_branches(&m, z);
            let err = b.s.iter().map(|s| (s - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(err < 1e-10 * (1.0 + z.norm()));
        }
        for bp in branch_points(&m).unwrap() {
            prop_assert!(discriminant(&m, bp.z).norm() < 1e-12 * (1.0 + bp.z.norm_sqr()));
            prop_assert!(m.contains(bp.z));
        }
    }

    #[test]
    fn cavity_effective_potential_is_flat(x in -0.3f64..0.3, y in -0.3f64..0.3, beta in 0.1f64..0.6, rr in 0.0f64..1.0, th in 0.0f64..(2.0 * PI)) {
        let p = PerturbedPotential::new(0.5, PointChargeMeasure::single(c(x, y), beta).unwrap(), 10.0, 2.0).unwrap();
        if let Ok(geom @ planeq::equilibrium::SupportGeometry::DiskCavities { .. }) = classify_support(&p) {
            let (r_out, r_cav) = (outer_radius(&p), cavity_radius(0.5, beta));
            let f = robin_constant(&geom, &p).unwrap();
            // a point of the annulus between the cavity and the outer circle
            let e = Complex64::from_polar(1.0, th);
            let t_lo = {
                // distance from the charge to the outer circle along e
                let a = c(x, y);
                let b = (a.conj() * e).re;
                -b + (b * b - a.norm_sqr() + r_out * r_out).sqrt()
            };
            let s = r_cav + rr * (t_lo - r_cav);
            let z = c(x, y) + e * s;
            let val = effective_potential(&geom, &p, z).to_f64();
            prop_assert!((val - f).abs() < 1e-10, "{} {}", val, f);
        }
    }

    #[test]
    fn fekete_gradient_matches_differences(seed in 0u64..1000, n in 2usize..30) {
        let p = PerturbedPotential::new(0.5, PointChargeMeasure::single(c(0.3, 0.1), 0.5).unwrap(), 10.0, 2.0).unwrap();
        let pts = random_start(n, 1.2, seed);
        let g = gradient(&pts, &p);
        let h = 1e-5;
        let i = (seed as usize) % n;
        let shift = |d: Complex64| {
            let mut q = pts.clone();
            q[i] += d;
            energy(&q, &p).to_f64()
        };
        let ex = (shift(c(h, 0.0)) - shift(c(-h, 0.0))) / (2.0 * h);
        let ey = (shift(c(0.0, h)) - shift(c(0.0, -h))) / (2.0 * h);
        let fd = 0.5 * c(ex, ey);
        prop_assert!((fd - g[i]).norm() < 1e-6 * g[i].norm().max(1.0), "{} {}", fd, g[i]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn fekete_energy_decreases(seed in 0u64..1000, n in 5usize..60) {
        let p = PerturbedPotential::new(0.5, PointChargeMeasure::single(c(0.3, 0.0), 0.5).unwrap(), 10.0, 2.0).unwrap();
        let mut changes = Vec::new();
        let cfg = descend_observed(random_start(n, 1.2, seed), &p, &MinimizeOptions::default(), &mut |d| changes.push(d)).unwrap();
        prop_assert!(changes.iter().all(|&d| d < 0.0));
        prop_assert!(cfg.gradient_norm < 1e-8);
        prop_assert!(gradient(&cfg.points, &p).iter().all(|g| g.norm() < 1e-8));
    }

    #[test]
    fn zeros_follow_rotations_and_conjugation(x in 0.2f64..0.5, theta in 0.0f64..(2.0 * PI)) {
        let (n, big_n) = (8, 16.0);
        let zeros_for = |a: Complex64| {
            let p = PerturbedPotential::new(0.5, PointChargeMeasure::single(a, 0.5).unwrap(), big_n, 2.0).unwrap();
            let g = build_grid(&p, &QuadSpec::default(), n).unwrap();
            let ops = build_orthopolys(&p, &g, n, Precision::Double).unwrap();
            compute_zeros(&ops, n).unwrap().zeros
        };
        let rot = Complex64::from_polar(1.0, theta);
        let real = zeros_for(c(x, 0.0));
        let turned = zeros_for(c(x, 0.0) * rot);
        for z in &real {
            let d = real.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-9);
            let d = turned.iter().map(|w| (w - z * rot).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-7, "{}", d);
        }
    }

    #[test]
    fn radial_norms_match_gamma_formula(alpha in 0.3f64..1.5, big_n in 5.0f64..30.0, m in 0u32..3) {
        // charge of mass m / N at the origin, weight |z|^m e^{-N alpha |z|^2}:
        // h_k = pi Gamma(k + m/2 + 1) / (N alpha)^(k + m/2 + 1)
        let nu = if m == 0 {
            PointChargeMeasure::empty()
        } else {
            PointChargeMeasure::single(c(0.0, 0.0), m as f64 / big_n).unwrap()
        };
        let p = PerturbedPotential::new(alpha, nu, big_n, 2.0).unwrap();
        let g = build_grid(&p, &QuadSpec::default(), 12).unwrap();
        let ops = build_orthopolys(&p, &g, 12, Precision::Double).unwrap();
        let na = big_n * alpha;
        for k in 0..=12usize {
            let e = k as f64 + 0.5 * m as f64 + 1.0;
            let h = PI * (statrs::function::gamma::ln_gamma(e) - e * na.ln()).exp();
            prop_assert!(ops.norms[k] > 0.0);
            prop_assert!((ops.norms[k] - h).abs() < 1e-8 * h, "k {} {} {}", k, ops.norms[k], h);
        }
    }

    #[test]
    fn cauchy_transform_is_bounded(seed in 0u64..1000) {
        let p = PerturbedPotential::new(0.5, PointChargeMeasure::single(c(0.3, 0.2), 0.5).unwrap(), 20.0, 2.0).unwrap();
        let g = build_grid(&p, &QuadSpec::default(), 4).unwrap();
        for z in random_start(100, 3.0, seed) {
            let est = cauchy_transform(&g, |_| c(1.0, 0.0), 4, z);
            prop_assert!(est.value.norm() <= est.bound);
        }
    }
}

#[test]
fn moment_matrix_is_positive_definite() {
    let p = PerturbedPotential::new(0.5, PointChargeMeasure::single(c(0.3, 0.0), 0.5).unwrap(), 80.0, 2.0).unwrap();
    let g = build_grid(&p, &QuadSpec::default(), 40).unwrap();
    for n in [10, 25, 40] {
        // normalized monomials keep the matrix within double range
        let scale = (80.0f64 * 0.5).sqrt();
        let m = nalgebra::DMatrix::<nalgebra::Complex<f64>>::from_fn(n, n, |j, k| {
            let v = inner_product(&g, |z| (z * scale).powu(j as u32), |z| (z * scale).powu(k as u32));
            let norm = (statrs::function::gamma::ln_gamma(j as f64 + 1.0) + statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp().sqrt();
            nalgebra::Complex::new(v.re / norm, v.im / norm)
        });
        let herm = (&m - m.adjoint()).norm() / m.norm();
        assert!(herm < 1e-12, "{herm}");
        assert!(m.cholesky().is_some(), "n = {n}");
    }
}

#[test]
fn grid_refinement_changes_mass_little() {
    let p = PerturbedPotential::new(0.5, PointChargeMeasure::single(c(0.4, -0.2), 0.5).unwrap(), 30.0, 2.0).unwrap();
    let spec = QuadSpec::default();
    let g = build_grid(&p, &spec, 10).unwrap();
    let fine = QuadSpec {
        nr: 2 * spec.nr,
        nt: 2 * g.nt,
        eps_tail: spec.eps_tail,
    };
    let g2 = build_grid(&p, &fine, 10).unwrap();
    assert!((g.mass() - g2.mass()).abs() < 10.0 * spec.eps_tail * g2.mass());
}

#[test]
fn cauchy_decay_order() {
    // the leading correction is (sum of the zeros of P_{n+1}) / z, so the
    // charge sits near the origin to make |z| = 100 already asymptotic
    let p = PerturbedPotential::new(0.5, PointChargeMeasure::single(c(0.1, 0.05), 0.5).unwrap(), 20.0, 2.0).unwrap();
    let g = build_grid(&p, &QuadSpec::default(), 6).unwrap();
    let ops = build_orthopolys(&p, &g, 6, Precision::Auto).unwrap();
    for n in [2usize, 5] {
        for r in [1e2, 1e3] {
            // z^{n+1} C(z) - h_n by the orthogonality-reduced sum
            let z = Complex64::from_polar(r, 0.4);
            let rem = z.powu(n as u32 + 1) * cauchy_remainder(&ops, &g, n, z);
            assert!(rem.norm() < 1e-2 * ops.norms[n], "n {n} r {r}: {} vs {}", rem.norm(), ops.norms[n]);
        }
        let z = c(3.0 * g.r_t, 0.0);
        let direct = cauchy_transform(&g, |w| ops.eval(n, w).conj(), n, z).value;
        let reduced = (ops.norms[n] + z.powu(n as u32 + 1) * cauchy_remainder(&ops, &g, n, z)) / z.powu(n as u32 + 1);
        assert!((direct - reduced).norm() < 1e-8 * reduced.norm());
    }
}

#[test]
fn zero_potential_approaches_equilibrium_potential() {
    // -(1/n) log|P_n| against the equilibrium potential at a fixed exterior point
    let z = c(2.5, 0.7);
    let mut prev = f64::INFINITY;
    for n in [10usize, 20, 30, 40] {
        let p = PerturbedPotential::new(0.5, PointChargeMeasure::single(c(2.0, 0.0), 0.5).unwrap(), 2.0 * n as f64, 2.0).unwrap();
        let g = build_grid(&p, &QuadSpec::default(), n).unwrap();
        let ops = build_orthopolys(&p, &g, n, Precision::Auto).unwrap();
        let zs = compute_zeros(&ops, n).unwrap();
        let cmp = planeq::schwarz::external_potential_compare(&zs, &p, &[z]).unwrap();
        assert!(cmp.sup < prev, "n = {n}: {} after {prev}", cmp.sup);
        prev = cmp.sup;
    }
}

#[test]
fn exterior_support_tends_to_tangent_disks() {
    // as |a| + r decreases to R the boundary approaches the outer circle
    // together with the cavity circle
    let (alpha, beta) = (0.5, 0.5);
    let (r_out, r) = (1.5f64.sqrt(), 0.5f64.sqrt());
    let mut prev = f64::INFINITY;
    for eps in [1e-1, 1e-2, 1e-3] {
        let t = r_out - r + eps;
        let m = solve_exterior_map(alpha, beta, c(t, 0.0)).unwrap();
        let curve: Vec<Complex64> = (0..20000)
            .map(|i| {
                // cluster samples toward the pole direction, where the cavity arc sits
                let s = -1.0 + 2.0 * i as f64 / 20000.0;
                m.boundary_point(PI * s.powi(3))
            })
            .collect();
        let to_tangent = |z: Complex64| ((z.norm() - r_out).abs()).min(((z - t).norm() - r).abs());
        let forward = curve.iter().map(|&z| to_tangent(z)).fold(0.0, f64::max);
        let backward = (0..720)
            .flat_map(|k| {
                let e = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 720.0);
                [e * r_out, c(t, 0.0) + e * r]
            })
            .filter(|z| z.norm() <= r_out + 1e-12 && (z - t).norm() >= r - 1e-12)
            .map(|z| distance_to_polyline(z, &curve))
            .fold(0.0, f64::max);
        let h = forward.max(backward);
        assert!(h < prev, "eps {eps}: {h}");
        prev = h;
    }
    assert!(prev < 0.1, "{prev}");
}

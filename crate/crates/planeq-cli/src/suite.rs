//! The acceptance suite: twelve criteria, each a named pass/fail check with
//! its measured numbers.

use std::f64::consts::PI;
use std::time::Instant;

use anyhow::{anyhow, Context};
use num_complex::Complex64;
use planeq::dbar::{asymptotic_normalization, cauchy_remainder, dbar_report, loglog_slope, sample_points, uniqueness_crosscheck, DbarMatrix};
use planeq::equilibrium::{
    classify_support, effective_potential, in_support, outer_radius, robin_constant, solve_exterior_map, support_area,
    verify_equilibrium, CubicProblem, SupportGeometry, VerifyGrid,
};
use planeq::fekete::{discrepancy, energy_change, gradient, minimize_multistart, random_start, MinimizeOptions};
use planeq::orthopoly::{build_orthopolys, compute_zeros, OrthoPolySet, Precision, ZeroSet};
use planeq::planarquad::{build_grid, QuadGrid, QuadSpec};
use planeq::schwarz::{
    annulus_grid, branch_points, critical_trajectories, discriminant, external_potential_compare, schwarz_branches, JumpField,
    Trajectory,
};
use planeq::{PerturbedPotential, PointCharge, PointChargeMeasure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

#[derive(Debug, Clone, Copy, Default)]
pub struct SuiteOptions {
    /// Run only the criteria marked quick.
    pub quick: bool,
    /// Perturb the closed-form geometries before checking them (negative control).
    pub corrupt_geometry: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub seconds: f64,
    pub time_limit: Option<f64>,
    pub summary: String,
    pub metrics: serde_json::Value,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {:<28} {:>8.2}s  {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.summary
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub quick: bool,
    pub corrupt_geometry: bool,
    pub pass: bool,
    pub failed: Vec<&'static str>,
    pub criteria: Vec<Outcome>,
}

struct Check {
    pass: bool,
    summary: String,
    metrics: serde_json::Value,
}

type Runner = fn(&SuiteOptions) -> anyhow::Result<Check>;

pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub quick: bool,
    pub time_limit: Option<f64>,
    run: Runner,
}

pub const CRITERIA: [Criterion; 12] = [
    Criterion { id: 1, name: "closed_form_geometry", quick: true, time_limit: Some(10.0), run: closed_form_geometry },
    Criterion { id: 2, name: "conformal_map_system", quick: true, time_limit: Some(5.0), run: conformal_map_system },
    Criterion { id: 3, name: "numerical_equilibrium", quick: true, time_limit: Some(120.0), run: numerical_equilibrium },
    Criterion { id: 4, name: "radial_oracle", quick: true, time_limit: None, run: radial_oracle },
    Criterion { id: 5, name: "gram_residual", quick: true, time_limit: None, run: gram_residual },
    Criterion { id: 6, name: "cauchy_asymptotics", quick: true, time_limit: None, run: cauchy_asymptotics },
    Criterion { id: 7, name: "dbar_problem", quick: true, time_limit: None, run: dbar_problem },
    Criterion { id: 8, name: "uniqueness_relations", quick: true, time_limit: None, run: uniqueness_relations },
    Criterion { id: 9, name: "schwarz_identity", quick: true, time_limit: None, run: schwarz_identity },
    Criterion { id: 10, name: "zero_attractor", quick: false, time_limit: Some(600.0), run: zero_attractor },
    Criterion { id: 11, name: "external_potential_match", quick: false, time_limit: None, run: external_potential_match },
    Criterion { id: 12, name: "fekete_points", quick: false, time_limit: None, run: fekete_points },
];

/// Runs the selected criteria, calling `each` after every one.
pub fn run_suite(opts: &SuiteOptions, mut each: impl FnMut(&Outcome)) -> SuiteReport {
    let mut criteria = Vec::new();
    for c in CRITERIA.iter().filter(|c| c.quick || !opts.quick) {
        let t0 = Instant::now();
        let res = (c.run)(opts);
        let seconds = t0.elapsed().as_secs_f64();
        let in_time = c.time_limit.map_or(true, |l| seconds < l);
        let out = match res {
            Ok(chk) => Outcome {
                id: c.id,
                name: c.name,
                pass: chk.pass && in_time,
                seconds,
                time_limit: c.time_limit,
                summary: if in_time {
                    chk.summary
                } else {
                    format!("{} (over the {}s budget)", chk.summary, c.time_limit.unwrap_or_default())
                },
                metrics: chk.metrics,
            },
            Err(e) => Outcome {
                id: c.id,
                name: c.name,
                pass: false,
                seconds,
                time_limit: c.time_limit,
                summary: format!("error: {e:#}"),
                metrics: serde_json::Value::Null,
            },
        };
        each(&out);
        criteria.push(out);
    }
    let failed: Vec<&'static str> = criteria.iter().filter(|o| !o.pass).map(|o| o.name).collect();
    SuiteReport {
        quick: opts.quick,
        corrupt_geometry: opts.corrupt_geometry,
        pass: failed.is_empty(),
        failed,
        criteria,
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn single(alpha: f64, a: Complex64, beta: f64, big_n: f64) -> anyhow::Result<PerturbedPotential> {
    Ok(PerturbedPotential::new(alpha, PointChargeMeasure::single(a, beta)?, big_n, 2.0)?)
}

/// The default single-charge cavity configuration with weight scale `big_n`.
pub fn cavity_config(big_n: f64) -> anyhow::Result<PerturbedPotential> {
    single(0.5, c(0.3, 0.0), 0.5, big_n)
}

/// The worked exterior-map configuration with weight scale `big_n`.
pub fn exterior_config(big_n: f64) -> anyhow::Result<PerturbedPotential> {
    single(0.5, c(2.0, 0.0), 0.5, big_n)
}

fn polys(p: &PerturbedPotential, degree: usize, precision: Precision) -> anyhow::Result<(QuadGrid, OrthoPolySet)> {
    let g = build_grid(p, &QuadSpec::default(), degree)?;
    let ops = build_orthopolys(p, &g, degree, precision)?;
    Ok((g, ops))
}

fn corrupt(geom: SupportGeometry) -> SupportGeometry {
    match geom {
        SupportGeometry::DiskCavities { outer, cavities } => SupportGeometry::DiskCavities {
            outer: outer * 1.001,
            cavities,
        },
        SupportGeometry::ExteriorMap(mut m) => {
            m.rho *= 1.01;
            SupportGeometry::ExteriorMap(m)
        }
    }
}

fn uniform_in_disk(rng: &mut ChaCha8Rng, center: Complex64, r_lo: f64, r_hi: f64) -> Complex64 {
    let r = (r_lo * r_lo + (r_hi * r_hi - r_lo * r_lo) * rng.gen::<f64>()).sqrt();
    center + Complex64::from_polar(r, 2.0 * PI * rng.gen::<f64>())
}

/// Random potential whose cavities are disjoint and inside the outer disk.
fn random_cavity_potential(rng: &mut ChaCha8Rng) -> PerturbedPotential {
    loop {
        let alpha: f64 = rng.gen_range(0.2..2.0);
        let k = rng.gen_range(1..=3usize);
        let betas: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..0.6)).collect();
        let r_out = ((1.0 + betas.iter().sum::<f64>()) / (2.0 * alpha)).sqrt();
        let radii: Vec<f64> = betas.iter().map(|b| (b / (2.0 * alpha)).sqrt()).collect();
        let mut charges: Vec<PointCharge> = Vec::new();
        let mut ok = true;
        for (b, r) in betas.iter().zip(&radii) {
            let reach = r_out - r - 1e-3 * r_out;
            if reach <= 0.0 {
                ok = false;
                break;
            }
            let mut placed = false;
            for _ in 0..200 {
                let z = uniform_in_disk(rng, c(0.0, 0.0), 0.0, reach);
                let clear = charges
                    .iter()
                    .all(|q| (q.location - z).norm() > r + (q.beta / (2.0 * alpha)).sqrt() + 1e-3 * r_out);
                if clear {
                    charges.push(PointCharge { location: z, beta: *b });
                    placed = true;
                    break;
                }
            }
            if !placed {
                ok = false;
                break;
            }
        }
        if ok {
            let nu = PointChargeMeasure::new(charges).expect("positive masses");
            return PerturbedPotential::new(alpha, nu, 1.0, 2.0).expect("positive parameters");
        }
    }
}

fn closed_form_geometry(opts: &SuiteOptions) -> anyhow::Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x11);
    let (mut worst_flat, mut worst_margin) = (0.0f64, f64::INFINITY);
    let mut failures = 0;
    for _ in 0..100 {
        let p = random_cavity_potential(&mut rng);
        let mut geom = classify_support(&p)?;
        let SupportGeometry::DiskCavities { outer, cavities } = geom.clone() else {
            return Err(anyhow!("random cavity input classified as exterior"));
        };
        let f = robin_constant(&geom, &p)?;
        if opts.corrupt_geometry {
            geom = corrupt(geom);
        }
        let mut on = Vec::new();
        while on.len() < 50 {
            let z = uniform_in_disk(&mut rng, c(0.0, 0.0), 0.0, outer);
            if in_support(&geom, z) {
                on.push(z);
            }
        }
        let mut off: Vec<Complex64> = (0..20).map(|_| uniform_in_disk(&mut rng, c(0.0, 0.0), 1.05 * outer, 2.0 * outer)).collect();
        for cav in &cavities {
            off.extend((0..10).map(|_| uniform_in_disk(&mut rng, cav.center, 0.0, 0.95 * cav.radius)));
        }
        let flat = on
            .iter()
            .map(|&z| (effective_potential(&geom, &p, z).to_f64() - f).abs())
            .fold(0.0, f64::max);
        let margin = off
            .iter()
            .map(|&z| effective_potential(&geom, &p, z).to_f64() - f)
            .fold(f64::INFINITY, f64::min);
        worst_flat = worst_flat.max(flat);
        worst_margin = worst_margin.min(margin);
        if !(flat < 1e-8 && margin > 0.0) {
            failures += 1;
        }
    }
    Ok(Check {
        pass: failures == 0,
        summary: format!("100 inputs, {failures} failing; max |U - F| on support {worst_flat:.2e}, min U - F off support {worst_margin:.2e}"),
        metrics: json!({ "inputs": 100, "failures": failures, "max_deviation_on_support": worst_flat, "min_margin_off_support": worst_margin }),
    })
}

fn conformal_map_system(opts: &SuiteOptions) -> anyhow::Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x22);
    let (mut worst_res, mut worst_area) = (0.0f64, 0.0f64);
    let mut bad_sign = 0;
    for _ in 0..100 {
        let alpha: f64 = rng.gen_range(0.2..2.0);
        let beta: f64 = rng.gen_range(0.05..2.0);
        let r_out = ((1.0 + beta) / (2.0 * alpha)).sqrt();
        let r = (beta / (2.0 * alpha)).sqrt();
        // the circles |z| = R and |z - a| = r cross
        let lo = (r_out - r).abs();
        let t = lo + (r_out + r - lo) * rng.gen_range(0.01..0.99);
        let a = Complex64::from_polar(t, rng.gen_range(0.0..2.0 * PI));
        let m = solve_exterior_map(alpha, beta, a).with_context(|| format!("alpha {alpha} beta {beta} a {a}"))?;
        let res = m.residuals(alpha, beta, a).iter().copied().fold(0.0, f64::max);
        let area = (support_area(&SupportGeometry::ExteriorMap(m)) - PI / (2.0 * alpha)).abs();
        if (CubicProblem { t, alpha, beta }).sign_changes(10_000) != 1 {
            bad_sign += 1;
        }
        worst_res = worst_res.max(res);
        worst_area = worst_area.max(area);
    }
    Ok(Check {
        pass: worst_res < 1e-10 && worst_area < 1e-10 && bad_sign == 0,
        summary: format!("100 inputs: max residual {worst_res:.2e}, max area error {worst_area:.2e}, {bad_sign} without a single sign change"),
        metrics: json!({ "max_residual": worst_res, "max_area_error": worst_area, "sign_change_failures": bad_sign }),
    })
}

fn numerical_equilibrium(opts: &SuiteOptions) -> anyhow::Result<Check> {
    let p = exterior_config(1.0)?;
    let mut geom = classify_support(&p)?;
    if opts.corrupt_geometry {
        geom = corrupt(geom);
    }
    let rep = verify_equilibrium(&geom, &p, VerifyGrid { n: 200, margin: 0.25 }, 1e-4, 1e-4);
    Ok(Check {
        pass: rep.pass,
        summary: format!(
            "200x200 grid: max |U + V - F| on support {:.2e}, min margin off support {:.2e}",
            rep.max_dev_on_support, rep.min_margin_off_support
        ),
        metrics: serde_json::to_value(&rep)?,
    })
}

fn radial_oracle(_: &SuiteOptions) -> anyhow::Result<Check> {
    let (alpha, big_n, kmax) = (0.5, 30.0, 25);
    let mut worst_off = 0.0f64;
    let mut worst_rel = 0.0f64;
    let mut cases = Vec::new();
    for beta in [0.0, 0.5] {
        let nu = if beta == 0.0 {
            PointChargeMeasure::empty()
        } else {
            PointChargeMeasure::single(c(0.0, 0.0), beta)?
        };
        let p = PerturbedPotential::new(alpha, nu, big_n, 2.0)?;
        let (_, ops) = polys(&p, kmax, Precision::Auto)?;
        // |w|^{N beta} e^{-N alpha |w|^2}: h_k = pi Gamma(k + m/2 + 1) / (N alpha)^(k + m/2 + 1), m = N beta
        let m = big_n * beta;
        let na = big_n * alpha;
        let (mut off, mut rel) = (0.0f64, 0.0f64);
        for k in 0..=kmax {
            off = off.max(ops.coeffs[k][..k].iter().map(|x| x.norm()).sum::<f64>());
            let e = k as f64 + 0.5 * m + 1.0;
            let h = PI * (statrs::function::gamma::ln_gamma(e) - e * na.ln()).exp();
            rel = rel.max((ops.norms[k] - h).abs() / h);
        }
        cases.push(json!({ "beta_at_origin": beta, "off_monomial_mass": off, "max_relative_norm_error": rel }));
        worst_off = worst_off.max(off);
        worst_rel = worst_rel.max(rel);
    }
    Ok(Check {
        pass: worst_off < 1e-10 && worst_rel < 1e-8,
        summary: format!("k <= {kmax}: off-monomial mass {worst_off:.2e}, norm relative error {worst_rel:.2e}"),
        metrics: json!({ "cases": cases }),
    })
}

fn gram_residual(_: &SuiteOptions) -> anyhow::Result<Check> {
    let p = cavity_config(80.0)?;
    let g = build_grid(&p, &QuadSpec::default(), 40)?;
    let ext = build_orthopolys(&p, &g, 40, Precision::Extended)?;
    Ok(Check {
        pass: ext.gram_residual < 1e-8,
        summary: format!("n = 40, N = 80, extended precision: max normalized Gram entry {:.2e}", ext.gram_residual),
        metrics: json!({ "n": 40, "N": 80.0, "gram_residual": ext.gram_residual }),
    })
}

fn log_radii(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).collect()
}

fn cauchy_asymptotics(_: &SuiteOptions) -> anyhow::Result<Check> {
    let p = cavity_config(20.0)?;
    let (g, ops) = polys(&p, 6, Precision::Auto)?;
    let radii = log_radii(1e2, 1e3, 6);
    let mut pass = true;
    let mut slopes = Vec::new();
    for n in [2usize, 5] {
        let ys: Vec<f64> = radii
            .iter()
            .map(|&r| cauchy_remainder(&ops, &g, n, Complex64::from_polar(r, 0.3)).norm())
            .collect();
        let s = loglog_slope(&radii, &ys);
        pass &= s <= -(n as f64 + 2.0) + 0.2;
        slopes.push((n, s));
    }
    Ok(Check {
        pass,
        summary: slopes.iter().map(|(n, s)| format!("n = {n}: slope {s:.3}")).collect::<Vec<_>>().join(", "),
        metrics: json!({ "radii": radii, "slopes": slopes }),
    })
}

fn dbar_problem(opts: &SuiteOptions) -> anyhow::Result<Check> {
    let p = cavity_config(20.0)?;
    let (g, ops) = polys(&p, 6, Precision::Auto)?;
    let geom = classify_support(&p.rescaled())?;
    let samples = sample_points(&geom, 50, opts.seed);
    let all: Vec<Complex64> = samples.all().copied().collect();
    let order_points: Vec<Complex64> = samples
        .support
        .iter()
        .take(3)
        .chain(samples.cavities.iter().take(3))
        .chain(samples.outside.iter().take(3))
        .copied()
        .collect();
    let radii = log_radii(1e2, 1e3, 6);
    let mut pass = true;
    let mut reports = Vec::new();
    let mut parts = Vec::new();
    for k in [1usize, 3, 5] {
        let y = DbarMatrix::new(&ops, &g, k)?;
        let rep = dbar_report(&y, &all, 2.5e-3, &order_points, &radii)?;
        let dev = rep.slopes.max_deviation(-1.0);
        let order = rep.min_order[0].min(rep.min_order[1]);
        pass &= order >= 1.8 && dev < 0.2;
        parts.push(format!("k = {k}: order {order:.2}, slope deviation {dev:.3}"));
        reports.push(rep);
    }
    // a second ray for the slopes
    let y = DbarMatrix::new(&ops, &g, 3)?;
    let other = asymptotic_normalization(&y, &radii, 2.0);
    pass &= other.max_deviation(-1.0) < 0.2;
    Ok(Check {
        pass,
        summary: parts.join(", "),
        metrics: json!({ "reports": reports, "second_ray_k3": other }),
    })
}

fn uniqueness_relations(_: &SuiteOptions) -> anyhow::Result<Check> {
    let p = cavity_config(20.0)?;
    let (g, ops) = polys(&p, 10, Precision::Auto)?;
    let reps = (1..=10)
        .map(|k| uniqueness_crosscheck(&ops, &g, k, 1e-8))
        .collect::<planeq::Result<Vec<_>>>()?;
    let orth = reps.iter().map(|r| r.orthogonality).fold(0.0, f64::max);
    let norm = reps.iter().map(|r| (r.normalization - 1.0).abs()).fold(0.0, f64::max);
    Ok(Check {
        pass: reps.iter().all(|r| r.pass),
        summary: format!("k <= 10: orthogonality {orth:.2e}, normalization error {norm:.2e}"),
        metrics: serde_json::to_value(&reps)?,
    })
}

fn schwarz_identity(_: &SuiteOptions) -> anyhow::Result<Check> {
    let p = exterior_config(1.0)?;
    let SupportGeometry::ExteriorMap(m) = classify_support(&p.rescaled())? else {
        return Err(anyhow!("expected an exterior map"));
    };
    let boundary = m
        .boundary_samples(720)
        .into_iter()
        .map(|z| {
            let b = schwarz_branches(&m, z);
            b.s.iter().map(|s| (s - z.conj()).norm()).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let disc = branch_points(&m)?
        .iter()
        .map(|b| discriminant(&m, b.z).norm())
        .fold(0.0, f64::max);
    let field = JumpField::Exterior(m);
    let trajs = critical_trajectories(&field, 1e-3, 1e-4)?;
    let traj = trajs.iter().map(|t| t.max_residual(&field)).fold(0.0, f64::max);
    Ok(Check {
        pass: boundary < 1e-10 && disc < 1e-12 && traj < 1e-3,
        summary: format!("boundary {boundary:.2e}, discriminant {disc:.2e}, trajectory residual {traj:.2e} over {} trajectories", trajs.len()),
        metrics: json!({ "boundary_residual": boundary, "discriminant": disc, "trajectory_residual": traj, "trajectories": trajs.len() }),
    })
}

/// Zeros of `P_n` for the weight scale `N = 2n`.
pub fn zeros_at(config: impl Fn(f64) -> anyhow::Result<PerturbedPotential>, n: usize) -> anyhow::Result<(PerturbedPotential, ZeroSet)> {
    let p = config(2.0 * n as f64)?;
    let (_, ops) = polys(&p, n, Precision::Auto)?;
    let zs = compute_zeros(&ops, n)?;
    Ok((p, zs))
}

/// Mean over the zeros of the distance to the nearest trajectory.
pub fn mean_distance(zeros: &[Complex64], trajs: &[&Trajectory]) -> f64 {
    zeros
        .iter()
        .map(|&z| trajs.iter().map(|t| t.distance(z)).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / zeros.len() as f64
}

fn zero_attractor(_: &SuiteOptions) -> anyhow::Result<Check> {
    let q = cavity_config(1.0)?;
    let r_out = outer_radius(&q.rescaled());
    let field = JumpField::for_potential(&q)?;
    let trajs = critical_trajectories(&field, 1e-3, 1e-4)?;
    let connecting: Vec<&Trajectory> = trajs.iter().filter(|t| t.connecting).collect();
    if connecting.is_empty() {
        return Err(anyhow!("no connecting trajectory"));
    }
    let mut dists = Vec::new();
    for n in [10usize, 20, 30, 40, 50] {
        let (_, zs) = zeros_at(cavity_config, n)?;
        dists.push(mean_distance(&zs.zeros, &connecting) / r_out);
    }
    let decreasing = dists.windows(2).all(|w| w[1] < w[0]);
    let last = *dists.last().expect("five degrees");
    Ok(Check {
        pass: decreasing && last < 0.05,
        summary: format!(
            "mean distance / R for n = 10..50: {}",
            dists.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>().join(", ")
        ),
        metrics: json!({ "n": [10, 20, 30, 40, 50], "mean_distance_over_R": dists, "connecting_trajectories": connecting.len() }),
    })
}

fn external_potential_match(_: &SuiteOptions) -> anyhow::Result<Check> {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut metrics = Vec::new();
    let configs: [(&str, fn(f64) -> anyhow::Result<PerturbedPotential>); 2] = [("cavity", cavity_config), ("exterior", exterior_config)];
    for (name, config) in configs {
        let r_out = outer_radius(&config(1.0)?.rescaled());
        let points = annulus_grid(c(0.0, 0.0), 1.5 * r_out, 3.0 * r_out, 11, 72);
        let mut sups = Vec::new();
        for n in [15usize, 20, 25, 30] {
            let (p, zs) = zeros_at(config, n)?;
            sups.push(external_potential_compare(&zs, &p, &points)?.sup);
        }
        let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
        let last = *sups.last().expect("four degrees");
        pass &= decreasing && last < 0.05;
        parts.push(format!("{name}: sup error at n = 30 {last:.2e}{}", if decreasing { "" } else { " (not decreasing)" }));
        metrics.push(json!({ "config": name, "n": [15, 20, 25, 30], "sup_error": sups }));
    }
    Ok(Check {
        pass,
        summary: parts.join(", "),
        metrics: json!(metrics),
    })
}

fn fekete_points(opts: &SuiteOptions) -> anyhow::Result<Check> {
    let p = cavity_config(1.0)?;
    // gradient against central differences of the energy
    let pts = random_start(50, 1.2, opts.seed);
    let g = gradient(&pts, &p);
    let h = 1e-6;
    let gmax = g.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut fd_err = 0.0f64;
    for i in 0..pts.len() {
        let mut d = vec![c(0.0, 0.0); pts.len()];
        let mut partial = |dz: Complex64| {
            d[i] = dz;
            let plus = energy_change(&pts, &d, &p);
            let minus: Vec<Complex64> = d.iter().map(|x| -x).collect();
            (plus - energy_change(&pts, &minus, &p)) / (2.0 * h)
        };
        let fd = 0.5 * c(partial(c(h, 0.0)), partial(c(0.0, h)));
        fd_err = fd_err.max((fd - g[i]).norm() / gmax);
    }
    let n = 200;
    let cfg = minimize_multistart(n, &p, opts.seed, 5, &MinimizeOptions::default())?;
    let q = p.rescaled();
    let geom = classify_support(&q)?;
    let rep = discrepancy(&cfg.points, &geom, q.alpha, 6, 4);
    let bound = 3.0 / (n as f64).sqrt();
    Ok(Check {
        pass: fd_err < 1e-6 && rep.fraction_in_support >= 0.97 && rep.max_annulus < bound,
        summary: format!(
            "gradient error {fd_err:.2e}; n = 200: {:.1}% in support, annular discrepancy {:.4} (bound {bound:.4})",
            100.0 * rep.fraction_in_support,
            rep.max_annulus
        ),
        metrics: json!({
            "gradient_relative_error": fd_err,
            "n": n,
            "energy": cfg.energy,
            "gradient_norm": cfg.gradient_norm,
            "fraction_in_support": rep.fraction_in_support,
            "max_annulus": rep.max_annulus,
            "max_cell": rep.max_cell,
        }),
    })
}

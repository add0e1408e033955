//! Subcommand implementations. Each writes its files into an [`OutDir`].

use anyhow::{anyhow, Context};
use num_complex::Complex64;
use planeq::dbar::{dbar_report, sample_points, uniqueness_crosscheck, DbarMatrix, DbarResidualReport, UniquenessReport};
use planeq::equilibrium::{
    classify_support, equilibrium_data, equilibrium_log_potential, outer_radius, radius_bound_check, verify_equilibrium,
    SupportGeometry, VerifyGrid,
};
use planeq::fekete::{discrepancy, minimize_multistart, MinimizeOptions};
use planeq::orthopoly::{build_orthopolys, compute_zeros, zero_potential, OrthoPolySet, Precision, ZeroSet};
use planeq::planarquad::{build_grid, write_grid_cache, QuadGrid};
use planeq::schwarz::{
    annulus_grid, boundary_curve, critical_trajectories, effective_zero_density_union, external_potential_compare, JumpField,
    Trajectory,
};
use planeq::PerturbedPotential;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{boundary_curves, curve_rows, window_for, OutDir, PointRow, Svg};

/// A check that ran but did not hold; mapped to the invariant-failure exit code.
#[derive(Debug, Clone)]
pub struct InvariantFailure(pub String);

impl std::fmt::Display for InvariantFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invariant failed: {}", self.0)
    }
}

impl std::error::Error for InvariantFailure {}

const SUPPORT_FILL: &str = "#c8d7ec";

fn geometry_of(p: &PerturbedPotential) -> anyhow::Result<SupportGeometry> {
    Ok(classify_support(&p.rescaled())?)
}

fn support_svg(geom: &SupportGeometry) -> Svg {
    let mut svg = window_for(geom);
    svg.region(&boundary_curves(geom, 720), SUPPORT_FILL);
    svg
}

pub fn support(cfg: &ExperimentConfig, out: &mut OutDir) -> anyhow::Result<()> {
    let p = cfg.potential_for(cfg.degree)?;
    let data = equilibrium_data(&p.rescaled())?;
    if let SupportGeometry::ExteriorMap(m) = &data.geometry {
        // fails for a folded map
        boundary_curve(m, 2048)?;
    }
    out.json("geometry.json", &data)?;
    let curves = boundary_curves(&data.geometry, 720);
    out.csv("boundary.csv", curve_rows(&curves))?;
    let mut svg = support_svg(&data.geometry);
    for q in p.nu.charges() {
        svg.marker(q.location, "black");
    }
    out.svg("support.svg", &svg)
}

fn polys_for(cfg: &ExperimentConfig, p: &PerturbedPotential, degree: usize) -> anyhow::Result<(QuadGrid, OrthoPolySet)> {
    let grid = build_grid(p, &cfg.quad_spec()?, degree).context("quadrature grid")?;
    let ops = build_orthopolys(p, &grid, degree, Precision::Auto).context("orthogonal polynomials")?;
    Ok((grid, ops))
}

#[derive(Serialize)]
struct PolyExport<'a> {
    n: usize,
    #[serde(rename = "N")]
    scale: f64,
    gamma: f64,
    precision: Precision,
    gram_residual: f64,
    norms: &'a [f64],
    /// Monic coefficients, ascending powers, as `[re, im]` pairs.
    coefficients: Vec<Vec<[f64; 2]>>,
}

pub fn orthopoly(cfg: &ExperimentConfig, out: &mut OutDir, save_grid: bool) -> anyhow::Result<()> {
    let p = cfg.potential_for(cfg.degree)?;
    let (grid, ops) = polys_for(cfg, &p, cfg.degree)?;
    if save_grid {
        let path = out.bytes_path("grid.bin");
        write_grid_cache(&grid, &path).with_context(|| format!("writing {}", path.display()))?;
    }
    out.json(
        "orthopoly.json",
        &PolyExport {
            n: ops.n_max,
            scale: p.scale,
            gamma: p.gamma,
            precision: ops.precision,
            gram_residual: ops.gram_residual,
            norms: &ops.norms,
            coefficients: ops.coeffs.iter().map(|c| c.iter().map(|z| [z.re, z.im]).collect()).collect(),
        },
    )
}

#[derive(Serialize)]
struct ZeroSummary {
    n: usize,
    #[serde(rename = "N")]
    scale: f64,
    residual: f64,
    radius_check: planeq::equilibrium::RadiusBoundReport,
}

fn zeros_for(cfg: &ExperimentConfig, n: usize) -> anyhow::Result<(PerturbedPotential, OrthoPolySet, QuadGrid, ZeroSet)> {
    let p = cfg.potential_for(n)?;
    let (grid, ops) = polys_for(cfg, &p, n)?;
    let zs = compute_zeros(&ops, n).context("zeros")?;
    Ok((p, ops, grid, zs))
}

fn write_zeros(out: &mut OutDir, p: &PerturbedPotential, geom: &SupportGeometry, zs: &ZeroSet) -> anyhow::Result<()> {
    out.csv("zeros.csv", zs.zeros.iter().map(|&z| PointRow::from(z)))?;
    out.json(
        "zeros.json",
        &ZeroSummary {
            n: zs.n,
            scale: p.scale,
            residual: zs.residual,
            radius_check: radius_bound_check(&p.rescaled(), geom, &zs.zeros, 0.1),
        },
    )
}

pub fn zeros(cfg: &ExperimentConfig, out: &mut OutDir) -> anyhow::Result<()> {
    if cfg.degree == 0 {
        return Err(anyhow!(crate::config::InvalidConfig("degree must be at least 1".into())));
    }
    let (p, _, _, zs) = zeros_for(cfg, cfg.degree)?;
    let geom = geometry_of(&p)?;
    write_zeros(out, &p, &geom, &zs)?;
    let mut svg = support_svg(&geom);
    svg.dots(&zs.zeros, "black", 2.5);
    out.svg("zeros.svg", &svg)
}

#[derive(Serialize)]
struct DbarOutput {
    k: usize,
    residuals: DbarResidualReport,
    uniqueness: UniquenessReport,
    pass: bool,
}

fn dbar_for(cfg: &ExperimentConfig, k: usize) -> anyhow::Result<DbarOutput> {
    if k == 0 {
        return Err(anyhow!(crate::config::InvalidConfig("k must be at least 1".into())));
    }
    let p = cfg.potential_for(cfg.degree.max(k))?;
    let (grid, ops) = polys_for(cfg, &p, k + 1)?;
    let geom = geometry_of(&p)?;
    let samples = sample_points(&geom, 50, cfg.seed);
    let all: Vec<Complex64> = samples.all().copied().collect();
    let order_points: Vec<Complex64> = samples.support.iter().take(3).chain(samples.outside.iter().take(3)).copied().collect();
    let radii: Vec<f64> = (0..6).map(|i| 1e2 * 10f64.powf(i as f64 / 5.0)).collect();
    let y = DbarMatrix::new(&ops, &grid, k)?;
    let residuals = dbar_report(&y, &all, 2.5e-3, &order_points, &radii)?;
    let uniqueness = uniqueness_crosscheck(&ops, &grid, k, 1e-8)?;
    let pass = residuals.min_order.iter().all(|&o| o >= 1.8) && residuals.slopes.max_deviation(-1.0) < 0.2 && uniqueness.pass;
    Ok(DbarOutput {
        k,
        residuals,
        uniqueness,
        pass,
    })
}

pub fn dbar_check(cfg: &ExperimentConfig, out: &mut OutDir, k: usize) -> anyhow::Result<()> {
    let rep = dbar_for(cfg, k)?;
    out.json("dbar.json", &rep)?;
    if !rep.pass {
        return Err(InvariantFailure(format!("dbar identities for k = {k}")).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct TrajectoryRow {
    trajectory: usize,
    start: usize,
    connecting: bool,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct TrajectorySummary {
    critical_points: Vec<Complex64>,
    trajectories: Vec<TrajectoryInfo>,
}

#[derive(Serialize)]
struct TrajectoryInfo {
    start: usize,
    end: planeq::schwarz::EndpointTag,
    connecting: bool,
    length: f64,
    max_residual: f64,
}

#[derive(Serialize)]
struct DensityRow {
    re: f64,
    im: f64,
    weight: f64,
}

/// Critical trajectories, or none when the geometry has no jump field
/// (no charge, or several cavities).
fn trajectories_for(cfg: &ExperimentConfig, p: &PerturbedPotential) -> anyhow::Result<Option<(JumpField, Vec<Trajectory>)>> {
    let geom = geometry_of(p)?;
    if let SupportGeometry::DiskCavities { cavities, .. } = &geom {
        if cavities.len() != 1 {
            return Ok(None);
        }
    }
    let field = JumpField::from_geometry(&geom)?;
    let trajs = critical_trajectories(&field, cfg.trajectory_step, cfg.trajectory_tol).context("critical trajectories")?;
    Ok(Some((field, trajs)))
}

fn write_trajectories(out: &mut OutDir, field: &JumpField, trajs: &[Trajectory]) -> anyhow::Result<()> {
    let rows = trajs.iter().enumerate().flat_map(|(i, t)| {
        t.points.iter().map(move |z| TrajectoryRow {
            trajectory: i,
            start: t.start,
            connecting: t.connecting,
            re: z.re,
            im: z.im,
        })
    });
    out.csv("trajectories.csv", rows)?;
    out.json(
        "trajectories.json",
        &TrajectorySummary {
            critical_points: field.critical_points()?,
            trajectories: trajs
                .iter()
                .map(|t| TrajectoryInfo {
                    start: t.start,
                    end: t.end,
                    connecting: t.connecting,
                    length: t.length(),
                    max_residual: t.max_residual(field),
                })
                .collect(),
        },
    )?;
    let connecting: Vec<Trajectory> = trajs.iter().filter(|t| t.connecting).cloned().collect();
    if !connecting.is_empty() {
        let w = effective_zero_density_union(&connecting, field)?;
        out.csv("kappa.csv", w.iter().map(|&(z, weight)| DensityRow { re: z.re, im: z.im, weight }))?;
    }
    Ok(())
}

fn draw_trajectories(svg: &mut Svg, field: &JumpField, trajs: &[Trajectory]) -> anyhow::Result<()> {
    for t in trajs {
        let (color, width) = if t.connecting { ("#c0392b", 1.6) } else { ("#7f8c8d", 0.8) };
        svg.polyline(&t.points, color, width);
    }
    for z in field.critical_points()? {
        svg.marker(z, "#c0392b");
    }
    Ok(())
}

pub fn trajectory(cfg: &ExperimentConfig, out: &mut OutDir) -> anyhow::Result<()> {
    let p = cfg.potential_for(cfg.degree)?;
    let geom = geometry_of(&p)?;
    let mut svg = support_svg(&geom);
    match trajectories_for(cfg, &p)? {
        Some((field, trajs)) => {
            write_trajectories(out, &field, &trajs)?;
            draw_trajectories(&mut svg, &field, &trajs)?;
        }
        None => {
            out.csv("trajectories.csv", std::iter::empty::<TrajectoryRow>())?;
            out.json("trajectories.json", &TrajectorySummary { critical_points: Vec::new(), trajectories: Vec::new() })?;
        }
    }
    out.svg("trajectories.svg", &svg)
}

#[derive(Serialize)]
struct FeketeSummary {
    n: usize,
    seeds: usize,
    energy: f64,
    iterations: usize,
    gradient_norm: f64,
    fraction_in_support: f64,
    max_annulus: f64,
    max_cell: f64,
    annulus_bound: f64,
}

pub fn fekete(cfg: &ExperimentConfig, out: &mut OutDir, n: usize, seeds: usize) -> anyhow::Result<()> {
    if n == 0 || seeds == 0 {
        return Err(anyhow!(crate::config::InvalidConfig("n and seeds must be positive".into())));
    }
    let p = cfg.potential_for(n)?;
    let fc = minimize_multistart(n, &p, cfg.seed, seeds, &MinimizeOptions::default()).context("fekete descent")?;
    let q = p.rescaled();
    let geom = classify_support(&q)?;
    let rep = discrepancy(&fc.points, &geom, q.alpha, 6, 4);
    out.csv("fekete.csv", fc.points.iter().map(|&z| PointRow::from(z)))?;
    out.json(
        "fekete.json",
        &FeketeSummary {
            n,
            seeds,
            energy: fc.energy,
            iterations: fc.iterations,
            gradient_norm: fc.gradient_norm,
            fraction_in_support: rep.fraction_in_support,
            max_annulus: rep.max_annulus,
            max_cell: rep.max_cell,
            annulus_bound: 3.0 / (n as f64).sqrt(),
        },
    )?;
    let mut svg = support_svg(&geom);
    svg.dots(&fc.points, "black", 2.0);
    out.svg("fekete.svg", &svg)
}

#[derive(Serialize)]
struct GridRow {
    re: f64,
    im: f64,
    value: f64,
}

#[derive(Serialize)]
struct CompareSummary {
    n: usize,
    #[serde(rename = "N")]
    scale: f64,
    annulus: [f64; 2],
    sup_error: f64,
    mean_error: f64,
}

/// Square sampling window of half-width `half` with `m` points per side.
fn square(half: f64, m: usize) -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let x = -half + 2.0 * half * i as f64 / (m - 1) as f64;
            let y = -half + 2.0 * half * j as f64 / (m - 1) as f64;
            pts.push(Complex64::new(x, y));
        }
    }
    pts
}

fn compare_at(cfg: &ExperimentConfig, out: &mut OutDir, n: usize) -> anyhow::Result<()> {
    let (p, _, _, zs) = zeros_for(cfg, n)?;
    let q = p.rescaled();
    let geom = classify_support(&q)?;
    let r_out = outer_radius(&q);
    let annulus = annulus_grid(Complex64::new(0.0, 0.0), 1.5 * r_out, 3.0 * r_out, 11, 72);
    let cmp = external_potential_compare(&zs, &p, &annulus)?;
    // contour data for the zero potential and the equilibrium potential
    let pts = square(3.0 * r_out, 121);
    out.csv(
        "potential_zeros.csv",
        pts.iter().map(|&z| GridRow {
            re: z.re,
            im: z.im,
            value: zero_potential(&zs, z).to_f64(),
        }),
    )?;
    out.csv(
        "potential_equilibrium.csv",
        pts.iter().map(|&z| GridRow {
            re: z.re,
            im: z.im,
            value: equilibrium_log_potential(&geom, q.alpha, z),
        }),
    )?;
    out.json(
        "compare.json",
        &CompareSummary {
            n,
            scale: p.scale,
            annulus: [1.5 * r_out, 3.0 * r_out],
            sup_error: cmp.sup,
            mean_error: cmp.mean,
        },
    )
}

pub fn compare(cfg: &ExperimentConfig, out: &mut OutDir) -> anyhow::Result<()> {
    if cfg.compare_degree == 0 {
        return Err(anyhow!(crate::config::InvalidConfig("compare_degree must be at least 1".into())));
    }
    compare_at(cfg, out, cfg.compare_degree)
}

/// support, polynomials, zeros, trajectories, overlay, contour data, and the
/// dbar and equilibrium reports.
pub fn pipeline(cfg: &ExperimentConfig, out: &mut OutDir) -> anyhow::Result<()> {
    support(cfg, out).context("stage support")?;
    let p = cfg.potential_for(cfg.degree)?;
    let geom = geometry_of(&p).context("stage support")?;
    if cfg.degree > 0 {
        let (_, _, _, zs) = zeros_for(cfg, cfg.degree).context("stage zeros")?;
        write_zeros(out, &p, &geom, &zs).context("stage zeros")?;
        let mut svg = support_svg(&geom);
        if let Some((field, trajs)) = trajectories_for(cfg, &p).context("stage trajectory")? {
            write_trajectories(out, &field, &trajs).context("stage trajectory")?;
            draw_trajectories(&mut svg, &field, &trajs)?;
        }
        svg.dots(&zs.zeros, "black", 2.5);
        out.svg("overlay.svg", &svg)?;
    }
    if cfg.compare_degree > 0 {
        compare_at(cfg, out, cfg.compare_degree).context("stage compare")?;
    }
    let dbar = dbar_for(cfg, cfg.dbar_k.max(1)).context("stage dbar-check")?;
    out.json("dbar.json", &dbar)?;
    let q = p.rescaled();
    let eq = verify_equilibrium(&geom, &q, VerifyGrid::default(), 1e-4, 1e-4);
    out.json("equilibrium.json", &eq)?;
    let mut failed = Vec::new();
    if !dbar.pass {
        failed.push("dbar identities");
    }
    if !eq.pass {
        failed.push("equilibrium conditions");
    }
    if !failed.is_empty() {
        return Err(InvariantFailure(failed.join(", ")).into());
    }
    Ok(())
}

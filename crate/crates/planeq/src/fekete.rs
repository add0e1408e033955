//! Weighted Fekete points: minimizers of the discrete Coulomb energy
//! `(1/2) sum_{i != j} log 1/|z_i - z_j| + n sum_i Q(z_i)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{in_support, outer_radius, SupportGeometry};
use crate::error::{Error, Result};
use crate::measures::{ExtReal, PerturbedPotential};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeketeConfig {
    pub n: usize,
    pub points: Vec<Complex64>,
    pub energy: f64,
    pub iterations: usize,
    /// Max-norm of `dE/d conj(z_i)` at the returned points.
    pub gradient_norm: f64,
}

/// Energy of `points` in the field of `Q = (gamma/2) V`; `+inf` when two
/// points coincide or a point sits on a charge.
pub fn energy(points: &[Complex64], p: &PerturbedPotential) -> ExtReal {
    let n = points.len();
    let pair: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let zi = points[i];
            points[i + 1..].iter().map(|&zj| -(zi - zj).norm().ln()).sum::<f64>()
        })
        .sum();
    if pair.is_nan() || pair == f64::INFINITY {
        return ExtReal::PosInf;
    }
    let mut total = pair;
    for &z in points {
        match p.q_value(z) {
            ExtReal::Finite(q) => total += n as f64 * q,
            ExtReal::PosInf => return ExtReal::PosInf,
        }
    }
    ExtReal::Finite(total)
}

/// `dE/d conj(z_i) = -(1/2) sum_{j != i} 1/(conj(z_i) - conj(z_j)) + n dQ/d conj(z_i)`.
pub fn gradient(points: &[Complex64], p: &PerturbedPotential) -> Vec<Complex64> {
    let n = points.len() as f64;
    let s = 0.5 * p.gamma;
    points
        .par_iter()
        .enumerate()
        .map(|(i, &zi)| {
            let mut g = Complex64::new(0.0, 0.0);
            for (j, &zj) in points.iter().enumerate() {
                if j != i {
                    g -= 0.5 / (zi - zj).conj();
                }
            }
            let mut dq = p.alpha * zi;
            for c in p.nu.charges() {
                dq -= 0.5 * c.beta / (zi - c.location).conj();
            }
            g + n * s * dq
        })
        .collect()
}

/// `ln(|x + d| / |x|)` without cancellation for small `d`.
fn log_ratio(x: Complex64, d: Complex64) -> f64 {
    0.5 * ((2.0 * (x.conj() * d).re + d.norm_sqr()) / x.norm_sqr()).ln_1p()
}

/// `E(points + step) - E(points)`, accurate when the step is small.
pub fn energy_change(points: &[Complex64], step: &[Complex64], p: &PerturbedPotential) -> f64 {
    let n = points.len();
    let s = 0.5 * p.gamma;
    let pair: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| -log_ratio(points[i] - points[j], step[i] - step[j]))
                .sum::<f64>()
        })
        .sum();
    let mut field = 0.0;
    for (&z, &d) in points.iter().zip(step) {
        let mut q = p.alpha * (2.0 * (z.conj() * d).re + d.norm_sqr());
        for c in p.nu.charges() {
            q -= c.beta * log_ratio(z - c.location, d);
        }
        field += s * q;
    }
    let de = pair + n as f64 * field;
    if de.is_nan() {
        f64::INFINITY
    } else {
        de
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            grad_tol: 1e-8,
        }
    }
}

/// Uniform random points in `B(0, radius)`.
pub fn random_start(n: usize, radius: f64, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r = radius * rng.gen::<f64>().sqrt();
            Complex64::from_polar(r, 2.0 * PI * rng.gen::<f64>())
        })
        .collect()
}

fn max_norm(g: &[Complex64]) -> f64 {
    g.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Gradient descent with Barzilai-Borwein trial steps and Armijo
/// backtracking from `start`. Every accepted step lowers the energy.
pub fn descend(start: Vec<Complex64>, p: &PerturbedPotential, opts: &MinimizeOptions) -> Result<FeketeConfig> {
    descend_observed(start, p, opts, &mut |_| {})
}

/// As [`descend`], reporting the energy change of every accepted step.
pub fn descend_observed(
    start: Vec<Complex64>,
    p: &PerturbedPotential,
    opts: &MinimizeOptions,
    observe: &mut dyn FnMut(f64),
) -> Result<FeketeConfig> {
    let n = start.len();
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let mut x = start;
    let mut g = gradient(&x, p);
    let mut t = 1e-2 / max_norm(&g).max(1.0);
    for it in 0..opts.max_iter {
        let gn = max_norm(&g);
        if gn < opts.grad_tol {
            let e = energy(&x, p).finite().ok_or_else(|| Error::Degenerate("coincident points".into()))?;
            return Ok(FeketeConfig {
                n,
                points: x,
                energy: e,
                iterations: it,
                gradient_norm: gn,
            });
        }
        let g2: f64 = g.iter().map(|v| v.norm_sqr()).sum();
        let mut step: Vec<Complex64>;
        loop {
            step = g.iter().map(|v| -t * v).collect();
            let de = energy_change(&x, &step, p);
            if de <= -1e-4 * 2.0 * t * g2 {
                observe(de);
                break;
            }
            t *= 0.5;
            if t < 1e-30 {
                return Err(Error::IterationCap(it));
            }
        }
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi += si;
        }
        let g_new = gradient(&x, p);
        let (mut ss, mut sy) = (0.0, 0.0);
        for ((s, gn), go) in step.iter().zip(&g_new).zip(&g) {
            let y = gn - go;
            ss += s.norm_sqr();
            sy += (s.conj() * y).re;
        }
        t = if sy > 0.0 { ss / sy } else { 2.0 * t };
        g = g_new;
    }
    Err(Error::IterationCap(opts.max_iter))
}

/// One run from a random start in `B(0, outer_radius)`.
pub fn minimize(n: usize, p: &PerturbedPotential, seed: u64, opts: &MinimizeOptions) -> Result<FeketeConfig> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let radius = outer_radius(&p.rescaled());
    descend(random_start(n, radius, seed), p, opts)
}

/// Best of `seeds` runs started from `seed, seed + 1, ...`.
pub fn minimize_multistart(n: usize, p: &PerturbedPotential, seed: u64, seeds: usize, opts: &MinimizeOptions) -> Result<FeketeConfig> {
    let runs: Vec<Result<FeketeConfig>> = (0..seeds.max(1) as u64)
        .into_par_iter()
        .map(|k| minimize(n, p, seed + k, opts))
        .collect();
    let mut best: Option<FeketeConfig> = None;
    let mut last_err = None;
    for r in runs {
        match r {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| c.energy < b.energy) {
                    best = Some(c);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one run"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub r_in: f64,
    pub r_out: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// Equilibrium mass of the cell.
    pub expected: f64,
    /// Fraction of the points in the cell.
    pub observed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub annuli: Vec<Cell>,
    pub cells: Vec<Cell>,
    pub max_annulus: f64,
    pub max_cell: f64,
    pub fraction_in_support: f64,
    /// Points in the disk-with-cavities geometry lying inside a cavity.
    pub in_cavities: usize,
    /// Points beyond the largest support radius.
    pub beyond: usize,
}

fn support_radius(geom: &SupportGeometry) -> f64 {
    match geom {
        SupportGeometry::DiskCavities { outer, .. } => *outer,
        SupportGeometry::ExteriorMap(m) => m.boundary_samples(2048).iter().map(|z| z.norm()).fold(0.0, f64::max),
    }
}

/// Mass of uniform density `dens` on the support inside the polar cell.
fn cell_mass(geom: &SupportGeometry, dens: f64, r0: f64, r1: f64, t0: f64, t1: f64) -> f64 {
    let (nr, nt) = (64, 64);
    let (dr, dt) = ((r1 - r0) / nr as f64, (t1 - t0) / nt as f64);
    let mut s = 0.0;
    for i in 0..nr {
        let r = r0 + (i as f64 + 0.5) * dr;
        for j in 0..nt {
            let z = Complex64::from_polar(r, t0 + (j as f64 + 0.5) * dt);
            if in_support(geom, z) {
                s += r;
            }
        }
    }
    dens * s * dr * dt
}

/// Compares the normalized counting measure of `points` with the uniform
/// density `2 alpha / pi` on `geom` over `rings` equal-area annuli of the
/// support disk, each split into `sectors` sectors.
pub fn discrepancy(points: &[Complex64], geom: &SupportGeometry, alpha: f64, rings: usize, sectors: usize) -> DiscrepancyReport {
    let n = points.len().max(1) as f64;
    let dens = 2.0 * alpha / PI;
    let big = support_radius(geom);
    let radii: Vec<f64> = (0..=rings).map(|k| big * (k as f64 / rings as f64).sqrt()).collect();
    let frac = |f: &dyn Fn(Complex64) -> bool| points.iter().filter(|&&z| f(z)).count() as f64 / n;
    let in_cell = |z: Complex64, r0: f64, r1: f64, t0: f64, t1: f64| {
        let r = z.norm();
        let t = z.im.atan2(z.re).rem_euclid(2.0 * PI);
        r >= r0 && r < r1 && t >= t0 && t < t1
    };
    let mut annuli = Vec::with_capacity(rings);
    let mut cells = Vec::with_capacity(rings * sectors);
    for k in 0..rings {
        let (r0, r1) = (radii[k], radii[k + 1]);
        let cells_k: Vec<Cell> = (0..sectors)
            .into_par_iter()
            .map(|s| {
                let (t0, t1) = (2.0 * PI * s as f64 / sectors as f64, 2.0 * PI * (s + 1) as f64 / sectors as f64);
                Cell {
                    r_in: r0,
                    r_out: r1,
                    theta_lo: t0,
                    theta_hi: t1,
                    expected: cell_mass(geom, dens, r0, r1, t0, t1),
                    observed: frac(&|z| in_cell(z, r0, r1, t0, t1)),
                }
            })
            .collect();
        annuli.push(Cell {
            r_in: r0,
            r_out: r1,
            theta_lo: 0.0,
            theta_hi: 2.0 * PI,
            expected: cells_k.iter().map(|c| c.expected).sum(),
            observed: frac(&|z| z.norm() >= r0 && z.norm() < r1),
        });
        cells.extend(cells_k);
    }
    let worst = |cs: &[Cell]| cs.iter().map(|c| (c.observed - c.expected).abs()).fold(0.0, f64::max);
    let in_cavities = match geom {
        SupportGeometry::DiskCavities { cavities, .. } => points
            .iter()
            .filter(|&&z| cavities.iter().any(|c| (z - c.center).norm() < c.radius))
            .count(),
        SupportGeometry::ExteriorMap(_) => 0,
    };
    DiscrepancyReport {
        max_annulus: worst(&annuli),
        max_cell: worst(&cells),
        fraction_in_support: frac(&|z| in_support(geom, z)),
        in_cavities,
        beyond: points.iter().filter(|z| z.norm() >= big).count(),
        annuli,
        cells,
    }
}

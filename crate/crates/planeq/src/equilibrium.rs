//! Support geometry of the equilibrium measure for `V = alpha|z|^2 + U^nu`,
//! the rational exterior map in the non-contained single-charge case, and
//! numerical verification of the equilibrium conditions.
//!
//! The measure always has constant density `2 alpha / pi` on its support.
//! When every cavity disk `B(a_k, r_k)`, `r_k = sqrt(beta_k / (2 alpha))`,
//! sits inside `B(0, R)`, `R = sqrt((1 + sum beta) / (2 alpha))`, the support
//! is the disk with the cavities removed. A single charge whose cavity pokes
//! out of `B(0, R)` gives a simply connected support whose exterior map is
//! `f(zeta) = rho zeta + u + v / (zeta - A)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::gauss_legendre;
use crate::measures::{log_potential_disk, DiskMeasure, EquilibriumData, ExtReal, PerturbedPotential};
use crate::sum::psum;

/// Margin used for strict containment and disjointness of cavities.
pub const CONTAINMENT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cavity {
    pub center: Complex64,
    pub radius: f64,
}

/// `f(zeta) = rho zeta + u + v / (zeta - A)` on `|zeta| > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExteriorMap {
    pub rho: f64,
    pub u: Complex64,
    pub v: Complex64,
    /// Pole of `f` inside the unit disk; `1/conj(A)` is mapped to the charge.
    #[serde(rename = "A")]
    pub pole: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SupportGeometry {
    DiskCavities { outer: f64, cavities: Vec<Cavity> },
    ExteriorMap(ExteriorMap),
}

pub fn outer_radius(p: &PerturbedPotential) -> f64 {
    ((1.0 + p.nu.total_mass()) / (2.0 * p.alpha)).sqrt()
}

pub fn cavity_radius(alpha: f64, beta: f64) -> f64 {
    (beta / (2.0 * alpha)).sqrt()
}

pub fn classify_support(p: &PerturbedPotential) -> Result<SupportGeometry> {
    let r_out = outer_radius(p);
    let cavities: Vec<Cavity> = p
        .nu
        .charges()
        .iter()
        .map(|c| Cavity {
            center: c.location,
            radius: cavity_radius(p.alpha, c.beta),
        })
        .collect();
    let inside = cavities
        .iter()
        .all(|c| c.center.norm() + c.radius < r_out - CONTAINMENT_MARGIN);
    let disjoint = cavities.iter().enumerate().all(|(i, c)| {
        cavities[..i]
            .iter()
            .all(|d| (c.center - d.center).norm() > c.radius + d.radius + CONTAINMENT_MARGIN)
    });
    if inside && disjoint {
        return Ok(SupportGeometry::DiskCavities {
            outer: r_out,
            cavities,
        });
    }
    if cavities.len() == 1 {
        let c = cavities[0];
        if c.center.norm() + c.radius > r_out + CONTAINMENT_MARGIN {
            let beta = p.nu.charges()[0].beta;
            return solve_exterior_map(p.alpha, beta, c.center).map(SupportGeometry::ExteriorMap);
        }
        return Err(Error::Unsupported(
            "cavity tangent to the outer circle".into(),
        ));
    }
    if !disjoint {
        return Err(Error::Unsupported("overlapping cavities".into()));
    }
    Err(Error::Unsupported(
        "several charges with a cavity leaving the outer disk".into(),
    ))
}

/// The cubic `g(x) = 2 t^4 x^3 - (t^4 + (1 + 2 beta) t^2 / alpha) x^2 + 1/(4 alpha^2)`
/// satisfied by `x = |A|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicProblem {
    pub t: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl CubicProblem {
    fn quad_coeff(&self) -> f64 {
        let t2 = self.t * self.t;
        t2 * t2 + (1.0 + 2.0 * self.beta) / self.alpha * t2
    }

    pub fn g(&self, x: f64) -> f64 {
        let t4 = self.t.powi(4);
        (2.0 * t4 * x - self.quad_coeff()) * x * x + 0.25 / (self.alpha * self.alpha)
    }

    pub fn dg(&self, x: f64) -> f64 {
        let t4 = self.t.powi(4);
        6.0 * t4 * x * x - 2.0 * self.quad_coeff() * x
    }

    /// Location of the local minimum of `g` on `x > 0`.
    pub fn x_min(&self) -> f64 {
        self.quad_coeff() / (3.0 * self.t.powi(4))
    }

    /// `g(1) < 0`, i.e. the circles `|z| = R` and `|z - a| = r` cross.
    pub fn circles_cross(&self) -> bool {
        self.g(1.0) < 0.0
    }

    /// Number of sign changes of `g` over a uniform sampling of [0, 1].
    pub fn sign_changes(&self, samples: usize) -> usize {
        let mut count = 0;
        let mut prev = self.g(0.0);
        for i in 1..=samples {
            let cur = self.g(i as f64 / samples as f64);
            if (prev > 0.0) != (cur > 0.0) {
                count += 1;
            }
            prev = cur;
        }
        count
    }

    /// Smallest root in (0, 1): bisection to 1e-15 followed by one Newton polish.
    pub fn solve(&self) -> Result<f64> {
        let hi0 = if self.circles_cross() {
            1.0
        } else {
            let xm = self.x_min().min(1.0);
            if self.g(xm) >= 0.0 {
                return Err(Error::NoRoot(format!(
                    "g > 0 on (0,1] for t = {}, alpha = {}, beta = {}",
                    self.t, self.alpha, self.beta
                )));
            }
            xm
        };
        let (mut lo, mut hi) = (0.0, hi0);
        for _ in 0..200 {
            if hi - lo <= 1e-15 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        let d = self.dg(x);
        if d != 0.0 {
            let x1 = x - self.g(x) / d;
            if x1 > 0.0 && x1 <= hi0 && self.g(x1).abs() <= self.g(x).abs() {
                return Ok(x1);
            }
        }
        Ok(x)
    }
}

/// Solves the four real-analytic conditions on `(rho, u, v, A)` for a single
/// charge `beta` at `a` whose cavity is not contained in `B(0, R)`.
///
/// When the charge is so far out that the cavity misses `B(0, R)` entirely the
/// cubic has two roots in (0, 1); the smaller one gives the univalent map and
/// is the one returned.
pub fn solve_exterior_map(alpha: f64, beta: f64, a: Complex64) -> Result<ExteriorMap> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha = {alpha}, beta = {beta}"
        )));
    }
    let t = a.norm();
    if t == 0.0 {
        return Err(Error::Degenerate("charge at the origin".into()));
    }
    let r_out = ((1.0 + beta) / (2.0 * alpha)).sqrt();
    let r = cavity_radius(alpha, beta);
    if t + r <= r_out {
        return Err(Error::NoRoot(format!(
            "|a| + r = {} does not exceed R = {r_out}",
            t + r
        )));
    }
    let x = CubicProblem { t, alpha, beta }.solve()?;
    let k = x.sqrt();
    let phase = a / t;
    let inv2a = 0.5 / alpha;
    let rho = (k * k * t * t + inv2a) / (2.0 * k * t);
    let s = (1.0 - k * k) * (k * k * t * t - inv2a) / (2.0 * k * t);
    let pole = k * phase;
    let v = s * phase * phase;
    let u = (v.conj() / pole.conj()).conj();
    Ok(ExteriorMap { rho, u, v, pole })
}

impl ExteriorMap {
    pub fn eval(&self, zeta: Complex64) -> Complex64 {
        self.rho * zeta + self.u + self.v / (zeta - self.pole)
    }

    pub fn derivative(&self, zeta: Complex64) -> Complex64 {
        let d = zeta - self.pole;
        self.rho - self.v / (d * d)
    }

    /// Values of the Schwarz function along the analytic continuation,
    /// `rho/zeta + conj(u) + conj(v) zeta / (1 - conj(A) zeta)`.
    pub fn schwarz_at(&self, zeta: Complex64) -> Complex64 {
        self.rho / zeta + self.u.conj() + self.v.conj() * zeta / (1.0 - self.pole.conj() * zeta)
    }

    /// Coefficients `(b, c)` of `rho zeta^2 + b zeta + c = 0`, whose roots are
    /// the preimages of `z` under the rational extension of `f`.
    pub fn preimage_coeffs(&self, z: Complex64) -> (Complex64, Complex64) {
        (
            self.u - z - self.pole * self.rho,
            self.pole * (z - self.u) + self.v,
        )
    }

    pub fn preimages(&self, z: Complex64) -> [Complex64; 2] {
        let (b, c) = self.preimage_coeffs(z);
        let disc = b * b - 4.0 * self.rho * c;
        let mut sd = disc.sqrt();
        if (b.conj() * sd).re < 0.0 {
            sd = -sd;
        }
        let q = -0.5 * (b + sd);
        if q.norm() == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        [q / self.rho, c / q]
    }

    /// `z` lies in the closed support iff both preimages lie in the closed unit disk.
    pub fn contains(&self, z: Complex64) -> bool {
        let [z1, z2] = self.preimages(z);
        z1.norm() <= 1.0 && z2.norm() <= 1.0
    }

    pub fn area(&self) -> f64 {
        let d = 1.0 - self.pole.norm_sqr();
        PI * (self.rho * self.rho - self.v.norm_sqr() / (d * d))
    }

    /// Absolute residuals of the four defining equations.
    pub fn residuals(&self, alpha: f64, beta: f64, a: Complex64) -> [f64; 4] {
        let am = self.pole;
        let d = 1.0 - am.norm_sqr();
        let e1 = self.rho * self.rho - self.v.norm_sqr() / (d * d) - 0.5 / alpha;
        let e2 = self.v.conj() / am.conj() - self.u.conj();
        let e3 = self.u + self.rho / am.conj() + self.v * am.conj() / d - a;
        let e4 = self.v.conj() / (am.conj() * am.conj())
            * (self.rho - self.v * am.conj() * am.conj() / (d * d))
            + beta / (2.0 * alpha);
        [e1.abs(), e2.norm(), e3.norm(), e4.norm()]
    }

    pub fn boundary_point(&self, theta: f64) -> Complex64 {
        self.eval(Complex64::from_polar(1.0, theta))
    }

    pub fn boundary_samples(&self, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| self.boundary_point(2.0 * PI * i as f64 / n as f64))
            .collect()
    }

    fn nearest_boundary_parameter(&self, z: Complex64) -> (f64, f64) {
        let m = 256;
        let mut best = (0.0, f64::INFINITY);
        for i in 0..m {
            let th = 2.0 * PI * i as f64 / m as f64;
            let d = (self.boundary_point(th) - z).norm();
            if d < best.1 {
                best = (th, d);
            }
        }
        // golden-section refinement on the bracketing cell
        let h = 2.0 * PI / m as f64;
        let (mut a, mut b) = (best.0 - h, best.0 + h);
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let dist = |t: f64| (self.boundary_point(t) - z).norm();
        let mut c = b - gr * (b - a);
        let mut d = a + gr * (b - a);
        for _ in 0..80 {
            if dist(c) < dist(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - gr * (b - a);
            d = a + gr * (b - a);
        }
        let t = 0.5 * (a + b);
        (t, dist(t))
    }

    /// Logarithmic potential of area measure on the support,
    /// `int_S log(1/|z - w|) dm(w)`, by the boundary integral
    /// `-(1/(4i)) oint (conj(w) - conj(z)) (log|w - z|^2 - 1) dw`.
    ///
    /// The panels are graded geometrically toward the boundary point nearest
    /// to `z`, so the rule stays accurate on and near the boundary.
    pub fn area_log_potential(&self, z: Complex64) -> f64 {
        let (t0, _) = self.nearest_boundary_parameter(z);
        let (gx, gw) = gauss_legendre::<f64>(16);
        let mut breaks = vec![0.0];
        let mut h = 1e-13;
        while h < PI {
            breaks.push(h);
            h *= 4.0;
        }
        breaks.push(PI);
        let integrand = |th: f64| -> Complex64 {
            let zeta = Complex64::from_polar(1.0, th);
            let w = self.eval(zeta);
            let dw = self.derivative(zeta) * Complex64::i() * zeta;
            let d = w - z;
            let l = if d.norm_sqr() > 0.0 { d.norm_sqr().ln() } else { 0.0 };
            d.conj() * (l - 1.0) * dw
        };
        let mut nodes = Vec::with_capacity(2 * breaks.len() * 16);
        for side in [-1.0, 1.0] {
            for k in 0..breaks.len() - 1 {
                let (a, b) = (breaks[k], breaks[k + 1]);
                for (x, w) in gx.iter().zip(&gw) {
                    let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
                    nodes.push((t0 + side * s, 0.5 * (b - a) * w));
                }
            }
        }
        let total: Complex64 = psum(nodes.len(), |i| integrand(nodes[i].0) * nodes[i].1);
        // (1/(2i)) * total is the area integral of log|w - z|^2
        let area_log = (total / (2.0 * Complex64::i())).re;
        -0.5 * area_log
    }

    /// A point of the support, found by searching the map's interior.
    pub fn interior_point(&self) -> Complex64 {
        let pts = self.boundary_samples(64);
        let centroid = pts.iter().sum::<Complex64>() / pts.len() as f64;
        for cand in [self.u, centroid] {
            if self.contains(cand) {
                return cand;
            }
        }
        let (lo_re, hi_re, lo_im, hi_im) = bbox(&pts);
        let m = 41;
        let mut best = (f64::NEG_INFINITY, centroid);
        for i in 0..m {
            for j in 0..m {
                let z = Complex64::new(
                    lo_re + (hi_re - lo_re) * (i as f64 + 0.5) / m as f64,
                    lo_im + (hi_im - lo_im) * (j as f64 + 0.5) / m as f64,
                );
                if self.contains(z) {
                    let d = pts.iter().map(|p| (p - z).norm()).fold(f64::INFINITY, f64::min);
                    if d > best.0 {
                        best = (d, z);
                    }
                }
            }
        }
        best.1
    }
}

fn bbox(pts: &[Complex64]) -> (f64, f64, f64, f64) {
    pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), p| (a.min(p.re), b.max(p.re), c.min(p.im), d.max(p.im)),
    )
}

pub fn support_area(geom: &SupportGeometry) -> f64 {
    match geom {
        SupportGeometry::DiskCavities { outer, cavities } => {
            PI * (outer * outer - cavities.iter().map(|c| c.radius * c.radius).sum::<f64>())
        }
        SupportGeometry::ExteriorMap(m) => m.area(),
    }
}

/// Whether `z` lies in the (closed) support.
pub fn in_support(geom: &SupportGeometry, z: Complex64) -> bool {
    match geom {
        SupportGeometry::DiskCavities { outer, cavities } => {
            z.norm() <= *outer && cavities.iter().all(|c| (z - c.center).norm() >= c.radius)
        }
        SupportGeometry::ExteriorMap(m) => m.contains(z),
    }
}

/// `F = alpha R^2 (log(1/R^2) + 1)` for the disk-with-cavities geometry.
pub fn robin_constant(geom: &SupportGeometry, p: &PerturbedPotential) -> Result<f64> {
    match geom {
        SupportGeometry::DiskCavities { outer, .. } => {
            let r2 = outer * outer;
            Ok(p.alpha * r2 * ((1.0 / r2).ln() + 1.0))
        }
        SupportGeometry::ExteriorMap(_) => Err(Error::NotImplemented(
            "the exterior-map case has no closed-form constant".into(),
        )),
    }
}

/// `U^sigma(z)` for the uniform density `2 alpha / pi` on the support.
pub fn equilibrium_log_potential(geom: &SupportGeometry, alpha: f64, z: Complex64) -> f64 {
    let dens = 2.0 * alpha / PI;
    match geom {
        SupportGeometry::DiskCavities { outer, cavities } => {
            let mut u = log_potential_disk(
                &DiskMeasure {
                    center: Complex64::new(0.0, 0.0),
                    radius: *outer,
                },
                z,
            );
            for c in cavities {
                u -= log_potential_disk(
                    &DiskMeasure {
                        center: c.center,
                        radius: c.radius,
                    },
                    z,
                );
            }
            dens * u
        }
        SupportGeometry::ExteriorMap(m) => dens * m.area_log_potential(z),
    }
}

/// `U^sigma(z) + V(z)`.
pub fn effective_potential(geom: &SupportGeometry, p: &PerturbedPotential, z: Complex64) -> ExtReal {
    match p.value(z) {
        ExtReal::PosInf => ExtReal::PosInf,
        ExtReal::Finite(v) => ExtReal::Finite(v + equilibrium_log_potential(geom, p.alpha, z)),
    }
}

/// Robin constant computed from the effective potential at interior points.
pub fn robin_estimate(geom: &SupportGeometry, p: &PerturbedPotential) -> f64 {
    match geom {
        SupportGeometry::DiskCavities { .. } => robin_constant(geom, p).expect("closed form"),
        SupportGeometry::ExteriorMap(m) => effective_potential(geom, p, m.interior_point()).to_f64(),
    }
}

pub fn equilibrium_data(p: &PerturbedPotential) -> Result<EquilibriumData> {
    let geometry = classify_support(p)?;
    let robin_constant = robin_estimate(&geometry, p);
    Ok(EquilibriumData {
        geometry,
        robin_constant,
        density: 2.0 * p.alpha / PI,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyGrid {
    /// Points per side of the square sampling grid.
    pub n: usize,
    /// Relative margin added around the support's bounding box.
    pub margin: f64,
}

impl Default for VerifyGrid {
    fn default() -> Self {
        Self { n: 200, margin: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub robin_constant: f64,
    pub max_dev_on_support: f64,
    pub min_margin_off_support: f64,
    pub on_support_samples: usize,
    pub off_support_samples: usize,
    pub tol_on: f64,
    pub tol_off: f64,
    pub pass: bool,
}

/// Samples `U^sigma + V - F` on a square grid around the support.
///
/// For the exterior map, `F` is the median of the on-support samples.
pub fn verify_equilibrium(
    geom: &SupportGeometry,
    p: &PerturbedPotential,
    grid: VerifyGrid,
    tol_on: f64,
    tol_off: f64,
) -> EquilibriumReport {
    let (lo_re, hi_re, lo_im, hi_im) = match geom {
        SupportGeometry::DiskCavities { outer, .. } => (-outer, *outer, -outer, *outer),
        SupportGeometry::ExteriorMap(m) => bbox(&m.boundary_samples(2048)),
    };
    let pad = grid.margin * (hi_re - lo_re).max(hi_im - lo_im);
    let (lo_re, hi_re, lo_im, hi_im) = (lo_re - pad, hi_re + pad, lo_im - pad, hi_im + pad);
    let n = grid.n;
    let samples: Vec<(bool, ExtReal)> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let z = Complex64::new(
                lo_re + (hi_re - lo_re) * (i as f64 + 0.5) / n as f64,
                lo_im + (hi_im - lo_im) * (j as f64 + 0.5) / n as f64,
            );
            (in_support(geom, z), effective_potential(geom, p, z))
        })
        .collect();
    let robin = match geom {
        SupportGeometry::DiskCavities { .. } => robin_constant(geom, p).expect("closed form"),
        SupportGeometry::ExteriorMap(_) => {
            let mut on: Vec<f64> = samples
                .iter()
                .filter(|s| s.0)
                .filter_map(|s| s.1.finite())
                .collect();
            on.sort_by(f64::total_cmp);
            if on.is_empty() {
                f64::NAN
            } else {
                on[on.len() / 2]
            }
        }
    };
    let mut max_dev: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    let (mut n_on, mut n_off) = (0, 0);
    for (on, val) in &samples {
        let Some(v) = val.finite() else { continue };
        if *on {
            n_on += 1;
            max_dev = max_dev.max((v - robin).abs());
        } else {
            n_off += 1;
            min_margin = min_margin.min(v - robin);
        }
    }
    let pass = robin.is_finite() && n_on > 0 && max_dev < tol_on && min_margin >= -tol_off;
    EquilibriumReport {
        robin_constant: robin,
        max_dev_on_support: max_dev,
        min_margin_off_support: min_margin,
        on_support_samples: n_on,
        off_support_samples: n_off,
        tol_on,
        tol_off,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusBoundReport {
    pub outer_radius: f64,
    pub epsilon: f64,
    /// Fraction of zeros in the closed disk `B(0, R + epsilon)`.
    pub fraction_inside: f64,
    /// Fraction of zeros in the support or within `epsilon` of it.
    pub fraction_near_support: f64,
    pub max_support_modulus: f64,
    pub support_inside: bool,
}

/// Checks that the support lies in `B(0, R)` and counts the zeros of `P_n`
/// that fall in `B(0, R + epsilon)`.
pub fn radius_bound_check(
    p: &PerturbedPotential,
    geom: &SupportGeometry,
    zeros: &[Complex64],
    epsilon: f64,
) -> RadiusBoundReport {
    let r_out = outer_radius(p);
    let (max_mod, boundary) = match geom {
        SupportGeometry::DiskCavities { outer, .. } => (*outer, None),
        SupportGeometry::ExteriorMap(m) => {
            let pts = m.boundary_samples(4096);
            (pts.iter().map(|z| z.norm()).fold(0.0, f64::max), Some(pts))
        }
    };
    let count = |pred: &dyn Fn(Complex64) -> bool| {
        if zeros.is_empty() {
            1.0
        } else {
            zeros.iter().filter(|&&z| pred(z)).count() as f64 / zeros.len() as f64
        }
    };
    let fraction_inside = count(&|z| z.norm() <= r_out + epsilon);
    let fraction_near_support = count(&|z| {
        if in_support(geom, z) {
            return true;
        }
        match (&boundary, geom) {
            (Some(pts), _) => pts.iter().any(|b| (b - z).norm() <= epsilon),
            (None, SupportGeometry::DiskCavities { outer, cavities }) => {
                z.norm() <= outer + epsilon
                    && cavities
                        .iter()
                        .all(|c| (z - c.center).norm() >= c.radius - epsilon)
            }
            _ => false,
        }
    });
    RadiusBoundReport {
        outer_radius: r_out,
        epsilon,
        fraction_inside,
        fraction_near_support,
        max_support_modulus: max_mod,
        support_inside: max_mod <= r_out * (1.0 + 1e-12),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::PointChargeMeasure;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single(alpha: f64, a: Complex64, beta: f64) -> PerturbedPotential {
        PerturbedPotential::new(alpha, PointChargeMeasure::single(a, beta).unwrap(), 1.0, 2.0).unwrap()
    }

    #[test]
    fn outer_radius_examples() {
        assert_abs_diff_eq!(outer_radius(&PerturbedPotential::gaussian(0.5, 1.0).unwrap()), 1.0);
        assert_abs_diff_eq!(outer_radius(&single(0.5, c(0.3, 0.0), 0.5)), 1.5f64.sqrt());
        assert_abs_diff_eq!(outer_radius(&single(1.0, c(0.3, 0.0), 1.0)), 1.0);
    }

    #[test]
    fn classify_examples() {
        match classify_support(&single(0.5, c(0.3, 0.0), 0.5)).unwrap() {
            SupportGeometry::DiskCavities { outer, cavities } => {
                assert_abs_diff_eq!(outer, 1.5f64.sqrt(), epsilon = 1e-15);
                assert_eq!(cavities.len(), 1);
                assert_abs_diff_eq!(cavities[0].radius, 0.5f64.sqrt(), epsilon = 1e-15);
            }
            g => panic!("unexpected {g:?}"),
        }
        match classify_support(&PerturbedPotential::gaussian(1.0, 1.0).unwrap()).unwrap() {
            SupportGeometry::DiskCavities { outer, cavities } => {
                assert_abs_diff_eq!(outer, 0.5f64.sqrt(), epsilon = 1e-15);
                assert!(cavities.is_empty());
            }
            g => panic!("unexpected {g:?}"),
        }
        assert!(matches!(
            classify_support(&single(0.5, c(2.0, 0.0), 0.5)).unwrap(),
            SupportGeometry::ExteriorMap(_)
        ));
    }

    #[test]
    fn classify_rejects_tangent_and_overlap() {
        // |a| + r = R exactly
        let r_out = 1.5f64.sqrt();
        let r = 0.5f64.sqrt();
        assert!(matches!(
            classify_support(&single(0.5, c(r_out - r, 0.0), 0.5)),
            Err(Error::Unsupported(_))
        ));
        let nu = PointChargeMeasure::new(vec![
            crate::measures::PointCharge { location: c(0.2, 0.0), beta: 0.1 },
            crate::measures::PointCharge { location: c(-0.2, 0.0), beta: 0.1 },
        ])
        .unwrap();
        let p = PerturbedPotential::new(0.5, nu, 1.0, 2.0).unwrap();
        assert!(matches!(classify_support(&p), Err(Error::Unsupported(_))));
    }

    /// Independent root oracle: plain bisection on g over a bracket found by scanning.
    fn scan_root(cp: &CubicProblem) -> f64 {
        let m = 100_000;
        let mut prev = cp.g(0.0);
        for i in 1..=m {
            let x = i as f64 / m as f64;
            let cur = cp.g(x);
            if prev > 0.0 && cur <= 0.0 {
                let (mut lo, mut hi) = (x - 1.0 / m as f64, x);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if cp.g(mid) > 0.0 {
                        lo = mid
                    } else {
                        hi = mid
                    }
                }
                return lo;
            }
            prev = cur;
        }
        panic!("no sign change");
    }

    #[test]
    fn worked_example_far_charge() {
        let m = solve_exterior_map(0.5, 0.5, c(2.0, 0.0)).unwrap();
        let cp = CubicProblem { t: 2.0, alpha: 0.5, beta: 0.5 };
        assert!(!cp.circles_cross());
        assert_abs_diff_eq!(m.pole.norm_sqr(), scan_root(&cp), epsilon = 1e-12);
        // frozen values from the scan oracle and direct substitution
        assert_abs_diff_eq!(m.pole.norm_sqr(), 0.19731102976020198, epsilon = 1e-12);
        assert_abs_diff_eq!(m.rho, 1.0070103298132267, epsilon = 1e-12);
        assert_abs_diff_eq!(m.u.re, -0.2143461281215683, epsilon = 1e-12);
        assert_abs_diff_eq!(m.v.re, -0.09521192033149646, epsilon = 1e-12);
        for e in m.residuals(0.5, 0.5, c(2.0, 0.0)) {
            assert!(e < 1e-12, "residual {e}");
        }
        assert_abs_diff_eq!(m.area(), PI, epsilon = 1e-12);
        assert!(!m.contains(c(2.0, 0.0)));
    }

    #[test]
    fn crossing_regime_has_unique_root() {
        for &(alpha, beta, t) in &[(0.5, 0.5, 1.0), (1.0, 2.0, 1.5), (0.5, 0.5, 0.6), (2.0, 0.3, 0.8)] {
            let cp = CubicProblem { t, alpha, beta };
            assert!(cp.circles_cross());
            assert!(cp.g(0.0) > 0.0 && cp.g(1.0) < 0.0);
            assert_eq!(cp.sign_changes(10_000), 1);
            let x = cp.solve().unwrap();
            assert_abs_diff_eq!(x, scan_root(&cp), epsilon = 1e-12);
            let m = solve_exterior_map(alpha, beta, c(t, 0.0)).unwrap();
            for e in m.residuals(alpha, beta, c(t, 0.0)) {
                assert!(e < 1e-10);
            }
        }
    }

    #[test]
    fn inner_tangency_limit() {
        // as |a| + r decreases to R, g(1) -> 0-, K -> 1 and s -> 0
        let (alpha, beta) = (0.5, 0.5);
        let r_out = 1.5f64.sqrt();
        let r = 0.5f64.sqrt();
        let mut prev_g1 = f64::NEG_INFINITY;
        for &eps in &[1e-1, 1e-2, 1e-3, 1e-4] {
            let t = r_out - r + eps;
            let cp = CubicProblem { t, alpha, beta };
            let g1 = cp.g(1.0);
            assert!(g1 < 0.0 && g1 > prev_g1);
            prev_g1 = g1;
            let m = solve_exterior_map(alpha, beta, c(t, 0.0)).unwrap();
            assert!(1.0 - m.pole.norm() < 10.0 * eps);
            assert!(m.v.norm() < 10.0 * eps);
        }
    }

    #[test]
    fn no_root_when_cavity_inside() {
        assert!(matches!(
            solve_exterior_map(0.5, 0.5, c(0.3, 0.0)),
            Err(Error::NoRoot(_))
        ));
        assert!(matches!(
            solve_exterior_map(0.5, 0.5, c(0.0, 0.0)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn robin_examples() {
        let g = SupportGeometry::DiskCavities { outer: 1.0, cavities: vec![] };
        let p = PerturbedPotential::gaussian(0.5, 1.0).unwrap();
        assert_abs_diff_eq!(robin_constant(&g, &p).unwrap(), 0.5);
        let p = single(0.5, c(0.3, 0.0), 0.5);
        let g = classify_support(&p).unwrap();
        assert_abs_diff_eq!(robin_constant(&g, &p).unwrap(), 0.75 * (1.0 - 1.5f64.ln()), epsilon = 1e-15);
        assert_abs_diff_eq!(robin_constant(&g, &p).unwrap(), 0.44590, epsilon = 1e-5);
        let p = PerturbedPotential::gaussian(1.0, 1.0).unwrap();
        let g = classify_support(&p).unwrap();
        assert_abs_diff_eq!(robin_constant(&g, &p).unwrap(), 0.5 * (1.0 + 2f64.ln()), epsilon = 1e-15);
        let pe = single(0.5, c(2.0, 0.0), 0.5);
        let ge = classify_support(&pe).unwrap();
        assert!(matches!(robin_constant(&ge, &pe), Err(Error::NotImplemented(_))));
    }

    #[test]
    fn cavity_effective_potential_closed_forms() {
        let p = single(0.5, c(0.3, 0.0), 0.5);
        let g = classify_support(&p).unwrap();
        let f = robin_constant(&g, &p).unwrap();
        let (r_out, r) = (1.5f64.sqrt(), 0.5f64.sqrt());
        let fx = |x: f64| (x * x - 1.0) / 2.0 - x.ln();
        // support point
        let z = c(-0.9, 0.2);
        assert_abs_diff_eq!(effective_potential(&g, &p, z).to_f64(), f, epsilon = 1e-13);
        // inside the cavity
        let z = c(0.5, 0.1);
        let expect = f + 2.0 * 0.5 * r * r * fx((z - c(0.3, 0.0)).norm() / r);
        assert_abs_diff_eq!(effective_potential(&g, &p, z).to_f64(), expect, epsilon = 1e-13);
        // outside the outer disk
        let z = c(1.0, 1.5);
        let expect = f + 2.0 * 0.5 * r_out * r_out * fx(z.norm() / r_out);
        assert_abs_diff_eq!(effective_potential(&g, &p, z).to_f64(), expect, epsilon = 1e-13);
        assert!(effective_potential(&g, &p, c(0.3, 0.0)).is_infinite());
    }

    /// Brute-force Cartesian midpoint oracle for the area potential.
    fn brute_area_potential(m: &ExteriorMap, z: Complex64, n: usize) -> f64 {
        let (lo_re, hi_re, lo_im, hi_im) = bbox(&m.boundary_samples(1024));
        let (hx, hy) = ((hi_re - lo_re) / n as f64, (hi_im - lo_im) / n as f64);
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let w = c(lo_re + (i as f64 + 0.5) * hx, lo_im + (j as f64 + 0.5) * hy);
                if m.contains(w) {
                    let d = (w - z).norm();
                    if d > 0.0 {
                        s -= d.ln();
                    }
                }
            }
        }
        s * hx * hy
    }

    #[test]
    fn contour_potential_matches_disk_and_brute_force() {
        let disk = ExteriorMap { rho: 1.3, u: c(0.2, -0.1), v: c(0.0, 0.0), pole: c(0.1, 0.0) };
        let dm = DiskMeasure { center: c(0.2, -0.1), radius: 1.3 };
        for z in [c(0.2, -0.1), c(0.9, 0.3), c(1.5, -0.1), c(-3.0, 2.0), c(0.2 + 1.3, -0.1)] {
            assert_abs_diff_eq!(disk.area_log_potential(z), log_potential_disk(&dm, z), epsilon = 1e-12);
        }
        let m = solve_exterior_map(0.5, 0.5, c(1.0, 0.0)).unwrap();
        for z in [c(-0.5, 0.1), c(1.3, 0.4), c(-2.0, -1.0)] {
            let a = m.area_log_potential(z);
            let b = brute_area_potential(&m, z, 800);
            assert!((a - b).abs() < 5e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn exterior_effective_potential_is_constant_on_support() {
        let p = single(0.5, c(2.0, 0.0), 0.5);
        let g = classify_support(&p).unwrap();
        let SupportGeometry::ExteriorMap(m) = g.clone() else { panic!() };
        let f = robin_estimate(&g, &p);
        let mut checked = 0;
        for i in 0..15 {
            for j in 0..15 {
                let z = c(-1.3 + 2.6 * i as f64 / 14.0, -1.3 + 2.6 * j as f64 / 14.0);
                let e = effective_potential(&g, &p, z).to_f64();
                if m.contains(z) {
                    assert_abs_diff_eq!(e, f, epsilon = 1e-11);
                    checked += 1;
                } else {
                    assert!(e - f > -1e-11, "margin {} at {z}", e - f);
                }
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn verify_equilibrium_cavity_and_negative_control() {
        let p = single(0.5, c(0.3, 0.0), 0.5);
        let g = classify_support(&p).unwrap();
        let rep = verify_equilibrium(&g, &p, VerifyGrid { n: 60, margin: 0.25 }, 1e-8, 1e-8);
        assert!(rep.pass, "{rep:?}");
        let pe = single(0.5, c(2.0, 0.0), 0.5);
        let SupportGeometry::ExteriorMap(mut m) = classify_support(&pe).unwrap() else { panic!() };
        m.rho *= 1.01;
        let bad = SupportGeometry::ExteriorMap(m);
        let rep = verify_equilibrium(&bad, &pe, VerifyGrid { n: 60, margin: 0.25 }, 1e-4, 1e-8);
        assert!(!rep.pass, "{rep:?}");
    }

    #[test]
    fn radius_bound_examples() {
        let p = PerturbedPotential::gaussian(0.5, 10.0).unwrap();
        let g = classify_support(&p).unwrap();
        let rep = radius_bound_check(&p, &g, &[c(0.0, 0.0); 5], 0.1);
        assert_eq!(rep.fraction_inside, 1.0);
        assert!(rep.support_inside);
        let pe = single(0.5, c(2.0, 0.0), 0.5);
        let ge = classify_support(&pe).unwrap();
        let rep = radius_bound_check(&pe, &ge, &[c(0.0, 0.0), c(3.0, 0.0)], 0.1);
        assert!(rep.support_inside);
        assert_abs_diff_eq!(rep.fraction_inside, 0.5);
    }
}

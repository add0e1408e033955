//! Planar quadrature against `e^{-N V} dm`: a polar tensor grid truncated at
//! a radius chosen from a Gaussian tail bound, inner products and moments,
//! and Cauchy transforms `int D(w) / (z - w) dm(w)`.
//!
//! Charges with a non-smooth factor `|z - a|^{N beta}` get a local polar patch
//! blended into the main grid by a smooth partition of unity.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::equilibrium::outer_radius;
use crate::error::{Error, Result};
use crate::gauss::gauss_legendre;
use crate::measures::PerturbedPotential;
use crate::sum::{psum, psum_slice};

pub const DEFAULT_EPS_TAIL: f64 = 1e-12;
/// Gauss-Legendre nodes per radial panel.
pub const DEFAULT_RADIAL_ORDER: usize = 24;

/// Charges whose factor `|z - a|^{N beta}` has fewer derivatives than this get a patch.
const PATCH_SMOOTHNESS: f64 = 20.0;
/// Relative radius of the region where a patch cutoff equals one.
const PLATEAU: f64 = 0.1;
/// Angular nodes per unit of `|a| / patch radius`.
const PATCH_ANGULAR_DENSITY: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    /// Nodes per radial panel.
    pub nr: usize,
    /// Angular nodes; 0 selects an automatic count from the degree and charges.
    pub nt: usize,
    pub eps_tail: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            nr: DEFAULT_RADIAL_ORDER,
            nt: 0,
            eps_tail: DEFAULT_EPS_TAIL,
        }
    }
}

impl QuadSpec {
    /// The same spec with radial and angular orders doubled.
    pub fn refined(&self, nt_auto: usize) -> Self {
        let nt = if self.nt == 0 { nt_auto } else { self.nt };
        Self {
            nr: 2 * self.nr,
            nt: 2 * nt,
            eps_tail: self.eps_tail,
        }
    }
}

impl FromStr for QuadSpec {
    type Err = Error;

    /// Parses `"nr,nt,eps"`; `nt = 0` means automatic.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidOrders(format!("expected nr,nt,eps, got {s:?}")));
        }
        let bad = |what: &str| Error::InvalidOrders(format!("bad {what} in {s:?}"));
        let nr: usize = parts[0].parse().map_err(|_| bad("nr"))?;
        let nt: usize = parts[1].parse().map_err(|_| bad("nt"))?;
        let eps_tail: f64 = parts[2].parse().map_err(|_| bad("eps"))?;
        let spec = Self { nr, nt, eps_tail };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for QuadSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{:e}", self.nr, self.nt, self.eps_tail)
    }
}

impl QuadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nr < 2 || self.nr > 512 {
            return Err(Error::InvalidOrders(format!("radial order {}", self.nr)));
        }
        if self.nt != 0 && (self.nt < 8 || self.nt > 1 << 16) {
            return Err(Error::InvalidOrders(format!("angular order {}", self.nt)));
        }
        if !(self.eps_tail > 0.0 && self.eps_tail < 1.0) {
            return Err(Error::InvalidOrders(format!("eps_tail {}", self.eps_tail)));
        }
        Ok(())
    }
}

/// A local polar patch around a charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub center: Complex64,
    pub radius: f64,
}

impl Patch {
    /// Smooth cutoff: 1 on `|z - c| <= radius/10`, 0 beyond `radius`.
    pub fn cutoff(&self, z: Complex64) -> f64 {
        let s = (z - self.center).norm() / self.radius;
        if s <= PLATEAU {
            1.0
        } else if s >= 1.0 {
            0.0
        } else {
            let x = (1.0 - s) / (1.0 - PLATEAU);
            let e0 = (-1.0 / x).exp();
            let e1 = (-1.0 / (1.0 - x)).exp();
            e0 / (e0 + e1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadGrid {
    pub potential: PerturbedPotential,
    pub spec: QuadSpec,
    /// Highest polynomial degree the grid was sized for.
    pub degree: usize,
    /// Truncation radius.
    pub r_t: f64,
    pub panel_width: f64,
    pub nt: usize,
    pub patches: Vec<Patch>,
    pub nodes: Vec<Complex64>,
    /// Area weights (including partition-of-unity factors).
    pub area: Vec<f64>,
    /// `area * exp(-N V - log_shift)`.
    pub lam: Vec<f64>,
    pub log_shift: f64,
}

fn is_even_integer(x: f64) -> bool {
    (x / 2.0 - (x / 2.0).round()).abs() < 1e-12
}

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-12
}

/// `ln` of the tail bound `e^{-l} int_{|z|>r} |z|^{2d} e^{-c|z|^2} dm`.
fn ln_tail_bound(l: f64, c: f64, d: usize, r: f64) -> f64 {
    let a = d as f64 + 1.0;
    let q = gamma_ur(a, c * r * r).max(1e-300);
    -l + PI.ln() + ln_gamma(a) - a * c.ln() + q.ln()
}

/// Coarse estimate of `ln int |z|^{2d} e^{-N V} dm` on a midpoint polar grid.
fn ln_coarse_moment(p: &PerturbedPotential, d: usize, r_max: f64) -> f64 {
    let (nr, nt) = (400, 128);
    let hr = r_max / nr as f64;
    let ht = 2.0 * PI / nt as f64;
    let mut terms = Vec::with_capacity(nr * nt);
    for i in 0..nr {
        let r = (i as f64 + 0.5) * hr;
        for j in 0..nt {
            let z = Complex64::from_polar(r, (j as f64 + 0.5) * ht);
            if let Some(lw) = p.log_weight(z) {
                terms.push(lw + 2.0 * d as f64 * r.ln() + (r * hr * ht).ln());
            }
        }
    }
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Truncation radius: the larger of an absolute tail bound on the weight and
/// a bound relative to the degree-`d` moment, `d = degree + 1`.
pub fn truncation_radius(p: &PerturbedPotential, degree: usize, eps: f64) -> f64 {
    let na = p.scale * p.alpha;
    let l_abs = p.exponent_lower_bound(0.5);
    let c_abs = 0.5 * na;
    let r_abs = ((((PI / (c_abs * eps)).ln() - l_abs) / c_abs).max(0.0)).sqrt();

    let d = degree + 1;
    let l_deg = p.exponent_lower_bound(0.1);
    let c_deg = 0.9 * na;
    let r_c = (r_abs * r_abs).max(4.0 * (d as f64 + 1.0) / na).sqrt() + 3.0 / na.sqrt();
    let ln_m = ln_coarse_moment(p, d, r_c);
    let target = eps.ln() + ln_m;
    let (mut lo, mut hi) = (0.0, r_c);
    while ln_tail_bound(l_deg, c_deg, d, hi) > target {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ln_tail_bound(l_deg, c_deg, d, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let far_charge = p
        .nu
        .charges()
        .iter()
        .map(|c| c.location.norm())
        .fold(0.0, f64::max);
    r_abs
        .max(hi)
        .max(1.1 * outer_radius(p))
        .max(far_charge + 2.0 / na.sqrt())
}

fn patches_for(p: &PerturbedPotential) -> Vec<Patch> {
    let na = p.scale * p.alpha;
    let charges = p.nu.charges();
    let mut out = Vec::new();
    for (i, c) in charges.iter().enumerate() {
        let e = p.scale * c.beta;
        if c.location.norm() == 0.0 || is_even_integer(e) || e >= PATCH_SMOOTHNESS {
            continue;
        }
        let mut rad = 1.0 / na.sqrt();
        for (j, d) in charges.iter().enumerate() {
            if i != j {
                rad = rad.min(0.45 * (c.location - d.location).norm());
            }
        }
        rad = rad.min(0.45 * c.location.norm());
        out.push(Patch {
            center: c.location,
            radius: rad,
        });
    }
    out
}

/// Automatic angular order for a polynomial degree.
pub fn auto_angular_order(p: &PerturbedPotential, degree: usize, patches: &[Patch]) -> usize {
    let nb = (p.scale * p.nu.total_mass()).ceil() as usize;
    let mut nt = 2 * (degree + 1) + nb + 32;
    for pt in patches {
        nt = nt.max((PATCH_ANGULAR_DENSITY * pt.center.norm() / pt.radius).ceil() as usize);
    }
    nt + nt % 2
}

fn radial_panels(breaks: &[f64], width: f64, grade_first: bool) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for k in 0..breaks.len() - 1 {
        let (a, b) = (breaks[k], breaks[k + 1]);
        let m = ((b - a) / width).ceil().max(1.0) as usize;
        for j in 0..m {
            let lo = a + (b - a) * j as f64 / m as f64;
            let hi = a + (b - a) * (j + 1) as f64 / m as f64;
            if grade_first && out.is_empty() && lo == 0.0 {
                let mut edges = vec![hi];
                let mut e = hi;
                for _ in 0..14 {
                    e *= 0.25;
                    edges.push(e);
                }
                edges.push(0.0);
                edges.reverse();
                for w in edges.windows(2) {
                    out.push((w[0], w[1]));
                }
            } else {
                out.push((lo, hi));
            }
        }
    }
    out
}

/// Polar tensor grid sized for polynomials up to `degree`.
pub fn build_grid(p: &PerturbedPotential, spec: &QuadSpec, degree: usize) -> Result<QuadGrid> {
    spec.validate()?;
    let na = p.scale * p.alpha;
    let r_t = truncation_radius(p, degree, spec.eps_tail);
    let patches = patches_for(p);
    let mut width = 1.5 / na.sqrt();
    for pt in &patches {
        width = width.min(pt.radius);
    }
    let nt = if spec.nt == 0 {
        auto_angular_order(p, degree, &patches)
    } else {
        spec.nt
    };

    let mut breaks = vec![0.0, r_t, outer_radius(p), outer_radius(&p.rescaled())];
    for c in p.nu.charges() {
        breaks.push(c.location.norm());
    }
    breaks.retain(|&b| b >= 0.0 && b <= r_t);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let grade_origin = p
        .nu
        .charges()
        .iter()
        .any(|c| c.location.norm() == 0.0 && !is_integer(p.scale * c.beta));
    let panels = radial_panels(&breaks, width, grade_origin);

    let (gx, gw) = gauss_legendre::<f64>(spec.nr);
    let mut nodes = Vec::new();
    let mut area = Vec::new();
    let ht = 2.0 * PI / nt as f64;
    for &(a, b) in &panels {
        for (x, w) in gx.iter().zip(&gw) {
            let r = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let wr = 0.5 * (b - a) * w * r * ht;
            for j in 0..nt {
                let z = Complex64::from_polar(r, j as f64 * ht);
                let keep = 1.0 - patches.iter().map(|pt| pt.cutoff(z)).sum::<f64>();
                if keep > 0.0 {
                    nodes.push(z);
                    area.push(wr * keep);
                }
            }
        }
    }
    for pt in &patches {
        // uniform panels over the cutoff transition, geometric toward the charge
        let mut edges: Vec<f64> = (0..=4).map(|k| pt.radius * (1.0 - 0.2 * k as f64)).collect();
        let mut e = 0.2 * pt.radius;
        for _ in 0..16 {
            e *= 0.25;
            edges.push(e);
        }
        edges.push(0.0);
        edges.reverse();
        for w2 in edges.windows(2) {
            let (a, b) = (w2[0], w2[1]);
            for (x, w) in gx.iter().zip(&gw) {
                let r = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let wr = 0.5 * (b - a) * w * r * ht;
                for j in 0..nt {
                    let z = pt.center + Complex64::from_polar(r, j as f64 * ht);
                    let c = pt.cutoff(z);
                    if c > 0.0 {
                        nodes.push(z);
                        area.push(wr * c);
                    }
                }
            }
        }
    }

    let logw: Vec<f64> = nodes
        .par_iter()
        .map(|&z| p.log_weight(z).unwrap_or(f64::NEG_INFINITY))
        .collect();
    let log_shift = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lam: Vec<f64> = logw
        .iter()
        .zip(&area)
        .map(|(lw, a)| a * (lw - log_shift).exp())
        .collect();
    Ok(QuadGrid {
        potential: p.clone(),
        spec: *spec,
        degree,
        r_t,
        panel_width: width,
        nt,
        patches,
        nodes,
        area,
        lam,
        log_shift,
    })
}

impl QuadGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `int f dlambda` in the shifted scale `e^{-log_shift}`.
    pub fn integrate_scaled<F>(&self, f: F) -> Complex64
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        let vals: Vec<Complex64> = self
            .nodes
            .par_iter()
            .zip(&self.lam)
            .map(|(&z, &l)| f(z) * l)
            .collect();
        psum_slice(&vals)
    }

    pub fn integrate<F>(&self, f: F) -> Complex64
    where
        F: Fn(Complex64) -> Complex64 + Sync,
    {
        self.integrate_scaled(f) * self.log_shift.exp()
    }

    /// `int dlambda`.
    pub fn mass(&self) -> f64 {
        psum_slice(&self.lam) * self.log_shift.exp()
    }

    /// `sum of area weights`, which approximates `pi r_t^2`.
    pub fn area_sum(&self) -> f64 {
        psum_slice(&self.area)
    }
}

/// `int f conj(g) e^{-N V} dm`.
pub fn inner_product<F, G>(grid: &QuadGrid, f: F, g: G) -> Complex64
where
    F: Fn(Complex64) -> Complex64 + Sync,
    G: Fn(Complex64) -> Complex64 + Sync,
{
    grid.integrate(|z| f(z) * g(z).conj())
}

/// `int |z|^k e^{-N V} dm`.
pub fn absolute_moment(grid: &QuadGrid, k: u32) -> f64 {
    let s = psum(grid.len(), |i| grid.lam[i] * grid.nodes[i].norm().powi(k as i32));
    s * grid.log_shift.exp()
}

/// Upper bound for `absolute_moment(grid, k)` from the Gaussian majorant
/// `e^{-L} e^{-N alpha |z|^2 / 2}`.
pub fn absolute_moment_bound(p: &PerturbedPotential, k: u32) -> f64 {
    let b = p.weight_upper_bound();
    let a = 0.5 * k as f64 + 1.0;
    (-b.l + PI.ln() + ln_gamma(a) - a * b.c.ln()).exp()
}

/// A density on the plane seen by the polar Cauchy rule.
pub trait PlanarDensity: Sync {
    fn value(&self, w: Complex64) -> Complex64;
    /// The density is treated as zero outside `|w| <= support_radius`.
    fn support_radius(&self) -> f64;
    /// Radial length scale on which the density varies.
    fn radial_scale(&self) -> f64;
    /// Angles (about `z`) across which the ray integral is not smooth.
    fn angle_breaks(&self, _z: Complex64) -> Vec<f64> {
        Vec::new()
    }
    /// Distances along the ray `z + r e^{i theta}` at which the density is not smooth.
    fn ray_breaks(&self, _z: Complex64, _theta: f64) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarRule {
    pub nr: usize,
    pub n_theta: usize,
}

impl PolarRule {
    /// Angular count resolving the density as seen from `z`, plus `extra`
    /// angular frequencies for a polynomial factor.
    pub fn auto(d: &dyn PlanarDensity, z: Complex64, nr: usize, extra: usize) -> Self {
        let spread = 8.0 * PI * (z.norm() + d.support_radius()) / d.radial_scale();
        let n = (spread.ceil() as usize + 4 * extra).clamp(64, 8192);
        Self {
            nr,
            n_theta: n + n % 2,
        }
    }
}

/// Cauchy transform `int D(w) / (z - w) dm(w)` by a polar rule centred at `z`.
///
/// In polar coordinates about `z` the kernel times the Jacobian is
/// `-e^{-i theta}`, so the integrand is bounded and the rule needs no
/// singular correction.
pub fn cauchy_polar(d: &dyn PlanarDensity, z: Complex64, rule: PolarRule) -> Complex64 {
    let r_s = d.support_radius();
    let width = d.radial_scale();
    let mut thetas: Vec<(f64, f64)> = Vec::new();
    let mut breaks = d.angle_breaks(z);
    if breaks.is_empty() {
        let h = 2.0 * PI / rule.n_theta as f64;
        thetas.extend((0..rule.n_theta).map(|j| (j as f64 * h, h)));
    } else {
        breaks.iter_mut().for_each(|b| *b = b.rem_euclid(2.0 * PI));
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let m = (rule.n_theta / breaks.len()).max(16);
        let (gx, gw) = gauss_legendre::<f64>(m);
        for k in 0..breaks.len() {
            let ta = breaks[k];
            let tb = if k + 1 < breaks.len() {
                breaks[k + 1]
            } else {
                breaks[0] + 2.0 * PI
            };
            let span = tb - ta;
            for (x, w) in gx.iter().zip(&gw) {
                let s = 0.5 * (x + 1.0);
                let th = ta + span * 0.5 * (1.0 - (PI * s).cos());
                let jac = span * 0.5 * PI * (PI * s).sin() * 0.5;
                thetas.push((th, w * jac));
            }
        }
    }
    let (gx, gw) = gauss_legendre::<f64>(rule.nr);
    let zn2 = z.norm_sqr();
    let contributions: Vec<Complex64> = thetas
        .par_iter()
        .map(|&(th, wt)| {
            let e = Complex64::from_polar(1.0, th);
            let b = (z.conj() * e).re;
            let disc = b * b - (zn2 - r_s * r_s);
            if disc <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let sq = disc.sqrt();
            let (r1, r2) = ((-b - sq).max(0.0), -b + sq);
            if r2 <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let mut rb = vec![r1, r2];
            rb.extend(d.ray_breaks(z, th).into_iter().filter(|&r| r > r1 && r < r2));
            rb.sort_by(f64::total_cmp);
            let mut acc = Complex64::new(0.0, 0.0);
            for seg in rb.windows(2) {
                let (a, bb) = (seg[0], seg[1]);
                let m = ((bb - a) / width).ceil().max(1.0) as usize;
                for j in 0..m {
                    let lo = a + (bb - a) * j as f64 / m as f64;
                    let hi = a + (bb - a) * (j + 1) as f64 / m as f64;
                    let mut pan = Complex64::new(0.0, 0.0);
                    for (x, w) in gx.iter().zip(&gw) {
                        let r = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
                        pan += d.value(z + r * e) * *w;
                    }
                    acc += pan * (0.5 * (hi - lo));
                }
            }
            -acc * e.conj() * wt
        })
        .collect();
    psum_slice(&contributions)
}

/// `factor(w) e^{-N V(w)}` restricted to `|w| <= r_t`.
pub struct WeightedDensity<'a, F> {
    pub potential: &'a PerturbedPotential,
    pub factor: F,
    pub r_t: f64,
    pub width: f64,
}

impl<'a, F> WeightedDensity<'a, F>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    pub fn on_grid(grid: &'a QuadGrid, factor: F) -> Self {
        Self {
            potential: &grid.potential,
            factor,
            r_t: grid.r_t,
            width: grid.panel_width,
        }
    }

    fn rough_charges(&self) -> impl Iterator<Item = Complex64> + '_ {
        let n = self.potential.scale;
        self.potential
            .nu
            .charges()
            .iter()
            .filter(move |c| !is_even_integer(n * c.beta))
            .map(|c| c.location)
    }
}

impl<'a, F> PlanarDensity for WeightedDensity<'a, F>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    fn value(&self, w: Complex64) -> Complex64 {
        (self.factor)(w) * self.potential.weight(w)
    }

    fn support_radius(&self) -> f64 {
        self.r_t
    }

    fn radial_scale(&self) -> f64 {
        self.width
    }

    fn angle_breaks(&self, z: Complex64) -> Vec<f64> {
        self.rough_charges()
            .filter(|a| (a - z).norm() > 1e-12)
            .map(|a| (a - z).arg())
            .collect()
    }

    fn ray_breaks(&self, z: Complex64, theta: f64) -> Vec<f64> {
        let e = Complex64::from_polar(1.0, -theta);
        self.rough_charges()
            .map(|a| ((a - z) * e).re)
            .filter(|&t| t > 0.0)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyTransformEstimate {
    pub value: Complex64,
    /// `H = 2 sqrt(2 pi K |lambda|(C))`, `K` the sup of `|density|`.
    pub bound: f64,
    pub tail_error: f64,
}

/// `H_lambda = min_R [ mass / R + 2 pi R K ] = 2 sqrt(2 pi K mass)`.
pub fn cauchy_bound(mass: f64, sup_density: f64) -> f64 {
    2.0 * (2.0 * PI * sup_density * mass).sqrt()
}

/// Minimizing radius of the two-term bound.
pub fn cauchy_bound_radius(mass: f64, sup_density: f64) -> f64 {
    (mass / (2.0 * PI * sup_density)).sqrt()
}

/// `int (w/z)^m f(w) / (z - w) dlambda(w)` by a direct grid sum, for `z`
/// away from the grid.
pub fn grid_cauchy_moment(grid: &QuadGrid, f_vals: &[Complex64], z: Complex64, m: u32) -> Complex64 {
    let s = psum(grid.len(), |i| {
        let w = grid.nodes[i];
        f_vals[i] * (w / z).powu(m) / (z - w) * grid.lam[i]
    });
    s * grid.log_shift.exp()
}

/// Cauchy transform of `factor e^{-N V}` at `z`: polar rule about `z` near the
/// grid, direct grid sum once `|z| > 1.5 r_t`.
pub fn cauchy_transform<F>(grid: &QuadGrid, factor: F, degree: usize, z: Complex64) -> CauchyTransformEstimate
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    let scale = grid.log_shift.exp();
    let absd: Vec<f64> = grid
        .nodes
        .iter()
        .zip(&grid.lam)
        .zip(&grid.area)
        .map(|((&w, &l), &a)| if a > 0.0 { factor(w).norm() * l / a } else { 0.0 })
        .collect();
    let sup = absd.iter().cloned().fold(0.0, f64::max) * scale;
    let mass = psum(grid.len(), |i| absd[i] * grid.area[i]) * scale;
    let bound = cauchy_bound(mass, sup);
    let value = if z.norm() > 1.5 * grid.r_t {
        let vals: Vec<Complex64> = grid.nodes.iter().map(|&w| factor(w)).collect();
        grid_cauchy_moment(grid, &vals, z, 0)
    } else {
        let d = WeightedDensity::on_grid(grid, &factor);
        cauchy_polar(&d, z, PolarRule::auto(&d, z, grid.spec.nr, degree))
    };
    CauchyTransformEstimate {
        value,
        bound,
        tail_error: grid.spec.eps_tail * bound,
    }
}

const CACHE_MAGIC: &[u8; 8] = b"PLQGRID\0";
const CACHE_VERSION: u32 = 1;

/// Writes nodes and weights in a little-endian binary file with a versioned header.
pub fn write_grid_cache(grid: &QuadGrid, path: &Path) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(64 + grid.len() * 32);
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    let meta = serde_json::to_vec(&CacheMeta::from(grid)).expect("serializable");
    buf.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    buf.extend_from_slice(&meta);
    buf.extend_from_slice(&(grid.len() as u64).to_le_bytes());
    for i in 0..grid.len() {
        for x in [grid.nodes[i].re, grid.nodes[i].im, grid.area[i], grid.lam[i]] {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    std::fs::File::create(path)?.write_all(&buf)
}

#[derive(Serialize, Deserialize)]
struct CacheMeta {
    potential: PerturbedPotential,
    spec: QuadSpec,
    degree: usize,
    r_t: f64,
    panel_width: f64,
    nt: usize,
    patches: Vec<Patch>,
    log_shift: f64,
}

impl From<&QuadGrid> for CacheMeta {
    fn from(g: &QuadGrid) -> Self {
        Self {
            potential: g.potential.clone(),
            spec: g.spec,
            degree: g.degree,
            r_t: g.r_t,
            panel_width: g.panel_width,
            nt: g.nt,
            patches: g.patches.clone(),
            log_shift: g.log_shift,
        }
    }
}

pub fn read_grid_cache(path: &Path) -> std::io::Result<QuadGrid> {
    use std::io::{Error as IoError, ErrorKind};
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: &str| IoError::new(ErrorKind::InvalidData, m.to_string());
    let mut pos = 0usize;
    let mut take = |n: usize| -> std::io::Result<&[u8]> {
        if pos + n > bytes.len() {
            return Err(bad("truncated grid cache"));
        }
        let s = &bytes[pos..pos + n];
        pos += n;
        Ok(s)
    };
    if take(8)? != CACHE_MAGIC {
        return Err(bad("not a grid cache"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(bad(&format!("unsupported grid cache version {version}")));
    }
    let meta_len = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let meta: CacheMeta = serde_json::from_slice(take(meta_len)?).map_err(|e| bad(&e.to_string()))?;
    let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let mut nodes = Vec::with_capacity(n);
    let mut area = Vec::with_capacity(n);
    let mut lam = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v = [0.0; 4];
        for x in v.iter_mut() {
            *x = f64::from_le_bytes(take(8)?.try_into().unwrap());
        }
        nodes.push(Complex64::new(v[0], v[1]));
        area.push(v[2]);
        lam.push(v[3]);
    }
    Ok(QuadGrid {
        potential: meta.potential,
        spec: meta.spec,
        degree: meta.degree,
        r_t: meta.r_t,
        panel_width: meta.panel_width,
        nt: meta.nt,
        patches: meta.patches,
        nodes,
        area,
        lam,
        log_shift: meta.log_shift,
    })
}

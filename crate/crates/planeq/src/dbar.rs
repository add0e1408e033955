//! The 2x2 matrix built from `P_k`, `P_{k-1}` and their weighted Cauchy
//! transforms, checked against the dbar equation
//! `dY/dzbar = conj(Y) [[0, -e^{-NV}], [0, 0]]` and the normalization
//! `Y = (I + O(1/z)) diag(z^k, z^{-k})` at infinity.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{in_support, SupportGeometry};
use crate::error::{Error, Result};
use crate::orthopoly::OrthoPolySet;
use crate::planarquad::{cauchy_polar, grid_cauchy_moment, PolarRule, QuadGrid, WeightedDensity};
use crate::sum::psum;

/// `|z|` beyond which Cauchy transforms use the orthogonality-reduced grid sums,
/// in units of the truncation radius.
const FAR_FACTOR: f64 = 1.5;

pub struct DbarMatrix<'a> {
    pub k: usize,
    pub ops: &'a OrthoPolySet,
    pub grid: &'a QuadGrid,
    conj_pk: Vec<Complex64>,
    conj_pkm1: Vec<Complex64>,
}

/// `∫ conj(P_m(w)) e^{-NV(w)} / (z - w) dm(w)` in two routes.
fn near_cauchy(ops: &OrthoPolySet, grid: &QuadGrid, m: usize, z: Complex64) -> Complex64 {
    let d = WeightedDensity::on_grid(grid, |w: Complex64| ops.eval(m, w).conj());
    cauchy_polar(&d, z, PolarRule::auto(&d, z, grid.spec.nr, m))
}

impl<'a> DbarMatrix<'a> {
    pub fn new(ops: &'a OrthoPolySet, grid: &'a QuadGrid, k: usize) -> Result<Self> {
        if k == 0 || k > ops.n_max {
            return Err(Error::InvalidParameter(format!("k = {k} outside 1..={}", ops.n_max)));
        }
        let conj_pk = grid.nodes.iter().map(|&w| ops.eval(k, w).conj()).collect();
        let conj_pkm1 = grid.nodes.iter().map(|&w| ops.eval(k - 1, w).conj()).collect();
        Ok(Self {
            k,
            ops,
            grid,
            conj_pk,
            conj_pkm1,
        })
    }

    fn is_far(&self, z: Complex64) -> bool {
        z.norm() > FAR_FACTOR * self.grid.r_t
    }

    fn h_prev(&self) -> f64 {
        self.ops.norms[self.k - 1]
    }

    pub fn y11(&self, z: Complex64) -> Complex64 {
        self.ops.eval(self.k, z)
    }

    pub fn y21(&self, z: Complex64) -> Complex64 {
        -PI / self.h_prev() * self.ops.eval(self.k - 1, z)
    }

    /// `-(1/pi) ∫ conj(P_k) e^{-NV} / (z - w) dm`.
    pub fn y12(&self, z: Complex64) -> Complex64 {
        if self.is_far(z) {
            // orthogonality removes the first k terms of the geometric expansion
            -grid_cauchy_moment(self.grid, &self.conj_pk, z, self.k as u32) / PI
        } else {
            -near_cauchy(self.ops, self.grid, self.k, z) / PI
        }
    }

    /// `(1/h_{k-1}) ∫ conj(P_{k-1}) e^{-NV} / (z - w) dm`.
    pub fn y22(&self, z: Complex64) -> Complex64 {
        if self.is_far(z) {
            (self.z_k_y22_minus_one(z) + 1.0) / z.powu(self.k as u32)
        } else {
            near_cauchy(self.ops, self.grid, self.k - 1, z) / self.h_prev()
        }
    }

    /// `z^k Y22(z) - 1`, free of cancellation for large `|z|`.
    pub fn z_k_y22_minus_one(&self, z: Complex64) -> Complex64 {
        if self.is_far(z) {
            z.powu(self.k as u32) * grid_cauchy_moment(self.grid, &self.conj_pkm1, z, self.k as u32) / self.h_prev()
        } else {
            z.powu(self.k as u32) * self.y22(z) - 1.0
        }
    }

    /// `Y11 / z^k - 1` from the non-leading coefficients.
    pub fn y11_over_zk_minus_one(&self, z: Complex64) -> Complex64 {
        let inv = 1.0 / z;
        let mut s = Complex64::new(0.0, 0.0);
        for (j, &a) in self.ops.coeffs[self.k][..self.k].iter().enumerate() {
            s += a * inv.powu((self.k - j) as u32);
        }
        s
    }

    pub fn eval(&self, z: Complex64) -> [[Complex64; 2]; 2] {
        [[self.y11(z), self.y12(z)], [self.y21(z), self.y22(z)]]
    }

    /// Right-hand side of the dbar equation: `conj(Y) [[0, -w], [0, 0]]`.
    pub fn rhs(&self, z: Complex64) -> [[Complex64; 2]; 2] {
        let w = self.ops.potential.weight(z);
        let zero = Complex64::new(0.0, 0.0);
        [
            [zero, -self.y11(z).conj() * w],
            [zero, -self.y21(z).conj() * w],
        ]
    }
}

/// Central-difference `d/dzbar = (d/dx + i d/dy) / 2` on the four-point cross.
fn dbar_fd<F: Fn(Complex64) -> Complex64>(f: F, z: Complex64, h: f64) -> Complex64 {
    let i = Complex64::i();
    let dx = (f(z + h) - f(z - h)) / (2.0 * h);
    let dy = (f(z + i * h) - f(z - i * h)) / (2.0 * h);
    0.5 * (dx + i * dy)
}

/// `|dY/dzbar - rhs|` entrywise at `z`, with step `h`.
pub fn dbar_residual(y: &DbarMatrix, z: Complex64, h: f64) -> Result<[[f64; 2]; 2]> {
    if y.ops.potential.weight(z) == 0.0 && y.ops.potential.value(z).is_infinite() {
        return Err(Error::InvalidParameter("z is a charge location".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step {h}")));
    }
    let rhs = y.rhs(z);
    let d11 = dbar_fd(|u| y.y11(u), z, h);
    let d21 = dbar_fd(|u| y.y21(u), z, h);
    let d12 = dbar_fd(|u| y.y12(u), z, h);
    let d22 = dbar_fd(|u| y.y22(u), z, h);
    Ok([
        [(d11 - rhs[0][0]).norm(), (d12 - rhs[0][1]).norm()],
        [(d21 - rhs[1][0]).norm(), (d22 - rhs[1][1]).norm()],
    ])
}

/// Observed orders of the column-2 residuals over decreasing steps.
pub fn fd_orders(y: &DbarMatrix, z: Complex64, steps: &[f64]) -> Result<[f64; 2]> {
    let res: Vec<[[f64; 2]; 2]> = steps
        .iter()
        .map(|&h| dbar_residual(y, z, h))
        .collect::<Result<_>>()?;
    let mut orders = [f64::INFINITY; 2];
    for (e, order) in orders.iter_mut().enumerate() {
        for w in 0..steps.len() - 1 {
            let (r0, r1) = (res[w][e][1], res[w + 1][e][1]);
            if r1 >= r0 {
                return Err(Error::StepTooSmall);
            }
            let o = (r0 / r1).ln() / (steps[w] / steps[w + 1]).ln();
            *order = order.min(o);
        }
    }
    Ok(orders)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSlopes {
    pub radii: Vec<f64>,
    /// `|Y11 / z^k - 1|`, expected slope -1.
    pub y11: f64,
    /// `|Y21 / z^k|`, expected slope -1.
    pub y21: f64,
    /// `|z^k Y12|`, expected slope -1.
    pub y12: f64,
    /// `|z^k Y22 - 1|`, expected slope -1.
    pub y22: f64,
}

impl AsymptoticSlopes {
    pub fn max_deviation(&self, expected: f64) -> f64 {
        [self.y11, self.y21, self.y12, self.y22]
            .iter()
            .map(|s| (s - expected).abs())
            .fold(0.0, f64::max)
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Slopes of the four normalized entries along the ray `arg z = phi`.
pub fn asymptotic_normalization(y: &DbarMatrix, radii: &[f64], phi: f64) -> AsymptoticSlopes {
    let k = y.k as u32;
    let mut e = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for &r in radii {
        let z = Complex64::from_polar(r, phi);
        let zk = z.powu(k);
        e[0].push(y.y11_over_zk_minus_one(z).norm());
        e[1].push((y.y21(z) / zk).norm());
        e[2].push((zk * y.y12(z)).norm());
        e[3].push(y.z_k_y22_minus_one(z).norm());
    }
    AsymptoticSlopes {
        radii: radii.to_vec(),
        y11: loglog_slope(radii, &e[0]),
        y21: loglog_slope(radii, &e[1]),
        y12: loglog_slope(radii, &e[2]),
        y22: loglog_slope(radii, &e[3]),
    }
}

/// `|∫ conj(P_n) e^{-NV} / (z - w) dm - h_n / z^{n+1}|` along the ray
/// `arg z = phi`, by the reduced grid sum `z^{-(n+1)} ∫ w^{n+1} conj(P_n) / (z - w)`.
pub fn cauchy_remainder(ops: &OrthoPolySet, grid: &QuadGrid, n: usize, z: Complex64) -> Complex64 {
    let vals: Vec<Complex64> = grid.nodes.iter().map(|&w| ops.eval(n, w).conj()).collect();
    grid_cauchy_moment(grid, &vals, z, n as u32 + 1)
}

/// The same remainder from the unreduced transform; valid only where the
/// subtraction does not cancel.
pub fn cauchy_remainder_direct(ops: &OrthoPolySet, grid: &QuadGrid, n: usize, z: Complex64) -> Complex64 {
    let vals: Vec<Complex64> = grid.nodes.iter().map(|&w| ops.eval(n, w).conj()).collect();
    let full = if z.norm() > FAR_FACTOR * grid.r_t {
        grid_cauchy_moment(grid, &vals, z, 0)
    } else {
        near_cauchy(ops, grid, n, z)
    };
    full - ops.norms[n] / z.powu(n as u32 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub k: usize,
    /// `max_{l<k} |∫ w^l conj(P_k) dλ| / sqrt(h_k ∫|w|^{2l} dλ)`.
    pub orthogonality: f64,
    /// `-(1/pi) ∫ w^{k-1} conj(Y21) dλ`, which should equal 1.
    pub normalization: f64,
    pub pass: bool,
}

/// The moment conditions that pin down the first row and the second row's
/// polynomial entry.
pub fn uniqueness_crosscheck(ops: &OrthoPolySet, grid: &QuadGrid, k: usize, tol: f64) -> Result<UniquenessReport> {
    if k == 0 || k > ops.n_max {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..={}", ops.n_max)));
    }
    let scale = grid.log_shift.exp();
    let pk: Vec<Complex64> = grid.nodes.iter().map(|&w| ops.eval(k, w).conj()).collect();
    let hk = ops.norms[k];
    let mut orth: f64 = 0.0;
    for l in 0..k {
        let s = psum(grid.len(), |i| grid.nodes[i].powu(l as u32) * pk[i] * grid.lam[i]) * scale;
        let m = psum(grid.len(), |i| grid.nodes[i].norm().powi(2 * l as i32) * grid.lam[i]) * scale;
        orth = orth.max(s.norm() / (hk * m).sqrt());
    }
    let hp = ops.norms[k - 1];
    let y21c: Vec<Complex64> = grid
        .nodes
        .iter()
        .map(|&w| (-PI / hp * ops.eval(k - 1, w)).conj())
        .collect();
    let s = psum(grid.len(), |i| grid.nodes[i].powu(k as u32 - 1) * y21c[i] * grid.lam[i]) * scale;
    let normalization = (-s / PI).re;
    Ok(UniquenessReport {
        k,
        orthogonality: orth,
        normalization,
        pass: orth < tol && (normalization - 1.0).abs() < tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub support: Vec<Complex64>,
    pub cavities: Vec<Complex64>,
    pub outside: Vec<Complex64>,
}

impl SampleSet {
    pub fn all(&self) -> impl Iterator<Item = &Complex64> {
        self.support.iter().chain(&self.cavities).chain(&self.outside)
    }
}

/// Points inside the support, inside the cavities and in an annulus outside,
/// drawn with a fixed seed.
pub fn sample_points(geom: &SupportGeometry, per_region: usize, seed: u64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = match geom {
        SupportGeometry::DiskCavities { outer, .. } => *outer,
        SupportGeometry::ExteriorMap(m) => m
            .boundary_samples(512)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max),
    };
    let mut draw = |pred: &dyn Fn(Complex64) -> bool, lo: f64, hi: f64, center: Complex64| {
        let mut out = Vec::new();
        let mut tries = 0;
        while out.len() < per_region && tries < 1_000_000 {
            tries += 1;
            let r = (lo * lo + (hi * hi - lo * lo) * rng.gen::<f64>()).sqrt();
            let z = center + Complex64::from_polar(r, 2.0 * PI * rng.gen::<f64>());
            if pred(z) {
                out.push(z);
            }
        }
        out
    };
    let origin = Complex64::new(0.0, 0.0);
    let support = draw(&|z| in_support(geom, z), 0.0, reach, origin);
    let outside = draw(&|z| !in_support(geom, z), reach * 1.05, reach * 1.5, origin);
    let mut cavities = Vec::new();
    if let SupportGeometry::DiskCavities { cavities: cs, .. } = geom {
        if !cs.is_empty() {
            let per = per_region.div_ceil(cs.len());
            for c in cs {
                let mut got = draw(&|_| true, 0.05 * c.radius, 0.95 * c.radius, c.center);
                got.truncate(per);
                cavities.extend(got);
            }
            cavities.truncate(per_region);
        }
    }
    SampleSet {
        support,
        cavities,
        outside,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbarResidualReport {
    pub k: usize,
    pub step: f64,
    pub samples: usize,
    /// Largest residual of each entry over the sample set.
    pub max_residual: [[f64; 2]; 2],
    /// Smallest observed FD order of the column-2 residuals at the order-check points.
    pub min_order: [f64; 2],
    pub slopes: AsymptoticSlopes,
}

pub const ORDER_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Residuals over `samples` at step `step`, FD orders at `order_points`, and
/// asymptotic slopes at `radii`.
pub fn dbar_report(
    y: &DbarMatrix,
    samples: &[Complex64],
    step: f64,
    order_points: &[Complex64],
    radii: &[f64],
) -> Result<DbarResidualReport> {
    let mut max = [[0.0f64; 2]; 2];
    for &z in samples {
        let r = dbar_residual(y, z, step)?;
        for i in 0..2 {
            for j in 0..2 {
                max[i][j] = max[i][j].max(r[i][j]);
            }
        }
    }
    let mut min_order = [f64::INFINITY; 2];
    for &z in order_points {
        let o = fd_orders(y, z, &ORDER_STEPS)?;
        min_order[0] = min_order[0].min(o[0]);
        min_order[1] = min_order[1].min(o[1]);
    }
    Ok(DbarResidualReport {
        k: y.k,
        step,
        samples: samples.len(),
        max_residual: max,
        min_order,
        slopes: asymptotic_normalization(y, radii, 0.3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::classify_support;
    use crate::measures::{PerturbedPotential, PointChargeMeasure};
    use crate::orthopoly::{build_orthopolys, Precision};
    use crate::planarquad::{build_grid, QuadSpec};
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cavity(n_scale: f64, degree: usize) -> (PerturbedPotential, QuadGrid, OrthoPolySet) {
        let p = PerturbedPotential::new(0.5, PointChargeMeasure::single(c(0.3, 0.0), 0.5).unwrap(), n_scale, 2.0).unwrap();
        let g = build_grid(&p, &QuadSpec::default(), degree).unwrap();
        let ops = build_orthopolys(&p, &g, degree, Precision::Auto).unwrap();
        (p, g, ops)
    }

    #[test]
    fn gaussian_k1_entries() {
        // N alpha = 1: h_0 = pi, P_1 = z, and the transforms are radial closed forms
        let p = PerturbedPotential::gaussian(1.0, 1.0).unwrap();
        let g = build_grid(&p, &QuadSpec::default(), 3).unwrap();
        let ops = build_orthopolys(&p, &g, 3, Precision::Auto).unwrap();
        let y = DbarMatrix::new(&ops, &g, 1).unwrap();
        let z = c(0.7, -0.4);
        assert!((y.y11(z) - z).norm() < 1e-13);
        assert!((y.y21(z) + 1.0).norm() < 1e-12);
        // ∫ conj(w) e^{-|w|^2}/(z-w) dm = pi (1 - (1 + |z|^2) e^{-|z|^2}) / z^2
        for z in [c(0.7, -0.4), c(2.0, 1.0), c(30.0, 5.0)] {
            let r2 = z.norm_sqr();
            let exact12 = -(1.0 - (1.0 + r2) * (-r2).exp()) / (z * z);
            assert!((y.y12(z) - exact12).norm() < 1e-12 * (1.0 + exact12.norm()), "{z}");
            let exact22 = (1.0 - (-r2).exp()) / z;
            assert!((y.y22(z) - exact22).norm() < 1e-12, "{z}");
        }
    }

    #[test]
    fn near_and_far_routes_agree() {
        let (_, g, ops) = cavity(20.0, 6);
        let y = DbarMatrix::new(&ops, &g, 3).unwrap();
        let z = Complex64::from_polar(1.6 * g.r_t, 0.7);
        let far12 = y.y12(z);
        let near12 = -near_cauchy(&ops, &g, 3, z) / PI;
        assert!((far12 - near12).norm() < 1e-11 * far12.norm());
        let far22 = y.y22(z);
        let near22 = near_cauchy(&ops, &g, 2, z) / ops.norms[2];
        assert!((far22 - near22).norm() < 1e-11 * far22.norm());
        // reduced and direct remainders at moderate |z|
        let z = Complex64::from_polar(2.0 * g.r_t, -0.4);
        let a = cauchy_remainder(&ops, &g, 2, z);
        let b = cauchy_remainder_direct(&ops, &g, 2, z);
        assert!((a - b).norm() < 1e-6 * a.norm(), "{a} vs {b}");
    }

    #[test]
    fn column_one_is_holomorphic() {
        let (_, g, ops) = cavity(20.0, 4);
        let y = DbarMatrix::new(&ops, &g, 2).unwrap();
        for h in [1e-2, 1e-3] {
            let r = dbar_residual(&y, c(0.5, 0.5), h).unwrap();
            assert!(r[0][0] < 1e-9 && r[1][0] < 1e-9);
        }
    }

    #[test]
    fn column_two_second_order() {
        let (_, g, ops) = cavity(20.0, 4);
        let y = DbarMatrix::new(&ops, &g, 2).unwrap();
        let o = fd_orders(&y, c(0.5, 0.5), &ORDER_STEPS).unwrap();
        assert!(o[0] >= 1.8 && o[1] >= 1.8, "{o:?}");
        let r = dbar_residual(&y, c(1e3, 0.0), 1e-2).unwrap();
        assert!(r[0][1] < 1e-12 && r[1][1] < 1e-12);
    }

    #[test]
    fn uniqueness_relations() {
        let (p, g, ops) = cavity(20.0, 6);
        for k in 1..=6 {
            let r = uniqueness_crosscheck(&ops, &g, k, 1e-8).unwrap();
            assert!(r.pass, "{r:?}");
            assert_relative_eq!(r.normalization, 1.0, max_relative = 1e-10);
        }
        let geom = classify_support(&p.rescaled()).unwrap();
        let s = sample_points(&geom, 5, 7);
        assert_eq!((s.support.len(), s.cavities.len(), s.outside.len()), (5, 5, 5));
    }

    #[test]
    fn asymptotic_slopes() {
        let (_, g, ops) = cavity(20.0, 6);
        let radii: Vec<f64> = (0..6).map(|i| 1e2 * 10f64.powf(i as f64 / 5.0)).collect();
        for k in [1, 3] {
            let y = DbarMatrix::new(&ops, &g, k).unwrap();
            let s = asymptotic_normalization(&y, &radii, 0.3);
            assert!(s.max_deviation(-1.0) < 0.2, "{s:?}");
        }
        let slope = loglog_slope(
            &radii,
            &radii.iter().map(|&r| cauchy_remainder(&ops, &g, 2, Complex64::from_polar(r, 0.3)).norm()).collect::<Vec<_>>(),
        );
        assert!(slope <= -4.0 + 0.2);
    }
}

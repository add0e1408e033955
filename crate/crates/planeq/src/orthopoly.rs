//! Monic planar orthogonal polynomials for `e^{-N V} dm`, built by Arnoldi
//! iteration on the quadrature nodes, their zeros, the one-point function and
//! the logarithmic potential of the zero counting measure.

use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::equilibrium::outer_radius;
use crate::error::{Error, Result};
use crate::measures::{ExtReal, PerturbedPotential};
use crate::planarquad::QuadGrid;
use crate::real::Real;
use crate::roots::{aberth, circle_start, AberthOptions};
use crate::sum::psum;

pub type CDd = Complex<Dd>;

/// Gram residual above which the double-precision result is rejected.
pub const GRAM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Double,
    Extended,
    /// Double first, extended if the Gram residual exceeds [`GRAM_TOL`].
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthoPolySet {
    pub n_max: usize,
    pub potential: PerturbedPotential,
    /// Precision the recurrence was computed in.
    pub precision: Precision,
    /// Column `k` holds `H_{0k}, ..., H_{k+1,k}` with `z q_k = sum_j H_{jk} q_j`.
    pub hessenberg: Vec<Vec<Complex64>>,
    /// Squared norms `h_0, ..., h_{n_max}`.
    pub norms: Vec<f64>,
    /// Monic coefficients, ascending powers.
    pub coeffs: Vec<Vec<Complex64>>,
    #[serde(skip)]
    rec_dd: Vec<Vec<CDd>>,
    #[serde(skip)]
    coeffs_dd: Vec<Vec<CDd>>,
    /// `max_{j != k} |<P_j, P_k>| / sqrt(h_j h_k)` from the coefficient vectors.
    pub gram_residual: f64,
}

fn c2<T: Real>(z: Complex64) -> Complex<T> {
    Complex::new(T::from_f64(z.re), T::from_f64(z.im))
}

fn to_c64<T: Real>(z: Complex<T>) -> Complex64 {
    Complex64::new(z.re.to_f64(), z.im.to_f64())
}

fn ip<T: Real>(u: &[Complex<T>], v: &[Complex<T>], lam: &[T]) -> Complex<T> {
    psum(lam.len(), |i| u[i] * v[i].conj() * lam[i])
}

/// Arnoldi with two passes of classical Gram-Schmidt. Returns the Hessenberg
/// columns and `h_0` in the grid's shifted scale.
fn arnoldi<T: Real>(nodes: &[Complex<T>], lam: &[T], n: usize) -> (Vec<Vec<Complex<T>>>, T) {
    let m = nodes.len();
    let h0 = psum(m, |i| lam[i]);
    let q0 = Complex::new(T::one() / h0.sqrt(), T::zero());
    let mut qs: Vec<Vec<Complex<T>>> = vec![vec![q0; m]];
    let mut cols = Vec::with_capacity(n);
    // nodes and weights are doubles, so symmetry is only exact to double rounding
    let noise = T::from_f64(64.0 * f64::EPSILON);
    for k in 0..n {
        let mut v: Vec<Complex<T>> = nodes.iter().zip(&qs[k]).map(|(&z, &q)| z * q).collect();
        let mut col = vec![Complex::new(T::zero(), T::zero()); k + 2];
        for _ in 0..2 {
            let cs: Vec<Complex<T>> = (0..=k).map(|j| ip(&v, &qs[j], lam)).collect();
            for (j, &c) in cs.iter().enumerate() {
                let qj = &qs[j];
                for (x, &q) in v.iter_mut().zip(qj) {
                    *x -= c * q;
                }
                col[j] += c;
            }
        }
        let hk = ip(&v, &v, lam).re.sqrt();
        let scale = (col.iter().map(|c| c.norm_sqr()).fold(T::zero(), |a, b| a + b) + hk * hk).sqrt();
        for c in col.iter_mut().take(k + 1) {
            if c.norm_sqr().sqrt() <= noise * scale {
                *c = Complex::new(T::zero(), T::zero());
            }
        }
        col[k + 1] = Complex::new(hk, T::zero());
        let inv = T::one() / hk;
        qs.push(v.into_iter().map(|x| x * inv).collect());
        cols.push(col);
    }
    (cols, h0)
}

/// `c_{kj}` in `P_{k+1} = z P_k - sum_{j <= k} c_{kj} P_j`.
fn monic_recurrence(h: &[Vec<CDd>]) -> Vec<Vec<CDd>> {
    h.iter()
        .enumerate()
        .map(|(k, col)| {
            // ratio = sqrt(h_k / h_j) = prod_{i=j}^{k-1} H_{i+1,i}
            let mut out = vec![CDd::new(Dd::ZERO, Dd::ZERO); k + 1];
            let mut ratio = Dd::ONE;
            for j in (0..=k).rev() {
                out[j] = col[j] * ratio;
                if j > 0 {
                    ratio *= h[j - 1][j].re;
                }
            }
            out
        })
        .collect()
}

fn monic_coeffs(rec: &[Vec<CDd>]) -> Vec<Vec<CDd>> {
    let zero = CDd::new(Dd::ZERO, Dd::ZERO);
    let mut ps = vec![vec![CDd::new(Dd::ONE, Dd::ZERO)]];
    for (k, row) in rec.iter().enumerate() {
        let mut next = vec![zero; k + 2];
        for (i, &a) in ps[k].iter().enumerate() {
            next[i + 1] = a;
        }
        for (j, &c) in row.iter().enumerate() {
            for (i, &a) in ps[j].iter().enumerate() {
                next[i] -= c * a;
            }
        }
        next[k + 1] = CDd::new(Dd::ONE, Dd::ZERO);
        ps.push(next);
    }
    ps
}

fn horner<T: Real>(p: &[Complex<T>], z: Complex<T>) -> Complex<T> {
    let mut v = Complex::new(T::zero(), T::zero());
    for &a in p.iter().rev() {
        v = v * z + a;
    }
    v
}

/// Normalized Gram residual of the coefficient vectors, evaluated in double-double.
fn gram_residual(coeffs: &[Vec<CDd>], norms_scaled: &[Dd], grid: &QuadGrid) -> f64 {
    let nodes: Vec<CDd> = grid.nodes.iter().map(|&z| c2(z)).collect();
    let lam: Vec<Dd> = grid.lam.iter().map(|&l| Dd::new(l)).collect();
    let vals: Vec<Vec<CDd>> = coeffs
        .iter()
        .map(|p| nodes.iter().map(|&z| horner(p, z)).collect())
        .collect();
    let mut worst: f64 = 0.0;
    for j in 0..coeffs.len() {
        for k in 0..j {
            let g = ip(&vals[j], &vals[k], &lam);
            let r = g.norm_sqr().sqrt() / (norms_scaled[j] * norms_scaled[k]).sqrt();
            worst = worst.max(r.to_f64());
        }
    }
    worst
}

fn assemble<T: Real>(p: &PerturbedPotential, grid: &QuadGrid, n_max: usize, precision: Precision) -> OrthoPolySet {
    let nodes: Vec<Complex<T>> = grid.nodes.iter().map(|&z| c2(z)).collect();
    let lam: Vec<T> = grid.lam.iter().map(|&l| T::from_f64(l)).collect();
    let (h, h0) = arnoldi(&nodes, &lam, n_max);
    let h_dd: Vec<Vec<CDd>> = h
        .iter()
        .map(|col| col.iter().map(|c| CDd::new(c.re.to_dd(), c.im.to_dd())).collect())
        .collect();
    let h0_dd = h0.to_dd();
    let mut norms_scaled = vec![h0_dd];
    for k in 0..n_max {
        let s = h_dd[k][k + 1].re;
        norms_scaled.push(norms_scaled[k] * s * s);
    }
    let rec_dd = monic_recurrence(&h_dd);
    let coeffs_dd = monic_coeffs(&rec_dd);
    let gram = gram_residual(&coeffs_dd, &norms_scaled, grid);
    let shift = grid.log_shift.exp();
    OrthoPolySet {
        n_max,
        potential: p.clone(),
        precision,
        hessenberg: h_dd.iter().map(|c| c.iter().map(|&x| to_c64(x)).collect()).collect(),
        norms: norms_scaled.iter().map(|h| h.to_f64() * shift).collect(),
        coeffs: coeffs_dd.iter().map(|c| c.iter().map(|&x| to_c64(x)).collect()).collect(),
        rec_dd,
        coeffs_dd,
        gram_residual: gram,
    }
}

/// Orthogonalizes `1, z, z^2, ...` against the grid's discrete measure.
pub fn build_orthopolys(p: &PerturbedPotential, grid: &QuadGrid, n_max: usize, precision: Precision) -> Result<OrthoPolySet> {
    if n_max > grid.degree {
        return Err(Error::InvalidOrders(format!(
            "grid sized for degree {} but {} requested",
            grid.degree, n_max
        )));
    }
    if grid.potential != *p {
        return Err(Error::InvalidParameter("grid was built for another potential".into()));
    }
    let set = match precision {
        Precision::Double => assemble::<f64>(p, grid, n_max, Precision::Double),
        Precision::Extended => assemble::<Dd>(p, grid, n_max, Precision::Extended),
        Precision::Auto => {
            let s = assemble::<f64>(p, grid, n_max, Precision::Double);
            if s.gram_residual <= GRAM_TOL {
                s
            } else {
                assemble::<Dd>(p, grid, n_max, Precision::Extended)
            }
        }
    };
    if !(set.gram_residual <= GRAM_TOL) {
        return Err(Error::LossOfOrthogonality {
            degree: n_max,
            residual: set.gram_residual,
        });
    }
    Ok(set)
}

impl OrthoPolySet {
    /// `P_0(z), ..., P_k(z)` by the monic recurrence in double precision.
    pub fn eval_all(&self, k: usize, z: Complex64) -> Vec<Complex64> {
        let mut ps = Vec::with_capacity(k + 1);
        ps.push(Complex64::new(1.0, 0.0));
        for m in 0..k {
            let mut next = z * ps[m];
            for (j, c) in self.rec_dd[m].iter().enumerate() {
                next -= to_c64(*c) * ps[j];
            }
            ps.push(next);
        }
        ps
    }

    pub fn eval(&self, k: usize, z: Complex64) -> Complex64 {
        self.eval_all(k, z)[k]
    }

    /// `P_k(z)` from the stored coefficients.
    pub fn eval_coeffs(&self, k: usize, z: Complex64) -> Complex64 {
        horner(&self.coeffs[k], z)
    }

    /// `(P_k(z), P_k'(z))` by the recurrence in double-double.
    pub fn eval_with_derivative_dd(&self, k: usize, z: CDd) -> (CDd, CDd) {
        let zero = CDd::new(Dd::ZERO, Dd::ZERO);
        let mut ps = vec![CDd::new(Dd::ONE, Dd::ZERO)];
        let mut ds = vec![zero];
        for m in 0..k {
            let mut p = z * ps[m];
            let mut d = ps[m] + z * ds[m];
            for (j, &c) in self.rec_dd[m].iter().enumerate() {
                p -= c * ps[j];
                d -= c * ds[j];
            }
            ps.push(p);
            ds.push(d);
        }
        (ps[k], ds[k])
    }

    /// Orthonormal `p_k = P_k / sqrt(h_k)` for `k < n`.
    pub fn orthonormal_values(&self, n: usize, z: Complex64) -> Vec<Complex64> {
        let ps = self.eval_all(n.saturating_sub(1), z);
        ps.iter().zip(&self.norms).take(n).map(|(p, h)| p / h.sqrt()).collect()
    }

    pub fn monic_coeffs_dd(&self, k: usize) -> &[CDd] {
        &self.coeffs_dd[k]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSet {
    pub n: usize,
    pub zeros: Vec<Complex64>,
    /// Largest `|P_n(z_j)| / prod_{k != j} |z_j - z_k|`.
    pub residual: f64,
}

impl ZeroSet {
    /// Coefficients of `prod (z - z_j)`, ascending.
    pub fn product_coeffs(&self) -> Vec<Complex64> {
        let mut p = vec![Complex64::new(1.0, 0.0)];
        for &r in &self.zeros {
            let mut q = vec![Complex64::new(0.0, 0.0); p.len() + 1];
            for (i, &a) in p.iter().enumerate() {
                q[i + 1] += a;
                q[i] -= a * r;
            }
            p = q;
        }
        p
    }

    /// Each zero carries mass `1/n`.
    pub fn counting_measure(&self) -> Vec<(Complex64, f64)> {
        let w = 1.0 / self.n as f64;
        self.zeros.iter().map(|&z| (z, w)).collect()
    }
}

/// All zeros of `P_n` by Aberth iteration with double-double evaluation,
/// started on the circle `|z| = R_Q`.
pub fn compute_zeros(ops: &OrthoPolySet, n: usize) -> Result<ZeroSet> {
    if n > ops.n_max {
        return Err(Error::InvalidParameter(format!("degree {n} exceeds {}", ops.n_max)));
    }
    let r0 = outer_radius(&ops.potential.rescaled());
    let newton = |z: Complex64| {
        let (p, d) = ops.eval_with_derivative_dd(n, c2(z));
        to_c64(p / d)
    };
    let ln_abs_p = |z: Complex64| {
        let (p, _) = ops.eval_with_derivative_dd(n, c2(z));
        0.5 * p.norm_sqr().ln().to_f64()
    };
    let (zeros, residual) = aberth(circle_start(n, r0), newton, ln_abs_p, AberthOptions::default())?;
    Ok(ZeroSet { n, zeros, residual })
}

/// `(1/n) sum_{k<n} |p_k(z)|^2 e^{-N V(z)}`.
pub fn one_point_function(ops: &OrthoPolySet, n: usize, z: Complex64) -> f64 {
    let w = ops.potential.weight(z);
    if w == 0.0 || n == 0 {
        return 0.0;
    }
    let s: f64 = ops.orthonormal_values(n, z).iter().map(|p| p.norm_sqr()).sum();
    s * w / n as f64
}

/// `(1/n) sum_j log(1/|z - z_j|)`.
pub fn zero_potential(zs: &ZeroSet, z: Complex64) -> ExtReal {
    let mut s = 0.0;
    for &x in &zs.zeros {
        let d = (z - x).norm();
        if d == 0.0 {
            return ExtReal::PosInf;
        }
        s -= d.ln();
    }
    ExtReal::Finite(s / zs.n as f64)
}

//! Aberth-Ehrlich simultaneous iteration for all roots of a polynomial given
//! through its Newton correction `p / p'`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AberthOptions {
    pub max_sweeps: usize,
    /// Required bound on `|p(z_j)| / prod_{k != j} |z_j - z_k|`.
    pub tol: f64,
}

impl Default for AberthOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 5000,
            tol: 1e-10,
        }
    }
}

/// Starting points on a circle, rotated off any axis of symmetry.
pub fn circle_start(n: usize, radius: f64) -> Vec<Complex64> {
    (0..n)
        .map(|j| Complex64::from_polar(radius, 2.0 * std::f64::consts::PI * (j as f64 + 0.25) / n as f64 + 0.4))
        .collect()
}

/// `ln |p(z_j)| - sum_{k != j} ln |z_j - z_k|` for every root.
pub fn log_residual_ratios<R>(zs: &[Complex64], ln_abs_p: &R) -> Vec<f64>
where
    R: Fn(Complex64) -> f64 + Sync,
{
    zs.par_iter()
        .enumerate()
        .map(|(j, &z)| {
            let mut s = ln_abs_p(z);
            for (k, &w) in zs.iter().enumerate() {
                if k != j {
                    s -= (z - w).norm().ln();
                }
            }
            s
        })
        .collect()
}

/// Runs the iteration from `init`. `newton(z)` returns `p(z)/p'(z)` and
/// `ln_abs_p(z)` returns `ln |p(z)|`. Returns the roots and the largest
/// residual ratio.
pub fn aberth<F, R>(init: Vec<Complex64>, newton: F, ln_abs_p: R, opts: AberthOptions) -> Result<(Vec<Complex64>, f64)>
where
    F: Fn(Complex64) -> Complex64 + Sync,
    R: Fn(Complex64) -> f64 + Sync,
{
    let n = init.len();
    let mut zs = init;
    if n == 0 {
        return Ok((zs, 0.0));
    }
    let ln_tol = opts.tol.ln();
    let mut sweeps = 0;
    loop {
        let w: Vec<Complex64> = (0..n)
            .into_par_iter()
            .map(|j| {
                let z = zs[j];
                let nc = newton(z);
                if nc.norm() == 0.0 || !nc.is_finite() {
                    return Complex64::new(0.0, 0.0);
                }
                let mut s = Complex64::new(0.0, 0.0);
                for (k, &x) in zs.iter().enumerate() {
                    if k != j {
                        s += 1.0 / (z - x);
                    }
                }
                nc / (1.0 - nc * s)
            })
            .collect();
        let mut small = true;
        for (z, dz) in zs.iter_mut().zip(&w) {
            if dz.is_finite() {
                *z -= dz;
            }
            if dz.norm() > 4.0 * f64::EPSILON * z.norm() {
                small = false;
            }
        }
        sweeps += 1;
        let check = small || sweeps % 8 == 0 || sweeps >= opts.max_sweeps;
        if check {
            let worst = log_residual_ratios(&zs, &ln_abs_p)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            if small || worst < ln_tol - 2.0 * std::f64::consts::LN_10 {
                if worst <= ln_tol {
                    zs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
                    return Ok((zs, worst.exp()));
                }
                if small {
                    return Err(Error::NonConvergence(sweeps));
                }
            }
            if sweeps >= opts.max_sweeps {
                return Err(Error::NonConvergence(sweeps));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn from_roots(roots: &[Complex64]) -> Vec<Complex64> {
        let mut p = vec![c(1.0, 0.0)];
        for &r in roots {
            let mut q = vec![c(0.0, 0.0); p.len() + 1];
            for (i, &a) in p.iter().enumerate() {
                q[i + 1] += a;
                q[i] -= a * r;
            }
            p = q;
        }
        p
    }

    fn horner(p: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
        let mut v = c(0.0, 0.0);
        let mut d = c(0.0, 0.0);
        for &a in p.iter().rev() {
            d = d * z + v;
            v = v * z + a;
        }
        (v, d)
    }

    #[test]
    fn recovers_known_roots() {
        let roots = [c(1.0, 0.0), c(-0.5, 0.3), c(-0.5, -0.3), c(0.1, 1.2), c(2.0, -1.0)];
        let p = from_roots(&roots);
        let (zs, res) = aberth(
            circle_start(5, 1.5),
            |z| {
                let (v, d) = horner(&p, z);
                v / d
            },
            |z| horner(&p, z).0.norm().ln(),
            AberthOptions::default(),
        )
        .unwrap();
        assert!(res < 1e-10);
        for r in roots {
            let best = zs.iter().map(|z| (z - r).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-12);
        }
    }

    #[test]
    fn multiple_root_at_origin() {
        let n = 12;
        let (zs, _) = aberth(
            circle_start(n, 1.0),
            |z| z / n as f64,
            |z| n as f64 * z.norm().ln(),
            AberthOptions::default(),
        )
        .unwrap();
        for z in zs {
            assert!(z.norm() < 1e-8);
        }
    }
}

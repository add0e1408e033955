//! Point-charge measures, uniform disk measures and the perturbed Gaussian
//! potential `V(z) = alpha |z|^2 + sum_k beta_k log(1/|z - a_k|)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::equilibrium::SupportGeometry;
use crate::error::{Error, Result};

/// A real value that may be `+inf`, kept explicit so that infinities never
/// leak into floating-point arithmetic unnoticed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::PosInf => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::PosInf)
    }

    /// Finite value, or `f64::INFINITY` for the marker.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn add(self, x: f64) -> ExtReal {
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(v + x),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }

    pub fn scale(self, s: f64) -> ExtReal {
        debug_assert!(s > 0.0);
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(v * s),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointCharge {
    pub location: Complex64,
    pub beta: f64,
}

/// Finite positive combination of point masses.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PointChargeMeasure {
    charges: Vec<PointCharge>,
}

impl PointChargeMeasure {
    pub fn new(charges: Vec<PointCharge>) -> Result<Self> {
        for (i, c) in charges.iter().enumerate() {
            if !(c.beta > 0.0 && c.beta.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "charge {i} has mass {} (must be positive)",
                    c.beta
                )));
            }
            if !(c.location.re.is_finite() && c.location.im.is_finite()) {
                return Err(Error::InvalidParameter(format!("charge {i} location")));
            }
            for (j, d) in charges[..i].iter().enumerate() {
                if d.location == c.location {
                    return Err(Error::InvalidParameter(format!(
                        "charges {j} and {i} share a location"
                    )));
                }
            }
        }
        Ok(Self { charges })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(location: Complex64, beta: f64) -> Result<Self> {
        Self::new(vec![PointCharge { location, beta }])
    }

    pub fn charges(&self) -> &[PointCharge] {
        &self.charges
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.charges.iter().map(|c| c.beta).sum()
    }

    /// Same masses, locations multiplied by `e^{i theta}`.
    pub fn rotated(&self, theta: f64) -> Self {
        let r = Complex64::from_polar(1.0, theta);
        Self {
            charges: self
                .charges
                .iter()
                .map(|c| PointCharge {
                    location: c.location * r,
                    beta: c.beta,
                })
                .collect(),
        }
    }

    /// Same locations, masses multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            charges: self
                .charges
                .iter()
                .map(|c| PointCharge {
                    location: c.location,
                    beta: c.beta * s,
                })
                .collect(),
        }
    }
}

/// `sum_k beta_k log(1/|z - a_k|)`, `+inf` exactly at the charges.
pub fn log_potential_point(nu: &PointChargeMeasure, z: Complex64) -> ExtReal {
    let mut s = 0.0;
    for c in nu.charges() {
        let d = (z - c.location).norm();
        if d == 0.0 {
            return ExtReal::PosInf;
        }
        s -= c.beta * d.ln();
    }
    ExtReal::Finite(s)
}

/// Lebesgue measure restricted to a disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskMeasure {
    pub center: Complex64,
    pub radius: f64,
}

impl DiskMeasure {
    pub fn new(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("disk radius {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn mass(&self) -> f64 {
        PI * self.radius * self.radius
    }
}

/// Logarithmic potential of area measure on a disk.
pub fn log_potential_disk(d: &DiskMeasure, z: Complex64) -> f64 {
    let r2 = d.radius * d.radius;
    let s2 = (z - d.center).norm_sqr();
    if s2 <= r2 {
        0.5 * r2 * PI * ((1.0 / r2).ln() + 1.0 - s2 / r2)
    } else {
        -0.5 * r2 * PI * s2.ln()
    }
}

/// `V(z) = alpha |z|^2 + U^nu(z)` together with the weight scale `N` and the
/// ratio `gamma = N/n` used for the rescaled potential `Q = (gamma/2) V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedPotential {
    pub alpha: f64,
    pub nu: PointChargeMeasure,
    /// Weight scale `N` in `e^{-N V}`.
    pub scale: f64,
    pub gamma: f64,
}

impl PerturbedPotential {
    pub fn new(alpha: f64, nu: PointChargeMeasure, scale: f64, gamma: f64) -> Result<Self> {
        for (name, x) in [("alpha", alpha), ("N", scale), ("gamma", gamma)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {x} must be positive")));
            }
        }
        Ok(Self {
            alpha,
            nu,
            scale,
            gamma,
        })
    }

    /// Pure Gaussian `alpha |z|^2` with `gamma = 2`.
    pub fn gaussian(alpha: f64, scale: f64) -> Result<Self> {
        Self::new(alpha, PointChargeMeasure::empty(), scale, 2.0)
    }

    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        Self::new(self.alpha, self.nu.clone(), scale, self.gamma)
    }

    pub fn value(&self, z: Complex64) -> ExtReal {
        log_potential_point(&self.nu, z).add(self.alpha * z.norm_sqr())
    }

    /// `-N V(z)`, or `None` at a charge.
    pub fn log_weight(&self, z: Complex64) -> Option<f64> {
        self.value(z).finite().map(|v| -self.scale * v)
    }

    /// `e^{-N V(z)}`; exactly zero at the charges.
    pub fn weight(&self, z: Complex64) -> f64 {
        self.log_weight(z).map_or(0.0, f64::exp)
    }

    /// The potential `Q = (gamma/2) V` as a potential of the same family.
    pub fn rescaled(&self) -> PerturbedPotential {
        let s = 0.5 * self.gamma;
        PerturbedPotential {
            alpha: self.alpha * s,
            nu: self.nu.scaled(s),
            scale: self.scale,
            gamma: self.gamma,
        }
    }

    pub fn q_value(&self, z: Complex64) -> ExtReal {
        self.value(z).scale(0.5 * self.gamma)
    }

    /// Lower bound `L` with `N (frac alpha |z|^2 + U^nu(z)) >= L` on the plane,
    /// `0 < frac < 1`.
    pub fn exponent_lower_bound(&self, frac: f64) -> f64 {
        assert!(frac > 0.0 && frac < 1.0);
        if self.nu.is_empty() {
            return 0.0;
        }
        let fa = frac * self.alpha;
        let phi = |z: Complex64| -> f64 {
            let mut s = fa * z.norm_sqr();
            for c in self.nu.charges() {
                s -= c.beta * (z - c.location).norm().ln();
            }
            s
        };
        let grad = |z: Complex64| -> Complex64 {
            let mut g = 2.0 * fa * z;
            for c in self.nu.charges() {
                let d = z - c.location;
                g -= c.beta * d / d.norm_sqr();
            }
            g
        };
        let amax = self
            .nu
            .charges()
            .iter()
            .map(|c| c.location.norm())
            .fold(0.0, f64::max);
        let half = amax + 2.0 * (self.nu.total_mass() / (2.0 * fa)).sqrt() + 1e-3;
        let m = 121;
        let mut cands: Vec<(f64, Complex64)> = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let z = Complex64::new(
                    -half + 2.0 * half * (i as f64 + 0.5) / m as f64,
                    -half + 2.0 * half * (j as f64 + 0.5) / m as f64,
                );
                let v = phi(z);
                if v.is_finite() {
                    cands.push((v, z));
                }
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = f64::INFINITY;
        for &(v0, z0) in cands.iter().take(5) {
            let (mut z, mut v) = (z0, v0);
            let mut step = 0.1 * half;
            for _ in 0..2000 {
                let g = grad(z);
                if g.norm() < 1e-14 * (1.0 + v.abs()) {
                    break;
                }
                let mut accepted = false;
                while step > 1e-18 {
                    let zn = z - step * g / g.norm();
                    let vn = phi(zn);
                    if vn.is_finite() && vn < v {
                        z = zn;
                        v = vn;
                        step *= 2.0;
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
            best = best.min(v);
        }
        let l = self.scale * best;
        l - 1e-9 * (1.0 + l.abs())
    }

    /// The bound used in the moment estimates:
    /// `e^{-N V(z)} <= e^{-L} e^{-N alpha |z|^2 / 2}`.
    pub fn weight_upper_bound(&self) -> WeightBound {
        WeightBound {
            l: self.exponent_lower_bound(0.5),
            c: 0.5 * self.scale * self.alpha,
        }
    }
}

/// `z -> e^{-l} e^{-c |z|^2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightBound {
    pub l: f64,
    pub c: f64,
}

impl WeightBound {
    pub fn eval(&self, z: Complex64) -> f64 {
        (-self.l - self.c * z.norm_sqr()).exp()
    }
}

/// Equilibrium measure data: uniform density on the support geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumData {
    pub geometry: SupportGeometry,
    pub robin_constant: f64,
    pub density: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn point_potential_examples() {
        let nu = PointChargeMeasure::single(c(0.0, 0.0), 1.0).unwrap();
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(log_potential_point(&nu, c(e, 0.0)).to_f64(), -1.0, epsilon = 1e-15);
        let nu2 = PointChargeMeasure::single(c(0.0, 0.0), 2.0).unwrap();
        assert_eq!(log_potential_point(&nu2, c(1.0, 0.0)), ExtReal::Finite(0.0));
        let nu3 = PointChargeMeasure::new(vec![
            PointCharge { location: c(1.0, 0.0), beta: 0.5 },
            PointCharge { location: c(-1.0, 0.0), beta: 0.5 },
        ])
        .unwrap();
        let v = log_potential_point(&nu3, c(3.0, 0.0)).to_f64();
        assert_abs_diff_eq!(v, -0.5 * (2f64.ln() + 4f64.ln()), epsilon = 1e-15);
        assert_eq!(log_potential_point(&nu3, c(1.0, 0.0)), ExtReal::PosInf);
    }

    #[test]
    fn rejects_bad_charges() {
        assert!(PointChargeMeasure::single(c(0.0, 0.0), 0.0).is_err());
        assert!(PointChargeMeasure::single(c(0.0, 0.0), -1.0).is_err());
        let dup = vec![
            PointCharge { location: c(1.0, 0.0), beta: 1.0 },
            PointCharge { location: c(1.0, 0.0), beta: 2.0 },
        ];
        assert!(PointChargeMeasure::new(dup).is_err());
        assert!(PerturbedPotential::new(0.0, PointChargeMeasure::empty(), 1.0, 1.0).is_err());
    }

    #[test]
    fn disk_potential_examples() {
        let unit = DiskMeasure::new(c(0.0, 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(log_potential_disk(&unit, c(0.0, 0.0)), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(log_potential_disk(&unit, c(0.6, 0.8)), 0.0, epsilon = 1e-15);
        let two = DiskMeasure::new(c(0.0, 0.0), 2.0).unwrap();
        assert_abs_diff_eq!(
            log_potential_disk(&two, c(4.0, 0.0)),
            4.0 * PI * (0.25f64).ln(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn potential_examples() {
        let p = PerturbedPotential::gaussian(1.0, 1.0).unwrap();
        assert_eq!(p.value(c(2.0, 0.0)), ExtReal::Finite(4.0));
        let nu = PointChargeMeasure::single(c(0.0, 0.0), 1.0).unwrap();
        let p = PerturbedPotential::new(1.0, nu, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(p.value(c(1.0, 0.0)).to_f64(), 1.0, epsilon = 1e-15);
        assert_eq!(p.weight(c(0.0, 0.0)), 0.0);
        let nu = PointChargeMeasure::single(c(2.0, 0.0), 0.5).unwrap();
        let p = PerturbedPotential::new(0.5, nu, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(p.value(c(0.0, 0.0)).to_f64(), 0.5 * (0.5f64).ln(), epsilon = 1e-15);
    }

    #[test]
    fn rescaled_potential_is_half_gamma_v() {
        let nu = PointChargeMeasure::single(c(0.3, 0.1), 0.7).unwrap();
        let p = PerturbedPotential::new(0.8, nu, 10.0, 3.0).unwrap();
        let q = p.rescaled();
        for z in [c(0.1, 0.2), c(-1.0, 0.5), c(2.0, -3.0)] {
            assert_abs_diff_eq!(q.value(z).to_f64(), p.q_value(z).to_f64(), epsilon = 1e-13);
            assert_abs_diff_eq!(q.value(z).to_f64(), 1.5 * p.value(z).to_f64(), epsilon = 1e-13);
        }
    }

    #[test]
    fn weight_bound_examples() {
        let p = PerturbedPotential::gaussian(1.0, 1.0).unwrap();
        assert_eq!(p.weight_upper_bound().l, 0.0);
        let nu = PointChargeMeasure::single(c(0.0, 0.0), 1.0).unwrap();
        let p = PerturbedPotential::new(1.0, nu, 1.0, 2.0).unwrap();
        // min of |z|^2/2 - log|z| is 1/2 at |z| = 1
        let b = p.weight_upper_bound();
        assert!(b.l <= 0.5);
        assert_abs_diff_eq!(b.l, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn point_potential_asymptotics() {
        let nu = PointChargeMeasure::new(vec![
            PointCharge { location: c(0.5, 0.2), beta: 0.3 },
            PointCharge { location: c(-1.0, 0.7), beta: 1.1 },
        ])
        .unwrap();
        for &theta in &[0.0, 1.0, 2.5, 4.0] {
            for k in 2..=6 {
                let r = 10f64.powi(k);
                let z = Complex64::from_polar(r, theta);
                let dev = (log_potential_point(&nu, z).to_f64() + nu.total_mass() * r.ln()).abs() * r;
                // first-order term is Re(sum beta_k a_k / z)
                let bound: f64 = nu.charges().iter().map(|c| c.beta * c.location.norm()).sum();
                assert!(dev < bound + 1e-2, "dev {dev}");
            }
        }
    }
}

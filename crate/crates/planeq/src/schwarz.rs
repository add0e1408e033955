//! Schwarz function of the support boundary, its jump across the cut, the
//! critical trajectories `Re[dS dz] = 0` and the line density they carry.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{classify_support, equilibrium_log_potential, ExteriorMap, SupportGeometry};
use crate::error::{Error, Result};
use crate::measures::PerturbedPotential;
use crate::orthopoly::ZeroSet;

/// Sampled image of the unit circle under the exterior map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub map: ExteriorMap,
    pub theta: Vec<f64>,
    pub points: Vec<Complex64>,
}

impl BoundaryCurve {
    /// Signed area of the polygon; positive for counterclockwise orientation.
    pub fn shoelace_area(&self) -> f64 {
        let n = self.points.len();
        let mut s = 0.0;
        for i in 0..n {
            let (p, q) = (self.points[i], self.points[(i + 1) % n]);
            s += p.re * q.im - q.re * p.im;
        }
        0.5 * s
    }

    /// Winding-number test against the polygon.
    pub fn encloses(&self, z: Complex64) -> bool {
        let n = self.points.len();
        let mut inside = false;
        for i in 0..n {
            let (p, q) = (self.points[i], self.points[(i + 1) % n]);
            if (p.im > z.im) != (q.im > z.im) {
                let x = p.re + (z.im - p.im) * (q.re - p.re) / (q.im - p.im);
                if z.re < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_cross(p1: Complex64, p2: Complex64, q1: Complex64, q2: Complex64) -> bool {
    let d1 = cross(p2 - p1, q1 - p1);
    let d2 = cross(p2 - p1, q2 - p1);
    let d3 = cross(q2 - q1, p1 - q1);
    let d4 = cross(q2 - q1, p2 - q1);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

pub fn boundary_curve(map: &ExteriorMap, n_samples: usize) -> Result<BoundaryCurve> {
    if n_samples < 3 {
        return Err(Error::InvalidParameter(format!("{n_samples} boundary samples")));
    }
    let theta: Vec<f64> = (0..n_samples).map(|i| 2.0 * PI * i as f64 / n_samples as f64).collect();
    let mut points = Vec::with_capacity(n_samples);
    for &t in &theta {
        let zeta = Complex64::from_polar(1.0, t);
        if map.derivative(zeta).norm() <= 1e-12 * map.rho {
            return Err(Error::SelfIntersection(format!("f' vanishes at theta = {t}")));
        }
        points.push(map.eval(zeta));
    }
    let n = n_samples;
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(points[i], points[(i + 1) % n], points[j], points[(j + 1) % n]) {
                return Err(Error::SelfIntersection(format!("segments {i} and {j} cross")));
            }
        }
    }
    let curve = BoundaryCurve { map: *map, theta, points };
    if curve.shoelace_area() <= 0.0 {
        return Err(Error::SelfIntersection("boundary is not positively oriented".into()));
    }
    Ok(curve)
}

/// The two preimages of `z` under the rational extension of the map and the
/// Schwarz function values on the corresponding sheets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchwarzBranches {
    pub z: Complex64,
    pub zeta: [Complex64; 2],
    pub s: [Complex64; 2],
}

impl SchwarzBranches {
    /// `S_0 - S_1`.
    pub fn jump(&self) -> Complex64 {
        self.s[0] - self.s[1]
    }

    /// Relabels so that the preimages follow `prev` continuously.
    pub fn paired_with(mut self, prev: &[Complex64; 2]) -> Self {
        let keep = (self.zeta[0] - prev[0]).norm() + (self.zeta[1] - prev[1]).norm();
        let swap = (self.zeta[1] - prev[0]).norm() + (self.zeta[0] - prev[1]).norm();
        if swap < keep {
            self.zeta.swap(0, 1);
            self.s.swap(0, 1);
        }
        self
    }
}

fn discriminant_factored(map: &ExteriorMap, z: Complex64) -> Complex64 {
    let c = map.u + map.pole * map.rho;
    let d = 2.0 * (map.rho * map.v).sqrt();
    (z - c - d) * (z - c + d)
}

/// Discriminant `(u - z - A rho)^2 - 4 rho (A (z - u) + v)` of the preimage quadratic.
pub fn discriminant(map: &ExteriorMap, z: Complex64) -> Complex64 {
    let (b, c) = map.preimage_coeffs(z);
    b * b - 4.0 * map.rho * c
}

/// Both roots of the preimage quadratic, the larger in modulus first.
pub fn schwarz_branches(map: &ExteriorMap, z: Complex64) -> SchwarzBranches {
    let (_, c) = map.preimage_coeffs(z);
    let m = z - map.u + map.pole * map.rho;
    let sd = discriminant_factored(map, z).sqrt();
    let q = if (m + sd).norm() >= (m - sd).norm() { m + sd } else { m - sd };
    let z1 = q / (2.0 * map.rho);
    let z2 = if z1.norm() > 0.0 { c / (map.rho * z1) } else { z1 };
    let zeta = if z1.norm() >= z2.norm() { [z1, z2] } else { [z2, z1] };
    SchwarzBranches {
        z,
        zeta,
        s: [map.schwarz_at(zeta[0]), map.schwarz_at(zeta[1])],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub z: Complex64,
    /// The double root of the preimage quadratic.
    pub zeta: Complex64,
}

/// Critical values `u + A rho ± 2 sqrt(rho v)` whose double preimage
/// `A ± sqrt(v / rho)` lies in the closed unit disk.
pub fn branch_points(map: &ExteriorMap) -> Result<Vec<BranchPoint>> {
    if !(map.rho > 0.0) {
        return Err(Error::DegenerateMap(format!("rho = {}", map.rho)));
    }
    if map.v.norm() <= 1e-14 * map.rho {
        return Err(Error::DegenerateMap("v = 0, the map is affine".into()));
    }
    let d = (map.v / map.rho).sqrt();
    let e = 2.0 * (map.rho * map.v).sqrt();
    let c = map.u + map.pole * map.rho;
    Ok([(d, e), (-d, -e)]
        .into_iter()
        .map(|(dz, de)| BranchPoint {
            z: c + de,
            zeta: map.pole + dz,
        })
        .filter(|b| b.zeta.norm() <= 1.0 + 1e-12)
        .collect())
}

/// Jump of the Schwarz function across the cut, with the branch state
/// needed to follow it continuously.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum JumpField {
    /// Simply connected support given by a rational exterior map.
    Exterior(ExteriorMap),
    /// Disk of radius `outer` with one circular cavity; the two branches are
    /// `outer^2 / z` and `conj(center) + radius^2 / (z - center)`.
    Cavity { outer: f64, center: Complex64, radius: f64 },
}

/// Branch state at a point: the two preimages (exterior case only) and the jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpValue {
    pub zeta: [Complex64; 2],
    pub jump: Complex64,
}

impl JumpField {
    pub fn from_geometry(geom: &SupportGeometry) -> Result<Self> {
        match geom {
            SupportGeometry::ExteriorMap(m) => Ok(JumpField::Exterior(*m)),
            SupportGeometry::DiskCavities { outer, cavities } if cavities.len() == 1 => Ok(JumpField::Cavity {
                outer: *outer,
                center: cavities[0].center,
                radius: cavities[0].radius,
            }),
            SupportGeometry::DiskCavities { cavities, .. } => Err(Error::Unsupported(format!(
                "jump field needs exactly one cavity, got {}",
                cavities.len()
            ))),
        }
    }

    /// Field for the equilibrium problem of `Q`.
    pub fn for_potential(p: &PerturbedPotential) -> Result<Self> {
        Self::from_geometry(&classify_support(&p.rescaled())?)
    }

    /// Evaluates the jump, pairing branches with `prev` when given.
    pub fn value(&self, z: Complex64, prev: Option<&JumpValue>) -> JumpValue {
        match self {
            JumpField::Exterior(m) => {
                let mut b = schwarz_branches(m, z);
                if let Some(p) = prev {
                    b = b.paired_with(&p.zeta);
                }
                JumpValue {
                    zeta: b.zeta,
                    jump: b.jump(),
                }
            }
            JumpField::Cavity { outer, center, radius } => JumpValue {
                zeta: [Complex64::new(0.0, 0.0); 2],
                jump: outer * outer / z - center.conj() - radius * radius / (z - center),
            },
        }
    }

    /// Squared jump; independent of the branch labeling.
    pub fn jump_squared(&self, z: Complex64) -> Complex64 {
        let j = self.value(z, None).jump;
        j * j
    }

    /// Starting points of critical trajectories: branch points of the
    /// Schwarz function, or the zeros of the jump inside the outer disk.
    pub fn critical_points(&self) -> Result<Vec<Complex64>> {
        match self {
            JumpField::Exterior(m) => Ok(branch_points(m)?.into_iter().map(|b| b.z).collect()),
            JumpField::Cavity { outer, center, radius } => {
                // -conj(a) z^2 + (R^2 + |a|^2 - r^2) z - R^2 a = 0
                let r2 = outer * outer;
                let qa = -center.conj();
                let qb = Complex64::new(r2 + center.norm_sqr() - radius * radius, 0.0);
                let qc = -r2 * center;
                if qa.norm() == 0.0 {
                    return Err(Error::DegenerateMap("charge at the center: the jump has no zeros".into()));
                }
                let sd = (qb * qb - 4.0 * qa * qc).sqrt();
                let q = if (qb + sd).norm() >= (qb - sd).norm() { -0.5 * (qb + sd) } else { -0.5 * (qb - sd) };
                Ok([q / qa, qc / q].into_iter().filter(|z| z.norm() < *outer).collect())
            }
        }
    }

    /// Points where the jump has a pole.
    pub fn nodes(&self) -> Vec<Complex64> {
        match self {
            JumpField::Exterior(m) => {
                let z0 = m.eval(Complex64::new(0.0, 0.0));
                if m.contains(z0) {
                    vec![z0]
                } else {
                    Vec::new()
                }
            }
            JumpField::Cavity { center, .. } => vec![Complex64::new(0.0, 0.0), *center],
        }
    }

    /// Region in which trajectories are followed.
    pub fn region_contains(&self, z: Complex64) -> bool {
        match self {
            JumpField::Exterior(m) => m.contains(z),
            JumpField::Cavity { outer, .. } => z.norm() < *outer,
        }
    }

    /// Rough diameter of the region.
    pub fn diameter(&self) -> f64 {
        match self {
            JumpField::Exterior(m) => {
                let pts = m.boundary_samples(128);
                let mut d: f64 = 0.0;
                for p in &pts {
                    for q in &pts {
                        d = d.max((p - q).norm());
                    }
                }
                d
            }
            JumpField::Cavity { outer, .. } => 2.0 * outer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointTag {
    /// Reached critical point with the given index.
    CriticalPoint(usize),
    /// Ran into a pole of the jump.
    Node,
    BoundaryExit,
    MaxLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Complex64>,
    /// Index of the critical point the trajectory starts from.
    pub start: usize,
    pub end: EndpointTag,
    /// Ends at a critical point.
    pub connecting: bool,
}

impl Trajectory {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Midpoints, increments and jump values per segment, the jump followed
    /// continuously from the first segment.
    fn segments(&self, field: &JumpField) -> Vec<(Complex64, Complex64, Complex64)> {
        let mut prev: Option<JumpValue> = None;
        self.points
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let v = field.value(mid, prev.as_ref());
                prev = Some(v);
                (mid, w[1] - w[0], v.jump)
            })
            .collect()
    }

    /// `|Re[dS dz]| / (|dS| |dz|)` per segment.
    pub fn residuals(&self, field: &JumpField) -> Vec<f64> {
        self.segments(field)
            .into_iter()
            .map(|(_, dz, j)| {
                if dz.norm() > 0.0 && j.norm() > 0.0 {
                    (j * dz).re.abs() / (j.norm() * dz.norm())
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn max_residual(&self, field: &JumpField) -> f64 {
        self.residuals(field).into_iter().fold(0.0, f64::max)
    }

    /// Distance from `z` to the polyline.
    pub fn distance(&self, z: Complex64) -> f64 {
        distance_to_polyline(z, &self.points)
    }

    fn point_at_fraction(&self, frac: f64) -> Complex64 {
        let target = frac * self.length();
        let mut acc = 0.0;
        for w in self.points.windows(2) {
            let l = (w[1] - w[0]).norm();
            if acc + l >= target && l > 0.0 {
                return w[0] + (w[1] - w[0]) * ((target - acc) / l);
            }
            acc += l;
        }
        *self.points.last().expect("nonempty trajectory")
    }
}

pub fn distance_to_polyline(z: Complex64, pts: &[Complex64]) -> f64 {
    if pts.len() == 1 {
        return (z - pts[0]).norm();
    }
    pts.windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            let l2 = d.norm_sqr();
            let t = if l2 > 0.0 { (((z - w[0]) * d.conj()).re / l2).clamp(0.0, 1.0) } else { 0.0 };
            (z - (w[0] + d * t)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Offset from a critical point at which integration starts.
pub const START_OFFSET: f64 = 1e-6;

/// Directions `theta` with `Re[dS(c + eps e^{i theta}) e^{i theta}] = 0`,
/// found from the branch-independent `dS^2`.
pub fn local_directions(field: &JumpField, c: Complex64, eps: f64) -> Vec<f64> {
    let g = |t: f64| {
        let e = Complex64::from_polar(1.0, t);
        field.jump_squared(c + eps * e) * e * e
    };
    let m = 720;
    let mut out = Vec::new();
    for i in 0..m {
        let (mut a, mut b) = (2.0 * PI * i as f64 / m as f64, 2.0 * PI * (i + 1) as f64 / m as f64);
        let (ga, gb) = (g(a).im, g(b).im);
        if ga == 0.0 && g(a).re < 0.0 {
            out.push(a);
            continue;
        }
        if ga * gb >= 0.0 {
            continue;
        }
        let mut fa = ga;
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            let fm = g(mid).im;
            if fm * fa <= 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        let t = 0.5 * (a + b);
        if g(t).re < 0.0 {
            out.push(t);
        }
    }
    out
}

fn orient(x: Complex64, d: Complex64) -> Complex64 {
    if (x * d.conj()).re < 0.0 {
        -x
    } else {
        x
    }
}

fn direction(field: &JumpField, z: Complex64, prev: &JumpValue, d: Complex64) -> (Complex64, JumpValue) {
    let v = field.value(z, Some(prev));
    let j = v.jump;
    let x = if j.norm() > 0.0 { Complex64::i() * j.conj() / j.norm() } else { d };
    (orient(x, d), v)
}

struct TraceSettings {
    step: f64,
    tol: f64,
    max_length: f64,
    snap: f64,
}

fn trace(field: &JumpField, crit: &[Complex64], start: usize, theta: f64, s: &TraceSettings) -> Result<Trajectory> {
    let c = crit[start];
    let mut d = Complex64::from_polar(1.0, theta);
    let mut z = c + START_OFFSET * d;
    let mut state = field.value(z, None);
    let mut points = vec![c, z];
    let mut h = s.step;
    let mut length = START_OFFSET;
    let nodes = field.nodes();
    let end = loop {
        let (k1, _) = direction(field, z, &state, d);
        let (k2, _) = direction(field, z + 0.5 * h * k1, &state, k1);
        let (k3, _) = direction(field, z + 0.5 * h * k2, &state, k1);
        let (k4, _) = direction(field, z + h * k3, &state, k1);
        let dz = h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        let mid = field.value(z + 0.5 * dz, Some(&state));
        let res = if mid.jump.norm() > 0.0 {
            (mid.jump * dz).re.abs() / (mid.jump.norm() * dz.norm())
        } else {
            0.0
        };
        if res > s.tol {
            h *= 0.5;
            if h < s.step * 1e-9 {
                return Err(Error::StiffRegion(format!("{z}")));
            }
            continue;
        }
        z += dz;
        d = dz / dz.norm();
        state = field.value(z, Some(&mid));
        length += dz.norm();
        points.push(z);
        // steps shrink toward a critical point so the final snap is short
        let near = crit
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != start || length > 10.0 * s.step)
            .map(|(j, cj)| (j, (z - cj).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        h = (2.0 * h).min(s.step);
        if let Some((j, dist)) = near {
            if dist < s.snap {
                break EndpointTag::CriticalPoint(j);
            }
            h = h.min(0.25 * dist);
        }
        if state.jump.norm() < s.tol * 1e-6 {
            break EndpointTag::Node;
        }
        if nodes.iter().any(|n| (z - n).norm() < s.step) {
            break EndpointTag::Node;
        }
        if !field.region_contains(z) {
            break EndpointTag::BoundaryExit;
        }
        if length > s.max_length {
            break EndpointTag::MaxLength;
        }
    };
    Ok(Trajectory {
        points,
        start,
        connecting: matches!(end, EndpointTag::CriticalPoint(_)),
        end,
    })
}

/// One trajectory per local direction at every critical point; a curve
/// joining two critical points appears once from each end.
pub fn traced_trajectories(field: &JumpField, step: f64, tol: f64) -> Result<Vec<Trajectory>> {
    if !(step > 0.0 && tol > 0.0) {
        return Err(Error::InvalidParameter(format!("step = {step}, tol = {tol}")));
    }
    let crit = field.critical_points()?;
    if crit.is_empty() {
        return Err(Error::DegenerateMap("no critical points in the region".into()));
    }
    let settings = TraceSettings {
        step,
        tol,
        max_length: 20.0 * field.diameter(),
        snap: 1e-2 * step,
    };
    let starts: Vec<(usize, f64)> = crit
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| local_directions(field, c, START_OFFSET).into_iter().map(move |t| (i, t)))
        .collect();
    starts
        .par_iter()
        .map(|&(i, t)| trace(field, &crit, i, t, &settings))
        .collect()
}

/// All critical trajectories leaving the critical points of `field`.
///
/// `step` is the nominal RK4 step and `tol` the accepted relative residual
/// `|Re[dS dz]| / (|dS| |dz|)` per step. A trajectory joining two critical
/// points is reported once; it ends within `step / 100` of its endpoint.
pub fn critical_trajectories(field: &JumpField, step: f64, tol: f64) -> Result<Vec<Trajectory>> {
    let traced = traced_trajectories(field, step, tol)?;
    let mut out: Vec<Trajectory> = Vec::new();
    for t in traced {
        let duplicate = t.connecting
            && out.iter().any(|o| {
                o.connecting
                    && o.end == EndpointTag::CriticalPoint(t.start)
                    && t.end == EndpointTag::CriticalPoint(o.start)
                    && (o.point_at_fraction(0.5) - t.point_at_fraction(0.5)).norm() < 10.0 * step
            });
        if !duplicate {
            out.push(t);
        }
    }
    Ok(out)
}

/// Per-segment weights `(1/2pi) Im[dS dz]` along `traj`, oriented to be
/// nonnegative and normalized to total mass one.
pub fn effective_zero_density(traj: &Trajectory, field: &JumpField) -> Result<Vec<(Complex64, f64)>> {
    effective_zero_density_union(std::slice::from_ref(traj), field)
}

/// Joint density on several trajectories, each oriented separately and
/// normalized together.
pub fn effective_zero_density_union(trajs: &[Trajectory], field: &JumpField) -> Result<Vec<(Complex64, f64)>> {
    let mut all = Vec::new();
    for t in trajs {
        let mut w: Vec<(Complex64, f64)> = t
            .segments(field)
            .into_iter()
            .map(|(m, dz, j)| (m, (j * dz).im / (2.0 * PI)))
            .collect();
        let total: f64 = w.iter().map(|x| x.1).sum();
        if total < 0.0 {
            for x in &mut w {
                x.1 = -x.1;
            }
        }
        let big = w.iter().map(|x| x.1.abs()).fold(0.0, f64::max);
        let worst = w.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        if worst < -1e-6 * big {
            return Err(Error::SignFlip(worst));
        }
        all.extend(w);
    }
    let total: f64 = all.iter().map(|x| x.1).sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("trajectory carries no mass".into()));
    }
    for x in &mut all {
        x.1 /= total;
    }
    Ok(all)
}

/// `sum_j w_j log(1/|z - z_j|)`.
pub fn discrete_log_potential(weights: &[(Complex64, f64)], z: Complex64) -> f64 {
    -weights.iter().map(|(p, w)| w * (z - p).norm().ln()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialComparison {
    pub points: Vec<Complex64>,
    /// `-(1/n) log |P_n(z)|`.
    pub zero_potential: Vec<f64>,
    /// Logarithmic potential of the equilibrium measure of `Q`.
    pub equilibrium_potential: Vec<f64>,
    pub errors: Vec<f64>,
    pub sup: f64,
    pub mean: f64,
}

/// Compares the potential of the normalized zero counting measure with the
/// equilibrium potential at points outside the support.
pub fn external_potential_compare(zeros: &ZeroSet, p: &PerturbedPotential, points: &[Complex64]) -> Result<PotentialComparison> {
    if zeros.n == 0 {
        return Err(Error::InvalidParameter("degree 0 has no zeros".into()));
    }
    let q = p.rescaled();
    let geom = classify_support(&q)?;
    let n = zeros.n as f64;
    let zp: Vec<f64> = points
        .par_iter()
        .map(|&z| -zeros.zeros.iter().map(|w| (z - w).norm().ln()).sum::<f64>() / n)
        .collect();
    let ep: Vec<f64> = points
        .par_iter()
        .map(|&z| equilibrium_log_potential(&geom, q.alpha, z))
        .collect();
    let errors: Vec<f64> = zp.iter().zip(&ep).map(|(a, b)| (a - b).abs()).collect();
    let sup = errors.iter().copied().fold(0.0, f64::max);
    let mean = if errors.is_empty() { 0.0 } else { errors.iter().sum::<f64>() / errors.len() as f64 };
    Ok(PotentialComparison {
        points: points.to_vec(),
        zero_potential: zp,
        equilibrium_potential: ep,
        errors,
        sup,
        mean,
    })
}

/// Polar grid on the annulus `r_in <= |z - center| <= r_out`.
pub fn annulus_grid(center: Complex64, r_in: f64, r_out: f64, nr: usize, nt: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(nr * nt);
    for i in 0..nr {
        let r = if nr == 1 { r_in } else { r_in + (r_out - r_in) * i as f64 / (nr - 1) as f64 };
        for j in 0..nt {
            out.push(center + Complex64::from_polar(r, 2.0 * PI * j as f64 / nt as f64));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_exterior_map;
    use crate::measures::PointChargeMeasure;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn solved() -> ExteriorMap {
        solve_exterior_map(0.5, 0.5, c(2.0, 0.0)).unwrap()
    }

    fn circle(rho: f64) -> ExteriorMap {
        ExteriorMap {
            rho,
            u: c(0.0, 0.0),
            v: c(0.0, 0.0),
            pole: c(0.3, 0.0),
        }
    }

    #[test]
    fn circle_map() {
        let m = circle(1.7);
        let curve = boundary_curve(&m, 360).unwrap();
        for p in &curve.points {
            assert!((p.norm() - 1.7).abs() < 1e-14);
        }
        for z in [c(0.4, 0.1), c(-1.0, 0.9), c(0.0, -1.3)] {
            // preimages z / rho and the removable pole A
            let b = schwarz_branches(&m, z);
            let err = b.s.iter().map(|s| (s - 1.7 * 1.7 / z).norm()).fold(f64::INFINITY, f64::min);
            assert!(err < 1e-13);
        }
        assert!(matches!(branch_points(&m), Err(Error::DegenerateMap(_))));
    }

    #[test]
    fn solved_boundary_area_and_symmetry() {
        let m = solved();
        let curve = boundary_curve(&m, 8192).unwrap();
        assert!((curve.shoelace_area() - PI).abs() < 1e-6);
        // the same configuration rotated: the curve is symmetric about the line through 0 and a
        let phi = 0.9;
        let mr = solve_exterior_map(0.5, 0.5, Complex64::from_polar(2.0, phi)).unwrap();
        let e = Complex64::from_polar(1.0, 2.0 * phi);
        for k in 0..64 {
            let th = 2.0 * PI * k as f64 / 64.0 + 0.01;
            let reflected = e * mr.boundary_point(th).conj();
            assert!((mr.boundary_point(2.0 * phi - th) - reflected).norm() < 1e-12);
        }
    }

    #[test]
    fn folded_map_is_rejected() {
        let m = ExteriorMap {
            rho: 1.0,
            u: c(0.0, 0.0),
            v: c(1.5, 0.0),
            pole: c(0.5, 0.0),
        };
        assert!(matches!(boundary_curve(&m, 720), Err(Error::SelfIntersection(_))));
    }

    #[test]
    fn boundary_identity() {
        let m = solved();
        for z in m.boundary_samples(720) {
            let b = schwarz_branches(&m, z);
            let err = b.s.iter().map(|s| (s - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(err < 1e-10, "{err}");
        }
    }

    #[test]
    fn jump_matches_symmetric_function_form() {
        // dS^2 = (disc / rho^2) (rho^2 / c - conj(v) / D)^2 with c and D
        // symmetric in the two preimages
        let m = solved();
        for z in [c(0.1, 0.2), c(-0.4, -0.3), c(0.5, 0.05), c(0.0, 0.7)] {
            let (b, cc) = m.preimage_coeffs(z);
            let am = m.pole.conj();
            let d = 1.0 - am * (-b / m.rho) + am * am * cc / m.rho;
            let g = m.rho * m.rho / cc - m.v.conj() / d;
            let expected = discriminant(&m, z) / (m.rho * m.rho) * g * g;
            let got = JumpField::Exterior(m).jump_squared(z);
            assert!((got - expected).norm() < 1e-10 * expected.norm(), "{got} {expected}");
        }
    }

    #[test]
    fn branch_points_of_solved_case() {
        let m = solved();
        let bps = branch_points(&m).unwrap();
        assert_eq!(bps.len(), 2);
        let curve = boundary_curve(&m, 720).unwrap();
        for b in &bps {
            assert!(discriminant(&m, b.z).norm() < 1e-12);
            assert!(m.derivative(b.zeta).norm() < 1e-12);
            assert!(curve.encloses(b.z) && m.contains(b.z));
        }
        // a conjugate pair for a real charge location
        assert!((bps[0].z - bps[1].z.conj()).norm() < 1e-14);
        assert!(bps[0].z.im.abs() > 0.5);
    }

    #[test]
    fn jump_is_real_on_the_real_axis() {
        let f = JumpField::Exterior(solved());
        for x in [-0.5, -0.2, 0.1, 0.4, 0.7] {
            let j = f.value(c(x, 0.0), None).jump;
            assert!(j.im.abs() < 1e-12 * j.norm());
        }
    }

    #[test]
    fn trajectories_of_solved_case() {
        let f = JumpField::Exterior(solved());
        let trajs = critical_trajectories(&f, 1e-3, 1e-4).unwrap();
        let joining: Vec<&Trajectory> = trajs
            .iter()
            .filter(|t| t.connecting && t.end != EndpointTag::CriticalPoint(t.start))
            .collect();
        assert_eq!(joining.len(), 2);
        for t in &trajs {
            assert!(t.max_residual(&f) < 1e-3);
        }
        // conjugation maps the traced set to itself, vertex by vertex
        let all = traced_trajectories(&f, 1e-3, 1e-4).unwrap();
        for t in &all {
            let d = all
                .iter()
                .filter(|o| o.points.len() == t.points.len())
                .map(|o| t.points.iter().zip(&o.points).map(|(p, q)| (p.conj() - q).norm()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min);
            assert!(d < 1e-8, "{d}");
        }
        // one joining curve reproduces the exterior potential of the support
        let geom = SupportGeometry::ExteriorMap(solved());
        let best = joining
            .iter()
            .map(|t| {
                let w = effective_zero_density(t, &f).unwrap();
                assert!((w.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-14);
                assert!(w.iter().all(|x| x.1 >= 0.0));
                annulus_grid(c(0.0, 0.0), 2.0, 3.0, 2, 10)
                    .into_iter()
                    .map(|z| (discrete_log_potential(&w, z) - equilibrium_log_potential(&geom, 0.5, z)).abs())
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best < 0.02, "{best}");
    }

    #[test]
    fn cavity_loop_density() {
        let p = PerturbedPotential::new(0.5, PointChargeMeasure::single(c(0.3, 0.0), 0.5).unwrap(), 60.0, 2.0).unwrap();
        let f = JumpField::for_potential(&p).unwrap();
        let crit = f.critical_points().unwrap();
        assert_eq!(crit.len(), 1);
        assert!(f.value(crit[0], None).jump.norm() < 1e-14);
        let trajs = critical_trajectories(&f, 1e-3, 1e-4).unwrap();
        let geom = classify_support(&p).unwrap();
        let errs: Vec<f64> = trajs
            .iter()
            .filter(|t| t.connecting)
            .map(|t| {
                let w = effective_zero_density(t, &f).unwrap();
                annulus_grid(c(0.0, 0.0), 1.5, 3.5, 2, 10)
                    .into_iter()
                    .map(|z| (discrete_log_potential(&w, z) - equilibrium_log_potential(&geom, 0.5, z)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(errs.iter().any(|&e| e < 0.02), "{errs:?}");
    }

    #[test]
    fn gaussian_zero_potential_matches_outside_disk() {
        let p = PerturbedPotential::gaussian(0.5, 20.0).unwrap();
        let zeros = ZeroSet {
            n: 10,
            zeros: vec![c(0.0, 0.0); 10],
            residual: 0.0,
        };
        let cmp = external_potential_compare(&zeros, &p, &annulus_grid(c(0.0, 0.0), 1.5, 3.0, 4, 16)).unwrap();
        assert!(cmp.sup < 1e-13, "{}", cmp.sup);
    }

    #[test]
    fn polyline_distance() {
        let pts = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0)];
        assert!((distance_to_polyline(c(0.5, 0.3), &pts) - 0.3).abs() < 1e-15);
        assert!((distance_to_polyline(c(2.0, 2.0), &pts) - 2f64.sqrt()).abs() < 1e-15);
    }
}

//! Gauss-Legendre nodes and weights in any [`Real`] precision.
//!
//! Nodes are located by Newton's method on the three-term recurrence, first
//! in `f64`, then polished in the target precision.

use crate::real::Real;

/// Nodes and weights of the `n`-point rule on [-1, 1], ascending.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    let m = n.div_ceil(2);
    let mut half = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let mut xt = T::from_f64(x);
        for _ in 0..3 {
            let (p, dp) = legendre(n, xt);
            xt -= p / dp;
        }
        let (_, dp) = legendre(n, xt);
        let two = T::from_f64(2.0);
        let w = two / ((T::one() - xt * xt) * dp * dp);
        half.push((xt, w));
    }
    // half holds the nonnegative nodes in descending order
    for &(x, w) in half.iter() {
        xs.push(-x);
        ws.push(w);
    }
    let mirror_from = if n % 2 == 1 { m - 1 } else { m };
    for i in (0..mirror_from).rev() {
        xs.push(half[i].0);
        ws.push(half[i].1);
    }
    if n % 2 == 1 {
        xs[m - 1] = T::zero();
    }
    (xs, ws)
}

fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 1..n {
        let kf = T::from_f64(k as f64);
        let p2 = ((kf + kf + T::one()) * x * p1 - kf * p0) / (kf + T::one());
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_f64(n as f64);
    let dp = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, dp)
}

/// Maps a rule on [-1, 1] to [a, b].
pub fn map_rule<T: Real>(xs: &[T], ws: &[T], a: T, b: T) -> (Vec<T>, Vec<T>) {
    let two = T::from_f64(2.0);
    let half = (b - a) / two;
    let mid = (a + b) / two;
    (
        xs.iter().map(|&x| mid + half * x).collect(),
        ws.iter().map(|&w| half * w).collect(),
    )
}

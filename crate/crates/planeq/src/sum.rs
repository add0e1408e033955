//! Pairwise summation with a fixed reduction tree, so results do not depend
//! on thread scheduling.

use std::ops::Add;

use num_traits::Zero;

const BLOCK: usize = 32;

/// Sums `f(0) + ... + f(n-1)` pairwise.
pub fn psum<T, F>(n: usize, f: F) -> T
where
    T: Copy + Zero + Add<Output = T>,
    F: Fn(usize) -> T + Copy,
{
    psum_range(0, n, f)
}

fn psum_range<T, F>(lo: usize, hi: usize, f: F) -> T
where
    T: Copy + Zero + Add<Output = T>,
    F: Fn(usize) -> T + Copy,
{
    if hi - lo <= BLOCK {
        let mut acc = T::zero();
        for i in lo..hi {
            acc = acc + f(i);
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    psum_range(lo, mid, f) + psum_range(mid, hi, f)
}

pub fn psum_slice<T>(xs: &[T]) -> T
where
    T: Copy + Zero + Add<Output = T>,
{
    psum(xs.len(), |i| xs[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_on_integers() {
        let s: f64 = psum(1000, |i| i as f64);
        assert_eq!(s, 499500.0);
        assert_eq!(psum::<f64, _>(0, |_| 1.0), 0.0);
    }

    #[test]
    fn pairwise_beats_naive_on_many_small_terms() {
        let n = 10_000_000;
        let x = 0.1f64;
        let naive: f64 = (0..n).map(|_| x).sum();
        let pw: f64 = psum(n, |_| x);
        let exact = 1_000_000.0;
        assert!((pw - exact).abs() < (naive - exact).abs());
        assert!((pw - exact).abs() < 1e-8);
    }
}

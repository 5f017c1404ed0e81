//! Reference oracles for the test suites.
//!
//! Everything in this crate is deliberately implemented through routes that
//! are independent of the production code paths it is used to check:
//! the normal CDF comes from a Maclaurin series / continued fraction (and,
//! as a second route, adaptive quadrature of the density), the quantile from
//! bisection, and least-squares solutions from a dense SVD. None of it is
//! meant to be fast; it is meant to be obviously correct.

use nalgebra::{DMatrix, DVector};

const FRAC_1_SQRT_PI: f64 = 0.5641895835477563;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// erf(x) by its Maclaurin series. Accurate to ~1e-15 for |x| <= 2.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x; // x^(2n+1) / n!
    let mut sum = x;
    for n in 1..200 {
        term *= -x2 / n as f64;
        let contrib = term / (2.0 * n as f64 + 1.0);
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    2.0 * FRAC_1_SQRT_PI * sum
}

/// erfc(x) for x >= 2 by the Laplace continued fraction, evaluated with
/// the modified Lentz algorithm.
fn erfc_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = tiny; // b0 = 0
    let mut c = f;
    let mut d = 0.0;
    for n in 1..=300 {
        // a1 = 1, a_n = (n-1)/2 for n >= 2; all b_n = x.
        let a = if n == 1 { 1.0 } else { (n - 1) as f64 / 2.0 };
        d = x + a * d;
        if d == 0.0 {
            d = tiny;
        }
        c = x + a / c;
        if c == 0.0 {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x * x).exp() * FRAC_1_SQRT_PI * f
}

/// Standard normal CDF via the erf series and tail continued fraction.
pub fn norm_cdf_series(z: f64) -> f64 {
    let x = z / SQRT_2;
    if x.abs() <= 2.0 {
        0.5 * (1.0 + erf_series(x))
    } else if x > 0.0 {
        1.0 - 0.5 * erfc_cf(x)
    } else {
        0.5 * erfc_cf(-x)
    }
}

fn normal_density(t: f64) -> f64 {
    const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;
    FRAC_1_SQRT_2PI * (-0.5 * t * t).exp()
}

fn simpson(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson(
    f: impl Fn(f64) -> f64 + Copy,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let left = simpson(f, a, m);
    let right = simpson(f, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_simpson(f, a, m, left, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, m, b, right, 0.5 * tol, depth - 1)
    }
}

/// Standard normal CDF by adaptive quadrature of the density. A second
/// independent route, used to cross-check the series oracle itself.
pub fn norm_cdf_quadrature(z: f64) -> f64 {
    let z = z.clamp(-12.0, 12.0);
    let whole = simpson(normal_density, 0.0, z);
    0.5 + adaptive_simpson(normal_density, 0.0, z, whole, 1e-15, 48)
}

/// Standard normal quantile by bisection on [`norm_cdf_series`].
pub fn probit_bisection(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "p must lie strictly inside (0, 1)");
    let (mut lo, mut hi) = (-12.0_f64, 12.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if norm_cdf_series(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Minimum-norm least-squares solution of `A w = b` through a dense SVD.
/// `a` is row-major with `rows * cols` entries.
pub fn lstsq_dense(rows: usize, cols: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), rows * cols);
    assert_eq!(b.len(), rows);
    let m = DMatrix::from_row_slice(rows, cols, a);
    let rhs = DVector::from_column_slice(b);
    let svd = m.svd(true, true);
    let sol = svd.solve(&rhs, 1e-12).expect("SVD solve failed");
    sol.iter().copied().collect()
}

/// Average ranks (1-based) with ties sharing the mean of their rank range,
/// assigned by explicit scan rather than any clever bookkeeping.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut ranks = vec![0.0; n];
    for i in 0..n {
        let mut below = 0usize;
        let mut equal = 0usize;
        for j in 0..n {
            if values[j] < values[i] {
                below += 1;
            } else if values[j] == values[i] {
                equal += 1;
            }
        }
        // ranks below+1 ..= below+equal averaged
        ranks[i] = below as f64 + (equal as f64 + 1.0) / 2.0;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_and_quadrature_agree() {
        let mut z = -8.0;
        while z <= 8.0 {
            let a = norm_cdf_series(z);
            let b = norm_cdf_quadrature(z);
            assert!((a - b).abs() < 1e-13, "z={z}: {a} vs {b}");
            z += 0.173;
        }
    }

    #[test]
    fn known_cdf_values() {
        assert!((norm_cdf_series(0.0) - 0.5).abs() < 1e-16);
        // Phi(1) and Phi(-1), 16 digits
        assert!((norm_cdf_series(1.0) - 0.841344746068543).abs() < 1e-14);
        assert!((norm_cdf_series(-1.0) - 0.158655253931457).abs() < 1e-14);
        // Phi(3) deep in the erfc branch
        assert!((norm_cdf_series(3.0) - 0.9986501019683699).abs() < 1e-14);
    }

    #[test]
    fn bisection_inverts_the_cdf() {
        for &p in &[1e-6, 0.01, 0.25, 0.5, 0.8, 0.975, 0.999999] {
            let z = probit_bisection(p);
            assert!((norm_cdf_series(z) - p).abs() < 1e-13, "p={p}");
        }
        assert!((probit_bisection(0.975) - 1.9599639845400545).abs() < 1e-12);
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        // 3x2 system with a known exact solution
        let a = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let b = [2.0, -1.0, 1.0];
        let w = lstsq_dense(3, 2, &a, &b);
        assert!((w[0] - 2.0).abs() < 1e-12);
        assert!((w[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn ranks_with_ties() {
        let r = average_ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
    }
}

//! The pair-averaging least-squares system behind ALine-D.
//!
//! The design matrix has one row per unordered model pair with entries of
//! 1/2 in the pair's two columns. That structure makes the normal equations
//! cheap and exact to assemble: `A^T A = ((n-2) I + J) / 4` entrywise, so
//! the solve builds the n-by-n Gram matrix directly from the pair list and
//! never materializes the (n(n-1)/2)-by-n matrix itself. The system has
//! full column rank for every n >= 3.

use crate::metrics::{pair_count, pairs};

use super::EstimateError;

/// `min ||A w - b||^2` with the two-entries-per-row pair structure.
/// Rows follow the canonical pair order (0,1), (0,2), ..., (1,2), ...
#[derive(Debug, Clone)]
pub struct PairSystem {
    n_models: usize,
    rhs: Vec<f64>,
}

impl PairSystem {
    pub fn new(n_models: usize, rhs: Vec<f64>) -> Result<Self, EstimateError> {
        if n_models < 3 {
            return Err(EstimateError::NotEnoughModels {
                needed: 3,
                got: n_models,
            });
        }
        if rhs.len() != pair_count(n_models) {
            return Err(EstimateError::BadRhsLength {
                expected: pair_count(n_models),
                got: rhs.len(),
            });
        }
        Ok(Self { n_models, rhs })
    }

    pub fn n_models(&self) -> usize {
        self.n_models
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }

    /// Row view: the two columns holding 1/2, plus the right-hand side.
    pub fn rows(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        pairs(self.n_models).zip(self.rhs.iter().copied())
    }

    /// Solves the normal equations `A^T A w = A^T b` by Cholesky.
    pub fn solve(&self) -> Result<Vec<f64>, EstimateError> {
        let n = self.n_models;
        let mut gram = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for ((i, j), b) in self.rows() {
            rhs[i] += 0.5 * b;
            rhs[j] += 0.5 * b;
            gram[i * n + i] += 0.25;
            gram[j * n + j] += 0.25;
            gram[i * n + j] += 0.25;
            gram[j * n + i] += 0.25;
        }
        cholesky_solve(&mut gram, &mut rhs, n)?;
        Ok(rhs)
    }
}

/// In-place Cholesky factorization and solve for a symmetric
/// positive-definite system. Fails on a non-positive pivot.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Result<(), EstimateError> {
    for k in 0..n {
        let mut pivot = a[k * n + k];
        for p in 0..k {
            pivot -= a[k * n + p] * a[k * n + p];
        }
        if !pivot.is_finite() || pivot <= 0.0 {
            return Err(EstimateError::RankDeficient);
        }
        let pivot = pivot.sqrt();
        a[k * n + k] = pivot;
        for i in k + 1..n {
            let mut v = a[i * n + k];
            for p in 0..k {
                v -= a[i * n + p] * a[k * n + p];
            }
            a[i * n + k] = v / pivot;
        }
    }
    // forward substitution L y = b
    for i in 0..n {
        let mut v = b[i];
        for p in 0..i {
            v -= a[i * n + p] * b[p];
        }
        b[i] = v / a[i * n + i];
    }
    // back substitution L^T w = y
    for i in (0..n).rev() {
        let mut v = b[i];
        for p in i + 1..n {
            v -= a[p * n + i] * b[p];
        }
        b[i] = v / a[i * n + i];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_oracle(system: &PairSystem) -> Vec<f64> {
        let n = system.n_models();
        let rows = system.n_rows();
        let mut a = vec![0.0; rows * n];
        let mut b = vec![0.0; rows];
        for (row, ((i, j), rhs)) in system.rows().enumerate() {
            a[row * n + i] = 0.5;
            a[row * n + j] = 0.5;
            b[row] = rhs;
        }
        aol_testkit::lstsq_dense(rows, n, &a, &b)
    }

    #[test]
    fn recovers_planted_solution_exactly() {
        // rhs consistent with w = (1, -2, 3): zero-residual system
        let w = [1.0, -2.0, 3.0];
        let rhs: Vec<f64> = pairs(3).map(|(i, j)| 0.5 * (w[i] + w[j])).collect();
        let sys = PairSystem::new(3, rhs).unwrap();
        let sol = sys.solve().unwrap();
        for (s, expect) in sol.iter().zip(w) {
            assert!((s - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_least_squares_on_random_systems() {
        for &n in &[3usize, 10, 50] {
            let mut state = 0xfeed_beef_u64 ^ (n as u64);
            let mut next = move || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
            };
            let rhs: Vec<f64> = (0..pair_count(n)).map(|_| next()).collect();
            let sys = PairSystem::new(n, rhs).unwrap();
            let mine = sys.solve().unwrap();
            let oracle = dense_oracle(&sys);
            for (a, b) in mine.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-9, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rejects_small_or_misshapen_systems() {
        assert!(matches!(
            PairSystem::new(2, vec![0.0]),
            Err(EstimateError::NotEnoughModels { .. })
        ));
        assert!(matches!(
            PairSystem::new(3, vec![0.0; 4]),
            Err(EstimateError::BadRhsLength { .. })
        ));
    }
}

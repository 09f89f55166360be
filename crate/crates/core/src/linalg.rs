//! Small dense linear algebra helpers.
//!
//! The regression baselines only ever solve tiny symmetric systems (normal
//! equations over at most a dozen coefficients), so a hand-rolled Cholesky
//! factorization with a ridge fallback is all we need — no external solver
//! dependency.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Solve `A x = b` for symmetric positive definite `A` via Cholesky.
///
/// Returns a numeric error when the matrix is not positive definite (a pivot
/// falls below `1e-12`).
pub fn cholesky_solve(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::validation(format!(
            "cholesky_solve: shape mismatch ({}x{} vs rhs {})",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }

    // Lower-triangular factor, row by row.
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 1e-12 {
                    return Err(Error::numeric(format!(
                        "cholesky_solve: matrix not positive definite (pivot {s:.3e} at {i})"
                    )));
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }

    // Forward substitution L y = b, then back substitution L^T x = y.
    let mut y = Array1::<f64>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    Ok(x)
}

/// Solve normal equations `(X^T X + ridge I) beta = X^T y`, retrying with a
/// progressively larger ridge if the Gram matrix is numerically singular.
pub fn ridge_normal_solve(
    xtx: &Array2<f64>,
    xty: &Array1<f64>,
    base_ridge: f64,
) -> Result<Array1<f64>> {
    let n = xtx.nrows();
    let mut ridge = base_ridge;
    for _ in 0..6 {
        let mut reg = xtx.clone();
        for i in 0..n {
            reg[[i, i]] += ridge;
        }
        match cholesky_solve(&reg, xty) {
            Ok(x) => return Ok(x),
            Err(Error::Numeric(_)) => {
                ridge = if ridge == 0.0 { 1e-10 } else { ridge * 100.0 };
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::numeric(
        "ridge_normal_solve: Gram matrix singular even after ridge escalation",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let b = array![2.0, 1.0];
        let x = cholesky_solve(&a, &b).unwrap();
        // Residual check against the original system.
        let r0 = 4.0 * x[0] + 2.0 * x[1] - 2.0;
        let r1 = 2.0 * x[0] + 3.0 * x[1] - 1.0;
        assert!(r0.abs() < 1e-12 && r1.abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        let b = array![1.0, 1.0];
        assert!(matches!(cholesky_solve(&a, &b), Err(Error::Numeric(_))));
    }

    #[test]
    fn ridge_recovers_from_singular_gram() {
        // Rank-one Gram matrix; plain Cholesky fails, ridge succeeds.
        let xtx = array![[1.0, 1.0], [1.0, 1.0]];
        let xty = array![1.0, 1.0];
        let x = ridge_normal_solve(&xtx, &xty, 0.0).unwrap();
        assert!(x.iter().all(|v| v.is_finite()));
    }
}

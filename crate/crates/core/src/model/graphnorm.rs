//! Symmetric degree normalization of a learned adjacency and its backward
//! pass.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

fn validate_square(a: ArrayView2<f64>, what: &str) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::validation(format!(
            "{what}: expected a square matrix, got {}×{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation(format!("{what}: non-finite entry")));
    }
    Ok(n)
}

/// Inverse square roots of the node degrees, with `0` for isolated nodes so
/// they simply receive no network signal instead of producing infinities.
fn inv_sqrt_degrees(a: ArrayView2<f64>) -> Array1<f64> {
    let d = a.sum_axis(ndarray::Axis(1));
    d.mapv(|x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 })
}

/// Normalize an adjacency by its degrees: `Ã_ij = A_ij / √(d_i d_j)`.
///
/// High-degree nodes would otherwise dominate every neighborhood average;
/// after normalization each row mixes its neighbors with weights that sum to
/// at most ~1.  Zero-degree nodes keep an all-zero row and column.
pub fn normalize_graph(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = validate_square(a, "normalize_graph")?;
    let s = inv_sqrt_degrees(a);
    let mut out = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            out[[i, j]] = s[i] * s[j] * a[[i, j]];
        }
    }
    Ok(out)
}

/// Backward pass of [`normalize_graph`]: gradient with respect to each
/// adjacency entry, treating entries as independent inputs (the caller sums
/// the `(i,j)`/`(j,i)` pair when mapping back to edge weights).
///
/// With `s_i = d_i^{−1/2}`, the chain has a direct term `G_pq s_p s_q` plus a
/// degree term: entry `A_pq` moves row `p`'s degree, which rescales the whole
/// row and column `p` of the output.  Isolated nodes use the same subgradient
/// convention as the forward pass (zero).
pub fn normalize_graph_backward(
    grad_tilde: ArrayView2<f64>,
    a: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let n = validate_square(a, "normalize_graph_backward")?;
    if grad_tilde.nrows() != n || grad_tilde.ncols() != n {
        return Err(Error::validation(format!(
            "normalize_graph_backward: gradient is {}×{} but adjacency is {n}×{n}",
            grad_tilde.nrows(),
            grad_tilde.ncols()
        )));
    }
    let d = a.sum_axis(ndarray::Axis(1));
    let s = d.mapv(|x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 });
    // ds_p/dd_p = −½ d_p^{−3/2}; zero at isolated nodes by convention.
    let s_prime = d.mapv(|x| if x > 0.0 { -0.5 * x.powf(-1.5) } else { 0.0 });

    // t_p = ∂L/∂s_p = Σ_j (G_pj + G_jp) A_pj s_j.
    let mut t = Array1::<f64>::zeros(n);
    for p in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += (grad_tilde[[p, j]] + grad_tilde[[j, p]]) * a[[p, j]] * s[j];
        }
        t[p] = acc;
    }

    let mut out = Array2::<f64>::zeros((n, n));
    for p in 0..n {
        let degree_term = s_prime[p] * t[p];
        for q in 0..n {
            out[[p, q]] = grad_tilde[[p, q]] * s[p] * s[q] + degree_term;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn unit_degree_edge_is_unchanged() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let norm = normalize_graph(a.view()).unwrap();
        assert_eq!(norm, a);
    }

    #[test]
    fn triangle_halves_every_edge() {
        let a = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]];
        let norm = normalize_graph(a.view()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 0.0 } else { 0.5 };
                assert!((norm[[i, j]] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn isolated_node_stays_zero() {
        let a = array![[0.0, 2.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let norm = normalize_graph(a.view()).unwrap();
        for k in 0..3 {
            assert_eq!(norm[[2, k]], 0.0);
            assert_eq!(norm[[k, 2]], 0.0);
        }
        // The connected pair normalizes by its own degrees only.
        assert!((norm[[0, 1]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scale_covariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let n = 5;
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                let w = rng.random::<f64>();
                a[[i, j]] = w;
                a[[j, i]] = w;
            }
        }
        let base = normalize_graph(a.view()).unwrap();
        let scaled = normalize_graph((&a * 3.7).view()).unwrap();
        for (x, y) in base.iter().zip(scaled.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let n = 4;
        // Entries well away from zero so probes never cross the degree kink.
        let mut a = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    a[[i, j]] = 0.5 + rng.random::<f64>() * 1.5;
                }
            }
        }
        // Symmetrize to match the forward contract.
        let a = (&a + &a.t()) * 0.5;
        let g = Array2::from_shape_fn((n, n), |_| rng.random::<f64>() * 2.0 - 1.0);
        let grad = normalize_graph_backward(g.view(), a.view()).unwrap();

        let loss = |m: &Array2<f64>| -> f64 {
            let norm = normalize_graph(m.view()).unwrap();
            g.iter().zip(norm.iter()).map(|(x, y)| x * y).sum()
        };
        let eps = 1e-6;
        for p in 0..n {
            for q in 0..n {
                if p == q {
                    continue;
                }
                let mut plus = a.clone();
                plus[[p, q]] += eps;
                let mut minus = a.clone();
                minus[[p, q]] -= eps;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
                assert!(
                    (fd - grad[[p, q]]).abs() < 1e-6 * fd.abs().max(1.0),
                    "entry ({p},{q}): fd {fd} vs analytic {}",
                    grad[[p, q]]
                );
            }
        }
    }

    #[test]
    fn backward_zero_graph_uses_zero_subgradient() {
        let a = Array2::<f64>::zeros((3, 3));
        let g = Array2::from_elem((3, 3), 1.0);
        let grad = normalize_graph_backward(g.view(), a.view()).unwrap();
        assert!(grad.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        let rect = Array2::<f64>::zeros((2, 3));
        assert!(normalize_graph(rect.view()).is_err());
        let a = Array2::<f64>::zeros((3, 3));
        let g = Array2::<f64>::zeros((2, 2));
        assert!(normalize_graph_backward(g.view(), a.view()).is_err());
    }
}

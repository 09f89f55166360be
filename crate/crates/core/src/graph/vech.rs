//! Half-vectorization: the bijection between symmetric zero-diagonal
//! matrices and edge vectors over the strict upper triangle.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Number of edges (strict upper-triangular entries) for `n` nodes.
pub fn edge_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Edge index for the pair `(i, j)` with `i < j`, row-major upper triangle:
/// (0,1), (0,2), …, (0,n−1), (1,2), …, (n−2,n−1).
pub fn vech_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Inverse of [`vech_index`]: the pair `(i, j)` for edge `k`.
pub fn vech_pair(k: usize, n: usize) -> (usize, usize) {
    debug_assert!(k < edge_count(n));
    // Walk the rows; each row i contributes n−1−i edges.
    let mut k = k;
    for i in 0..n {
        let row = n - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
    }
    unreachable!("edge index out of range");
}

/// Reconstruct the dense symmetric adjacency from an edge vector.
pub fn vech_to_adjacency(w: ArrayView1<f64>, n: usize) -> Result<Array2<f64>> {
    if w.len() != edge_count(n) {
        return Err(Error::validation(format!(
            "vech_to_adjacency: {} edges but n={} needs {}",
            w.len(),
            n,
            edge_count(n)
        )));
    }
    let mut a = Array2::<f64>::zeros((n, n));
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            a[[i, j]] = w[k];
            a[[j, i]] = w[k];
            k += 1;
        }
    }
    Ok(a)
}

/// Extract the edge vector from a symmetric zero-diagonal matrix.
///
/// Rejects matrices that are asymmetric or have a nonzero diagonal beyond
/// `1e-12` absolute tolerance.
pub fn adjacency_to_vech(a: ArrayView2<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::validation("adjacency_to_vech: matrix not square"));
    }
    for i in 0..n {
        if a[[i, i]].abs() > 1e-12 {
            return Err(Error::validation(format!(
                "adjacency_to_vech: nonzero diagonal at {i}"
            )));
        }
        for j in i + 1..n {
            if (a[[i, j]] - a[[j, i]]).abs() > 1e-12 {
                return Err(Error::validation(format!(
                    "adjacency_to_vech: asymmetric at ({i},{j})"
                )));
            }
        }
    }
    let mut w = Array1::<f64>::zeros(edge_count(n));
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            w[k] = a[[i, j]];
            k += 1;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn index_and_pair_are_inverse() {
        for n in 2..8 {
            for k in 0..edge_count(n) {
                let (i, j) = vech_pair(k, n);
                assert!(i < j && j < n);
                assert_eq!(vech_index(i, j, n), k);
            }
        }
    }

    #[test]
    fn ordering_is_row_major() {
        // n=4: (0,1),(0,2),(0,3),(1,2),(1,3),(2,3)
        let pairs: Vec<_> = (0..edge_count(4)).map(|k| vech_pair(k, 4)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn round_trip_matrix() {
        let w = array![1.0, 2.0, 3.0];
        let a = vech_to_adjacency(w.view(), 3).unwrap();
        assert_eq!(a, array![[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]]);
        let back = adjacency_to_vech(a.view()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn rejects_asymmetric_and_nonzero_diagonal() {
        let bad = array![[0.0, 1.0], [2.0, 0.0]];
        assert!(adjacency_to_vech(bad.view()).is_err());
        let bad_diag = array![[0.5, 1.0], [1.0, 0.0]];
        assert!(adjacency_to_vech(bad_diag.view()).is_err());
    }
}

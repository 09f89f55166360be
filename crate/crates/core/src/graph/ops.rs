//! Linear operators and functionals on edge vectors: the degree operator and
//! its adjoint, pairwise feature distances, and the graph-learning objective.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

use super::vech::{edge_count, vech_pair};

/// Precomputed edge → node-pair table for one problem size.
///
/// The solver and the unrolled layer apply the degree operator thousands of
/// times per solve; resolving the vech bijection once up front keeps those
/// loops branch-free.
#[derive(Debug, Clone)]
pub struct EdgeIndex {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl EdgeIndex {
    pub fn new(n: usize) -> Self {
        let pairs = (0..edge_count(n)).map(|k| vech_pair(k, n)).collect();
        EdgeIndex { n, pairs }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Degree operator: node degrees `d_i = Σ_{k incident to i} w_k`.
    pub fn degrees(&self, w: ArrayView1<f64>) -> Array1<f64> {
        debug_assert_eq!(w.len(), self.pairs.len());
        let mut d = Array1::<f64>::zeros(self.n);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            d[i] += w[k];
            d[j] += w[k];
        }
        d
    }

    /// Adjoint of the degree operator: `(Dᵀv)_k = v_i + v_j` for edge `k=(i,j)`.
    pub fn adjoint(&self, v: ArrayView1<f64>) -> Array1<f64> {
        debug_assert_eq!(v.len(), self.n);
        let mut out = Array1::<f64>::zeros(self.pairs.len());
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            out[k] = v[i] + v[j];
        }
        out
    }
}

/// Node degrees from an edge vector (one-shot convenience wrapper).
pub fn degree_apply(w: ArrayView1<f64>, n: usize) -> Array1<f64> {
    EdgeIndex::new(n).degrees(w)
}

/// Adjoint of the degree operator (one-shot convenience wrapper).
pub fn degree_adjoint(v: ArrayView1<f64>) -> Array1<f64> {
    EdgeIndex::new(v.len()).adjoint(v)
}

/// Squared pairwise row distances, rescaled to unit mean.
///
/// Raw squared distances over long stacked feature rows grow with the
/// dimension, which would make the regularization weights scale-dependent;
/// normalizing to mean 1 makes one (α, β) choice portable across feature
/// dimensions.  The applied scale is recorded so callers can undo it.
#[derive(Debug, Clone)]
pub struct DistanceVector {
    /// Normalized squared distances, one per edge.
    pub h: Array1<f64>,
    /// Mean of the raw distances that was divided out (1 when the mean is 0).
    pub scale: f64,
}

/// Pairwise squared Euclidean distances between matrix rows, as an edge
/// vector, normalized to unit mean.
pub fn pairwise_distances(v: ArrayView2<f64>) -> Result<DistanceVector> {
    let n = v.nrows();
    if n < 2 {
        return Err(Error::validation(format!(
            "pairwise_distances: need at least 2 rows, got {n}"
        )));
    }
    for i in 0..n {
        if v.row(i).iter().any(|x| !x.is_finite()) {
            return Err(Error::validation(format!(
                "pairwise_distances: non-finite value in row {i}"
            )));
        }
    }
    let mut h = Array1::<f64>::zeros(edge_count(n));
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            let mut s = 0.0;
            for (&a, &b) in v.row(i).iter().zip(v.row(j).iter()) {
                let d = a - b;
                s += d * d;
            }
            h[k] = s;
            k += 1;
        }
    }
    let mean = h.mean().unwrap_or(0.0);
    if mean > 0.0 {
        h.mapv_inplace(|x| x / mean);
        Ok(DistanceVector { h, scale: mean })
    } else {
        // All rows identical: leave the zero vector untouched.
        Ok(DistanceVector { h, scale: 1.0 })
    }
}

/// Graph-learning objective in edge space:
///
/// `2⟨w, h⟩ − α Σ_i log d_i + 2β ‖w‖²`.
///
/// This equals the matrix form `tr(Vᵀ(D−A)V) − α 1ᵀ log(A1) + β‖A‖²_F`
/// because each edge appears twice in the dense sums: `Σ_ij A_ij H_ij = 2⟨w,h⟩`
/// and `‖A‖²_F = 2‖w‖²`.  Returns `+∞` when `α > 0` and some node is isolated
/// (the log barrier).
pub fn objective(w: ArrayView1<f64>, h: ArrayView1<f64>, alpha: f64, beta: f64, n: usize) -> f64 {
    let trace_term = 2.0 * w.dot(&h);
    let frob_term = 2.0 * beta * w.dot(&w);
    if alpha == 0.0 {
        return trace_term + frob_term;
    }
    let d = EdgeIndex::new(n).degrees(w);
    let mut barrier = 0.0;
    for &di in d.iter() {
        if di <= 0.0 {
            return f64::INFINITY;
        }
        barrier += di.ln();
    }
    trace_term - alpha * barrier + frob_term
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::vech::{vech_index, vech_to_adjacency};
    use ndarray::{array, Array2};

    #[test]
    fn triangle_degrees() {
        let w = array![1.0, 1.0, 1.0];
        let d = degree_apply(w.view(), 3);
        assert_eq!(d, array![2.0, 2.0, 2.0]);
    }

    #[test]
    fn single_edge_degrees() {
        let w = array![3.0];
        assert_eq!(degree_apply(w.view(), 2), array![3.0, 3.0]);
    }

    #[test]
    fn adjoint_matches_dense_transpose() {
        // Build the dense node×edge incidence-count matrix S (S[i][k] = 1 when
        // edge k touches node i) and check ⟨Sw, v⟩ = ⟨w, Sᵀv⟩ numerically.
        let n = 5;
        let m = edge_count(n);
        let mut s = Array2::<f64>::zeros((n, m));
        for k in 0..m {
            let (i, j) = vech_pair(k, n);
            s[[i, k]] = 1.0;
            s[[j, k]] = 1.0;
        }
        let w = Array1::from_shape_fn(m, |k| (k as f64 * 0.7 + 0.3).sin());
        let v = Array1::from_shape_fn(n, |i| (i as f64 * 1.3 - 0.5).cos());
        let lhs = degree_apply(w.view(), n).dot(&v);
        let rhs = w.dot(&degree_adjoint(v.view()));
        assert!((lhs - rhs).abs() < 1e-12);
        // And the operators agree with the dense matrix.
        let dense_d = s.dot(&w);
        let dense_adj = s.t().dot(&v);
        for i in 0..n {
            assert!((dense_d[i] - degree_apply(w.view(), n)[i]).abs() < 1e-12);
        }
        for k in 0..m {
            assert!((dense_adj[k] - degree_adjoint(v.view())[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn distances_scalar_rows() {
        // Rows [0],[1],[3] → raw h = [1, 9, 4] for edges (0,1),(0,2),(1,2).
        let v = array![[0.0], [1.0], [3.0]];
        let dv = pairwise_distances(v.view()).unwrap();
        let raw: Vec<f64> = dv.h.iter().map(|x| x * dv.scale).collect();
        assert!((raw[0] - 1.0).abs() < 1e-12);
        assert!((raw[1] - 9.0).abs() < 1e-12);
        assert!((raw[2] - 4.0).abs() < 1e-12);
        // Normalized mean is exactly 1.
        assert!((dv.h.mean().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distances_identical_rows() {
        let v = array![[2.0, 2.0], [2.0, 2.0], [2.0, 2.0]];
        let dv = pairwise_distances(v.view()).unwrap();
        assert!(dv.h.iter().all(|&x| x == 0.0));
        assert_eq!(dv.scale, 1.0);
    }

    #[test]
    fn distances_permute_with_assets() {
        let v = array![[0.0, 1.0], [2.0, 0.5], [1.0, 3.0], [4.0, 4.0]];
        let dv = pairwise_distances(v.view()).unwrap();
        // Permutation (0 1 2 3) → (2 0 3 1): new edge (i',j') distance must
        // equal the old distance between the pre-images.
        let perm = [2usize, 0, 3, 1];
        let vp = array![
            [1.0, 3.0],
            [0.0, 1.0],
            [4.0, 4.0],
            [2.0, 0.5]
        ];
        let dvp = pairwise_distances(vp.view()).unwrap();
        for i in 0..4 {
            for j in i + 1..4 {
                let (a, b) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
                let old = dv.h[vech_index(a, b, 4)] * dv.scale;
                let new = dvp.h[vech_index(i, j, 4)] * dvp.scale;
                assert!((old - new).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn distances_reject_non_finite() {
        let v = array![[0.0], [f64::NAN]];
        let err = pairwise_distances(v.view()).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn objective_matches_dense_form() {
        // Triangle, w = 1, h = 0, α = 0, β = 0.5 → 2β‖w‖² = 3.
        let w = array![1.0, 1.0, 1.0];
        let h = array![0.0, 0.0, 0.0];
        let obj = objective(w.view(), h.view(), 0.0, 0.5, 3);
        assert!((obj - 3.0).abs() < 1e-12);
        // Dense recomputation: β‖A‖²_F.
        let a = vech_to_adjacency(w.view(), 3).unwrap();
        let frob: f64 = a.iter().map(|x| x * x).sum();
        assert!((0.5 * frob - 3.0).abs() < 1e-12);
    }

    #[test]
    fn objective_trace_identity() {
        // The edge-space trace term doubles the vech inner product:
        // Σ_ij A_ij H_ij = 2⟨w,h⟩.
        let w = array![0.3, 1.2, 0.7];
        let h = array![2.0, 0.5, 1.5];
        let a = vech_to_adjacency(w.view(), 3).unwrap();
        let hm = vech_to_adjacency(h.view(), 3).unwrap();
        let dense: f64 = a.iter().zip(hm.iter()).map(|(x, y)| x * y).sum();
        assert!((dense - 2.0 * w.dot(&h)).abs() < 1e-12);
    }

    #[test]
    fn objective_isolated_node_is_infinite() {
        // Node 2 isolated (only edge (0,1) has weight).
        let w = array![1.0, 0.0, 0.0];
        let h = array![0.0, 0.0, 0.0];
        assert!(objective(w.view(), h.view(), 1.0, 0.5, 3).is_infinite());
    }

    #[test]
    fn objective_doubling_h_doubles_trace_term_only() {
        let w = array![0.5, 0.25, 1.0];
        let h = array![1.0, 2.0, 3.0];
        let h2 = array![2.0, 4.0, 6.0];
        let base = objective(w.view(), h.view(), 0.0, 0.0, 3);
        let doubled = objective(w.view(), h2.view(), 0.0, 0.0, 3);
        assert!((doubled - 2.0 * base).abs() < 1e-12);
        // With β on, the Frobenius part is unchanged.
        let with_beta = objective(w.view(), h.view(), 0.0, 1.0, 3);
        let with_beta2 = objective(w.view(), h2.view(), 0.0, 1.0, 3);
        assert!(((with_beta2 - with_beta) - base).abs() < 1e-12);
    }
}

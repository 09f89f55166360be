//! Forward pass, tape, and hand-written reverse-mode backward pass for the
//! unrolled solver iteration.
//!
//! Each layer executes one forward-backward-forward step of the primal-dual
//! solver (see `graph::solver` for the iteration and the gradient convention)
//! with its own `(α_l, β_l, γ_l)`.  The forward pass records every
//! intermediate on a tape; the backward pass replays the tape in reverse,
//! accumulating exact derivatives with respect to the raw parameters, the
//! distance vector, and — through the squared-distance and unit-mean
//! normalization chain — the input feature rows.
//!
//! Subgradient convention: both projections `max(0, ·)` (the per-layer primal
//! prox and the final output clamp) use derivative 0 at the kink.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::{pairwise_distances, vech_to_adjacency, EdgeIndex, GraphEstimate};

use super::params::{UnrollGrad, UnrollParams};

/// Residual threshold used to fill the informational `converged` flag on the
/// returned estimate; matches the iterative solver's default tolerance.
const CONVERGENCE_REFERENCE_TOL: f64 = 1e-6;

/// Every intermediate of one executed layer, in the order they are computed.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LayerRecord {
    /// Primal iterate entering the layer.
    pub w_in: Array1<f64>,
    /// Dual iterate entering the layer.
    pub v_in: Array1<f64>,
    /// Primal gradient step `r1 = w − γ(4βw + 2h + Dᵀv)`.
    pub r1: Array1<f64>,
    /// Dual gradient step `r2 = v + γDw`.
    pub r2: Array1<f64>,
    /// Primal projection `p1 = max(0, r1)`.
    pub p1: Array1<f64>,
    /// Dual prox `p2 = (r2 − √(r2² + 4αγ))/2`.
    pub p2: Array1<f64>,
}

/// Recorded intermediates of one forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct UnrollTape {
    pub(crate) idx: EdgeIndex,
    /// The distance vector the layers actually saw (unit mean when built from
    /// feature rows).
    pub(crate) h: Array1<f64>,
    /// Mean divided out of the raw squared distances (1 when the tape was
    /// built directly from a distance vector).
    pub(crate) scale: f64,
    /// Input feature rows, present only when the forward pass computed the
    /// distances itself; required for gradients with respect to the input.
    pub(crate) v_input: Option<Array2<f64>>,
    /// Effective per-layer parameters (already exponentiated).
    pub(crate) alphas: Array1<f64>,
    pub(crate) betas: Array1<f64>,
    pub(crate) gammas: Array1<f64>,
    pub(crate) records: Vec<LayerRecord>,
    /// Final primal iterate before the output clamp `max(0, ·)`.
    pub(crate) w_final: Array1<f64>,
}

impl UnrollTape {
    pub fn n_nodes(&self) -> usize {
        self.idx.n_nodes()
    }

    pub fn n_edges(&self) -> usize {
        self.idx.n_edges()
    }

    pub fn n_layers(&self) -> usize {
        self.records.len()
    }

    /// Re-execute the recorded computation from scratch and return the
    /// projected output edge vector.  Shares the layer-step code with the
    /// original forward pass, so the result is bitwise identical — used to
    /// audit that the tape faithfully captures the computation.
    pub fn replay(&self) -> Array1<f64> {
        let mut w = Array1::<f64>::zeros(self.idx.n_edges());
        let mut v = Array1::<f64>::zeros(self.idx.n_nodes());
        for l in 0..self.records.len() {
            let out = layer_step(
                &self.idx,
                self.h.view(),
                &w,
                &v,
                self.alphas[l],
                self.betas[l],
                self.gammas[l],
            );
            w = out.w_next;
            v = out.v_next;
        }
        w.mapv_inplace(|x| x.max(0.0));
        w
    }
}

struct StepOut {
    r1: Array1<f64>,
    r2: Array1<f64>,
    p1: Array1<f64>,
    p2: Array1<f64>,
    w_next: Array1<f64>,
    v_next: Array1<f64>,
}

/// One forward-backward-forward step at fixed `(α, β, γ)`.
fn layer_step(
    idx: &EdgeIndex,
    h: ArrayView1<f64>,
    w: &Array1<f64>,
    v: &Array1<f64>,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> StepOut {
    let m = idx.n_edges();
    let adj_v = idx.adjoint(v.view());
    let mut r1 = Array1::<f64>::zeros(m);
    for k in 0..m {
        let grad = 4.0 * beta * w[k] + 2.0 * h[k] + adj_v[k];
        r1[k] = w[k] - gamma * grad;
    }
    let r2 = v + &(gamma * &idx.degrees(w.view()));
    let p1 = r1.mapv(|x| x.max(0.0));
    // αγ > 0 by the exponential reparameterization, so the square-root
    // argument stays strictly positive and the prox is smooth everywhere.
    debug_assert!(4.0 * alpha * gamma > 0.0);
    let p2 = r2.mapv(|x| 0.5 * (x - (x * x + 4.0 * alpha * gamma).sqrt()));
    let adj_p2 = idx.adjoint(p2.view());
    let mut q1 = Array1::<f64>::zeros(m);
    for k in 0..m {
        let grad = 4.0 * beta * p1[k] + 2.0 * h[k] + adj_p2[k];
        q1[k] = p1[k] - gamma * grad;
    }
    let q2 = &p2 + &(gamma * &idx.degrees(p1.view()));
    let w_next = w - &r1 + &q1;
    let v_next = v - &r2 + &q2;
    StepOut { r1, r2, p1, p2, w_next, v_next }
}

/// Run the unrolled layer stack on a feature matrix: squared pairwise row
/// distances (normalized to unit mean) feed `L + 1` solver iterations from
/// zero initialization, and the final primal iterate is clamped at zero.
pub fn forward(
    v_rows: ArrayView2<f64>,
    params: &UnrollParams,
) -> Result<(GraphEstimate, UnrollTape)> {
    let dv = pairwise_distances(v_rows)?;
    let (est, mut tape) = forward_from_h(dv.h.view(), v_rows.nrows(), params)?;
    tape.scale = dv.scale;
    tape.v_input = Some(v_rows.to_owned());
    Ok((est, tape))
}

/// Run the layer stack directly on a distance edge vector (assumed already
/// normalized the way the caller wants the layers to see it).
pub fn forward_from_h(
    h: ArrayView1<f64>,
    n: usize,
    params: &UnrollParams,
) -> Result<(GraphEstimate, UnrollTape)> {
    if n < 2 {
        return Err(Error::validation(format!(
            "unroll forward: need at least 2 nodes, got {n}"
        )));
    }
    let idx = EdgeIndex::new(n);
    if h.len() != idx.n_edges() {
        return Err(Error::validation(format!(
            "unroll forward: h has {} edges but n={n} needs {}",
            h.len(),
            idx.n_edges()
        )));
    }
    if h.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::validation("unroll forward: h must be finite and ≥ 0"));
    }

    let layers = params.n_layers();
    let mut alphas = Array1::<f64>::zeros(layers);
    let mut betas = Array1::<f64>::zeros(layers);
    let mut gammas = Array1::<f64>::zeros(layers);
    for l in 0..layers {
        alphas[l] = params.alpha(l);
        betas[l] = params.beta(l);
        gammas[l] = params.gamma(l);
        for (name, val) in [("alpha", alphas[l]), ("beta", betas[l]), ("gamma", gammas[l])] {
            if !(val > 0.0 && val.is_finite()) {
                return Err(Error::numeric(format!(
                    "unroll forward: effective {name} at layer {l} left the representable range ({val})"
                )));
            }
        }
    }

    let h_owned = h.to_owned();
    let mut w = Array1::<f64>::zeros(idx.n_edges());
    let mut v = Array1::<f64>::zeros(n);
    let mut records = Vec::with_capacity(layers);
    let mut residual = f64::INFINITY;
    for l in 0..layers {
        let out = layer_step(&idx, h_owned.view(), &w, &v, alphas[l], betas[l], gammas[l]);
        if out.w_next.iter().any(|x| !x.is_finite()) || out.v_next.iter().any(|x| !x.is_finite()) {
            return Err(Error::numeric(format!(
                "unroll forward: non-finite iterate at layer {l}"
            )));
        }
        residual = out
            .w_next
            .iter()
            .zip(w.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        records.push(LayerRecord {
            w_in: w,
            v_in: v,
            r1: out.r1,
            r2: out.r2,
            p1: out.p1,
            p2: out.p2,
        });
        w = out.w_next;
        v = out.v_next;
    }

    let w_final = w;
    let w_out = w_final.mapv(|x| x.max(0.0));
    let a = vech_to_adjacency(w_out.view(), n)?;
    let est = GraphEstimate {
        a,
        w: w_out,
        iterations: layers,
        residual,
        converged: residual < CONVERGENCE_REFERENCE_TOL,
    };
    let tape = UnrollTape {
        idx,
        h: h_owned,
        scale: 1.0,
        v_input: None,
        alphas,
        betas,
        gammas,
        records,
        w_final,
    };
    Ok((est, tape))
}

/// Reverse-mode sweep from a gradient on the projected output edge vector.
///
/// Returns gradients for the raw (log-space) parameters and for the distance
/// vector the layers saw.
pub fn backward_edges(
    tape: &UnrollTape,
    grad_w_out: ArrayView1<f64>,
) -> Result<(UnrollGrad, Array1<f64>)> {
    let m = tape.idx.n_edges();
    let n = tape.idx.n_nodes();
    if grad_w_out.len() != m {
        return Err(Error::validation(format!(
            "unroll backward: gradient has {} edges, tape has {m}",
            grad_w_out.len()
        )));
    }
    if grad_w_out.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("unroll backward: non-finite upstream gradient"));
    }
    let layers = tape.records.len();

    // Output clamp `max(0, w_final)`: gradient passes only through entries
    // that were strictly positive before clamping.
    let mut gw = Array1::<f64>::zeros(m);
    for k in 0..m {
        if tape.w_final[k] > 0.0 {
            gw[k] = grad_w_out[k];
        }
    }
    let mut gv = Array1::<f64>::zeros(n);
    let mut g_alpha = Array1::<f64>::zeros(layers);
    let mut g_beta = Array1::<f64>::zeros(layers);
    let mut g_gamma = Array1::<f64>::zeros(layers);
    let mut gh = Array1::<f64>::zeros(m);

    for l in (0..layers).rev() {
        let rec = &tape.records[l];
        let alpha = tape.alphas[l];
        let beta = tape.betas[l];
        let gamma = tape.gammas[l];
        let shrink = 1.0 - 4.0 * beta * gamma;

        // Entering this layer, `gw`/`gv` hold gradients on (w_{l+1}, v_{l+1}).
        // The update was w_{l+1} = w_l − r1 + q1, v_{l+1} = v_l − r2 + q2,
        // so q-gradients equal the incoming ones, the identity terms seed the
        // input gradients, and the −r terms seed the r-gradients negated.
        let gq1 = &gw;
        let gq2 = &gv;
        let mut gw_l = gw.clone();
        let mut gv_l = gv.clone();
        let mut gr1 = gw.mapv(|x| -x);
        let mut gr2 = gv.mapv(|x| -x);

        // q2 = p2 + γ·D p1
        let mut gp2 = gq2.clone();
        let mut gp1 = tape.idx.adjoint(gq2.view());
        gp1.mapv_inplace(|x| gamma * x);
        g_gamma[l] += gq2.dot(&tape.idx.degrees(rec.p1.view()));

        // q1 = p1 − γ(4β·p1 + 2h + Dᵀ p2)
        let adj_p2 = tape.idx.adjoint(rec.p2.view());
        for k in 0..m {
            gp1[k] += shrink * gq1[k];
            gh[k] -= 2.0 * gamma * gq1[k];
            g_gamma[l] -= gq1[k] * (4.0 * beta * rec.p1[k] + 2.0 * tape.h[k] + adj_p2[k]);
        }
        g_beta[l] -= 4.0 * gamma * gq1.dot(&rec.p1);
        let deg_gq1 = tape.idx.degrees(gq1.view());
        for i in 0..n {
            gp2[i] -= gamma * deg_gq1[i];
        }

        // p2 = (r2 − √(r2² + 4αγ))/2
        for i in 0..n {
            let root = (rec.r2[i] * rec.r2[i] + 4.0 * alpha * gamma).sqrt();
            gr2[i] += 0.5 * (1.0 - rec.r2[i] / root) * gp2[i];
            let scaled = gp2[i] / root;
            g_alpha[l] -= gamma * scaled;
            g_gamma[l] -= alpha * scaled;
        }

        // p1 = max(0, r1); derivative 0 at the kink
        for k in 0..m {
            if rec.r1[k] > 0.0 {
                gr1[k] += gp1[k];
            }
        }

        // r2 = v_l + γ·D w_l
        for i in 0..n {
            gv_l[i] += gr2[i];
        }
        let adj_gr2 = tape.idx.adjoint(gr2.view());
        for k in 0..m {
            gw_l[k] += gamma * adj_gr2[k];
        }
        g_gamma[l] += gr2.dot(&tape.idx.degrees(rec.w_in.view()));

        // r1 = w_l − γ(4β·w_l + 2h + Dᵀ v_l)
        let adj_v_in = tape.idx.adjoint(rec.v_in.view());
        for k in 0..m {
            gw_l[k] += shrink * gr1[k];
            gh[k] -= 2.0 * gamma * gr1[k];
            g_gamma[l] -= gr1[k] * (4.0 * beta * rec.w_in[k] + 2.0 * tape.h[k] + adj_v_in[k]);
        }
        g_beta[l] -= 4.0 * gamma * gr1.dot(&rec.w_in);
        let deg_gr1 = tape.idx.degrees(gr1.view());
        for i in 0..n {
            gv_l[i] -= gamma * deg_gr1[i];
        }

        gw = gw_l;
        gv = gv_l;
    }

    // Chain through the exponential reparameterization: ∂/∂raw = eff · ∂/∂eff.
    let grads = UnrollGrad {
        raw_alpha: &g_alpha * &tape.alphas,
        raw_beta: &g_beta * &tape.betas,
        raw_gamma: &g_gamma * &tape.gammas,
    };
    Ok((grads, gh))
}

/// Reverse-mode sweep from a gradient on the output adjacency matrix,
/// stopping at the distance vector (no input-feature gradient).
pub fn backward_adjacency(
    tape: &UnrollTape,
    grad_a: ArrayView2<f64>,
) -> Result<(UnrollGrad, Array1<f64>)> {
    let n = tape.idx.n_nodes();
    if grad_a.nrows() != n || grad_a.ncols() != n {
        return Err(Error::validation(format!(
            "unroll backward: adjacency gradient is {}×{}, tape has {n} nodes",
            grad_a.nrows(),
            grad_a.ncols()
        )));
    }
    // Each edge weight appears at (i,j) and (j,i) of the adjacency.
    let mut gw = Array1::<f64>::zeros(tape.idx.n_edges());
    for (k, &(i, j)) in tape.idx.pairs().iter().enumerate() {
        gw[k] = grad_a[[i, j]] + grad_a[[j, i]];
    }
    backward_edges(tape, gw.view())
}

/// Full reverse-mode sweep from a gradient on the output adjacency matrix,
/// chaining through the unit-mean normalization and the squared pairwise
/// distances back to the input feature rows.
pub fn backward(
    tape: &UnrollTape,
    grad_a: ArrayView2<f64>,
) -> Result<(UnrollGrad, Array2<f64>)> {
    let v_rows = tape.v_input.as_ref().ok_or_else(|| {
        Error::validation(
            "unroll backward: tape was built from a distance vector, no input features recorded",
        )
    })?;
    let (grads, gh) = backward_adjacency(tape, grad_a)?;

    // h = h_raw / μ with μ the mean of h_raw: the backward pass removes the
    // mean-coupling and divides by the recorded scale.  When the forward pass
    // skipped normalization (all distances zero), scale is 1 and h is the
    // zero vector, so this reduces to the identity.
    let m = tape.idx.n_edges() as f64;
    let coupling = gh.dot(&tape.h) / m;
    let n = tape.idx.n_nodes();
    let f = v_rows.ncols();
    let mut gv_rows = Array2::<f64>::zeros((n, f));
    for (k, &(i, j)) in tape.idx.pairs().iter().enumerate() {
        let gh_raw = (gh[k] - coupling) / tape.scale;
        let c = 2.0 * gh_raw;
        for col in 0..f {
            let d = v_rows[[i, col]] - v_rows[[j, col]];
            gv_rows[[i, col]] += c * d;
            gv_rows[[j, col]] -= c * d;
        }
    }
    Ok((grads, gv_rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{pds_solve, SolverConfig};
    use ndarray::{array, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_rows(rng: &mut ChaCha12Rng, n: usize, f: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, f), |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn random_unit_mean_h(rng: &mut ChaCha12Rng, m: usize) -> Array1<f64> {
        let mut h = Array1::from_shape_fn(m, |_| rng.random::<f64>() * 2.0 + 0.1);
        let mean = h.mean().unwrap();
        h.mapv_inplace(|x| x / mean);
        h
    }

    #[test]
    fn vanishing_step_size_keeps_graph_near_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let v = random_rows(&mut rng, 5, 3);
        let params = UnrollParams::with_constant(4, 1.0, 1.0, 1e-12).unwrap();
        let (est, _) = forward(v.view(), &params).unwrap();
        let max = est.a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        assert!(max < 1e-9, "graph should stay near zero, max entry {max}");
    }

    #[test]
    fn constant_params_long_unroll_matches_solver() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let n = 6;
        let h = random_unit_mean_h(&mut rng, n * (n - 1) / 2);
        let (alpha, beta, gamma) = (1.2, 0.8, 0.1);
        let params = UnrollParams::with_constant(2000, alpha, beta, gamma).unwrap();
        let (est, _) = forward_from_h(h.view(), n, &params).unwrap();
        let cfg = SolverConfig { alpha, beta, gamma, tol: 1e-9, max_iters: 100_000 };
        let reference = pds_solve(h.view(), n, &cfg).unwrap();
        assert!(reference.converged);
        for k in 0..h.len() {
            assert!(
                (est.w[k] - reference.w[k]).abs() < 1e-4,
                "edge {k}: unrolled {} vs solver {}",
                est.w[k],
                reference.w[k]
            );
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let v = random_rows(&mut rng, 4, 5);
        let params = UnrollParams::new(6).unwrap();
        let (a, _) = forward(v.view(), &params).unwrap();
        let (b, _) = forward(v.view(), &params).unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.a, b.a);
    }

    #[test]
    fn tape_replay_reproduces_output_bitwise() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let v = random_rows(&mut rng, 5, 4);
        let params = UnrollParams::from_raw(
            Array1::from_shape_fn(5, |_| rng.random::<f64>() * 0.4 - 0.2),
            Array1::from_shape_fn(5, |_| rng.random::<f64>() * 0.4 - 0.2),
            Array1::from_shape_fn(5, |_| -2.3 + rng.random::<f64>() * 0.4),
        )
        .unwrap();
        let (est, tape) = forward(v.view(), &params).unwrap();
        assert_eq!(tape.replay(), est.w);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let v = random_rows(&mut rng, 4, 3);
        let params = UnrollParams::new(3).unwrap();
        let (_, tape) = forward(v.view(), &params).unwrap();
        let (grads, gv) = backward(&tape, Array2::zeros((4, 4)).view()).unwrap();
        assert!(grads.flat().iter().all(|&x| x == 0.0));
        assert!(gv.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn finite_difference_matches_edge_level_gradients() {
        // Probe loss ⟨c, w_out⟩ at the distance level: exercises the layer
        // chain and the raw-parameter gradients without the distance chain.
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let n = 4;
        let m = n * (n - 1) / 2;
        let h = random_unit_mean_h(&mut rng, m);
        let c = Array1::from_shape_fn(m, |_| rng.random::<f64>() * 2.0 - 1.0);
        let params = UnrollParams::from_raw(
            Array1::from_shape_fn(4, |_| rng.random::<f64>() * 0.5 - 0.25),
            Array1::from_shape_fn(4, |_| rng.random::<f64>() * 0.5 - 0.25),
            Array1::from_shape_fn(4, |_| -2.3 + rng.random::<f64>() * 0.5),
        )
        .unwrap();
        let (_, tape) = forward_from_h(h.view(), n, &params).unwrap();
        let (grads, gh) = backward_edges(&tape, c.view()).unwrap();
        let analytic = grads.flat();

        let eps = 1e-6;
        let loss = |p: &UnrollParams, hv: ArrayView1<f64>| -> f64 {
            let (est, _) = forward_from_h(hv, n, p).unwrap();
            c.dot(&est.w)
        };
        let flat = params.flat();
        for idx in 0..flat.len() {
            let mut plus = flat.clone();
            plus[idx] += eps;
            let mut minus = flat.clone();
            minus[idx] -= eps;
            let fd = (loss(&UnrollParams::from_flat(plus.view()).unwrap(), h.view())
                - loss(&UnrollParams::from_flat(minus.view()).unwrap(), h.view()))
                / (2.0 * eps);
            let err = (fd - analytic[idx]).abs() / fd.abs().max(analytic[idx].abs()).max(1e-6);
            assert!(err < 1e-4, "raw param {idx}: fd {fd} vs analytic {}", analytic[idx]);
        }
        for k in 0..m {
            let mut plus = h.clone();
            plus[k] += eps;
            let mut minus = h.clone();
            minus[k] -= eps;
            let fd = (loss(&params, plus.view()) - loss(&params, minus.view())) / (2.0 * eps);
            let err = (fd - gh[k]).abs() / fd.abs().max(gh[k].abs()).max(1e-6);
            assert!(err < 1e-4, "h[{k}]: fd {fd} vs analytic {}", gh[k]);
        }
    }

    #[test]
    fn grad_rows_antisymmetric_for_a_row_pair() {
        // With two nodes there is a single edge, and the squared distance
        // depends on the rows only through their difference, so the row
        // gradients are exact negatives.
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let v = random_rows(&mut rng, 2, 3);
        let params = UnrollParams::new(3).unwrap();
        let (_, tape) = forward(v.view(), &params).unwrap();
        let grad_a = Array2::from_shape_fn((2, 2), |_| rng.random::<f64>());
        let (_, gv) = backward(&tape, grad_a.view()).unwrap();
        for col in 0..3 {
            assert!((gv[[0, col]] + gv[[1, col]]).abs() < 1e-12);
        }

        // Identical rows: zero distances, zero gradient on both rows.
        let same = array![[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]];
        let (_, tape) = forward(same.view(), &params).unwrap();
        let (_, gv) = backward(&tape, grad_a.view()).unwrap();
        assert!(gv.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn grad_rows_sum_to_zero() {
        // Distances are translation invariant, so the input gradient must be
        // orthogonal to shifting every row by the same vector.
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let v = random_rows(&mut rng, 5, 4);
        let params = UnrollParams::new(4).unwrap();
        let (_, tape) = forward(v.view(), &params).unwrap();
        let grad_a = Array2::from_shape_fn((5, 5), |_| rng.random::<f64>() * 2.0 - 1.0);
        let (_, gv) = backward(&tape, grad_a.view()).unwrap();
        for col in 0..4 {
            let s: f64 = (0..5).map(|i| gv[[i, col]]).sum();
            assert!(s.abs() < 1e-10, "column {col} gradient sum {s}");
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let params = UnrollParams::new(2).unwrap();
        let h = array![1.0, 1.0];
        assert!(forward_from_h(h.view(), 3, &params).is_err()); // 3 nodes need 3 edges
        assert!(forward_from_h(array![-1.0].view(), 2, &params).is_err());

        let (_, tape) = forward_from_h(array![1.0].view(), 2, &params).unwrap();
        assert!(backward_edges(&tape, array![1.0, 2.0].view()).is_err());
        assert!(backward_adjacency(&tape, Array2::zeros((3, 3)).view()).is_err());
        // Distance-level tape has no input rows to differentiate against.
        assert!(backward(&tape, Array2::zeros((2, 2)).view()).is_err());
    }

    #[test]
    fn overflowing_parameters_are_numeric_errors() {
        let params = UnrollParams::from_raw(
            array![0.0, 800.0], // exp overflows to +∞
            array![0.0, 0.0],
            array![-2.3, -2.3],
        )
        .unwrap();
        let err = forward_from_h(array![1.0].view(), 2, &params).unwrap_err();
        assert_eq!(err.category(), "numeric");
        assert!(err.to_string().contains("layer 1"));
    }
}

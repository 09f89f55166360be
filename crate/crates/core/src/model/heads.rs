//! Network-momentum heads: a linear readout over graph-averaged features,
//! either raw (trend estimate, traded as its sign) or squashed through tanh
//! (direct position in (−1, 1)).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::GraphEstimate;
use crate::unroll::{self, UnrollGrad, UnrollParams, UnrollTape};

use super::graphnorm::{normalize_graph, normalize_graph_backward};

/// Linear head: weights over the feature columns plus a bias.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub theta: Array1<f64>,
    pub b: f64,
}

impl HeadParams {
    pub fn zeros(n_features: usize) -> Self {
        HeadParams { theta: Array1::zeros(n_features), b: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.is_empty() {
            return Err(Error::validation("head: theta must be non-empty"));
        }
        if self.theta.iter().any(|x| !x.is_finite()) || !self.b.is_finite() {
            return Err(Error::validation("head: parameters must be finite"));
        }
        Ok(())
    }

    /// Length of the flattened vector, `theta.len() + 1`.
    pub fn n_flat(&self) -> usize {
        self.theta.len() + 1
    }

    /// Flatten as `[theta | b]`.
    pub fn flat(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.n_flat());
        out.slice_mut(ndarray::s![..self.theta.len()]).assign(&self.theta);
        out[self.theta.len()] = self.b;
        out
    }

    pub fn from_flat(flat: ArrayView1<f64>) -> Result<Self> {
        if flat.len() < 2 {
            return Err(Error::validation("head: flat vector needs at least 2 entries"));
        }
        let head = HeadParams {
            theta: flat.slice(ndarray::s![..flat.len() - 1]).to_owned(),
            b: flat[flat.len() - 1],
        };
        head.validate()?;
        Ok(head)
    }

    pub fn assign_flat(&mut self, flat: ArrayView1<f64>) -> Result<()> {
        if flat.len() != self.n_flat() {
            return Err(Error::validation(format!(
                "head: flat vector has {} entries, expected {}",
                flat.len(),
                self.n_flat()
            )));
        }
        let parsed = Self::from_flat(flat)?;
        *self = parsed;
        Ok(())
    }
}

/// Which output the model produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ModelKind {
    /// Raw trend estimate `y`; positions downstream are `sgn(y)`.
    #[serde(rename = "l2gmom")]
    Trend,
    /// Direct position `x = tanh(z) ∈ (−1, 1)`.
    #[serde(rename = "l2gmom_sr")]
    Position,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Trend => "l2gmom",
            ModelKind::Position => "l2gmom_sr",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "l2gmom" => Ok(ModelKind::Trend),
            "l2gmom_sr" => Ok(ModelKind::Position),
            other => Err(Error::validation(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Which feature matrix the linear head reads.
///
/// The default applies the head to the 8 per-asset momentum features; the
/// lookback variant applies it to the full stacked lookback rows the graph
/// layer consumes (so `theta` grows to that width).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadInput {
    #[default]
    Momentum,
    Lookback,
}

impl HeadInput {
    pub fn as_str(&self) -> &'static str {
        match self {
            HeadInput::Momentum => "momentum",
            HeadInput::Lookback => "lookback",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "momentum" => Ok(HeadInput::Momentum),
            "lookback" => Ok(HeadInput::Lookback),
            other => Err(Error::validation(format!("unknown head input '{other}'"))),
        }
    }
}

/// Inference output: the model values and the normalized graph they
/// propagated over.
#[derive(Debug, Clone)]
pub struct ModelOutput {
    /// Trend estimates (`Trend`) or positions in (−1, 1) (`Position`).
    pub values: Array1<f64>,
    /// The normalized adjacency used by the head.
    pub graph: Array2<f64>,
}

/// Full forward record kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ModelPass {
    pub est: GraphEstimate,
    pub tape: UnrollTape,
    /// Normalized adjacency.
    pub a_tilde: Array2<f64>,
    /// The matrix the head was applied to (owned copy).
    pub head_mat: Array2<f64>,
    /// `head_mat · θ`, the per-asset feature combination before graph mixing.
    pub m: Array1<f64>,
    /// Pre-activation `Ã m + b`.
    pub z: Array1<f64>,
    /// Final values (`z` for `Trend`, `tanh(z)` for `Position`).
    pub values: Array1<f64>,
    pub kind: ModelKind,
}

/// Apply the linear head over a normalized graph: `z = Ã (mat θ) + b`.
fn apply_head(
    a_tilde: ArrayView2<f64>,
    mat: ArrayView2<f64>,
    head: &HeadParams,
) -> (Array1<f64>, Array1<f64>) {
    let m = mat.dot(&head.theta);
    let z = a_tilde.dot(&m) + head.b;
    (m, z)
}

/// Normalize the learned graph and apply the head — shared tail of the two
/// forward entry points.
fn finish_pass(
    est: GraphEstimate,
    tape: UnrollTape,
    mat: ArrayView2<f64>,
    head: &HeadParams,
    kind: ModelKind,
) -> Result<ModelPass> {
    let a_tilde = normalize_graph(est.a.view())?;
    let (m, z) = apply_head(a_tilde.view(), mat, head);
    let values = match kind {
        ModelKind::Trend => z.clone(),
        ModelKind::Position => z.mapv(f64::tanh),
    };
    Ok(ModelPass { est, tape, a_tilde, head_mat: mat.to_owned(), m, z, values, kind })
}

fn check_head_against(mat: ArrayView2<f64>, head: &HeadParams, label: &str) -> Result<()> {
    head.validate()?;
    if head.theta.len() != mat.ncols() {
        return Err(Error::validation(format!(
            "model: head has {} weights but the {label} input has {} columns",
            head.theta.len(),
            mat.ncols()
        )));
    }
    if mat.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation(format!("model: {label} head input must be finite")));
    }
    Ok(())
}

/// Run the full differentiable pipeline for one date: graph learning on the
/// lookback rows, degree normalization, then the linear head over the chosen
/// feature matrix.
pub fn model_pass(
    v_rows: ArrayView2<f64>,
    u: ArrayView2<f64>,
    params: &UnrollParams,
    head: &HeadParams,
    kind: ModelKind,
    head_input: HeadInput,
) -> Result<ModelPass> {
    if u.nrows() != v_rows.nrows() {
        return Err(Error::validation(format!(
            "model: lookback rows ({}) and momentum rows ({}) disagree",
            v_rows.nrows(),
            u.nrows()
        )));
    }
    let mat = match head_input {
        HeadInput::Momentum => u,
        HeadInput::Lookback => v_rows,
    };
    check_head_against(mat, head, head_input.as_str())?;
    let (est, tape) = unroll::forward(v_rows, params)?;
    finish_pass(est, tape, mat, head, kind)
}

/// Same pipeline starting from precomputed pairwise distances — the training
/// hot path, where distances are computed once per date and reused across
/// epochs. `head_mat` is whatever matrix the head reads for this date.
pub fn model_pass_from_h(
    h: ArrayView1<f64>,
    n: usize,
    head_mat: ArrayView2<f64>,
    params: &UnrollParams,
    head: &HeadParams,
    kind: ModelKind,
) -> Result<ModelPass> {
    if head_mat.nrows() != n {
        return Err(Error::validation(format!(
            "model: head input has {} rows but the graph has {n} nodes",
            head_mat.nrows()
        )));
    }
    check_head_against(head_mat, head, "per-date")?;
    let (est, tape) = unroll::forward_from_h(h, n, params)?;
    finish_pass(est, tape, head_mat, head, kind)
}

/// Gradients of one [`model_pass`] with respect to every trainable
/// parameter.
#[derive(Debug, Clone)]
pub struct ModelGrads {
    pub theta: Array1<f64>,
    pub b: f64,
    pub unroll: UnrollGrad,
}

/// Reverse-mode sweep for [`model_pass`] from a gradient on the output
/// values.
pub fn model_backward(pass: &ModelPass, grad_values: ArrayView1<f64>) -> Result<ModelGrads> {
    let n = pass.values.len();
    if grad_values.len() != n {
        return Err(Error::validation(format!(
            "model backward: gradient has {} entries, output has {n}",
            grad_values.len()
        )));
    }
    // Through the activation: identity for the trend head, 1 − x² for tanh.
    let gz: Array1<f64> = match pass.kind {
        ModelKind::Trend => grad_values.to_owned(),
        ModelKind::Position => {
            Array1::from_shape_fn(n, |i| grad_values[i] * (1.0 - pass.values[i] * pass.values[i]))
        }
    };
    let gb = gz.sum();
    // z = Ã m + b with symmetric Ã, so the m-gradient is Ã gz again.
    let gm = pass.a_tilde.dot(&gz);
    let g_theta = pass.head_mat.t().dot(&gm);
    // ∂z_i/∂Ã_ij = m_j → outer product.
    let mut g_tilde = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            g_tilde[[i, j]] = gz[i] * pass.m[j];
        }
    }
    let g_a = normalize_graph_backward(g_tilde.view(), pass.est.a.view())?;
    let (unroll_grads, _) = unroll::backward_adjacency(&pass.tape, g_a.view())?;
    Ok(ModelGrads { theta: g_theta, b: gb, unroll: unroll_grads })
}

/// Trend-output model: `y = Ã U θ + b` with the head over the momentum
/// features.
pub fn l2gmom_forward(
    v_rows: ArrayView2<f64>,
    u: ArrayView2<f64>,
    params: &UnrollParams,
    head: &HeadParams,
) -> Result<ModelOutput> {
    let pass = model_pass(v_rows, u, params, head, ModelKind::Trend, HeadInput::Momentum)?;
    Ok(ModelOutput { values: pass.values, graph: pass.a_tilde })
}

/// Position-output model: `x = tanh(Ã U θ + b)`, elementwise in (−1, 1).
pub fn l2gmom_sr_forward(
    v_rows: ArrayView2<f64>,
    u: ArrayView2<f64>,
    params: &UnrollParams,
    head: &HeadParams,
) -> Result<ModelOutput> {
    let pass = model_pass(v_rows, u, params, head, ModelKind::Position, HeadInput::Momentum)?;
    Ok(ModelOutput { values: pass.values, graph: pass.a_tilde })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_rows(rng: &mut ChaCha12Rng, n: usize, f: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, f), |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn head_on_single_edge_swaps_features() {
        // Ã = [[0,1],[1,0]], U = [[1],[2]], θ = [1], b = 0 → y = [2, 1]:
        // each asset reads its neighbor's feature.
        let a_tilde = array![[0.0, 1.0], [1.0, 0.0]];
        let u = array![[1.0], [2.0]];
        let head = HeadParams { theta: array![1.0], b: 0.0 };
        let (_, z) = apply_head(a_tilde.view(), u.view(), &head);
        assert_eq!(z, array![2.0, 1.0]);
    }

    #[test]
    fn zero_graph_leaves_only_bias() {
        let a_tilde = Array2::<f64>::zeros((3, 3));
        let u = array![[5.0, 1.0], [-2.0, 3.0], [0.5, 0.5]];
        let head = HeadParams { theta: array![1.0, -1.0], b: 0.25 };
        let (_, z) = apply_head(a_tilde.view(), u.view(), &head);
        assert!(z.iter().all(|&y| (y - 0.25).abs() < 1e-15));
    }

    #[test]
    fn bias_only_head_through_full_pass() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let v = random_rows(&mut rng, 4, 6);
        let u = random_rows(&mut rng, 4, 3);
        let params = UnrollParams::new(3).unwrap();
        let head = HeadParams { theta: Array1::zeros(3), b: 0.5 };
        let out = l2gmom_forward(v.view(), u.view(), &params, &head).unwrap();
        assert!(out.values.iter().all(|&y| (y - 0.5).abs() < 1e-12));
    }

    #[test]
    fn tanh_head_saturates_and_stays_inside_unit_interval() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let v = random_rows(&mut rng, 3, 4);
        let u = Array2::from_elem((3, 2), 10.0);
        let params = UnrollParams::new(2).unwrap();
        let big = HeadParams { theta: array![50.0, 50.0], b: 50.0 };
        let out = l2gmom_sr_forward(v.view(), u.view(), &params, &big).unwrap();
        for &x in out.values.iter() {
            assert!((x - 1.0).abs() < 1e-12);
            assert!(x < 1.0 || (x - 1.0).abs() < 1e-12);
        }
        // Zero pre-activation maps to exactly zero.
        let zero = HeadParams { theta: array![0.0, 0.0], b: 0.0 };
        let out = l2gmom_sr_forward(v.view(), u.view(), &params, &zero).unwrap();
        assert!(out.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tanh_head_is_odd_in_the_head_parameters() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let v = random_rows(&mut rng, 4, 5);
        let u = random_rows(&mut rng, 4, 3);
        let params = UnrollParams::new(2).unwrap();
        let head = HeadParams { theta: array![0.7, -0.3, 0.2], b: 0.1 };
        let flipped = HeadParams { theta: head.theta.mapv(|x| -x), b: -head.b };
        let a = l2gmom_sr_forward(v.view(), u.view(), &params, &head).unwrap();
        let b = l2gmom_sr_forward(v.view(), u.view(), &params, &flipped).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert!((x + y).abs() < 1e-12);
        }
    }

    #[test]
    fn outputs_are_permutation_equivariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let n = 5;
        let v = random_rows(&mut rng, n, 6);
        let u = random_rows(&mut rng, n, 3);
        let params = UnrollParams::new(4).unwrap();
        let head = HeadParams { theta: array![0.5, -0.25, 1.0], b: 0.05 };
        let base = l2gmom_forward(v.view(), u.view(), &params, &head).unwrap();

        let perm = [3usize, 0, 4, 1, 2];
        let vp = Array2::from_shape_fn((n, 6), |(i, j)| v[[perm[i], j]]);
        let up = Array2::from_shape_fn((n, 3), |(i, j)| u[[perm[i], j]]);
        let permuted = l2gmom_forward(vp.view(), up.view(), &params, &head).unwrap();
        for i in 0..n {
            assert!(
                (permuted.values[i] - base.values[perm[i]]).abs() < 1e-10,
                "asset {i}: {} vs {}",
                permuted.values[i],
                base.values[perm[i]]
            );
        }
    }

    #[test]
    fn lookback_head_input_uses_wide_theta() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let v = random_rows(&mut rng, 3, 8);
        let u = random_rows(&mut rng, 3, 2);
        let params = UnrollParams::new(2).unwrap();
        let narrow = HeadParams::zeros(2);
        let wide = HeadParams::zeros(8);
        assert!(model_pass(v.view(), u.view(), &params, &wide, ModelKind::Position, HeadInput::Lookback).is_ok());
        assert!(model_pass(v.view(), u.view(), &params, &narrow, ModelKind::Position, HeadInput::Lookback).is_err());
        assert!(model_pass(v.view(), u.view(), &params, &wide, ModelKind::Position, HeadInput::Momentum).is_err());
    }

    #[test]
    fn full_chain_gradients_match_finite_differences() {
        // End-to-end check through head → normalization → unrolled layers,
        // for both output kinds, probing every trainable coordinate.
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let n = 4;
        let v = random_rows(&mut rng, n, 5);
        let u = random_rows(&mut rng, n, 3);
        let params = UnrollParams::from_raw(
            Array1::from_shape_fn(4, |_| rng.random::<f64>() * 0.4 - 0.2),
            Array1::from_shape_fn(4, |_| rng.random::<f64>() * 0.4 - 0.2),
            Array1::from_shape_fn(4, |_| -2.3 + rng.random::<f64>() * 0.4),
        )
        .unwrap();
        let head = HeadParams { theta: array![0.6, -0.4, 0.3], b: 0.1 };
        let c = Array1::from_shape_fn(n, |_| rng.random::<f64>() * 2.0 - 1.0);

        for kind in [ModelKind::Trend, ModelKind::Position] {
            let pass =
                model_pass(v.view(), u.view(), &params, &head, kind, HeadInput::Momentum).unwrap();
            let grads = model_backward(&pass, c.view()).unwrap();

            let loss = |p: &UnrollParams, h: &HeadParams| -> f64 {
                let pass =
                    model_pass(v.view(), u.view(), p, h, kind, HeadInput::Momentum).unwrap();
                c.dot(&pass.values)
            };
            let eps = 1e-6;
            // Head coordinates.
            for idx in 0..3 {
                let mut hp = head.clone();
                hp.theta[idx] += eps;
                let mut hm = head.clone();
                hm.theta[idx] -= eps;
                let fd = (loss(&params, &hp) - loss(&params, &hm)) / (2.0 * eps);
                let err = (fd - grads.theta[idx]).abs() / fd.abs().max(grads.theta[idx].abs()).max(1e-6);
                assert!(err < 1e-4, "{kind:?} theta[{idx}]: fd {fd} vs {}", grads.theta[idx]);
            }
            let mut hp = head.clone();
            hp.b += eps;
            let mut hm = head.clone();
            hm.b -= eps;
            let fd = (loss(&params, &hp) - loss(&params, &hm)) / (2.0 * eps);
            let err = (fd - grads.b).abs() / fd.abs().max(grads.b.abs()).max(1e-6);
            assert!(err < 1e-4, "{kind:?} bias: fd {fd} vs {}", grads.b);
            // Unrolled-layer coordinates.
            let flat = params.flat();
            let analytic = grads.unroll.flat();
            for idx in 0..flat.len() {
                let mut fp = flat.clone();
                fp[idx] += eps;
                let mut fm = flat.clone();
                fm[idx] -= eps;
                let fd = (loss(&UnrollParams::from_flat(fp.view()).unwrap(), &head)
                    - loss(&UnrollParams::from_flat(fm.view()).unwrap(), &head))
                    / (2.0 * eps);
                let err = (fd - analytic[idx]).abs() / fd.abs().max(analytic[idx].abs()).max(1e-6);
                assert!(err < 1e-4, "{kind:?} raw[{idx}]: fd {fd} vs {}", analytic[idx]);
            }
        }
    }

    #[test]
    fn pass_from_precomputed_distances_matches_direct_pass() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let v = random_rows(&mut rng, 5, 6);
        let u = random_rows(&mut rng, 5, 3);
        let params = UnrollParams::new(3).unwrap();
        let head = HeadParams { theta: array![0.4, -0.2, 0.9], b: -0.05 };
        let direct =
            model_pass(v.view(), u.view(), &params, &head, ModelKind::Position, HeadInput::Momentum)
                .unwrap();
        let dist = crate::graph::pairwise_distances(v.view()).unwrap();
        let from_h =
            model_pass_from_h(dist.h.view(), 5, u.view(), &params, &head, ModelKind::Position)
                .unwrap();
        assert_eq!(direct.values, from_h.values);
        assert_eq!(direct.a_tilde, from_h.a_tilde);
        let g = Array1::from_shape_fn(5, |_| rng.random::<f64>() - 0.5);
        let gd = model_backward(&direct, g.view()).unwrap();
        let gh = model_backward(&from_h, g.view()).unwrap();
        assert_eq!(gd.theta, gh.theta);
        assert_eq!(gd.b, gh.b);
        assert_eq!(gd.unroll.flat(), gh.unroll.flat());
    }

    #[test]
    fn kind_and_input_names_round_trip() {
        assert_eq!(ModelKind::parse("l2gmom").unwrap(), ModelKind::Trend);
        assert_eq!(ModelKind::parse("l2gmom_sr").unwrap(), ModelKind::Position);
        assert!(ModelKind::parse("other").is_err());
        assert_eq!(HeadInput::parse("momentum").unwrap(), HeadInput::Momentum);
        assert_eq!(HeadInput::parse("lookback").unwrap(), HeadInput::Lookback);
        assert!(HeadInput::parse("x").is_err());
        assert_eq!(ModelKind::Trend.as_str(), "l2gmom");
        assert_eq!(HeadInput::Lookback.as_str(), "lookback");
    }
}

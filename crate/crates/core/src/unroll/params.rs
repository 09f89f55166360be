//! Learnable per-layer hyperparameters for the unrolled solver.

use ndarray::{concatenate, Array1, ArrayView1, Axis};

use crate::error::{Error, Result};

/// Default unrolling depth `L`; the layer stack executes `L + 1` iterations.
pub const DEFAULT_UNROLL_DEPTH: usize = 20;

/// Per-layer `(α, β, γ)` triples stored as unconstrained reals.
///
/// Effective values are `exp(raw)`, so every layer's parameters are strictly
/// positive by construction and the optimizer moves freely in raw space.
/// Depth `L` means `L + 1` executed iterations (the solver loop runs for
/// layers `0..=L`), so each raw vector has length `L + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnrollParams {
    raw_alpha: Array1<f64>,
    raw_beta: Array1<f64>,
    raw_gamma: Array1<f64>,
}

impl UnrollParams {
    /// Fresh parameters at the solver's stable defaults: every layer starts
    /// at `α = 1, β = 1, γ = 0.1`.
    pub fn new(depth: usize) -> Result<Self> {
        Self::with_constant(depth, 1.0, 1.0, 0.1)
    }

    /// All layers share one `(α, β, γ)` triple (stored as its logs).
    pub fn with_constant(depth: usize, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if depth == 0 {
            return Err(Error::validation("unroll: depth must be ≥ 1"));
        }
        for (name, val) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !(val > 0.0 && val.is_finite()) {
                return Err(Error::validation(format!(
                    "unroll: constant {name} must be positive and finite, got {val}"
                )));
            }
        }
        let layers = depth + 1;
        Self::from_raw(
            Array1::from_elem(layers, alpha.ln()),
            Array1::from_elem(layers, beta.ln()),
            Array1::from_elem(layers, gamma.ln()),
        )
    }

    /// Build from explicit raw (log-space) vectors, one entry per layer.
    pub fn from_raw(
        raw_alpha: Array1<f64>,
        raw_beta: Array1<f64>,
        raw_gamma: Array1<f64>,
    ) -> Result<Self> {
        let layers = raw_alpha.len();
        if raw_beta.len() != layers || raw_gamma.len() != layers {
            return Err(Error::validation(format!(
                "unroll: raw vectors disagree on layer count ({}, {}, {})",
                layers,
                raw_beta.len(),
                raw_gamma.len()
            )));
        }
        if layers < 2 {
            return Err(Error::validation(
                "unroll: need at least 2 layers (depth ≥ 1)",
            ));
        }
        for v in [&raw_alpha, &raw_beta, &raw_gamma] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation("unroll: raw parameters must be finite"));
            }
        }
        Ok(UnrollParams { raw_alpha, raw_beta, raw_gamma })
    }

    /// Unrolling depth `L` (one less than the number of executed iterations).
    pub fn depth(&self) -> usize {
        self.raw_alpha.len() - 1
    }

    /// Number of executed iterations, `L + 1`.
    pub fn n_layers(&self) -> usize {
        self.raw_alpha.len()
    }

    pub fn alpha(&self, layer: usize) -> f64 {
        self.raw_alpha[layer].exp()
    }

    pub fn beta(&self, layer: usize) -> f64 {
        self.raw_beta[layer].exp()
    }

    pub fn gamma(&self, layer: usize) -> f64 {
        self.raw_gamma[layer].exp()
    }

    pub fn raw_alpha(&self) -> ArrayView1<'_, f64> {
        self.raw_alpha.view()
    }

    pub fn raw_beta(&self) -> ArrayView1<'_, f64> {
        self.raw_beta.view()
    }

    pub fn raw_gamma(&self) -> ArrayView1<'_, f64> {
        self.raw_gamma.view()
    }

    /// Length of the flattened raw vector, `3(L + 1)`.
    pub fn n_flat(&self) -> usize {
        3 * self.n_layers()
    }

    /// Flatten as `[raw_alpha | raw_beta | raw_gamma]` for a generic optimizer.
    pub fn flat(&self) -> Array1<f64> {
        concatenate(
            Axis(0),
            &[self.raw_alpha.view(), self.raw_beta.view(), self.raw_gamma.view()],
        )
        .expect("1-d concatenate cannot fail")
    }

    /// Rebuild from a [`flat`](Self::flat)-ordered vector.
    pub fn from_flat(flat: ArrayView1<f64>) -> Result<Self> {
        if flat.len() % 3 != 0 {
            return Err(Error::validation(format!(
                "unroll: flat parameter vector length {} is not divisible by 3",
                flat.len()
            )));
        }
        let layers = flat.len() / 3;
        Self::from_raw(
            flat.slice(ndarray::s![0..layers]).to_owned(),
            flat.slice(ndarray::s![layers..2 * layers]).to_owned(),
            flat.slice(ndarray::s![2 * layers..]).to_owned(),
        )
    }

    /// Overwrite the raw values in place from a flat vector of matching size.
    pub fn assign_flat(&mut self, flat: ArrayView1<f64>) -> Result<()> {
        if flat.len() != self.n_flat() {
            return Err(Error::validation(format!(
                "unroll: flat vector has {} entries, expected {}",
                flat.len(),
                self.n_flat()
            )));
        }
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("unroll: raw parameters must be finite"));
        }
        let layers = self.n_layers();
        for l in 0..layers {
            self.raw_alpha[l] = flat[l];
            self.raw_beta[l] = flat[layers + l];
            self.raw_gamma[l] = flat[2 * layers + l];
        }
        Ok(())
    }
}

/// Gradients with respect to the raw (log-space) parameters, mirroring the
/// [`UnrollParams`] layout.
#[derive(Debug, Clone)]
pub struct UnrollGrad {
    pub raw_alpha: Array1<f64>,
    pub raw_beta: Array1<f64>,
    pub raw_gamma: Array1<f64>,
}

impl UnrollGrad {
    pub fn zeros(n_layers: usize) -> Self {
        UnrollGrad {
            raw_alpha: Array1::zeros(n_layers),
            raw_beta: Array1::zeros(n_layers),
            raw_gamma: Array1::zeros(n_layers),
        }
    }

    /// Flatten in the same `[α | β | γ]` order as [`UnrollParams::flat`].
    pub fn flat(&self) -> Array1<f64> {
        concatenate(
            Axis(0),
            &[self.raw_alpha.view(), self.raw_beta.view(), self.raw_gamma.view()],
        )
        .expect("1-d concatenate cannot fail")
    }
}

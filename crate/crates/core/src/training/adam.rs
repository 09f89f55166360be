//! Adam optimizer with bias-corrected moment estimates, over a flat
//! parameter vector.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};

/// Optimizer settings (step size plus moment decays).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::validation("adam: learning rate must be finite and ≥ 0"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::validation(format!("adam: {name} must be in [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::validation("adam: epsilon must be positive and finite"));
        }
        Ok(())
    }
}

/// Optimizer state: first/second moment estimates and the step counter.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Array1<f64>,
    v: Array1<f64>,
    t: u32,
}

impl Adam {
    pub fn new(n_params: usize, cfg: AdamConfig) -> Result<Self> {
        cfg.validate()?;
        if n_params == 0 {
            return Err(Error::validation("adam: empty parameter vector"));
        }
        Ok(Adam { cfg, m: Array1::zeros(n_params), v: Array1::zeros(n_params), t: 0 })
    }

    /// One update: `p ← p − lr · m̂ / (√v̂ + ε)` with bias-corrected moments.
    pub fn step(&mut self, params: &mut Array1<f64>, grads: ArrayView1<f64>) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::validation(format!(
                "adam: state holds {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric("adam: non-finite gradient"));
        }
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.cfg.learning_rate * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
        }
        Ok(())
    }
}

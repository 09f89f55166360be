//! Streaming exponentially weighted statistics.
//!
//! All EWM quantities in the project use the finite-sample ("adjusted")
//! normalization: weights λ⁰, λ¹, … over the observations seen so far, summed
//! explicitly, so early estimates are unbiased averages rather than decayed
//! zeros.  Observations are pushed only for available days — masked days are
//! skipped entirely, never imputed.

/// Decay from a span: `λ = 1 − 2/(span + 1)` (the center-of-mass convention
/// commonly paired with "span" in time-series tooling).
pub fn lambda_from_span(span: usize) -> f64 {
    1.0 - 2.0 / (span as f64 + 1.0)
}

/// Decay from a half-life in observations: `λ = 2^(−1/hl)`.
pub fn lambda_from_half_life(half_life: f64) -> f64 {
    (-std::f64::consts::LN_2 / half_life).exp()
}

/// Decay from a trend timescale `S`: `λ = 1 − 1/S`, equivalently a half-life
/// of `log(0.5)/log(1 − 1/S)` observations.
pub fn lambda_from_trend_scale(scale: usize) -> f64 {
    1.0 - 1.0 / scale as f64
}

/// Running EWM mean/variance with explicit weight accounting.
///
/// For weights `λ^k` over past observations (most recent has weight 1,
/// `W = Σ λ^k`), this tracks the weighted mean and the weighted sum of
/// squared deviations `S = Σ λ^k (x_k − mean)²` via the update
///
/// ```text
/// W' = λW + 1,   δ = x − mean
/// mean' = mean + δ/W'
/// S' = λS + (λW/W')·δ²
/// ```
///
/// (the weighted Welford form; exact for constant streams and free of the
/// `E[x²] − E[x]²` cancellation).  The variance is the weighted population
/// variance `S/W`.
#[derive(Debug, Clone)]
pub struct EwmStats {
    lambda: f64,
    w_sum: f64,
    mean: f64,
    sq_dev: f64,
    count: usize,
}

impl EwmStats {
    pub fn new(lambda: f64) -> Self {
        assert!((0.0..1.0).contains(&lambda), "EWM decay must be in [0,1)");
        EwmStats { lambda, w_sum: 0.0, mean: 0.0, sq_dev: 0.0, count: 0 }
    }

    pub fn push(&mut self, x: f64) {
        if self.count == 0 {
            self.w_sum = 1.0;
            self.mean = x;
            self.sq_dev = 0.0;
        } else {
            let w_new = self.lambda * self.w_sum + 1.0;
            let delta = x - self.mean;
            self.mean += delta / w_new;
            self.sq_dev = self.lambda * self.sq_dev
                + (self.lambda * self.w_sum / w_new) * delta * delta;
            self.w_sum = w_new;
        }
        self.count += 1;
    }

    /// Number of observations pushed so far.
    pub fn observations(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        debug_assert!(self.count > 0, "EWM mean of empty stream");
        self.mean
    }

    /// Weighted population variance (nonnegative by construction).
    pub fn variance(&self) -> f64 {
        self.sq_dev / self.w_sum
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }
}

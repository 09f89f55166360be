//! Central-difference verification of the unrolled layer's backward pass.
//!
//! For a batch of random instances, every raw-parameter coordinate and every
//! input-feature coordinate is probed with a symmetric finite difference of a
//! scalar probe loss `⟨C, A⟩` and compared against the analytic gradient.
//! Coordinates whose probes straddle a `max(0, ·)` kink — the activation
//! pattern differs between the two probe points, or some pre-projection value
//! sits within `kink_margin` of zero — are excluded and counted separately:
//! there the subgradient convention and the finite difference legitimately
//! disagree.

use ndarray::{Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

use super::layer::{backward, forward, UnrollTape};
use super::params::UnrollParams;

/// Dimensions, tolerances, and hooks for one verification run.
#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Number of feature rows (graph nodes) per instance.
    pub n_assets: usize,
    /// Feature columns per row.
    pub n_features: usize,
    /// Unrolling depth `L` (executes `L + 1` layers).
    pub depth: usize,
    /// Random instances to check.
    pub n_instances: usize,
    /// Finite-difference step.
    pub epsilon: f64,
    /// Relative-error pass threshold.
    pub rel_tol: f64,
    /// Pre-projection values closer to zero than this mark the coordinate as
    /// kink-adjacent.
    pub kink_margin: f64,
    pub seed: u64,
    /// Scale of the random upstream gradient; 0 probes the trivial case.
    pub upstream_scale: f64,
    /// Fault-injection hook: corrupt one analytic coordinate per instance so
    /// the checker itself can be shown to catch wrong gradients.
    pub inject_fault: bool,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            n_assets: 5,
            n_features: 4,
            depth: 4,
            n_instances: 20,
            epsilon: 1e-5,
            rel_tol: 1e-4,
            kink_margin: 1e-6,
            seed: 42,
            upstream_scale: 1.0,
            inject_fault: false,
        }
    }
}

impl GradCheckConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_assets < 2 {
            return Err(Error::validation("gradcheck: need at least 2 assets"));
        }
        if self.n_features == 0 {
            return Err(Error::validation("gradcheck: need at least 1 feature"));
        }
        if self.depth == 0 {
            return Err(Error::validation("gradcheck: depth must be ≥ 1"));
        }
        if self.n_instances == 0 {
            return Err(Error::validation("gradcheck: need at least 1 instance"));
        }
        if !(self.epsilon > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::validation("gradcheck: epsilon and rel_tol must be > 0"));
        }
        if !(self.kink_margin >= 0.0) {
            return Err(Error::validation("gradcheck: kink_margin must be ≥ 0"));
        }
        if !(self.upstream_scale >= 0.0) || !self.upstream_scale.is_finite() {
            return Err(Error::validation("gradcheck: upstream_scale must be finite and ≥ 0"));
        }
        Ok(())
    }
}

/// One compared coordinate, labeled `"instance <k>: <coordinate>"`.
#[derive(Debug, Clone)]
pub struct CoordinateReport {
    pub label: String,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

/// Outcome of a verification run.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Coordinates actually compared.
    pub checked: usize,
    /// Compared coordinates within tolerance.
    pub passed: usize,
    /// Kink-adjacent coordinates excluded from comparison.
    pub excluded: usize,
    /// Worst compared coordinate (by relative error).
    pub worst: Option<CoordinateReport>,
    /// Compared coordinates that exceeded the tolerance.
    pub failures: Vec<CoordinateReport>,
}

impl GradCheckReport {
    pub fn pass_rate(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.passed as f64 / self.checked as f64
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// The activation pattern of a forward pass: signs of every pre-projection
/// value.  A finite difference is only trustworthy when both probe points
/// share the pattern (the function is smooth between them).
fn activation_signature(tape: &UnrollTape) -> Vec<bool> {
    let mut sig = Vec::new();
    for rec in &tape.records {
        sig.extend(rec.r1.iter().map(|&x| x > 0.0));
    }
    sig.extend(tape.w_final.iter().map(|&x| x > 0.0));
    sig
}

fn near_kink(tape: &UnrollTape, margin: f64) -> bool {
    tape.records
        .iter()
        .any(|rec| rec.r1.iter().any(|x| x.abs() < margin))
        || tape.w_final.iter().any(|x| x.abs() < margin)
}

fn probe_loss(upstream: &Array2<f64>, v: ArrayView2<f64>, params: &UnrollParams) -> Result<(f64, UnrollTape)> {
    let (est, tape) = forward(v, params)?;
    let loss = upstream.iter().zip(est.a.iter()).map(|(c, a)| c * a).sum();
    Ok((loss, tape))
}

/// Run the finite-difference suite and summarize per-coordinate agreement.
pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    cfg.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport {
        checked: 0,
        passed: 0,
        excluded: 0,
        worst: None,
        failures: Vec::new(),
    };

    for instance in 0..cfg.n_instances {
        let v = Array2::from_shape_fn((cfg.n_assets, cfg.n_features), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        // Parameters near the solver's stable region so short probes stay
        // well-behaved: α, β ∈ [0.5, 2], γ ∈ [0.05, 0.15], log-uniform.
        let layers = cfg.depth + 1;
        let log_u = |rng: &mut ChaCha12Rng, lo: f64, hi: f64| {
            lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())
        };
        let params = UnrollParams::from_raw(
            ndarray::Array1::from_shape_fn(layers, |_| log_u(&mut rng, 0.5, 2.0)),
            ndarray::Array1::from_shape_fn(layers, |_| log_u(&mut rng, 0.5, 2.0)),
            ndarray::Array1::from_shape_fn(layers, |_| log_u(&mut rng, 0.05, 0.15)),
        )?;
        let upstream = Array2::from_shape_fn((cfg.n_assets, cfg.n_assets), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            cfg.upstream_scale * z
        });

        let (_, tape) = probe_loss(&upstream, v.view(), &params)?;
        let (mut grads, grad_v) = backward(&tape, upstream.view())?;
        if cfg.inject_fault {
            grads.raw_alpha[0] += 0.5;
        }
        let analytic_flat = grads.flat();

        let compare = |label: String,
                           analytic: f64,
                           plus: (f64, UnrollTape),
                           minus: (f64, UnrollTape),
                           report: &mut GradCheckReport| {
            let kinked = activation_signature(&plus.1) != activation_signature(&minus.1)
                || near_kink(&plus.1, cfg.kink_margin)
                || near_kink(&minus.1, cfg.kink_margin);
            if kinked {
                report.excluded += 1;
                return;
            }
            let numeric = (plus.0 - minus.0) / (2.0 * cfg.epsilon);
            let rel_err =
                (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
            let coord = CoordinateReport { label, analytic, numeric, rel_err };
            report.checked += 1;
            if rel_err <= cfg.rel_tol {
                report.passed += 1;
            } else {
                report.failures.push(coord.clone());
            }
            if report.worst.as_ref().map_or(true, |w| coord.rel_err > w.rel_err) {
                report.worst = Some(coord);
            }
        };

        // Raw-parameter coordinates.
        let flat = params.flat();
        let names = ["raw_alpha", "raw_beta", "raw_gamma"];
        for idx in 0..flat.len() {
            let mut plus = flat.clone();
            plus[idx] += cfg.epsilon;
            let mut minus = flat.clone();
            minus[idx] -= cfg.epsilon;
            let lp = probe_loss(&upstream, v.view(), &UnrollParams::from_flat(plus.view())?)?;
            let lm = probe_loss(&upstream, v.view(), &UnrollParams::from_flat(minus.view())?)?;
            let label = format!(
                "instance {instance}: {}[{}]",
                names[idx / layers],
                idx % layers
            );
            compare(label, analytic_flat[idx], lp, lm, &mut report);
        }

        // Input-feature coordinates.
        for i in 0..cfg.n_assets {
            for col in 0..cfg.n_features {
                let mut plus = v.clone();
                plus[[i, col]] += cfg.epsilon;
                let mut minus = v.clone();
                minus[[i, col]] -= cfg.epsilon;
                let lp = probe_loss(&upstream, plus.view(), &params)?;
                let lm = probe_loss(&upstream, minus.view(), &params)?;
                let label = format!("instance {instance}: input[{i},{col}]");
                compare(label, grad_v[[i, col]], lp, lm, &mut report);
            }
        }
    }
    Ok(report)
}

//! Training losses over the pooled asset-day sample set: mean squared error
//! against volatility-scaled next-day returns, and the negative annualized
//! Sharpe ratio of the volatility-targeted per-asset returns.

use ndarray::{Array1, ArrayView1};

use crate::data::TRADING_DAYS;
use crate::error::{Error, Result};
use crate::TARGET_VOL;

/// Variance guard added inside the square root on the training path, so a
/// momentarily-degenerate batch yields a huge-but-finite gradient instead of
/// an error.
pub const SHARPE_EPSILON: f64 = 1e-12;

fn check_aligned(a: ArrayView1<f64>, b: ArrayView1<f64>, what: &str) -> Result<()> {
    if a.is_empty() {
        return Err(Error::validation(format!("{what}: empty sample set")));
    }
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "{what}: length mismatch ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::validation(format!("{what}: non-finite values")));
    }
    Ok(())
}

/// Mean squared error between predictions and targets over the pooled
/// sample set.
pub fn loss_mse(predictions: ArrayView1<f64>, targets: ArrayView1<f64>) -> Result<f64> {
    check_aligned(predictions, targets, "loss_mse")?;
    let n = predictions.len() as f64;
    let sum: f64 = predictions
        .iter()
        .zip(targets.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n)
}

/// MSE and its gradient with respect to the predictions: `2(p − t)/n`.
pub(crate) fn mse_with_grad(
    predictions: ArrayView1<f64>,
    targets: ArrayView1<f64>,
) -> Result<(f64, Array1<f64>)> {
    let loss = loss_mse(predictions, targets)?;
    let n = predictions.len() as f64;
    let grad = Array1::from_shape_fn(predictions.len(), |q| {
        2.0 * (predictions[q] - targets[q]) / n
    });
    Ok((loss, grad))
}

/// Volatility-targeted per-asset returns `R_q = x_q · (σ_tgt/σ_q) · r_q`,
/// the quantity whose pooled Sharpe ratio is trained and reported.
pub fn scaled_returns(
    positions: ArrayView1<f64>,
    next_returns: ArrayView1<f64>,
    sigma_ann: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    check_aligned(positions, next_returns, "scaled_returns")?;
    check_aligned(positions, sigma_ann, "scaled_returns")?;
    if sigma_ann.iter().any(|&s| s <= 0.0) {
        return Err(Error::validation("scaled_returns: volatilities must be positive"));
    }
    Ok(Array1::from_shape_fn(positions.len(), |q| {
        positions[q] * (TARGET_VOL / sigma_ann[q]) * next_returns[q]
    }))
}

/// Annualized Sharpe statistics of a pooled return sample, with population
/// variance (two-pass) and an optional guard inside the root.
fn sharpe_parts(r: ArrayView1<f64>, epsilon: f64) -> Result<(f64, f64, f64)> {
    if r.len() < 2 {
        return Err(Error::validation(format!(
            "neg_sharpe: need at least 2 samples, got {}",
            r.len()
        )));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("neg_sharpe: non-finite returns"));
    }
    let n = r.len() as f64;
    let mean = r.sum() / n;
    let var = r.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    // A constant sample has zero variance by definition (the two-pass value
    // may round to a subnormal instead of 0), and an underflowed variance is
    // just as unusable as denominator.
    let degenerate = var <= 0.0 || r.iter().all(|&v| v == r[0]);
    if epsilon == 0.0 && degenerate {
        return Err(Error::numeric("degenerate Sharpe: zero variance in the return sample"));
    }
    let std = (var + epsilon).sqrt();
    Ok((mean, var, std))
}

/// Negative annualized Sharpe ratio of the pooled volatility-targeted
/// returns: `−√252 · mean(R) / std(R)` with population standard deviation.
/// Zero variance is a hard error here; the training path guards with
/// [`SHARPE_EPSILON`] instead.
pub fn loss_neg_sharpe(
    positions: ArrayView1<f64>,
    next_returns: ArrayView1<f64>,
    sigma_ann: ArrayView1<f64>,
) -> Result<f64> {
    let r = scaled_returns(positions, next_returns, sigma_ann)?;
    neg_sharpe_of(r.view(), 0.0)
}

/// Negative annualized Sharpe of an already-scaled return sample.
pub fn neg_sharpe_of(r: ArrayView1<f64>, epsilon: f64) -> Result<f64> {
    let (mean, _, std) = sharpe_parts(r, epsilon)?;
    Ok(-TRADING_DAYS.sqrt() * mean / std)
}

/// Negative Sharpe and its gradient with respect to each pooled return:
/// `∂L/∂R_q = −√252 · (σ² + ε − mean·(R_q − mean)) / (n·σ³)` where
/// `σ = √(var + ε)`.
pub(crate) fn neg_sharpe_with_grad(
    r: ArrayView1<f64>,
    epsilon: f64,
) -> Result<(f64, Array1<f64>)> {
    let (mean, _, std) = sharpe_parts(r, epsilon)?;
    let n = r.len() as f64;
    let root = TRADING_DAYS.sqrt();
    let loss = -root * mean / std;
    let s3 = std * std * std;
    let grad = Array1::from_shape_fn(r.len(), |q| {
        -root * (std * std - mean * (r[q] - mean)) / (n * s3)
    });
    Ok((loss, grad))
}

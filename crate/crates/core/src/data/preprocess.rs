//! Returns, volatility, and winsorization over panels.

use ndarray::Array2;

use crate::error::{Error, Result};

use super::ewm::{lambda_from_half_life, lambda_from_span, EwmStats};
use super::{PricePanel, ReturnPanel, VolPanel, TRADING_DAYS};

/// Floor applied to the daily EWM volatility so the target-volatility
/// leverage `σ_tgt/σ` stays bounded on near-flat series.
pub const VOL_FLOOR_DAILY: f64 = 1e-4;

/// Observations required before an EWM volatility estimate is considered
/// defined; earlier dates stay masked.
pub const VOL_MIN_PERIODS: usize = 20;

/// Simple daily returns on consecutive panel days.
///
/// A return is defined only where both today and the previous panel day are
/// available, so each asset's first day — and the re-entry day after any
/// availability gap — has no return.
pub fn compute_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    panel.validate()?;
    let (t, n) = panel.prices.dim();
    let mut returns = Array2::<f64>::from_elem((t, n), f64::NAN);
    let mut available = Array2::<bool>::from_elem((t, n), false);
    for ni in 0..n {
        for ti in 1..t {
            if panel.available[[ti, ni]] && panel.available[[ti - 1, ni]] {
                returns[[ti, ni]] = panel.prices[[ti, ni]] / panel.prices[[ti - 1, ni]] - 1.0;
                available[[ti, ni]] = true;
            }
        }
    }
    Ok(ReturnPanel {
        dates: panel.dates.clone(),
        tickers: panel.tickers.clone(),
        returns,
        available,
    })
}

/// Exponentially weighted daily volatility with the given span, floored at
/// [`VOL_FLOOR_DAILY`] and annualized by √252.
///
/// Masked return days are skipped (not zero-filled); estimates are undefined
/// until [`VOL_MIN_PERIODS`] observations have accumulated.
pub fn ewm_volatility(returns: &ReturnPanel, span_days: usize) -> Result<VolPanel> {
    if span_days < 2 {
        return Err(Error::validation(format!(
            "ewm_volatility: span must be ≥ 2, got {span_days}"
        )));
    }
    let lambda = lambda_from_span(span_days);
    let (t, n) = returns.returns.dim();
    let mut sigma_daily = Array2::<f64>::from_elem((t, n), f64::NAN);
    let mut sigma_ann = Array2::<f64>::from_elem((t, n), f64::NAN);
    let mut available = Array2::<bool>::from_elem((t, n), false);
    for ni in 0..n {
        let mut stats = EwmStats::new(lambda);
        for ti in 0..t {
            if returns.available[[ti, ni]] {
                stats.push(returns.returns[[ti, ni]]);
            }
            if returns.available[[ti, ni]] && stats.observations() >= VOL_MIN_PERIODS {
                let sd = stats.std().max(VOL_FLOOR_DAILY);
                sigma_daily[[ti, ni]] = sd;
                sigma_ann[[ti, ni]] = sd * TRADING_DAYS.sqrt();
                available[[ti, ni]] = true;
            }
        }
    }
    Ok(VolPanel {
        dates: returns.dates.clone(),
        tickers: returns.tickers.clone(),
        sigma_daily,
        sigma_ann,
        available,
    })
}

/// Clip each defined value to `mean ± n_sigmas·std` of its own causal EWM
/// statistics (computed over the raw series, up to and including the day).
///
/// Statistics over the raw series keep the operation idempotent: feeding the
/// clipped output back in with frozen statistics reproduces it exactly.
/// `n_sigmas = ∞` is the identity map.
pub fn winsorize(
    values: &Array2<f64>,
    mask: &Array2<bool>,
    half_life: f64,
    n_sigmas: f64,
) -> Result<Array2<f64>> {
    if !(half_life >= 1.0) {
        return Err(Error::validation(format!(
            "winsorize: half_life must be ≥ 1, got {half_life}"
        )));
    }
    if !(n_sigmas > 0.0) {
        return Err(Error::validation(format!(
            "winsorize: n_sigmas must be > 0, got {n_sigmas}"
        )));
    }
    if values.dim() != mask.dim() {
        return Err(Error::validation("winsorize: values/mask shape mismatch"));
    }
    if n_sigmas.is_infinite() {
        return Ok(values.clone());
    }
    let lambda = lambda_from_half_life(half_life);
    let (t, n) = values.dim();
    let mut out = values.clone();
    for ni in 0..n {
        let mut stats = EwmStats::new(lambda);
        for ti in 0..t {
            if !mask[[ti, ni]] {
                continue;
            }
            let x = values[[ti, ni]];
            stats.push(x);
            let m = stats.mean();
            let band = n_sigmas * stats.std();
            out[[ti, ni]] = x.clamp(m - band, m + band);
        }
    }
    Ok(out)
}

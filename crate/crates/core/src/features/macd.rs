//! Volatility-normalized MACD trend features and the position-scaling curve.

use std::collections::VecDeque;

use ndarray::Array2;

use crate::data::{lambda_from_trend_scale, EwmStats, PricePanel};
use crate::error::{Error, Result};

/// Floor for the two rolling normalizers, so flat stretches divide cleanly
/// to zero instead of blowing up.
pub const ROLLING_STD_FLOOR: f64 = 1e-8;

/// Price-std normalizer window (trading days).
pub const PRICE_STD_WINDOW: usize = 63;

/// Signal-std normalizer window (trading days).
pub const SIGNAL_STD_WINDOW: usize = 252;

/// Rolling sample standard deviation over a fixed-size window, recomputed
/// two-pass on each push; `None` until the window is full.
#[derive(Debug, Clone)]
struct RollingStd {
    window: VecDeque<f64>,
    cap: usize,
}

impl RollingStd {
    fn new(cap: usize) -> Self {
        RollingStd { window: VecDeque::with_capacity(cap), cap }
    }

    fn push(&mut self, x: f64) {
        if self.window.len() == self.cap {
            self.window.pop_front();
        }
        self.window.push_back(x);
    }

    fn std(&self) -> Option<f64> {
        if self.window.len() < self.cap {
            return None;
        }
        let n = self.window.len() as f64;
        let mean = self.window.iter().sum::<f64>() / n;
        let ss: f64 = self.window.iter().map(|x| (x - mean) * (x - mean)).sum();
        Some((ss / (n - 1.0)).sqrt())
    }
}

/// Twice-normalized moving-average crossover signal per asset-day.
///
/// Short and long EWM price averages use decays `1 − 1/S` and `1 − 1/L`
/// (half-life `log(0.5)/log(1 − 1/S)` observations).  Their difference is
/// divided by the trailing 63-day price standard deviation, and that series
/// again by its own trailing 252-day standard deviation.  Masked days are
/// skipped; the output is defined once both rolling windows are full, i.e.
/// from the 314th available day on.
pub fn macd_feature(
    prices: &PricePanel,
    short_scale: usize,
    long_scale: usize,
) -> Result<(Array2<f64>, Array2<bool>)> {
    if short_scale < 2 || short_scale >= long_scale {
        return Err(Error::validation(format!(
            "macd_feature: need 2 ≤ short < long, got ({short_scale},{long_scale})"
        )));
    }
    let (t, n) = prices.prices.dim();
    let mut values = Array2::<f64>::from_elem((t, n), f64::NAN);
    let mut defined = Array2::<bool>::from_elem((t, n), false);
    for ni in 0..n {
        let mut short = EwmStats::new(lambda_from_trend_scale(short_scale));
        let mut long = EwmStats::new(lambda_from_trend_scale(long_scale));
        let mut price_std = RollingStd::new(PRICE_STD_WINDOW);
        let mut signal_std = RollingStd::new(SIGNAL_STD_WINDOW);
        for ti in 0..t {
            if !prices.available[[ti, ni]] {
                continue;
            }
            let p = prices.prices[[ti, ni]];
            short.push(p);
            long.push(p);
            price_std.push(p);
            let Some(ps) = price_std.std() else { continue };
            let macd_norm = (short.mean() - long.mean()) / ps.max(ROLLING_STD_FLOOR);
            signal_std.push(macd_norm);
            if let Some(ss) = signal_std.std() {
                values[[ti, ni]] = macd_norm / ss.max(ROLLING_STD_FLOOR);
                defined[[ti, ni]] = true;
            }
        }
    }
    Ok((values, defined))
}

/// Position-scaling curve `φ(y) = y·exp(−y²/4)/0.89`; odd, peaks at
/// `|y| = √2` with `|φ| ≈ 0.964`.
pub fn phi(y: f64) -> f64 {
    y * (-y * y / 4.0).exp() / 0.89
}

/// Average of `φ` over the three trend-scale signals: a position in
/// `[−0.964, 0.964]`.
pub fn macd_position(y_values: [f64; 3]) -> f64 {
    y_values.iter().map(|&y| phi(y)).sum::<f64>() / 3.0
}

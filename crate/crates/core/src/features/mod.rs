//! The eight momentum features per asset-day and their stacked lookback.
//!
//! Feature columns, in fixed order: volatility-normalized returns over 1, 21,
//! 63, 126, and 252 trading days, then the twice-normalized MACD signals at
//! trend scales (8,24), (16,48), (32,96).  Each column is winsorized at ±5
//! causal EWM standard deviations (252-day half-life).  A day is valid for an
//! asset only when all eight entries are defined.

mod macd;

pub use macd::{macd_feature, macd_position, phi, PRICE_STD_WINDOW, ROLLING_STD_FLOOR,
               SIGNAL_STD_WINDOW};

use chrono::NaiveDate;
use ndarray::{Array1, Array2, Array3};

use crate::data::{winsorize, PricePanel, ReturnPanel, VolPanel};
use crate::error::{Error, Result};

/// Return horizons (trading-day equivalents of 1d, 1m, 3m, 6m, 1y).
pub const RETURN_HORIZONS: [usize; 5] = [1, 21, 63, 126, 252];

/// MACD (short, long) trend-scale pairs.
pub const MACD_SCALES: [(usize, usize); 3] = [(8, 24), (16, 48), (32, 96)];

/// Column labels, index-aligned with the feature axis.
pub const FEATURE_NAMES: [&str; 8] = [
    "ret_1d", "ret_21d", "ret_63d", "ret_126d", "ret_252d",
    "macd_8_24", "macd_16_48", "macd_32_96",
];

/// Winsorization band: ±5 EWM standard deviations at 252-day half-life.
pub const WINSOR_HALF_LIFE: f64 = 252.0;
pub const WINSOR_SIGMAS: f64 = 5.0;

/// Lookback window of the stacked representation (trading days).
pub const LOOKBACK_DAYS: usize = 252;

/// Per-asset-day feature matrix over the whole panel.
#[derive(Debug, Clone)]
pub struct FeaturePanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// date×asset×feature cube; NaN where `valid` is false for the day.
    pub u: Array3<f64>,
    /// True only when all eight features are defined.
    pub valid: Array2<bool>,
}

impl FeaturePanel {
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    /// Asset indices valid on date `t`, in asset order.
    pub fn assets_at(&self, t: usize) -> Vec<usize> {
        (0..self.n_assets()).filter(|&i| self.valid[[t, i]]).collect()
    }

    /// The `N_t×8` feature matrix of the valid assets on date `t`.
    pub fn u_matrix(&self, t: usize, assets: &[usize]) -> Array2<f64> {
        let mut u = Array2::<f64>::zeros((assets.len(), 8));
        for (row, &i) in assets.iter().enumerate() {
            for f in 0..8 {
                u[[row, f]] = self.u[[t, i, f]];
            }
        }
        u
    }
}

/// Volatility-normalized cumulative return over `horizon` trading days:
/// compounded simple returns divided by `σ_daily·√horizon`.  Undefined when
/// any day in the window lacks a return or the volatility is undefined.
pub fn norm_return(
    returns: &ReturnPanel,
    vols: &VolPanel,
    horizon: usize,
) -> Result<(Array2<f64>, Array2<bool>)> {
    if horizon < 1 {
        return Err(Error::validation("norm_return: horizon must be ≥ 1"));
    }
    let (t, n) = returns.returns.dim();
    if vols.sigma_daily.dim() != (t, n) {
        return Err(Error::validation("norm_return: returns/vols shape mismatch"));
    }
    let mut values = Array2::<f64>::from_elem((t, n), f64::NAN);
    let mut defined = Array2::<bool>::from_elem((t, n), false);
    for ni in 0..n {
        // Length of the run of consecutively-available returns ending at t.
        let mut streak = 0usize;
        for ti in 0..t {
            if !returns.available[[ti, ni]] {
                streak = 0;
                continue;
            }
            streak += 1;
            if streak < horizon || !vols.available[[ti, ni]] {
                continue;
            }
            let cum = if horizon == 1 {
                returns.returns[[ti, ni]]
            } else {
                let mut acc = 1.0;
                for s in ti + 1 - horizon..=ti {
                    acc *= 1.0 + returns.returns[[s, ni]];
                }
                acc - 1.0
            };
            values[[ti, ni]] = cum / (vols.sigma_daily[[ti, ni]] * (horizon as f64).sqrt());
            defined[[ti, ni]] = true;
        }
    }
    Ok((values, defined))
}

/// Assemble all eight feature columns, winsorize each, and mark validity.
pub fn build_u(
    prices: &PricePanel,
    returns: &ReturnPanel,
    vols: &VolPanel,
) -> Result<FeaturePanel> {
    let (t, n) = prices.prices.dim();
    if returns.returns.dim() != (t, n) || vols.sigma_daily.dim() != (t, n) {
        return Err(Error::validation("build_u: panel shapes mismatch"));
    }
    let mut columns: Vec<(Array2<f64>, Array2<bool>)> = Vec::with_capacity(8);
    for horizon in RETURN_HORIZONS {
        columns.push(norm_return(returns, vols, horizon)?);
    }
    for (s, l) in MACD_SCALES {
        columns.push(macd_feature(prices, s, l)?);
    }

    let mut u = Array3::<f64>::from_elem((t, n, 8), f64::NAN);
    let mut valid = Array2::<bool>::from_elem((t, n), true);
    for (f, (raw, defined)) in columns.iter().enumerate() {
        let clipped = winsorize(raw, defined, WINSOR_HALF_LIFE, WINSOR_SIGMAS)?;
        for ti in 0..t {
            for ni in 0..n {
                if defined[[ti, ni]] {
                    u[[ti, ni, f]] = clipped[[ti, ni]];
                } else {
                    valid[[ti, ni]] = false;
                }
            }
        }
    }
    // NaN out any partially-defined day so nothing reads half a feature row.
    for ti in 0..t {
        for ni in 0..n {
            if !valid[[ti, ni]] {
                for f in 0..8 {
                    u[[ti, ni, f]] = f64::NAN;
                }
            }
        }
    }
    Ok(FeaturePanel {
        dates: prices.dates.clone(),
        tickers: prices.tickers.clone(),
        u,
        valid,
    })
}

/// Causal stacked-lookback view over a feature panel.
///
/// Row `i` of the date-`t` representation concatenates asset `i`'s features
/// over days `t−δ+1..t`, feature-major with the oldest day first: slot
/// `f·δ + k` holds feature `f` on day `t−δ+1+k`.  Rows are materialized on
/// demand — at δ=252 the full cube would dwarf the panel itself.
#[derive(Debug)]
pub struct LookbackPanel<'a> {
    pub features: &'a FeaturePanel,
    pub delta: usize,
    /// True when all δ days of all 8 features are defined.
    pub valid: Array2<bool>,
}

/// Build the lookback view: a row is valid when the asset's last δ days are
/// all valid in the underlying feature panel.
pub fn build_v(features: &FeaturePanel, delta: usize) -> Result<LookbackPanel<'_>> {
    if delta < 1 {
        return Err(Error::validation("build_v: delta must be ≥ 1"));
    }
    let (t, n) = features.valid.dim();
    let mut valid = Array2::<bool>::from_elem((t, n), false);
    for ni in 0..n {
        let mut streak = 0usize;
        for ti in 0..t {
            if features.valid[[ti, ni]] {
                streak += 1;
            } else {
                streak = 0;
            }
            valid[[ti, ni]] = streak >= delta;
        }
    }
    Ok(LookbackPanel { features, delta, valid })
}

impl LookbackPanel<'_> {
    pub fn n_dates(&self) -> usize {
        self.features.n_dates()
    }

    pub fn n_assets(&self) -> usize {
        self.features.n_assets()
    }

    /// Asset indices with a valid stacked row on date `t`.
    pub fn assets_at(&self, t: usize) -> Vec<usize> {
        (0..self.n_assets()).filter(|&i| self.valid[[t, i]]).collect()
    }

    /// The stacked `8δ` row for one asset-day (must be valid).
    pub fn v_row(&self, t: usize, asset: usize) -> Array1<f64> {
        assert!(self.valid[[t, asset]], "lookback row ({t},{asset}) is not valid");
        let delta = self.delta;
        let mut row = Array1::<f64>::zeros(8 * delta);
        for f in 0..8 {
            for k in 0..delta {
                row[f * delta + k] = self.features.u[[t + 1 - delta + k, asset, f]];
            }
        }
        row
    }

    /// The `N_t×8δ` stacked matrix for the listed assets on date `t`.
    pub fn v_matrix(&self, t: usize, assets: &[usize]) -> Array2<f64> {
        let mut v = Array2::<f64>::zeros((assets.len(), 8 * self.delta));
        for (row, &i) in assets.iter().enumerate() {
            v.row_mut(row).assign(&self.v_row(t, i));
        }
        v
    }
}

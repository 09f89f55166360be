//! Price panels and their preprocessing.
//!
//! A panel is a date×asset matrix aligned on the union calendar of all
//! assets, with an availability mask as the source of truth for which cells
//! are defined (undefined cells also hold NaN so accidental reads surface).
//! All downstream statistics skip unavailable days entirely, which makes
//! every derived quantity invariant to prepending masked history.

mod ewm;
mod ingest;
mod preprocess;
mod synthetic;

pub use ewm::{lambda_from_half_life, lambda_from_span, lambda_from_trend_scale, EwmStats};
pub use ingest::{load_csv, IngestConfig};
pub use preprocess::{compute_returns, ewm_volatility, winsorize, VOL_FLOOR_DAILY};
pub use synthetic::{generate_synthetic, two_block_graph, SyntheticSpec};

use chrono::NaiveDate;
use ndarray::Array2;

use crate::error::{Error, Result};

/// Trading days per year, used for every annualization in the project.
pub const TRADING_DAYS: f64 = 252.0;

/// Daily adjusted prices on the union calendar.
#[derive(Debug, Clone)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// date×asset prices; NaN where `available` is false.
    pub prices: Array2<f64>,
    pub available: Array2<bool>,
}

/// Simple daily returns `p_t/p_{t-1} − 1` on consecutive panel days.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// date×asset returns; NaN where `available` is false.
    pub returns: Array2<f64>,
    pub available: Array2<bool>,
}

/// Exponentially weighted volatility of daily returns.
#[derive(Debug, Clone)]
pub struct VolPanel {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// Daily standard deviation, floored at [`VOL_FLOOR_DAILY`].
    pub sigma_daily: Array2<f64>,
    /// `sigma_daily × √252`.
    pub sigma_ann: Array2<f64>,
    pub available: Array2<bool>,
}

impl PricePanel {
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    /// Check the structural invariants: strictly increasing dates, matching
    /// shapes, strictly positive prices wherever available, NaN elsewhere.
    pub fn validate(&self) -> Result<()> {
        let (t, n) = (self.dates.len(), self.tickers.len());
        if self.prices.dim() != (t, n) || self.available.dim() != (t, n) {
            return Err(Error::validation("price panel: shape mismatch"));
        }
        for pair in self.dates.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::validation(format!(
                    "price panel: dates not strictly increasing at {}",
                    pair[1]
                )));
            }
        }
        for ti in 0..t {
            for ni in 0..n {
                let p = self.prices[[ti, ni]];
                if self.available[[ti, ni]] {
                    if !(p > 0.0) || !p.is_finite() {
                        return Err(Error::validation(format!(
                            "price panel: non-positive price {} for {} on {}",
                            p, self.tickers[ni], self.dates[ti]
                        )));
                    }
                } else if !p.is_nan() {
                    return Err(Error::validation(
                        "price panel: unavailable cell holds a value",
                    ));
                }
            }
        }
        Ok(())
    }
}

impl ReturnPanel {
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }
}

impl VolPanel {
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }
}

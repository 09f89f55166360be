//! Portfolio return construction: volatility-targeted cross-sectional
//! averaging of per-asset positions, whole-period rescaling to a target
//! volatility, and linear turnover-cost adjustment.

use ndarray::ArrayView2;

use crate::data::{ReturnPanel, VolPanel};
use crate::error::{Error, Result};
use crate::TARGET_VOL;

/// Cost levels (basis points) at which the cost-adjusted Sharpe curve is
/// evaluated.
pub const COST_GRID_BPS: [f64; 6] = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0];

/// One basis point as a decimal.
pub const BPS: f64 = 1e-4;

/// Daily portfolio returns, defined only on dates with at least one active
/// asset.  Each return is realized from its date into the next trading day
/// and labeled by the position date.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSeries {
    /// Panel date indices with a defined portfolio return, ascending.
    pub dates: Vec<usize>,
    pub returns: Vec<f64>,
}

impl PortfolioSeries {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

/// Which volatility multiplies the turnover term of the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostConvention {
    /// The asset's own annualized volatility, as the cost formula prints it.
    SigmaAsset,
    /// The portfolio-level volatility target.
    SigmaTarget,
}

impl Default for CostConvention {
    fn default() -> Self {
        CostConvention::SigmaAsset
    }
}

impl CostConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            CostConvention::SigmaAsset => "sigma_asset",
            CostConvention::SigmaTarget => "sigma_target",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sigma_asset" => Ok(CostConvention::SigmaAsset),
            "sigma_target" => Ok(CostConvention::SigmaTarget),
            other => Err(Error::validation(format!("unknown cost convention '{other}'"))),
        }
    }
}

fn check_panel_shapes(
    positions: ArrayView2<f64>,
    returns: &ReturnPanel,
    vols: &VolPanel,
) -> Result<()> {
    let (t, n) = positions.dim();
    if returns.returns.dim() != (t, n) || vols.sigma_ann.dim() != (t, n) {
        return Err(Error::validation(format!(
            "portfolio: positions are {t}×{n} but panels are {:?} / {:?}",
            returns.returns.dim(),
            vols.sigma_ann.dim()
        )));
    }
    for &x in positions.iter() {
        if x.is_finite() && x.abs() > 1.0 {
            return Err(Error::validation(format!(
                "portfolio: position {x} outside [-1, 1]"
            )));
        }
    }
    Ok(())
}

/// An asset is active at (t, i) when its position is defined, its
/// volatility is available, and its next-day return exists.
fn is_active(
    positions: ArrayView2<f64>,
    returns: &ReturnPanel,
    vols: &VolPanel,
    t: usize,
    i: usize,
) -> bool {
    positions[[t, i]].is_finite()
        && vols.available[[t, i]]
        && t + 1 < returns.n_dates()
        && returns.available[[t + 1, i]]
}

/// Daily volatility-targeted portfolio returns:
/// `(1/N_t) Σ_i x_{i,t} (σ_tgt/σ_{i,t}) r_{i,t:t+1}` over the active assets.
/// Dates with no active asset are masked (absent from the series).
pub fn portfolio_returns(
    positions: ArrayView2<f64>,
    returns: &ReturnPanel,
    vols: &VolPanel,
    sigma_tgt: f64,
) -> Result<PortfolioSeries> {
    cost_adjusted_returns(positions, returns, vols, sigma_tgt, 0.0, CostConvention::SigmaAsset)
}

/// Daily portfolio returns with a linear turnover cost charged inside the
/// cross-sectional average:
///
/// `(1/N_t) Σ_i ( x_{i,t} (σ_tgt/σ_{i,t}) r_{i,t:t+1}
///               − c · σ_cost · |x_{i,t}/σ_{i,t} − x_{i,t−1}/σ_{i,t−1}| )`
///
/// with `c = c_bps · 1e-4` and `σ_cost` per [`CostConvention`].  An asset
/// entering the book (no defined position or volatility on the previous
/// date) is charged from a zero holding.
pub fn cost_adjusted_returns(
    positions: ArrayView2<f64>,
    returns: &ReturnPanel,
    vols: &VolPanel,
    sigma_tgt: f64,
    c_bps: f64,
    convention: CostConvention,
) -> Result<PortfolioSeries> {
    check_panel_shapes(positions, returns, vols)?;
    if !(sigma_tgt > 0.0 && sigma_tgt.is_finite()) {
        return Err(Error::validation("portfolio: sigma_tgt must be finite and > 0"));
    }
    if !(c_bps >= 0.0 && c_bps.is_finite()) {
        return Err(Error::validation("portfolio: cost must be finite and ≥ 0"));
    }
    let (t_total, n_assets) = positions.dim();
    let c = c_bps * BPS;

    let mut dates = Vec::new();
    let mut values = Vec::new();
    for t in 0..t_total {
        let mut sum = 0.0;
        let mut n_t = 0usize;
        for i in 0..n_assets {
            if !is_active(positions, returns, vols, t, i) {
                continue;
            }
            let x = positions[[t, i]];
            let sigma = vols.sigma_ann[[t, i]];
            let mut value = x * (sigma_tgt / sigma) * returns.returns[[t + 1, i]];
            if c > 0.0 {
                let prev = if t > 0
                    && positions[[t - 1, i]].is_finite()
                    && vols.available[[t - 1, i]]
                {
                    positions[[t - 1, i]] / vols.sigma_ann[[t - 1, i]]
                } else {
                    0.0
                };
                let sigma_cost = match convention {
                    CostConvention::SigmaAsset => sigma,
                    CostConvention::SigmaTarget => sigma_tgt,
                };
                value -= c * sigma_cost * (x / sigma - prev).abs();
            }
            sum += value;
            n_t += 1;
        }
        if n_t > 0 {
            dates.push(t);
            values.push(sum / n_t as f64);
        }
    }
    Ok(PortfolioSeries { dates, returns: values })
}

/// Annualized sample standard deviation (√252 × daily std with `n−1`
/// denominator) of a daily return series.
pub fn realized_ann_vol(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::validation(format!(
            "realized vol needs at least 2 returns, got {}",
            series.len()
        )));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0);
    Ok((var * crate::data::TRADING_DAYS).sqrt())
}

/// Rescale a whole return series so its realized annualized volatility is
/// exactly `sigma_tgt` (ex-post, whole-period).
pub fn target_vol_rescale(series: &[f64], sigma_tgt: f64) -> Result<Vec<f64>> {
    if !(sigma_tgt > 0.0 && sigma_tgt.is_finite()) {
        return Err(Error::validation("rescale: sigma_tgt must be finite and > 0"));
    }
    let vol = realized_ann_vol(series)?;
    if vol <= 0.0 {
        return Err(Error::numeric(
            "rescale: zero realized volatility, the series cannot be scaled to target",
        ));
    }
    let factor = sigma_tgt / vol;
    Ok(series.iter().map(|r| r * factor).collect())
}

/// Convenience: [`target_vol_rescale`] to the 15% default.
pub fn rescale_to_default_target(series: &[f64]) -> Result<Vec<f64>> {
    target_vol_rescale(series, TARGET_VOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TRADING_DAYS;
    use ndarray::{array, Array2};

    /// Panels where every asset/date is available, with the given
    /// annualized vols and next-day returns laid out directly.
    fn panels(sigma_ann: Array2<f64>, returns: Array2<f64>) -> (ReturnPanel, VolPanel) {
        let (t, n) = returns.dim();
        let dates: Vec<chrono::NaiveDate> = (0..t)
            .map(|k| {
                chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
                    + chrono::Days::new(k as u64)
            })
            .collect();
        let tickers: Vec<String> = (0..n).map(|i| format!("A{i}")).collect();
        let available = Array2::from_elem((t, n), true);
        let rp = ReturnPanel {
            dates: dates.clone(),
            tickers: tickers.clone(),
            returns,
            available: available.clone(),
        };
        let vp = VolPanel {
            dates,
            tickers,
            sigma_daily: sigma_ann.mapv(|s| s / TRADING_DAYS.sqrt()),
            sigma_ann,
            available,
        };
        (rp, vp)
    }

    #[test]
    fn unit_leverage_single_asset_returns_the_asset_return() {
        // σ_ann = σ_tgt and x = 1: the portfolio return is the raw return.
        let (rp, vp) = panels(
            Array2::from_elem((3, 1), TARGET_VOL),
            array![[0.0], [0.01], [0.02]],
        );
        let x = array![[1.0], [1.0], [1.0]];
        let s = portfolio_returns(x.view(), &rp, &vp, TARGET_VOL).unwrap();
        assert_eq!(s.dates, vec![0, 1]);
        assert_eq!(s.returns, vec![0.01, 0.02]);
    }

    #[test]
    fn flat_book_is_a_zero_series_and_cancellation_nets_out() {
        let (rp, vp) = panels(
            Array2::from_elem((3, 2), 0.2),
            array![[0.0, 0.0], [0.01, 0.01], [-0.02, -0.02]],
        );
        let flat = Array2::zeros((3, 2));
        let s = portfolio_returns(flat.view(), &rp, &vp, TARGET_VOL).unwrap();
        assert_eq!(s.returns, vec![0.0, 0.0]);
        // Long one, short the other, identical σ and r: exact cancellation.
        let hedged = array![[1.0, -1.0], [1.0, -1.0], [1.0, -1.0]];
        let s = portfolio_returns(hedged.view(), &rp, &vp, TARGET_VOL).unwrap();
        assert_eq!(s.returns, vec![0.0, 0.0]);
    }

    #[test]
    fn undefined_assets_are_excluded_from_count_and_sum() {
        let (rp, vp) = panels(
            Array2::from_elem((3, 2), TARGET_VOL),
            array![[0.0, 0.0], [0.04, 100.0], [0.02, 100.0]],
        );
        // Second asset has no position: N_t = 1, its huge return ignored.
        let x = array![[1.0, f64::NAN], [1.0, f64::NAN], [1.0, f64::NAN]];
        let s = portfolio_returns(x.view(), &rp, &vp, TARGET_VOL).unwrap();
        assert_eq!(s.returns, vec![0.04, 0.02]);

        // No positions at all: the whole series is masked.
        let none = Array2::from_elem((3, 2), f64::NAN);
        let s = portfolio_returns(none.view(), &rp, &vp, TARGET_VOL).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn asset_order_is_irrelevant() {
        let sigma = array![[0.1, 0.3, 0.2], [0.15, 0.25, 0.3], [0.1, 0.1, 0.1]];
        let rets = array![[0.0, 0.0, 0.0], [0.01, -0.02, 0.005], [0.03, 0.01, -0.01]];
        let x = array![[1.0, -0.5, 0.25], [0.8, 0.2, -1.0], [0.0, 1.0, 1.0]];
        let (rp, vp) = panels(sigma.clone(), rets.clone());
        let base = portfolio_returns(x.view(), &rp, &vp, TARGET_VOL).unwrap();

        let perm = [2usize, 0, 1];
        let pick = |m: &Array2<f64>| {
            Array2::from_shape_fn(m.dim(), |(t, i)| m[[t, perm[i]]])
        };
        let (rp2, vp2) = panels(pick(&sigma), pick(&rets));
        let permuted = portfolio_returns(pick(&x).view(), &rp2, &vp2, TARGET_VOL).unwrap();
        for (a, b) in base.returns.iter().zip(permuted.returns.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_cost_is_exactly_the_uncosted_series() {
        let sigma = array![[0.2, 0.4], [0.3, 0.2], [0.2, 0.2]];
        let rets = array![[0.0, 0.0], [0.01, -0.02], [0.02, 0.01]];
        let x = array![[1.0, -1.0], [0.5, 0.5], [0.0, 1.0]];
        let (rp, vp) = panels(sigma, rets);
        let plain = portfolio_returns(x.view(), &rp, &vp, TARGET_VOL).unwrap();
        let costed =
            cost_adjusted_returns(x.view(), &rp, &vp, TARGET_VOL, 0.0, CostConvention::SigmaAsset)
                .unwrap();
        assert_eq!(plain, costed);
    }

    #[test]
    fn entry_jump_charges_exactly_c() {
        // Single asset, x: 0 → 1, constant σ: day-1 penalty is c·σ·(1/σ) = c.
        let (rp, vp) = panels(Array2::from_elem((3, 1), 0.2), array![[0.0], [0.0], [0.0]]);
        let x = array![[0.0], [1.0], [1.0]];
        let c_bps = 2.0;
        let s = cost_adjusted_returns(
            x.view(), &rp, &vp, TARGET_VOL, c_bps, CostConvention::SigmaAsset,
        )
        .unwrap();
        // Day 0: no position change from the zero entry holding (x=0).
        assert_eq!(s.returns[0], 0.0);
        // Day 1: |1/σ − 0/σ| · σ · c = c.
        assert!((s.returns[1] - (-c_bps * BPS)).abs() < 1e-18);
    }

    #[test]
    fn constant_positions_pay_nothing_after_entry() {
        let (rp, vp) = panels(Array2::from_elem((4, 1), 0.25), Array2::zeros((4, 1)));
        let x = Array2::from_elem((4, 1), 0.7);
        let s = cost_adjusted_returns(
            x.view(), &rp, &vp, TARGET_VOL, 5.0, CostConvention::SigmaAsset,
        )
        .unwrap();
        // Day 0 charges the entry from zero; afterwards turnover is 0.
        assert!(s.returns[0] < 0.0);
        assert_eq!(&s.returns[1..], &[0.0, 0.0]);
    }

    #[test]
    fn target_sigma_convention_changes_the_scale() {
        let (rp, vp) = panels(Array2::from_elem((2, 1), 0.3), Array2::zeros((2, 1)));
        let x = array![[1.0], [1.0]];
        let asset = cost_adjusted_returns(
            x.view(), &rp, &vp, TARGET_VOL, 1.0, CostConvention::SigmaAsset,
        )
        .unwrap();
        let tgt = cost_adjusted_returns(
            x.view(), &rp, &vp, TARGET_VOL, 1.0, CostConvention::SigmaTarget,
        )
        .unwrap();
        // Entry penalty: c·σ·(1/σ) = c versus c·σ_tgt·(1/σ) = c·0.15/0.3.
        assert!((asset.returns[0] + BPS).abs() < 1e-18);
        assert!((tgt.returns[0] + BPS * 0.5).abs() < 1e-18);
    }

    #[test]
    fn rescale_hits_the_target_exactly_and_preserves_sharpe() {
        let series: Vec<f64> = (0..100)
            .map(|k| 0.001 * ((k * 37 % 11) as f64 - 5.0) + 0.0002)
            .collect();
        let scaled = target_vol_rescale(&series, TARGET_VOL).unwrap();
        let vol = realized_ann_vol(&scaled).unwrap();
        assert!((vol - TARGET_VOL).abs() < 1e-12);

        // A series already at target is unchanged (up to rounding).
        let again = target_vol_rescale(&scaled, TARGET_VOL).unwrap();
        for (a, b) in again.iter().zip(scaled.iter()) {
            assert!((a - b).abs() < 1e-15);
        }

        // Known ratio: half the target vol → doubled.
        let half: Vec<f64> = series
            .iter()
            .map(|r| r * (TARGET_VOL / 2.0) / realized_ann_vol(&series).unwrap())
            .collect();
        let rescaled = target_vol_rescale(&half, TARGET_VOL).unwrap();
        for (r, h) in rescaled.iter().zip(half.iter()) {
            assert!((r - 2.0 * h).abs() < 1e-15);
        }

        // Sharpe invariance under the rescale.
        let sharpe = |s: &[f64]| {
            let n = s.len() as f64;
            let m = s.iter().sum::<f64>() / n;
            m / realized_ann_vol(s).unwrap()
        };
        assert!((sharpe(&series) - sharpe(&scaled)).abs() < 1e-12);
    }

    #[test]
    fn rescale_rejects_degenerate_series() {
        assert!(target_vol_rescale(&[0.01], TARGET_VOL).is_err());
        let err = target_vol_rescale(&[0.0, 0.0, 0.0], TARGET_VOL).unwrap_err();
        assert_eq!(err.category(), "numeric");
    }

    #[test]
    fn positions_beyond_unit_leverage_are_rejected() {
        let (rp, vp) = panels(Array2::from_elem((2, 1), 0.2), Array2::zeros((2, 1)));
        let x = array![[1.5], [1.0]];
        let err = portfolio_returns(x.view(), &rp, &vp, TARGET_VOL).unwrap_err();
        assert_eq!(err.category(), "validation");
    }
}

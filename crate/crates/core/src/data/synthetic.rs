//! Synthetic price panels with planted network structure.
//!
//! The generator drives one latent trend per asset and diffuses the trends
//! through a planted graph, so connected assets share momentum: an asset's
//! next-day return realizes its *lagged* latent trend, and that trend keeps
//! absorbing its neighbors' trends.  Neighbors' past returns therefore carry
//! genuine incremental information about an asset's future — the spillover
//! effect the learned-graph strategies are supposed to exploit — while the
//! trends' own persistence keeps plain momentum profitable too.
//!
//! Dynamics (all assets jointly, ε and ζ i.i.d. standard normal):
//!
//! ```text
//! μ_t = ρ[(1−κ)μ_{t−1} + κ·Ĝμ_{t−1}] + η·ε_t      latent trends
//! r_t = μ_{t−1} + noise_scale·ζ_t                   daily returns
//! ```
//!
//! with Ĝ the degree-normalized planted adjacency, ρ the trend persistence,
//! κ the neighbor-mixing weight, and η sized so the stationary per-asset
//! trend scale is `trend_strength`.  The generator is deterministic in the
//! seed (ChaCha12 stream; draws in a fixed order: per day, first the trend
//! innovations in asset order, then the return noises).

use chrono::{Datelike, NaiveDate, Weekday};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::PricePanel;

/// Trend persistence per day (mean-reversion horizon ≈ 1/(1−ρ) ≈ 33 days).
const TREND_PERSISTENCE: f64 = 0.97;
/// Share of the persisted trend drawn from neighbors rather than the asset
/// itself.
const NEIGHBOR_MIX: f64 = 0.5;
/// Latent-state burn-in before the first emitted return.
const BURN_IN_DAYS: usize = 252;

/// Recipe for one synthetic panel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_assets: usize,
    pub n_days: usize,
    /// Symmetric nonnegative adjacency with zero diagonal; row/col order
    /// matches asset order.
    pub planted_graph: Vec<Vec<f64>>,
    /// Stationary scale of the latent daily trend.
    pub trend_strength: f64,
    /// Scale of the i.i.d. daily return noise on top of the trend.
    pub noise_scale: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_assets < 1 || self.n_days < 1 {
            return Err(Error::validation("synthetic: need ≥ 1 asset and ≥ 1 day"));
        }
        if !(self.trend_strength >= 0.0) || !(self.noise_scale > 0.0) {
            return Err(Error::validation(
                "synthetic: trend_strength must be ≥ 0 and noise_scale > 0",
            ));
        }
        let n = self.n_assets;
        if self.planted_graph.len() != n || self.planted_graph.iter().any(|r| r.len() != n) {
            return Err(Error::validation(format!(
                "synthetic: planted graph must be {n}×{n}"
            )));
        }
        for i in 0..n {
            if self.planted_graph[i][i] != 0.0 {
                return Err(Error::validation(format!(
                    "synthetic: planted graph has nonzero diagonal at {i}"
                )));
            }
            for j in 0..n {
                let g = self.planted_graph[i][j];
                if !g.is_finite() || g < 0.0 {
                    return Err(Error::validation(format!(
                        "synthetic: planted graph weight ({i},{j}) invalid"
                    )));
                }
                if (g - self.planted_graph[j][i]).abs() > 1e-12 {
                    return Err(Error::validation(format!(
                        "synthetic: planted graph not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Complete-within, empty-across two-community adjacency (first half vs
/// second half of the asset list), unit edge weights.
pub fn two_block_graph(n_assets: usize) -> Vec<Vec<f64>> {
    let half = n_assets / 2;
    let mut g = vec![vec![0.0; n_assets]; n_assets];
    for i in 0..n_assets {
        for j in 0..n_assets {
            if i != j && ((i < half) == (j < half)) {
                g[i][j] = 1.0;
            }
        }
    }
    g
}

/// Generate the panel: weekday calendar from 2000-01-03, all assets
/// available every day, prices compounded from 100.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<PricePanel> {
    spec.validate()?;
    let n = spec.n_assets;
    let t = spec.n_days;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);

    // Degree-normalized adjacency: Ĝ = D^{-1/2} G D^{-1/2}, zero rows for
    // isolated nodes.
    let mut ghat = Array2::<f64>::zeros((n, n));
    let degrees: Vec<f64> = (0..n).map(|i| spec.planted_graph[i].iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            if degrees[i] > 0.0 && degrees[j] > 0.0 {
                ghat[[i, j]] =
                    spec.planted_graph[i][j] / (degrees[i].sqrt() * degrees[j].sqrt());
            }
        }
    }

    let rho = TREND_PERSISTENCE;
    let kappa = NEIGHBOR_MIX;
    let eta = spec.trend_strength * (1.0 - rho * rho).sqrt();

    let mut mu = Array1::<f64>::zeros(n);
    let step = |mu: &Array1<f64>, rng: &mut ChaCha12Rng| -> Array1<f64> {
        let mixed = ghat.dot(mu);
        let mut next = Array1::<f64>::zeros(n);
        for i in 0..n {
            let eps: f64 = StandardNormal.sample(rng);
            next[i] = rho * ((1.0 - kappa) * mu[i] + kappa * mixed[i]) + eta * eps;
        }
        next
    };

    for _ in 0..BURN_IN_DAYS {
        mu = step(&mu, &mut rng);
    }

    let mut prices = Array2::<f64>::zeros((t, n));
    let mut price_level = vec![100.0f64; n];
    for ti in 0..t {
        let prev_mu = mu.clone();
        mu = step(&mu, &mut rng);
        for i in 0..n {
            let zeta: f64 = StandardNormal.sample(&mut rng);
            // Day one has no prior return; later days realize the lagged
            // trend plus noise. A ratio floor keeps prices positive even
            // under absurd noise settings.
            if ti > 0 {
                let r = prev_mu[i] + spec.noise_scale * zeta;
                price_level[i] *= (1.0 + r).max(0.01);
            }
            prices[[ti, i]] = price_level[i];
        }
    }

    let dates = weekday_calendar(t);
    let available = Array2::<bool>::from_elem((t, n), true);
    let panel = PricePanel {
        dates,
        tickers: (0..n).map(|i| format!("SYN{i:02}")).collect(),
        prices,
        available,
    };
    panel.validate()?;
    Ok(panel)
}

/// First `n` weekdays starting 2000-01-03 (a Monday).
fn weekday_calendar(n: usize) -> Vec<NaiveDate> {
    let mut dates = Vec::with_capacity(n);
    let mut d = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    while dates.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            dates.push(d);
        }
        d = d.succ_opt().unwrap();
    }
    dates
}

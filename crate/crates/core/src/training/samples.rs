//! Per-date training samples: for each date, the cross-section of assets
//! with complete features, a defined volatility, and (for training) a
//! next-day return — plus the precomputed pairwise distances the graph layer
//! consumes, so epochs never recompute them.

use ndarray::{Array1, Array2, ArrayView2};
use std::ops::Range;

use crate::data::{ReturnPanel, VolPanel};
use crate::error::{Error, Result};
use crate::features::LookbackPanel;
use crate::graph::pairwise_distances;
use crate::model::HeadInput;

/// One date's cross-section, ready for the differentiable pipeline.
#[derive(Debug, Clone)]
pub struct DateSample {
    /// Index into the panel's date axis.
    pub date_index: usize,
    /// Panel asset indices present in this cross-section, ascending.
    pub assets: Vec<usize>,
    /// `N_t×8` momentum features.
    pub u: Array2<f64>,
    /// `N_t×8δ` stacked lookback rows; only kept when the head reads them.
    pub v: Option<Array2<f64>>,
    /// Unit-mean pairwise distances between the lookback rows.
    pub h: Array1<f64>,
    /// Next-day simple returns `r_{t:t+1}`; NaN-filled for prediction-only
    /// samples.
    pub r_next: Array1<f64>,
    /// Annualized volatility `σ_{i,t}`; NaN-filled for prediction-only
    /// samples.
    pub sigma_ann: Array1<f64>,
    /// Regression targets `r_{t:t+1}/σ_{i,t}`; NaN-filled for
    /// prediction-only samples.
    pub target: Array1<f64>,
}

impl DateSample {
    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    /// The matrix the model head reads for this date.
    pub fn head_mat(&self, input: HeadInput) -> Result<ArrayView2<'_, f64>> {
        match input {
            HeadInput::Momentum => Ok(self.u.view()),
            HeadInput::Lookback => self.v.as_ref().map(|v| v.view()).ok_or_else(|| {
                Error::validation(
                    "sample was built without lookback rows but the head reads them",
                )
            }),
        }
    }

    pub fn has_targets(&self) -> bool {
        self.target.iter().all(|t| t.is_finite())
    }
}

/// Chronologically-ordered dates with valid cross-sections.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub dates: Vec<DateSample>,
}

impl SampleSet {
    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    /// Total number of (asset, date) samples.
    pub fn n_samples(&self) -> usize {
        self.dates.iter().map(|d| d.n_assets()).sum()
    }
}

/// Split chronologically into a training head and a validation tail holding
/// the most recent `valid_fraction` of dates (at least one each).
pub fn split_chronological(
    dates: &[DateSample],
    valid_fraction: f64,
) -> Result<(&[DateSample], &[DateSample])> {
    if !(0.0..1.0).contains(&valid_fraction) || valid_fraction <= 0.0 {
        return Err(Error::validation(format!(
            "validation fraction must be in (0, 1), got {valid_fraction}"
        )));
    }
    let n = dates.len();
    if n < 2 {
        return Err(Error::validation(format!(
            "need at least 2 dates to split train/validation, got {n}"
        )));
    }
    let n_val = ((n as f64 * valid_fraction).round() as usize).clamp(1, n - 1);
    Ok(dates.split_at(n - n_val))
}

fn build(
    lookback: &LookbackPanel<'_>,
    returns: &ReturnPanel,
    vols: &VolPanel,
    date_range: Range<usize>,
    keep_v: bool,
    require_targets: bool,
) -> Result<SampleSet> {
    let t_total = lookback.n_dates();
    let n_assets = lookback.n_assets();
    if returns.n_dates() != t_total
        || vols.n_dates() != t_total
        || returns.n_assets() != n_assets
        || vols.n_assets() != n_assets
    {
        return Err(Error::validation("sample build: panel shapes disagree"));
    }
    if date_range.end > t_total {
        return Err(Error::validation(format!(
            "sample build: date range end {} exceeds panel length {t_total}",
            date_range.end
        )));
    }

    // Targets must come from inside the requested range: the return into
    // `t + 1` is computed from the price at `t + 1`, so a sample at the
    // range's final date would otherwise read one day past its window.
    let range_end = date_range.end;
    let mut dates = Vec::new();
    for t in date_range {
        let assets: Vec<usize> = (0..n_assets)
            .filter(|&i| {
                if !lookback.valid[[t, i]] || !vols.available[[t, i]] {
                    return false;
                }
                if require_targets {
                    t + 1 < range_end && returns.available[[t + 1, i]]
                } else {
                    true
                }
            })
            .collect();
        // A graph needs at least two nodes; thinner cross-sections are
        // skipped entirely.
        if assets.len() < 2 {
            continue;
        }
        let v_mat = lookback.v_matrix(t, &assets);
        let dist = pairwise_distances(v_mat.view())?;
        let u = lookback.features.u_matrix(t, &assets);
        let n_t = assets.len();
        let (r_next, sigma_ann, target) = if require_targets {
            let r = Array1::from_shape_fn(n_t, |row| returns.returns[[t + 1, assets[row]]]);
            let s = Array1::from_shape_fn(n_t, |row| vols.sigma_ann[[t, assets[row]]]);
            let tgt = Array1::from_shape_fn(n_t, |row| r[row] / s[row]);
            (r, s, tgt)
        } else {
            let nan = Array1::from_elem(n_t, f64::NAN);
            (nan.clone(), nan.clone(), nan)
        };
        dates.push(DateSample {
            date_index: t,
            assets,
            u,
            v: keep_v.then_some(v_mat),
            h: dist.h,
            r_next,
            sigma_ann,
            target,
        });
    }
    Ok(SampleSet { dates })
}

/// Training samples over a half-open panel date range: every included
/// (asset, date) has a complete lookback row, a defined volatility, and a
/// next-day return realized inside the same range (so a training window
/// never reads a price at or past its end).
pub fn build_training_samples(
    lookback: &LookbackPanel<'_>,
    returns: &ReturnPanel,
    vols: &VolPanel,
    date_range: Range<usize>,
    keep_v: bool,
) -> Result<SampleSet> {
    build(lookback, returns, vols, date_range, keep_v, true)
}

/// Prediction samples: feature validity only, no next-day-return
/// requirement; the target fields are NaN-filled.
pub fn build_prediction_samples(
    lookback: &LookbackPanel<'_>,
    returns: &ReturnPanel,
    vols: &VolPanel,
    date_range: Range<usize>,
    keep_v: bool,
) -> Result<SampleSet> {
    build(lookback, returns, vols, date_range, keep_v, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{compute_returns, ewm_volatility, generate_synthetic, SyntheticSpec,
                      two_block_graph};
    use crate::features::{build_u, build_v, FeaturePanel};
    use crate::data::PricePanel;

    fn panel_and_features(n_days: usize, seed: u64) -> (PricePanel, FeaturePanel) {
        let panel = generate_synthetic(&SyntheticSpec {
            n_assets: 5,
            n_days,
            planted_graph: two_block_graph(5),
            trend_strength: 0.003,
            noise_scale: 0.008,
            seed,
        })
        .unwrap();
        let returns = compute_returns(&panel).unwrap();
        let vols = ewm_volatility(&returns, 60).unwrap();
        let features = build_u(&panel, &returns, &vols).unwrap();
        (panel, features)
    }

    #[test]
    fn training_samples_satisfy_membership_invariants() {
        let (panel, features) = panel_and_features(420, 31);
        let returns = compute_returns(&panel).unwrap();
        let vols = ewm_volatility(&returns, 60).unwrap();
        let lookback = build_v(&features, 5).unwrap();
        let set =
            build_training_samples(&lookback, &returns, &vols, 0..panel.n_dates(), false).unwrap();
        assert!(set.n_dates() > 0);
        let mut last_t = 0usize;
        for d in &set.dates {
            assert!(d.date_index >= last_t);
            last_t = d.date_index;
            assert!(d.n_assets() >= 2);
            assert_eq!(d.h.len(), d.n_assets() * (d.n_assets() - 1) / 2);
            assert!(d.v.is_none());
            for (row, &i) in d.assets.iter().enumerate() {
                assert!(lookback.valid[[d.date_index, i]]);
                assert!(vols.available[[d.date_index, i]]);
                assert!(returns.available[[d.date_index + 1, i]]);
                assert_eq!(d.r_next[row], returns.returns[[d.date_index + 1, i]]);
                assert_eq!(d.sigma_ann[row], vols.sigma_ann[[d.date_index, i]]);
                assert_eq!(d.target[row], d.r_next[row] / d.sigma_ann[row]);
                assert!(d.has_targets());
            }
        }
        // The last panel date can never be a training sample (no next-day
        // return).
        assert!(set.dates.last().unwrap().date_index < panel.n_dates() - 1);
    }

    #[test]
    fn prediction_samples_cover_the_final_date() {
        let (panel, features) = panel_and_features(420, 32);
        let returns = compute_returns(&panel).unwrap();
        let vols = ewm_volatility(&returns, 60).unwrap();
        let lookback = build_v(&features, 5).unwrap();
        let t = panel.n_dates();
        let train = build_training_samples(&lookback, &returns, &vols, 0..t, false).unwrap();
        let pred = build_prediction_samples(&lookback, &returns, &vols, 0..t, false).unwrap();
        assert_eq!(pred.dates.last().unwrap().date_index, t - 1);
        assert_eq!(pred.n_dates(), train.n_dates() + 1);
        assert!(!pred.dates.last().unwrap().has_targets());
    }

    #[test]
    fn keep_v_controls_lookback_storage_and_head_mat() {
        let (panel, features) = panel_and_features(420, 33);
        let returns = compute_returns(&panel).unwrap();
        let vols = ewm_volatility(&returns, 60).unwrap();
        let lookback = build_v(&features, 3).unwrap();
        let with_v =
            build_training_samples(&lookback, &returns, &vols, 0..panel.n_dates(), true).unwrap();
        let d = &with_v.dates[0];
        let v = d.v.as_ref().unwrap();
        assert_eq!(v.dim(), (d.n_assets(), 8 * 3));
        assert_eq!(v.view(), lookback.v_matrix(d.date_index, &d.assets).view());
        assert_eq!(d.head_mat(HeadInput::Lookback).unwrap().ncols(), 24);
        assert_eq!(d.head_mat(HeadInput::Momentum).unwrap().ncols(), 8);

        let without =
            build_training_samples(&lookback, &returns, &vols, 0..panel.n_dates(), false).unwrap();
        assert!(without.dates[0].head_mat(HeadInput::Lookback).is_err());
    }

    #[test]
    fn chronological_split_takes_the_most_recent_tail() {
        let (panel, features) = panel_and_features(460, 34);
        let returns = compute_returns(&panel).unwrap();
        let vols = ewm_volatility(&returns, 60).unwrap();
        let lookback = build_v(&features, 5).unwrap();
        let set =
            build_training_samples(&lookback, &returns, &vols, 0..panel.n_dates(), false).unwrap();
        let (train, val) = split_chronological(&set.dates, 0.1).unwrap();
        assert!(!train.is_empty() && !val.is_empty());
        let expected_val = ((set.n_dates() as f64 * 0.1).round() as usize).max(1);
        assert_eq!(val.len(), expected_val);
        assert!(train.last().unwrap().date_index < val[0].date_index);

        assert!(split_chronological(&set.dates, 0.0).is_err());
        assert!(split_chronological(&set.dates, 1.0).is_err());
        assert!(split_chronological(&set.dates[..1], 0.1).is_err());
    }

    #[test]
    fn gappy_asset_is_excluded_only_where_invalid() {
        let (panel, features) = panel_and_features(460, 35);
        let returns = compute_returns(&panel).unwrap();
        let vols = ewm_volatility(&returns, 60).unwrap();
        // Kill asset 2's features on one mid-panel day.
        let mut features = features;
        let hole = 400;
        features.valid[[hole, 2]] = false;
        let lookback = build_v(&features, 5).unwrap();
        let set =
            build_training_samples(&lookback, &returns, &vols, 0..panel.n_dates(), false).unwrap();
        for d in &set.dates {
            let has_2 = d.assets.contains(&2);
            if (hole..hole + 5).contains(&d.date_index) {
                assert!(!has_2, "asset 2 should be missing on {}", d.date_index);
            } else if d.date_index > hole + 5 && d.date_index < 450 {
                assert!(has_2);
            }
        }
    }
}

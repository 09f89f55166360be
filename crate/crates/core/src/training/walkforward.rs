//! Expanding-window walk-forward evaluation: per window, select
//! hyperparameters on the chronological validation tail, refit, and predict
//! the disjoint test slice; concatenated test predictions form the
//! out-of-sample record.  The learned pipeline and both regression baselines
//! share the same windowing so their records are directly comparable.

use ndarray::Array2;
use serde::Serialize;

use crate::data::{ReturnPanel, VolPanel};
use crate::error::{Error, Result};
use crate::features::LookbackPanel;
use crate::graph::SolverConfig;
use crate::model::{
    glinreg_fit, glinreg_predict, linreg_fit, linreg_predict, EnsembleCheckpoint, GlinregDate,
    HeadInput, ModelKind, GLINREG_GRID,
};

use super::samples::{
    build_prediction_samples, build_training_samples, split_chronological, DateSample,
};
use super::trainer::{
    sign_position, train_ensemble, train_one, EnsemblePredictor, TrainConfig, TrainCurve,
};

/// One walk-forward window: train on `[train_start, train_end)` (with the
/// most recent fraction as validation), trade `[test_start, test_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WalkWindow {
    pub train_start: usize,
    pub train_end: usize,
    pub test_start: usize,
    pub test_end: usize,
}

/// Ordered windows plus the validation fraction carved from each train span.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkForwardPlan {
    pub windows: Vec<WalkWindow>,
    /// Fraction of training dates reserved (chronologically last) for
    /// validation.
    pub valid_fraction: f64,
}

impl WalkForwardPlan {
    /// A single train/test split starting at date 0.
    pub fn single_split(train_end: usize, test_end: usize, valid_fraction: f64) -> Self {
        WalkForwardPlan {
            windows: vec![WalkWindow {
                train_start: 0,
                train_end,
                test_start: train_end,
                test_end,
            }],
            valid_fraction,
        }
    }

    /// Expanding windows: every window trains from date 0 up to its test
    /// start, and consecutive test slices of `test_len` dates tile the panel
    /// from `first_train_end` to `n_dates`.
    pub fn expanding(
        first_train_end: usize,
        test_len: usize,
        n_dates: usize,
        valid_fraction: f64,
    ) -> Result<Self> {
        if test_len < 1 {
            return Err(Error::validation("walk plan: test_len must be ≥ 1"));
        }
        if first_train_end < 1 || first_train_end >= n_dates {
            return Err(Error::validation(format!(
                "walk plan: first_train_end {first_train_end} must be in [1, {n_dates})"
            )));
        }
        let mut windows = Vec::new();
        let mut test_start = first_train_end;
        while test_start < n_dates {
            let test_end = (test_start + test_len).min(n_dates);
            windows.push(WalkWindow { train_start: 0, train_end: test_start, test_start, test_end });
            test_start = test_end;
        }
        let plan = WalkForwardPlan { windows, valid_fraction };
        plan.validate(n_dates)?;
        Ok(plan)
    }

    pub fn validate(&self, n_dates: usize) -> Result<()> {
        if !(self.valid_fraction > 0.0 && self.valid_fraction < 1.0) {
            return Err(Error::validation(format!(
                "walk plan: valid_fraction must be in (0, 1), got {}",
                self.valid_fraction
            )));
        }
        if self.windows.is_empty() {
            return Err(Error::validation("walk plan: needs at least one window"));
        }
        for (k, w) in self.windows.iter().enumerate() {
            if !(w.train_start < w.train_end
                && w.train_end <= w.test_start
                && w.test_start < w.test_end
                && w.test_end <= n_dates)
            {
                return Err(Error::validation(format!(
                    "walk plan: window {k} is malformed for a {n_dates}-date panel \
                     (train [{}, {}), test [{}, {}))",
                    w.train_start, w.train_end, w.test_start, w.test_end
                )));
            }
        }
        for k in 1..self.windows.len() {
            let prev = &self.windows[k - 1];
            let cur = &self.windows[k];
            if cur.test_start != prev.test_end {
                return Err(Error::validation(format!(
                    "walk plan: windows {} and {k} leave a gap or overlap in the test record",
                    k - 1
                )));
            }
            if cur.train_start > prev.train_start || cur.train_end < prev.train_end {
                return Err(Error::validation(format!(
                    "walk plan: window {k} does not expand on window {}",
                    k - 1
                )));
            }
        }
        Ok(())
    }
}

/// Borrowed panels a walk-forward run reads.
#[derive(Clone, Copy)]
pub struct PanelData<'a> {
    pub lookback: &'a LookbackPanel<'a>,
    pub returns: &'a ReturnPanel,
    pub vols: &'a VolPanel,
}

impl PanelData<'_> {
    pub fn n_dates(&self) -> usize {
        self.lookback.n_dates()
    }

    pub fn n_assets(&self) -> usize {
        self.lookback.n_assets()
    }
}

/// One evaluated grid configuration in a window's hyperparameter search.
#[derive(Debug, Clone, Serialize)]
pub struct GridPoint {
    pub depth: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Best validation loss the configuration reached; `None` if its
    /// training run failed numerically (the point is then skipped).
    pub val_loss: Option<f64>,
    pub note: Option<String>,
}

/// Everything recorded about one trained window.
#[derive(Debug, Clone, Serialize)]
pub struct WindowReport {
    pub window_index: usize,
    pub window: WalkWindow,
    pub train_dates: usize,
    pub val_dates: usize,
    pub test_dates: usize,
    pub grid: Vec<GridPoint>,
    pub chosen_depth: usize,
    pub chosen_batch_size: usize,
    pub chosen_learning_rate: f64,
    /// Validation loss of the seed member at the chosen configuration.
    pub best_val_loss: f64,
    pub curves: Vec<TrainCurve>,
    pub checkpoint_id: String,
}

/// Stitched out-of-sample record of the learned pipeline.
#[derive(Debug)]
pub struct WalkForwardResult {
    /// `dates × assets`; NaN marks (date, asset) pairs outside every test
    /// slice or without a valid cross-section, 0.0 is a deliberate flat.
    pub positions: Array2<f64>,
    pub reports: Vec<WindowReport>,
    pub ensembles: Vec<EnsembleCheckpoint>,
}

fn write_positions(
    positions: &mut Array2<f64>,
    date: &DateSample,
    values: &ndarray::Array1<f64>,
) {
    for (row, &asset) in date.assets.iter().enumerate() {
        positions[[date.date_index, asset]] = values[row];
    }
}

/// Run the full learned pipeline across a walk-forward plan.
pub fn walk_forward(
    data: &PanelData<'_>,
    plan: &WalkForwardPlan,
    cfg: &TrainConfig,
    kind: ModelKind,
) -> Result<WalkForwardResult> {
    cfg.validate()?;
    plan.validate(data.n_dates())?;
    let keep_v = cfg.head_input == HeadInput::Lookback;
    let mut positions = Array2::from_elem((data.n_dates(), data.n_assets()), f64::NAN);
    let mut reports = Vec::with_capacity(plan.windows.len());
    let mut ensembles = Vec::with_capacity(plan.windows.len());

    for (widx, w) in plan.windows.iter().enumerate() {
        let set = build_training_samples(
            data.lookback,
            data.returns,
            data.vols,
            w.train_start..w.train_end,
            keep_v,
        )?;
        if set.dates.len() < 2 {
            return Err(Error::validation(format!(
                "window {widx}: only {} valid training dates in [{}, {}) — \
                 the features' burn-in may cover the whole span",
                set.dates.len(),
                w.train_start,
                w.train_end
            )));
        }
        let (train, val) = split_chronological(&set.dates, plan.valid_fraction)?;

        // Hyperparameter selection on the validation tail (skipped when the
        // grid has a single point).
        let combos = cfg.grid.combos();
        let mut grid_points = Vec::new();
        let mut chosen = combos[0];
        if combos.len() > 1 {
            let mut best: Option<f64> = None;
            for (depth, batch, lr) in combos {
                let mut c = cfg.clone();
                c.depth = depth;
                c.batch_size = batch;
                c.learning_rate = lr;
                c.ensemble_size = 1;
                match train_one(kind, train, val, &c, cfg.seed) {
                    Ok((_, curve)) => {
                        let v = curve.best_val_loss;
                        if best.map_or(true, |b| v < b) {
                            best = Some(v);
                            chosen = (depth, batch, lr);
                        }
                        grid_points.push(GridPoint {
                            depth,
                            batch_size: batch,
                            learning_rate: lr,
                            val_loss: Some(v),
                            note: None,
                        });
                    }
                    Err(e @ (Error::Validation(_) | Error::Io(_))) => return Err(e),
                    Err(e) => grid_points.push(GridPoint {
                        depth,
                        batch_size: batch,
                        learning_rate: lr,
                        val_loss: None,
                        note: Some(e.to_string()),
                    }),
                }
            }
            if best.is_none() {
                return Err(Error::numeric(format!(
                    "window {widx}: every grid configuration failed to train"
                )));
            }
        }

        let mut refit = cfg.clone();
        refit.depth = chosen.0;
        refit.batch_size = chosen.1;
        refit.learning_rate = chosen.2;
        let (ensemble, curves) = train_ensemble(kind, train, val, &refit)
            .map_err(|e| match e {
                Error::Validation(m) => Error::validation(format!("window {widx}: {m}")),
                Error::Numeric(m) => Error::numeric(format!("window {widx}: {m}")),
                other => other,
            })?;

        let pred = build_prediction_samples(
            data.lookback,
            data.returns,
            data.vols,
            w.test_start..w.test_end,
            keep_v,
        )?;
        let predictor = EnsemblePredictor::new(&ensemble)?;
        for d in &pred.dates {
            let pos = predictor.positions(d)?;
            write_positions(&mut positions, d, &pos);
        }

        reports.push(WindowReport {
            window_index: widx,
            window: *w,
            train_dates: train.len(),
            val_dates: val.len(),
            test_dates: pred.dates.len(),
            grid: grid_points,
            chosen_depth: refit.depth,
            chosen_batch_size: refit.batch_size,
            chosen_learning_rate: refit.learning_rate,
            best_val_loss: curves[0].best_val_loss,
            curves,
            checkpoint_id: ensemble.id(),
        });
        ensembles.push(ensemble);
    }

    Ok(WalkForwardResult { positions, reports, ensembles })
}

/// One window of the plain-regression baseline.
#[derive(Debug, Clone, Serialize)]
pub struct LinregWindowReport {
    pub window_index: usize,
    pub window: WalkWindow,
    pub train_dates: usize,
    pub test_dates: usize,
    pub theta: Vec<f64>,
    pub b: f64,
}

#[derive(Debug)]
pub struct LinregResult {
    pub positions: Array2<f64>,
    pub reports: Vec<LinregWindowReport>,
}

/// Walk-forward pooled linear regression of volatility-scaled next-day
/// returns on the momentum features.  The fit is closed-form, so the whole
/// training span (validation tail included) is pooled into one system.
pub fn walk_forward_linreg(data: &PanelData<'_>, plan: &WalkForwardPlan) -> Result<LinregResult> {
    plan.validate(data.n_dates())?;
    let mut positions = Array2::from_elem((data.n_dates(), data.n_assets()), f64::NAN);
    let mut reports = Vec::with_capacity(plan.windows.len());

    for (widx, w) in plan.windows.iter().enumerate() {
        let set = build_training_samples(
            data.lookback,
            data.returns,
            data.vols,
            w.train_start..w.train_end,
            false,
        )?;
        if set.dates.is_empty() {
            return Err(Error::validation(format!(
                "window {widx}: no valid training dates in [{}, {})",
                w.train_start, w.train_end
            )));
        }
        let rows = set.n_samples();
        let n_feat = set.dates[0].u.ncols();
        let mut x = Array2::<f64>::zeros((rows, n_feat));
        let mut y = ndarray::Array1::<f64>::zeros(rows);
        let mut q = 0usize;
        for d in &set.dates {
            for row in 0..d.n_assets() {
                x.row_mut(q).assign(&d.u.row(row));
                y[q] = d.target[row];
                q += 1;
            }
        }
        let head = linreg_fit(x.view(), y.view())?;

        let pred = build_prediction_samples(
            data.lookback,
            data.returns,
            data.vols,
            w.test_start..w.test_end,
            false,
        )?;
        for d in &pred.dates {
            let yhat = linreg_predict(d.u.view(), &head)?;
            let pos = yhat.mapv(sign_position);
            write_positions(&mut positions, d, &pos);
        }

        reports.push(LinregWindowReport {
            window_index: widx,
            window: *w,
            train_dates: set.dates.len(),
            test_dates: pred.dates.len(),
            theta: head.theta.to_vec(),
            b: head.b,
        });
    }

    Ok(LinregResult { positions, reports })
}

/// One window of the graph-regression baseline.
#[derive(Debug, Clone, Serialize)]
pub struct GlinregWindowReport {
    pub window_index: usize,
    pub window: WalkWindow,
    pub train_dates: usize,
    pub val_dates: usize,
    pub test_dates: usize,
    /// Selected graph-penalty pair.
    pub alpha: f64,
    pub beta: f64,
    pub val_mse: f64,
    /// Training dates the final fit dropped because the fixed-parameter
    /// solver did not converge on them.
    pub skipped_dates: usize,
    pub theta: Vec<f64>,
    pub b: f64,
}

#[derive(Debug)]
pub struct GlinregResult {
    pub positions: Array2<f64>,
    pub reports: Vec<GlinregWindowReport>,
}

fn glinreg_views<'a>(dates: &'a [DateSample]) -> Vec<GlinregDate<'a>> {
    dates
        .iter()
        .map(|d| GlinregDate {
            h: d.h.view(),
            n: d.n_assets(),
            u: d.u.view(),
            targets: d.target.view(),
        })
        .collect()
}

/// Walk-forward graph-regression baseline: per window, grid-select the fixed
/// graph penalties on the validation tail, refit pooled coefficients, and
/// trade the sign of the prediction.
pub fn walk_forward_glinreg(
    data: &PanelData<'_>,
    plan: &WalkForwardPlan,
    solver: &SolverConfig,
) -> Result<GlinregResult> {
    plan.validate(data.n_dates())?;
    let mut positions = Array2::from_elem((data.n_dates(), data.n_assets()), f64::NAN);
    let mut reports = Vec::with_capacity(plan.windows.len());

    for (widx, w) in plan.windows.iter().enumerate() {
        let set = build_training_samples(
            data.lookback,
            data.returns,
            data.vols,
            w.train_start..w.train_end,
            false,
        )?;
        if set.dates.len() < 2 {
            return Err(Error::validation(format!(
                "window {widx}: only {} valid training dates in [{}, {})",
                set.dates.len(),
                w.train_start,
                w.train_end
            )));
        }
        let (train, val) = split_chronological(&set.dates, plan.valid_fraction)?;
        let train_views = glinreg_views(train);
        let val_views = glinreg_views(val);
        let fit = glinreg_fit(&train_views, &val_views, &GLINREG_GRID, &GLINREG_GRID, solver)
            .map_err(|e| match e {
                Error::Validation(m) => Error::validation(format!("window {widx}: {m}")),
                Error::Numeric(m) => Error::numeric(format!("window {widx}: {m}")),
                other => other,
            })?;

        let pred = build_prediction_samples(
            data.lookback,
            data.returns,
            data.vols,
            w.test_start..w.test_end,
            false,
        )?;
        for d in &pred.dates {
            let yhat = glinreg_predict(d.h.view(), d.n_assets(), d.u.view(), &fit, solver)?;
            let pos = yhat.mapv(sign_position);
            write_positions(&mut positions, d, &pos);
        }

        reports.push(GlinregWindowReport {
            window_index: widx,
            window: *w,
            train_dates: train.len(),
            val_dates: val.len(),
            test_dates: pred.dates.len(),
            alpha: fit.alpha,
            beta: fit.beta,
            val_mse: fit.val_mse,
            skipped_dates: fit.skipped_dates,
            theta: fit.head.theta.to_vec(),
            b: fit.head.b,
        });
    }

    Ok(GlinregResult { positions, reports })
}

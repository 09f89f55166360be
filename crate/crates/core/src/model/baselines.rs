//! Closed-form reference predictors: a pooled ridge regression on the raw
//! momentum features, and the same regression on graph-averaged features
//! where the graph comes from the non-unrolled solver with penalty weights
//! chosen on a validation grid.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{pds_solve, SolverConfig};
use crate::linalg::ridge_normal_solve;

use super::graphnorm::normalize_graph;
use super::heads::HeadParams;

/// Ridge added to the normal equations to keep them well-posed.
const FIT_RIDGE: f64 = 1e-6;

/// Penalty-weight grid searched by [`glinreg_fit`], for both weights.
pub const GLINREG_GRID: [f64; 4] = [0.1, 0.5, 1.0, 2.0];

/// Pooled least squares with an intercept and a small ridge.
///
/// Rows of `x` are observations; returns weights over the columns plus the
/// intercept.
pub fn linreg_fit(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<HeadParams> {
    let (n, f) = (x.nrows(), x.ncols());
    if f == 0 {
        return Err(Error::validation("linreg: design matrix has no columns"));
    }
    if y.len() != n {
        return Err(Error::validation(format!(
            "linreg: {n} rows but {} targets",
            y.len()
        )));
    }
    if n < f + 1 {
        return Err(Error::validation(format!(
            "linreg: {n} observations cannot determine {f} weights plus an intercept"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("linreg: inputs must be finite"));
    }

    // Design with the intercept as a trailing all-ones column.
    let d = f + 1;
    let mut xtx = Array2::<f64>::zeros((d, d));
    let mut xty = Array1::<f64>::zeros(d);
    for r in 0..n {
        let row = x.row(r);
        for i in 0..f {
            for j in i..f {
                xtx[[i, j]] += row[i] * row[j];
            }
            xtx[[i, f]] += row[i];
            xty[i] += row[i] * y[r];
        }
        xtx[[f, f]] += 1.0;
        xty[f] += y[r];
    }
    for i in 0..d {
        for j in 0..i {
            xtx[[i, j]] = xtx[[j, i]];
        }
    }
    let sol = ridge_normal_solve(&xtx, &xty, FIT_RIDGE)?;
    Ok(HeadParams {
        theta: sol.slice(ndarray::s![..f]).to_owned(),
        b: sol[f],
    })
}

/// Evaluate a fitted head on raw feature rows: `x θ + b`.
pub fn linreg_predict(x: ArrayView2<f64>, head: &HeadParams) -> Result<Array1<f64>> {
    if x.ncols() != head.theta.len() {
        return Err(Error::validation(format!(
            "linreg: {} feature columns but head has {} weights",
            x.ncols(),
            head.theta.len()
        )));
    }
    Ok(x.dot(&head.theta) + head.b)
}

/// One cross-sectional observation for the graph-regression baseline:
/// lookback rows feeding the graph, momentum features feeding the head,
/// and the per-asset regression targets.
#[derive(Debug, Clone, Copy)]
pub struct GlinregDate<'a> {
    /// Unit-mean pairwise distances between the assets' lookback rows
    /// (strict upper triangle, row-major), as produced by
    /// [`pairwise_distances`].
    pub h: ArrayView1<'a, f64>,
    /// Number of assets in the cross-section.
    pub n: usize,
    pub u: ArrayView2<'a, f64>,
    pub targets: ArrayView1<'a, f64>,
}

/// Result of the grid-searched graph-regression fit.
#[derive(Debug, Clone)]
pub struct GlinregFit {
    pub head: HeadParams,
    /// Selected log-barrier weight.
    pub alpha: f64,
    /// Selected edge-spread weight.
    pub beta: f64,
    /// Validation MSE of the selected pair.
    pub val_mse: f64,
    /// Dates excluded from the final fit because the solver did not reach
    /// tolerance under the selected weights.
    pub skipped_dates: usize,
}

fn check_date(d: &GlinregDate<'_>, n_features: usize, where_: &str) -> Result<()> {
    let n = d.n;
    if n < 2 {
        return Err(Error::validation(format!(
            "glinreg: {where_} date has {n} assets, need at least 2"
        )));
    }
    if d.h.len() != n * (n - 1) / 2 {
        return Err(Error::validation(format!(
            "glinreg: {where_} date has {} distances for {n} assets (expected {})",
            d.h.len(),
            n * (n - 1) / 2
        )));
    }
    if d.u.nrows() != n || d.targets.len() != n {
        return Err(Error::validation(format!(
            "glinreg: {where_} date has inconsistent row counts ({n} assets, {} feature rows, {} targets)",
            d.u.nrows(),
            d.targets.len()
        )));
    }
    if d.u.ncols() != n_features {
        return Err(Error::validation(format!(
            "glinreg: {where_} date has {} feature columns, expected {n_features}",
            d.u.ncols()
        )));
    }
    if d.targets.iter().any(|v| !v.is_finite()) || d.u.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation(format!("glinreg: {where_} date has non-finite values")));
    }
    Ok(())
}

/// Graph-averaged feature rows for one date under given penalty weights,
/// or `None` when the solve does not reach tolerance.
fn date_features(
    d: &GlinregDate<'_>,
    alpha: f64,
    beta: f64,
    solver: &SolverConfig,
) -> Result<Option<(Array2<f64>, Array1<f64>)>> {
    let cfg = SolverConfig { alpha, beta, ..solver.clone() };
    let est = pds_solve(d.h, d.n, &cfg)?;
    if !est.converged {
        return Ok(None);
    }
    let a_tilde = normalize_graph(est.a.view())?;
    Ok(Some((a_tilde.dot(&d.u), d.targets.to_owned())))
}

/// Stack per-date feature blocks into one pooled design matrix.
fn pool(blocks: &[(Array2<f64>, Array1<f64>)]) -> Result<(Array2<f64>, Array1<f64>)> {
    let x_views: Vec<_> = blocks.iter().map(|(x, _)| x.view()).collect();
    let y_views: Vec<_> = blocks.iter().map(|(_, y)| y.view()).collect();
    let x = ndarray::concatenate(Axis(0), &x_views)
        .map_err(|e| Error::validation(format!("glinreg: cannot pool feature blocks: {e}")))?;
    let y = ndarray::concatenate(Axis(0), &y_views)
        .map_err(|e| Error::validation(format!("glinreg: cannot pool target blocks: {e}")))?;
    Ok((x, y))
}

/// Pooled ridge fit over per-date feature blocks (shared by the grid search
/// and the final refit).
fn pooled_fit(blocks: &[(Array2<f64>, Array1<f64>)]) -> Result<HeadParams> {
    let (x, y) = pool(blocks)?;
    linreg_fit(x.view(), y.view())
}

fn pooled_mse(blocks: &[(Array2<f64>, Array1<f64>)], head: &HeadParams) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (x, y) in blocks {
        let pred = linreg_predict(x.view(), head)?;
        for (p, t) in pred.iter().zip(y.iter()) {
            let e = p - t;
            sum += e * e;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::validation("glinreg: no observations to score"));
    }
    Ok(sum / count as f64)
}

/// Fit the graph-regression baseline: for every penalty pair on the grids,
/// learn one graph per training date with the iterative solver, regress the
/// targets on the graph-averaged features, score on the validation dates,
/// then refit the winning pair on training and validation together.
///
/// Dates whose solve does not reach tolerance are excluded from fitting and
/// scoring (and counted in [`GlinregFit::skipped_dates`] for the final fit).
pub fn glinreg_fit(
    train: &[GlinregDate<'_>],
    val: &[GlinregDate<'_>],
    alpha_grid: &[f64],
    beta_grid: &[f64],
    solver: &SolverConfig,
) -> Result<GlinregFit> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::validation("glinreg: need non-empty training and validation dates"));
    }
    if alpha_grid.is_empty() || beta_grid.is_empty() {
        return Err(Error::validation("glinreg: penalty grids must be non-empty"));
    }
    for g in alpha_grid.iter().chain(beta_grid.iter()) {
        if !g.is_finite() || *g <= 0.0 {
            return Err(Error::validation("glinreg: penalty grid values must be positive"));
        }
    }
    let n_features = train[0].u.ncols();
    for d in train {
        check_date(d, n_features, "training")?;
    }
    for d in val {
        check_date(d, n_features, "validation")?;
    }

    let mut best: Option<(f64, f64, f64, HeadParams)> = None;
    for &alpha in alpha_grid {
        for &beta in beta_grid {
            let train_blocks: Vec<_> = train
                .par_iter()
                .map(|d| date_features(d, alpha, beta, solver))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            let val_blocks: Vec<_> = val
                .par_iter()
                .map(|d| date_features(d, alpha, beta, solver))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            if train_blocks.is_empty() || val_blocks.is_empty() {
                continue; // this pair produced no usable dates
            }
            let head = match pooled_fit(&train_blocks) {
                Ok(h) => h,
                Err(Error::Validation { .. }) => continue, // too few pooled rows
                Err(e) => return Err(e),
            };
            let mse = pooled_mse(&val_blocks, &head)?;
            let better = match &best {
                None => true,
                Some((best_mse, _, _, _)) => mse < *best_mse,
            };
            if better {
                best = Some((mse, alpha, beta, head));
            }
        }
    }
    let (val_mse, alpha, beta, _) = best.ok_or_else(|| {
        Error::numeric("glinreg: no penalty pair produced converged graphs on both splits")
    })?;

    // Refit the winner on training + validation.
    let solve_all = |dates: &[GlinregDate<'_>]| -> Result<Vec<Option<(Array2<f64>, Array1<f64>)>>> {
        dates.par_iter().map(|d| date_features(d, alpha, beta, solver)).collect()
    };
    let mut blocks = solve_all(train)?;
    blocks.extend(solve_all(val)?);
    let skipped_dates = blocks.iter().filter(|b| b.is_none()).count();
    let kept: Vec<_> = blocks.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::numeric("glinreg: final refit has no converged dates"));
    }
    let head = pooled_fit(&kept)?;
    Ok(GlinregFit { head, alpha, beta, val_mse, skipped_dates })
}

/// Predict one date with a fitted graph regression: learn the graph under
/// the selected weights, average the features, apply the head.
///
/// The final solver iterate is used even when tolerance was not reached, so
/// every date yields a prediction.
pub fn glinreg_predict(
    h: ArrayView1<f64>,
    n: usize,
    u: ArrayView2<f64>,
    fit: &GlinregFit,
    solver: &SolverConfig,
) -> Result<Array1<f64>> {
    if u.nrows() != n {
        return Err(Error::validation(format!(
            "glinreg: {} feature rows for a {n}-asset cross-section",
            u.nrows()
        )));
    }
    let cfg = SolverConfig { alpha: fit.alpha, beta: fit.beta, ..solver.clone() };
    let est = pds_solve(h, n, &cfg)?;
    let a_tilde = normalize_graph(est.a.view())?;
    linreg_predict(a_tilde.dot(&u).view(), &fit.head)
}

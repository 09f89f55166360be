//! Gradient training of the differentiable pipeline: whole-date mini-batches,
//! Adam updates over the head and per-layer penalty parameters, chronological
//! early stopping with best-checkpoint retention, and seed ensembles.

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    model_backward, model_pass_from_h, Checkpoint, EnsembleCheckpoint, HeadInput, HeadParams,
    ModelKind, ModelPass,
};
use crate::unroll::{UnrollParams, DEFAULT_UNROLL_DEPTH};
use crate::TARGET_VOL;

use super::adam::{Adam, AdamConfig};
use super::loss::{mse_with_grad, neg_sharpe_with_grad, SHARPE_EPSILON};
use super::samples::DateSample;

/// Which objective drives the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    NegSharpe,
}

impl LossKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::NegSharpe => "neg_sharpe",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "neg_sharpe" => Ok(LossKind::NegSharpe),
            other => Err(Error::validation(format!("unknown loss '{other}'"))),
        }
    }

    /// The objective each model kind is normally trained with.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Trend => LossKind::Mse,
            ModelKind::Position => LossKind::NegSharpe,
        }
    }
}

/// Hyperparameter search space for walk-forward validation: unrolling
/// depths, dates-per-batch sizes, and Adam learning rates, crossed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperGrid {
    pub depths: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            depths: vec![5, 10, 20, 40],
            batch_sizes: vec![32],
            learning_rates: vec![1e-2, 1e-3, 1e-4],
        }
    }
}

impl HyperGrid {
    pub fn validate(&self) -> Result<()> {
        if self.depths.is_empty() || self.batch_sizes.is_empty() || self.learning_rates.is_empty()
        {
            return Err(Error::validation("hyper grid: every axis needs at least one value"));
        }
        if self.depths.iter().any(|&d| d < 1) {
            return Err(Error::validation("hyper grid: depths must be ≥ 1"));
        }
        if self.batch_sizes.iter().any(|&b| b < 1) {
            return Err(Error::validation("hyper grid: batch sizes must be ≥ 1"));
        }
        if self.learning_rates.iter().any(|&lr| !lr.is_finite() || lr <= 0.0) {
            return Err(Error::validation(
                "hyper grid: learning rates must be finite and positive",
            ));
        }
        Ok(())
    }

    /// A one-point grid pinned to a config's scalar choices.
    pub fn singleton(cfg: &TrainConfig) -> Self {
        HyperGrid {
            depths: vec![cfg.depth],
            batch_sizes: vec![cfg.batch_size],
            learning_rates: vec![cfg.learning_rate],
        }
    }

    /// All `(depth, batch_size, learning_rate)` combinations, depth-major.
    pub fn combos(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(
            self.depths.len() * self.batch_sizes.len() * self.learning_rates.len(),
        );
        for &d in &self.depths {
            for &b in &self.batch_sizes {
                for &lr in &self.learning_rates {
                    out.push((d, b, lr));
                }
            }
        }
        out
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    /// Dates per mini-batch (each batch is the full cross-section of those
    /// dates, matching the pooled losses).
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without sufficient validation improvement before stopping.
    pub patience: usize,
    /// Required relative improvement of the validation loss, scaled by
    /// `max(1, |best|)`.
    pub min_delta: f64,
    pub ensemble_size: usize,
    pub seed: u64,
    /// Unrolling depth of the graph layer.
    pub depth: usize,
    pub head_input: HeadInput,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Search space for walk-forward hyperparameter selection; the scalar
    /// fields above are what a single training run uses.
    pub grid: HyperGrid,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            loss: LossKind::Mse,
            learning_rate: adam.learning_rate,
            batch_size: 32,
            max_epochs: 300,
            patience: 10,
            min_delta: 1e-4,
            ensemble_size: 5,
            seed: 42,
            depth: DEFAULT_UNROLL_DEPTH,
            head_input: HeadInput::Momentum,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_epsilon: adam.epsilon,
            grid: HyperGrid::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam_config().validate()?;
        if self.batch_size < 1 {
            return Err(Error::validation("train config: batch_size must be ≥ 1"));
        }
        if self.max_epochs < 1 {
            return Err(Error::validation("train config: max_epochs must be ≥ 1"));
        }
        if self.patience < 1 {
            return Err(Error::validation("train config: patience must be ≥ 1"));
        }
        if !self.min_delta.is_finite() || self.min_delta < 0.0 {
            return Err(Error::validation("train config: min_delta must be finite and ≥ 0"));
        }
        if self.ensemble_size < 1 {
            return Err(Error::validation("train config: ensemble_size must be ≥ 1"));
        }
        if self.depth < 1 {
            return Err(Error::validation("train config: depth must be ≥ 1"));
        }
        self.grid.validate()
    }

    fn adam_config(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.adam_epsilon,
        }
    }

    fn check_kind(&self, kind: ModelKind) -> Result<()> {
        if self.loss == LossKind::NegSharpe && kind == ModelKind::Trend {
            return Err(Error::validation(
                "negative-Sharpe training requires the position-output model (l2gmom_sr); \
                 the trend model's positions come from a non-differentiable sign",
            ));
        }
        Ok(())
    }
}

/// Per-epoch loss trace of one training run.
#[derive(Debug, Clone, Serialize)]
pub struct TrainCurve {
    /// Mean batch loss per epoch.
    pub train_loss: Vec<f64>,
    /// Pooled validation loss per epoch.
    pub val_loss: Vec<f64>,
    /// Epoch (1-based) whose parameters the returned checkpoint holds.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Epochs actually run before stopping.
    pub stopped_epoch: usize,
}

/// All trainable parameters of one model.
struct Model {
    head: HeadParams,
    unroll: UnrollParams,
    kind: ModelKind,
    head_input: HeadInput,
}

impl Model {
    fn init(
        kind: ModelKind,
        head_input: HeadInput,
        n_features: usize,
        depth: usize,
        rng: &mut ChaCha12Rng,
    ) -> Result<Self> {
        let theta = Array1::from_shape_fn(n_features, |_| rng.random::<f64>() * 0.1 - 0.05);
        let head = HeadParams { theta, b: 0.0 };
        let base = UnrollParams::new(depth)?;
        let jitter = |raw: ArrayView1<f64>, rng: &mut ChaCha12Rng| {
            raw.mapv(|x| x + rng.random::<f64>() * 0.04 - 0.02)
        };
        let raw_alpha = jitter(base.raw_alpha(), rng);
        let raw_beta = jitter(base.raw_beta(), rng);
        let raw_gamma = jitter(base.raw_gamma(), rng);
        let unroll = UnrollParams::from_raw(raw_alpha, raw_beta, raw_gamma)?;
        Ok(Model { head, unroll, kind, head_input })
    }

    fn from_checkpoint(cp: &Checkpoint) -> Result<Self> {
        Ok(Model {
            head: cp.head()?,
            unroll: cp.unroll()?,
            kind: cp.model_kind()?,
            head_input: cp.model_input()?,
        })
    }

    fn n_flat(&self) -> usize {
        self.head.n_flat() + self.unroll.n_flat()
    }

    fn flat(&self) -> Array1<f64> {
        let mut out = Array1::zeros(self.n_flat());
        let f = self.head.theta.len();
        out.slice_mut(s![..f]).assign(&self.head.theta);
        out[f] = self.head.b;
        out.slice_mut(s![f + 1..]).assign(&self.unroll.flat());
        out
    }

    fn assign_flat(&mut self, flat: ArrayView1<f64>) -> Result<()> {
        let f = self.head.theta.len();
        if flat.len() != self.n_flat() {
            return Err(Error::validation("model: flat parameter length mismatch"));
        }
        self.head.theta.assign(&flat.slice(s![..f]));
        self.head.b = flat[f];
        self.unroll.assign_flat(flat.slice(s![f + 1..]))
    }

    fn pass(&self, d: &DateSample) -> Result<ModelPass> {
        let mat = d.head_mat(self.head_input)?;
        model_pass_from_h(d.h.view(), d.n_assets(), mat, &self.unroll, &self.head, self.kind)
    }
}

/// Pooled loss and flat-parameter gradient over one batch of dates.
fn batch_loss_grad(
    dates: &[&DateSample],
    model: &Model,
    loss: LossKind,
) -> Result<(f64, Array1<f64>)> {
    let passes: Vec<ModelPass> =
        dates.par_iter().map(|d| model.pass(d)).collect::<Result<Vec<_>>>()?;

    // Pool the per-date outputs, keeping offsets to split gradients back.
    let total: usize = dates.iter().map(|d| d.n_assets()).sum();
    let mut pooled_pred = Array1::<f64>::zeros(total);
    let mut pooled_aux = Array1::<f64>::zeros(total);
    let mut offset = 0usize;
    let mut offsets = Vec::with_capacity(dates.len());
    for (d, p) in dates.iter().zip(passes.iter()) {
        offsets.push(offset);
        for row in 0..d.n_assets() {
            pooled_pred[offset + row] = p.values[row];
            pooled_aux[offset + row] = d.target[row];
        }
        offset += d.n_assets();
    }

    // Loss and its gradient with respect to each pooled model output.
    let (loss_value, grad_values) = match loss {
        LossKind::Mse => mse_with_grad(pooled_pred.view(), pooled_aux.view())?,
        LossKind::NegSharpe => {
            // R_q = x_q · (σ_tgt/σ_q) · r_q over the pooled batch.
            let mut r = Array1::<f64>::zeros(total);
            let mut scale = Array1::<f64>::zeros(total);
            for (k, d) in dates.iter().enumerate() {
                for row in 0..d.n_assets() {
                    let q = offsets[k] + row;
                    scale[q] = TARGET_VOL / d.sigma_ann[row] * d.r_next[row];
                    r[q] = pooled_pred[q] * scale[q];
                }
            }
            let (l, grad_r) = neg_sharpe_with_grad(r.view(), SHARPE_EPSILON)?;
            let grad_x = Array1::from_shape_fn(total, |q| grad_r[q] * scale[q]);
            (l, grad_x)
        }
    };

    // Reverse through each date's pass, then reduce in date order so the
    // result is deterministic regardless of thread scheduling.
    let per_date: Vec<_> = passes
        .par_iter()
        .enumerate()
        .map(|(k, pass)| {
            let n = dates[k].n_assets();
            let g = grad_values.slice(s![offsets[k]..offsets[k] + n]);
            model_backward(pass, g)
        })
        .collect::<Result<Vec<_>>>()?;
    let f = model.head.theta.len();
    let mut grad = Array1::<f64>::zeros(model.n_flat());
    for g in per_date {
        grad.slice_mut(s![..f]).zip_mut_with(&g.theta, |a, b| *a += b);
        grad[f] += g.b;
        grad.slice_mut(s![f + 1..]).zip_mut_with(&g.unroll.flat(), |a, b| *a += b);
    }
    Ok((loss_value, grad))
}

/// Pooled loss of a model over a full set of dates (no gradients).
fn eval_loss(dates: &[DateSample], model: &Model, loss: LossKind) -> Result<f64> {
    if dates.is_empty() {
        return Err(Error::validation("evaluation needs at least one date"));
    }
    let values: Vec<Array1<f64>> = dates
        .par_iter()
        .map(|d| model.pass(d).map(|p| p.values))
        .collect::<Result<Vec<_>>>()?;
    let total: usize = dates.iter().map(|d| d.n_assets()).sum();
    let mut pred = Array1::<f64>::zeros(total);
    let mut aux = Array1::<f64>::zeros(total);
    let mut q = 0usize;
    for (d, v) in dates.iter().zip(values.iter()) {
        for row in 0..d.n_assets() {
            pred[q] = v[row];
            aux[q] = match loss {
                LossKind::Mse => d.target[row],
                LossKind::NegSharpe => TARGET_VOL / d.sigma_ann[row] * d.r_next[row],
            };
            q += 1;
        }
    }
    match loss {
        LossKind::Mse => super::loss::loss_mse(pred.view(), aux.view()),
        LossKind::NegSharpe => {
            let r = Array1::from_shape_fn(total, |i| pred[i] * aux[i]);
            super::loss::neg_sharpe_of(r.view(), SHARPE_EPSILON)
        }
    }
}

/// Validation loss of a stored checkpoint over a date set.
pub fn evaluate_checkpoint(
    cp: &Checkpoint,
    dates: &[DateSample],
    loss: LossKind,
) -> Result<f64> {
    let model = Model::from_checkpoint(cp)?;
    eval_loss(dates, &model, loss)
}

/// Train one model: Adam over whole-date mini-batches with chronological
/// validation, early stopping after `patience` stale epochs, and retention
/// of the best-validation parameters.
pub fn train_one(
    kind: ModelKind,
    train: &[DateSample],
    val: &[DateSample],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Checkpoint, TrainCurve)> {
    cfg.validate()?;
    cfg.check_kind(kind)?;
    if train.is_empty() {
        return Err(Error::validation("training needs at least one training date"));
    }
    if val.is_empty() {
        return Err(Error::validation("training needs at least one validation date"));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_features = train[0].head_mat(cfg.head_input)?.ncols();
    let mut model = Model::init(kind, cfg.head_input, n_features, cfg.depth, &mut rng)?;
    let mut flat = model.flat();
    let mut adam = Adam::new(flat.len(), cfg.adam_config())?;

    let mut curve = TrainCurve {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_epoch: 0,
    };
    let mut best_flat = flat.clone();
    let mut patience_ref = f64::INFINITY;
    let mut stale_epochs = 0usize;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut batch_losses = Vec::new();
        for batch in order.chunks(cfg.batch_size) {
            let dates: Vec<&DateSample> = batch.iter().map(|&i| &train[i]).collect();
            model.assign_flat(flat.view())?;
            let (batch_loss, grad) = batch_loss_grad(&dates, &model, cfg.loss)?;
            if !batch_loss.is_finite() {
                return Err(Error::numeric(format!(
                    "training diverged at epoch {epoch}: batch loss {batch_loss}"
                )));
            }
            adam.step(&mut flat, grad.view())?;
            if flat.iter().any(|p| !p.is_finite()) {
                return Err(Error::numeric(format!(
                    "training diverged at epoch {epoch}: non-finite parameters after update"
                )));
            }
            batch_losses.push(batch_loss);
        }
        let train_loss = batch_losses.iter().sum::<f64>() / batch_losses.len() as f64;

        model.assign_flat(flat.view())?;
        let val_loss = eval_loss(val, &model, cfg.loss)?;
        if !val_loss.is_finite() {
            return Err(Error::numeric(format!(
                "training diverged at epoch {epoch}: validation loss {val_loss}"
            )));
        }
        curve.train_loss.push(train_loss);
        curve.val_loss.push(val_loss);
        curve.stopped_epoch = epoch;

        // Best-checkpoint retention tracks the strict minimum …
        if val_loss < curve.best_val_loss {
            curve.best_val_loss = val_loss;
            curve.best_epoch = epoch;
            best_flat.assign(&flat);
        }
        // … while the patience clock only resets on material improvement.
        let threshold = cfg.min_delta * patience_ref.abs().max(1.0);
        if val_loss < patience_ref - threshold {
            patience_ref = val_loss;
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.patience {
                break;
            }
        }
    }

    model.assign_flat(best_flat.view())?;
    let checkpoint = Checkpoint::new(kind, cfg.head_input, &model.head, &model.unroll);
    Ok((checkpoint, curve))
}

/// Train `ensemble_size` members from consecutive seeds, in parallel.
pub fn train_ensemble(
    kind: ModelKind,
    train: &[DateSample],
    val: &[DateSample],
    cfg: &TrainConfig,
) -> Result<(EnsembleCheckpoint, Vec<TrainCurve>)> {
    cfg.validate()?;
    let results: Vec<(Checkpoint, TrainCurve)> = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|k| {
            train_one(kind, train, val, cfg, cfg.seed.wrapping_add(k as u64)).map_err(|e| {
                match e {
                    Error::Io { .. } => e,
                    other => match other.category() {
                        "validation" => Error::validation(format!("ensemble member {k}: {other}")),
                        _ => Error::numeric(format!("ensemble member {k}: {other}")),
                    },
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (members, curves): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok((EnsembleCheckpoint::new(members)?, curves))
}

/// `sgn` with a genuine zero: positive → 1, negative → −1, zero → 0.
pub fn sign_position(value: f64) -> f64 {
    if value > 0.0 {
        1.0
    } else if value < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Map model outputs to tradeable positions: the trend model trades its
/// sign, the position model trades its (already bounded) output directly.
pub fn positions_from_values(values: ArrayView1<f64>, kind: ModelKind) -> Array1<f64> {
    match kind {
        ModelKind::Trend => values.mapv(sign_position),
        ModelKind::Position => values.to_owned(),
    }
}

/// Parsed ensemble ready for repeated inference: member outputs are averaged
/// before any sign/position mapping.
pub struct EnsemblePredictor {
    members: Vec<(HeadParams, UnrollParams)>,
    kind: ModelKind,
    head_input: HeadInput,
}

impl EnsemblePredictor {
    pub fn new(ens: &EnsembleCheckpoint) -> Result<Self> {
        let kind = ens.model_kind()?;
        let head_input = ens.model_input()?;
        let members = ens
            .members
            .iter()
            .map(|cp| Ok((cp.head()?, cp.unroll()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(EnsemblePredictor { members, kind, head_input })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Ensemble-averaged model outputs for one date.
    pub fn values(&self, d: &DateSample) -> Result<Array1<f64>> {
        let mat = d.head_mat(self.head_input)?;
        let mut acc = Array1::<f64>::zeros(d.n_assets());
        for (head, unroll) in &self.members {
            let pass =
                model_pass_from_h(d.h.view(), d.n_assets(), mat, unroll, head, self.kind)?;
            acc += &pass.values;
        }
        Ok(acc / self.members.len() as f64)
    }

    /// Ensemble-averaged normalized adjacency for one date (graph export).
    pub fn graph(&self, d: &DateSample) -> Result<Array2<f64>> {
        let mat = d.head_mat(self.head_input)?;
        let n = d.n_assets();
        let mut acc = Array2::<f64>::zeros((n, n));
        for (head, unroll) in &self.members {
            let pass = model_pass_from_h(d.h.view(), n, mat, unroll, head, self.kind)?;
            acc += &pass.a_tilde;
        }
        Ok(acc / self.members.len() as f64)
    }

    /// Tradeable positions for one date.
    pub fn positions(&self, d: &DateSample) -> Result<Array1<f64>> {
        let values = self.values(d)?;
        Ok(positions_from_values(values.view(), self.kind))
    }
}

//! End-to-end training of the differentiable pipeline and its walk-forward
//! evaluation.
//!
//! The layout mirrors the data flow:
//!
//! - [`samples`](self) — per-date cross-sections with precomputed pairwise
//!   distances, split chronologically into train and validation spans.
//! - losses — pooled mean-squared error on volatility-scaled returns and the
//!   pooled negative annualized Sharpe ratio, both with hand-written
//!   gradients.
//! - [`Adam`] — bias-corrected adaptive optimizer.
//! - the trainer — whole-date mini-batches, early stopping on a chronological
//!   validation tail, best-checkpoint retention, and seed ensembles.
//! - walk-forward — expanding windows with per-window hyperparameter
//!   selection, producing the stitched out-of-sample position record for the
//!   learned models and both regression baselines.

mod adam;
mod loss;
mod samples;
mod trainer;
mod walkforward;

pub use adam::{Adam, AdamConfig};
pub use loss::{
    loss_mse, loss_neg_sharpe, neg_sharpe_of, scaled_returns, SHARPE_EPSILON,
};
pub use samples::{
    build_prediction_samples, build_training_samples, split_chronological, DateSample, SampleSet,
};
pub use trainer::{
    evaluate_checkpoint, positions_from_values, sign_position, train_ensemble, train_one,
    EnsemblePredictor, HyperGrid, LossKind, TrainConfig, TrainCurve,
};
pub use walkforward::{
    walk_forward, walk_forward_glinreg, walk_forward_linreg, GlinregResult, GlinregWindowReport,
    GridPoint, LinregResult, LinregWindowReport, PanelData, WalkForwardPlan, WalkForwardResult,
    WalkWindow, WindowReport,
};

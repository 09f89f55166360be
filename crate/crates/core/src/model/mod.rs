//! Strategy models on top of the learned graph: symmetric degree
//! normalization, the linear network-momentum heads (trend and squashed
//! position variants), the regression baselines, and checkpoint
//! serialization.
//!
//! The differentiable path composes `unroll::forward` → [`normalize_graph`] →
//! a linear head over the momentum features, with hand-written backward
//! functions for each stage so training can push portfolio losses all the way
//! into the per-layer solver parameters.

mod baselines;
mod checkpoint;
mod graphnorm;
mod heads;

pub use baselines::{
    glinreg_fit, glinreg_predict, linreg_fit, linreg_predict, GlinregDate, GlinregFit,
    GLINREG_GRID,
};
pub use checkpoint::{Checkpoint, EnsembleCheckpoint, CHECKPOINT_SCHEMA_VERSION};
pub use graphnorm::{normalize_graph, normalize_graph_backward};
pub use heads::{
    l2gmom_forward, l2gmom_sr_forward, model_backward, model_pass, model_pass_from_h, HeadInput,
    HeadParams, ModelGrads, ModelKind, ModelOutput, ModelPass,
};

//! Network momentum research engine.
//!
//! The pipeline learns a graph over assets from trend features by unrolling a
//! primal-dual graph-learning solver into a differentiable network, propagates
//! momentum features over the learned graph, and maps the result to trading
//! positions.  The surrounding machinery — feature construction, training,
//! walk-forward evaluation, and backtest reporting — lives here too, so the
//! whole experiment is reproducible from raw price panels.

pub mod data;
pub mod error;
pub mod features;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod training;
pub mod unroll;

pub use error::{Error, Result};

/// Annualized per-asset volatility target used for position scaling.
pub const TARGET_VOL: f64 = 0.15;

//! Differentiable unrolling of the primal-dual graph solver.
//!
//! Instead of iterating the solver to convergence with one fixed `(α, β, γ)`,
//! the unrolled layer executes a fixed number of iterations and gives every
//! iteration its own learnable triple.  The stack then behaves like a neural
//! network whose forward pass maps a feature matrix to a graph adjacency and
//! whose parameters are trained by gradient descent on a downstream loss.
//!
//! The pieces:
//!
//! - [`UnrollParams`] — per-layer `(α, β, γ)` stored as unconstrained logs so
//!   positivity is structural.
//! - [`forward`] / [`forward_from_h`] — run the layer stack, recording every
//!   intermediate on an [`UnrollTape`].
//! - [`backward`] and friends — hand-written reverse-mode sweep over the tape,
//!   producing exact gradients for the raw parameters and the input features.
//! - [`run_gradcheck`] — central-difference verification harness for the
//!   backward pass, with detection of projection kinks where a subgradient
//!   convention (not a derivative) is in force.

mod gradcheck;
mod layer;
mod params;

pub use gradcheck::{run_gradcheck, CoordinateReport, GradCheckConfig, GradCheckReport};
pub use layer::{backward, backward_adjacency, backward_edges, forward, forward_from_h, UnrollTape};
pub use params::{UnrollGrad, UnrollParams, DEFAULT_UNROLL_DEPTH};

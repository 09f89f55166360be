//! Graph learning over asset panels.
//!
//! A graph on `n` assets is stored as the half-vectorization `w` of its
//! adjacency matrix: the strict upper triangle, row-major, so edge `k`
//! corresponds to the pair `(i, j)` with `i < j` in lexicographic order.
//! Everything downstream — the degree operator, the solver, the unrolled
//! layer — works in this edge space and only reconstructs the dense matrix
//! at the boundary.

mod ops;
mod solver;
mod vech;

pub use ops::{degree_apply, degree_adjoint, objective, pairwise_distances, DistanceVector, EdgeIndex};
pub use solver::{pds_solve, GraphEstimate, SolverConfig};
pub use vech::{adjacency_to_vech, edge_count, vech_index, vech_pair, vech_to_adjacency};

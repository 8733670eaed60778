//! Numerically optimal spectral partitions.
//!
//! Cells are represented by density functions `φ_i ∈ [0, 1]` on a common
//! discretization with `Σ φ_i = 1`. The first Dirichlet eigenvalue of a cell
//! is approximated by the penalized problem `(−Δ + C(1−φ)) u = λ u`, solved
//! only on a small computational neighborhood of the cell's support, and the
//! sum of eigenvalues is minimized by projected gradient descent.

pub mod adjacency;
pub mod classify;
pub mod eigensolve;
pub mod error;
pub mod expr;
pub mod grid;
pub mod neighborhood;
pub mod partition_opt;
pub mod sparse;
pub mod surface_fem;

pub use adjacency::Adjacency;
pub use error::{Error, Result};
pub use sparse::SparseOperator;

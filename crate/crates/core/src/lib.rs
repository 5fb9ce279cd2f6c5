//! Finite-difference laboratory for the resonant biharmonic problem
//!
//! ```text
//!     (-Δ)² u = λ₁² u + u₊^p + f    on a rectangle,
//!     u = Δu = 0                    on the boundary,
//! ```
//!
//! where `λ₁` is the first Dirichlet-Laplacian eigenvalue of the domain and
//! `u₊ = max(u, 0)`. The crate provides the discrete operators (five-point
//! Laplacian `L`, biharmonic `B = L·L` under Navier conditions), iterative
//! linear and eigenvalue solvers, the exponent bookkeeping behind the a-priori
//! estimates, a damped semismooth Newton method, and a homotopy continuation
//! driver that transports a known reference solution to a target forcing while
//! certifying nondegeneracy through a weighted eigenvalue problem.
//!
//! All fields live on the interior nodes of a tensor grid; boundary values are
//! identically zero and never stored.

mod accum;
pub mod eigen;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod solver;
pub mod sparse;

pub use error::{CoreError, Result};
pub use grid::{
    biharmonic_matrix, build_grid, integrate, laplacian_matrix, lp_norm, normalize_l2,
    sine_mode_field, Field, Grid2D,
};
pub use sparse::SparseOperator;

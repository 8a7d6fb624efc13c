//! Numerical laboratory for a pseudo-spectral nonlinear Schrodinger solver
//! with smoothed-energy diagnostics, space-time norm evaluation, and the
//! closed-form regularity-threshold calculus that selects run parameters.
//!
//! Layout:
//! - [`grid`], [`field`], [`multiplier`]: periodic grids, complex fields,
//!   transforms, and radial Fourier multipliers (fractional derivatives,
//!   dyadic projections, the low-frequency smoothing operator).
//! - [`nonlinearity`], [`solver`], [`initial_data`]: the power nonlinearity,
//!   split-step time evolution, dilation of data, and data generators.
//! - [`norms`], [`morawetz`], [`commutator`]: conserved quantities, Sobolev
//!   and space-time norms, interaction functionals, commutator deficits.
//! - [`thresholds`]: exponent arithmetic and the regularity threshold.
//! - [`experiments`], [`persist`]: the experiment harness, result emission,
//!   and trajectory persistence.

pub mod commutator;
pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod initial_data;
pub mod morawetz;
pub mod multiplier;
pub mod nonlinearity;
pub mod norms;
pub mod persist;
pub mod solver;
pub mod thresholds;

pub use error::{Error, Result};
pub use field::{Space, SpectralField};
pub use grid::Grid;

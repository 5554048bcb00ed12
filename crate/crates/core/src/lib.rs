//! Interpolating estimators for noisy overparameterized linear regression.
//!
//! This crate implements the full catalogue of interpolators for the
//! overparameterized (`d >= n`) linear model `Y = A alpha* + W`:
//!
//! * the **ideal** (oracle) interpolator and its exact test-MSE expression,
//! * the minimum-`l2`-norm and weighted minimum-`l2`-norm interpolators,
//! * ridge regression and its exact reformulation as min-norm interpolation
//!   on an augmented feature set,
//! * sparsity-seeking interpolators (OMP run to completion, basis pursuit),
//!   the Lagrangian Lasso, the square-root Lasso, and two-step hybrid
//!   interpolators that combine a sparse first stage with min-norm noise
//!   fitting,
//! * exact closed forms for survival/contamination of weighted min-norm
//!   interpolation with regularly spaced Fourier features,
//! * theoretical bound curves (ideal-MSE bands, parsimonious noise-fit
//!   floors, singular-value concentration) and the measurement machinery
//!   to check them by Monte Carlo.
//!
//! The [`experiments`] module drives deterministic, seeded sweeps over
//! `(n, d)` grids and writes CSV records consumed by the `interp` CLI.

pub mod bounds;
pub mod experiments;
pub mod features;
pub mod fourier;
pub mod interpolators;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod sparse;

pub use interpolators::{InterpolatorResult, WeightScheme};
pub use linalg::LinalgError;
pub use model::{CovarianceModel, SparseLinearInstance, TrainingSet, WhitenedView};
pub use rng::SeededRng;

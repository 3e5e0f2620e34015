//! Semi-Lagrangian solver for stationary second-order Hamilton-Jacobi-Bellman
//! equations on 2D structured grids, with a dynamic ("patchy") domain
//! decomposition for parallel solves.
//!
//! The crate is organized around five layers:
//!
//! * [`grid`] — uniform square grids, bilinear interpolation stencils, fields.
//! * [`problem`] — controlled dynamics, diffusion rows, costs, control sets,
//!   and numerical/analytic bounds (`f_min`, `f_max`, `‖σ‖∞`).
//! * [`scheme`] — the semi-Lagrangian node-update kernels (original and
//!   self-dependency-free), time-step selection, the advection/diffusion
//!   regime analysis, and the Gauss-Seidel fixed-point driver.
//! * [`patchy`] — the pre-computation pipeline that grows a dynamic
//!   decomposition from a coarse solve and a synthesized feedback control.
//! * [`runner`] — parallel execution over a static (DD) or patchy (PDD)
//!   decomposition with transmission conditions and metrics.
//!
//! Core math is generic over the scalar type via `num_traits::Float`; the
//! aliases below fix `f64`, which is what the `hjb` CLI uses.

pub mod bench;
pub mod grid;
pub mod io;
pub mod patchy;
pub mod problem;
pub mod runner;
pub mod scheme;
pub mod vec2;

/// Scalar trait bound used throughout the crate: a floating-point type that
/// can be shared across worker threads.
pub trait Scalar: num_traits::Float + Send + Sync + std::fmt::Debug + 'static {}
impl<T: num_traits::Float + Send + Sync + std::fmt::Debug + 'static> Scalar for T {}

pub type Vec2f64 = vec2::Vec2<f64>;
pub type Grid64 = grid::Grid<f64>;
pub type Field64 = grid::ScalarField<f64>;
pub type Problem64 = problem::Problem<f64>;

pub type Vec2f32 = vec2::Vec2<f32>;
pub type Grid32 = grid::Grid<f32>;
pub type Field32 = grid::ScalarField<f32>;

//! Semi-Lagrangian node-update kernels, time-step selection, regime analysis
//! for the upwind diffusion ball condition, and the Gauss-Seidel fixed-point
//! driver over an ordered node list.
//!
//! Two kernels are provided. The original one evaluates
//! `min_a { (1/2d) Σ u(x + h f ± √h σ_k) + h l }`, where the interpolated
//! values include the node's own current value through the stencil
//! self-weight. The modified kernel eliminates that self-dependency
//! algebraically: with `Λ0(a)` the averaged self-weight and `Λ1(a)` the rest,
//! the update becomes `min_a Λ1(a) / (1 - Λ0(a))`, which has the same fixed
//! point but lets causal node orderings converge in few sweeps.

use crate::grid::{interp_stencil, Grid, GridError, InterpStencil, ScalarField};
use crate::problem::{estimate_bounds, Problem, ProblemBounds};
use crate::vec2::Vec2;
use crate::Scalar;
use thiserror::Error;

/// Large finite stand-in for +∞ at unsolved interior nodes.
pub const BIG: f64 = 1e6;

/// Default sup-norm convergence tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Guard against `Λ0 → 1` (possible only for a vanishing time step).
const LAMBDA0_GUARD: f64 = 1e-12;

/// Safety factor applied to the upper alpha bound when the upwind diffusion
/// ball condition fails; keeps the stencil strictly inside the first-neighbor
/// cells under round-off.
const ALPHA_SAFETY: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("dynamics degenerate: f_min = 0, no time step exists")]
    DegenerateDynamics,
    #[error("no positive time step satisfies the stencil containment bound")]
    NoValidTimeStep,
    #[error("self-weight sum reached 1 at node {node}; time step too small or stencil degenerate")]
    DegenerateStencil { node: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepPolicy {
    /// Both stencil containment and the upwind diffusion ball condition hold.
    Regime,
    /// Only stencil containment holds; alpha backed off from the upper bound.
    SafeUpperBound,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeStep<T> {
    pub h: T,
    pub alpha: T,
    pub policy: StepPolicy,
}

/// Outcome of the advection/diffusion regime analysis at a given spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport<T> {
    pub bounds: ProblemBounds<T>,
    pub dx: T,
    /// `α̲ = 1/(ω Δx)`: below this the diffusion ball crosses upwind.
    pub alpha_lower: T,
    /// `ᾱ = 1/Υ − (√(1+4ωΔxΥ)−1)/(2ωΔxΥ²)`: above this the stencil escapes.
    pub alpha_upper: T,
    /// Mesh threshold `τ_Δx = Δx/(1+Υ)` compared against `1/ω`.
    pub threshold: T,
    pub condition_holds: bool,
    pub alpha: T,
    pub h: T,
}

impl<T: Scalar> RegimeReport<T> {
    /// Key-value text rendering (one `key = value` line per quantity).
    pub fn to_text(&self) -> String {
        let f = |v: T| format!("{:.12e}", v.to_f64().unwrap_or(f64::NAN));
        [
            format!("f_min = {}", f(self.bounds.f_min)),
            format!("f_max = {}", f(self.bounds.f_max)),
            format!("Upsilon = {}", f(self.bounds.upsilon)),
            format!("omega = {}", f(self.bounds.omega)),
            format!("alpha_lower = {}", f(self.alpha_lower)),
            format!("alpha_upper = {}", f(self.alpha_upper)),
            format!("tau_dx = {}", f(self.threshold)),
            // the isotropic coefficient ε at which 1/ω crosses τ_Δx
            format!("eps_threshold = {}", f(self.bounds.f_min * self.threshold / (T::one() + T::one()))),
            format!("holds = {}", self.condition_holds),
            format!("alpha = {}", f(self.alpha)),
            format!("h = {}", f(self.h)),
        ]
        .join("\n")
    }
}

/// Compute the alpha window, the regime verdict, and the chosen alpha for a
/// problem's bounds at spacing `dx`. Under the regime the chosen alpha is
/// `1/(1+Υ)`, the one value valid for every admissible `ω` and `Δx`.
pub fn alpha_bounds<T: Scalar>(bounds: &ProblemBounds<T>, dx: T) -> Result<RegimeReport<T>, SchemeError> {
    if bounds.degenerate || !(bounds.f_min > T::zero()) {
        return Err(SchemeError::DegenerateDynamics);
    }
    let one = T::one();
    let upsilon = bounds.upsilon;
    let omega_inv = bounds.omega_inv();
    let threshold = dx / (one + upsilon);
    let condition_holds = omega_inv < threshold;

    let alpha_lower = omega_inv / dx;
    let alpha_upper = if omega_inv == T::zero() {
        one / upsilon
    } else {
        let omega = bounds.omega;
        let four = T::from(4.0).unwrap();
        let two = T::from(2.0).unwrap();
        let z = omega * dx * upsilon;
        one / upsilon - ((one + four * z).sqrt() - one) / (two * z * upsilon)
    };
    if !(alpha_upper > T::zero()) {
        return Err(SchemeError::NoValidTimeStep);
    }

    let alpha = if condition_holds {
        one / (one + upsilon)
    } else {
        T::from(ALPHA_SAFETY).unwrap() * alpha_upper
    };
    let h = alpha * dx / bounds.f_min;
    Ok(RegimeReport {
        bounds: *bounds,
        dx,
        alpha_lower,
        alpha_upper,
        threshold,
        condition_holds,
        alpha,
        h,
    })
}

/// Choose `h = α Δx / f_min` from the regime analysis and certify the global
/// containment bound `h f_max + √h ‖σ‖∞ < Δx`.
pub fn choose_time_step<T: Scalar>(bounds: &ProblemBounds<T>, dx: T) -> Result<TimeStep<T>, SchemeError> {
    let report = alpha_bounds(bounds, dx)?;
    let h = report.h;
    if !(h > T::zero()) || h * bounds.f_max + h.sqrt() * bounds.sigma_inf >= dx {
        return Err(SchemeError::NoValidTimeStep);
    }
    Ok(TimeStep {
        h,
        alpha: report.alpha,
        policy: if report.condition_holds {
            StepPolicy::Regime
        } else {
            StepPolicy::SafeUpperBound
        },
    })
}

/// A processing order over the interior nodes (a bijection on the interior
/// node set).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeOrder {
    nodes: Vec<usize>,
}

impl NodeOrder {
    /// Default Gauss-Seidel order: interior nodes by descending index, i.e.
    /// bottom-to-top and right-to-left in physical coordinates. Nodes whose
    /// semi-Lagrangian foot points toward the bottom or right boundary are
    /// then updated after their dependencies within the same sweep.
    pub fn default_order<T: Scalar>(grid: &Grid<T>) -> Self {
        let mut nodes: Vec<usize> = grid.interior_nodes().collect();
        nodes.reverse();
        Self { nodes }
    }

    /// Causal order: interior nodes sorted by ascending field value, ties
    /// broken by node index.
    pub fn by_ascending_values<T: Scalar>(grid: &Grid<T>, field: &ScalarField<T>) -> Self {
        let mut nodes: Vec<usize> = grid.interior_nodes().collect();
        nodes.sort_by(|&a, &b| {
            field
                .get(a)
                .partial_cmp(&field.get(b))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        Self { nodes }
    }

    pub fn from_nodes(nodes: Vec<usize>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// Fixed-point update with the self-dependency left in place.
    Original,
    /// Self-dependency-free update `min_a Λ1/(1-Λ0)`.
    Modified,
}

/// The Markov-chain displacement points of one node/control pair, with their
/// interpolation stencils based at the node. For `d ≥ 1` these are the `2d`
/// points `x + h f ± √h σ_k`; for `d = 0` the single point `x + h f`.
pub fn successor_points<T: Scalar>(
    problem: &Problem<T>,
    grid: &Grid<T>,
    h: T,
    node: usize,
    control: Vec2<T>,
) -> Result<Vec<(Vec2<T>, InterpStencil<T>)>, SchemeError> {
    let x = grid.position(node);
    let drift = x + problem.dynamics(x, control) * h;
    let rows = problem.diffusion(x, control);
    let mut out = Vec::with_capacity(2 * rows.d().max(1));
    if rows.d() == 0 {
        out.push((drift, interp_stencil(grid, node, drift)?));
    } else {
        let sqrt_h = h.sqrt();
        for row in rows.rows() {
            for sign in [T::one(), -T::one()] {
                let p = drift + *row * (sign * sqrt_h);
                out.push((p, interp_stencil(grid, node, p)?));
            }
        }
    }
    Ok(out)
}

/// Averaged self-weight `Λ0(a)` and remainder `Λ1(a)` (including `h l`) for
/// one control, reading neighbor values through `u`.
fn control_coefficients<T: Scalar>(
    problem: &Problem<T>,
    grid: &Grid<T>,
    h: T,
    node: usize,
    x: Vec2<T>,
    control: Vec2<T>,
    u: &impl Fn(usize) -> T,
) -> Result<(T, T), SchemeError> {
    let drift = x + problem.dynamics(x, control) * h;
    let rows = problem.diffusion(x, control);
    let mut lambda0 = T::zero();
    let mut lambda1 = T::zero();
    let mut accumulate = |stencil: &InterpStencil<T>, weight: T| {
        lambda0 = lambda0 + weight * stencil.self_weight;
        for &(idx, w) in &stencil.neighbors {
            lambda1 = lambda1 + weight * w * u(idx);
        }
    };
    if rows.d() == 0 {
        let stencil = interp_stencil(grid, node, drift)?;
        accumulate(&stencil, T::one());
    } else {
        let weight = T::one() / T::from(2 * rows.d()).unwrap();
        let sqrt_h = h.sqrt();
        for row in rows.rows() {
            for sign in [T::one(), -T::one()] {
                let p = drift + *row * (sign * sqrt_h);
                let stencil = interp_stencil(grid, node, p)?;
                accumulate(&stencil, weight);
            }
        }
    }
    Ok((lambda0, lambda1 + h * problem.running_cost(x, control)))
}

/// Minimum of `Λ1/(1-Λ0)` over candidate pairs; returns the value and the
/// index of the minimizer (first one on ties). `None` on an empty list or
/// when every `Λ0` is too close to 1.
pub fn explicit_fixed_point<T: Scalar>(pairs: &[(T, T)]) -> Option<(T, usize)> {
    let guard = T::one() - T::from(LAMBDA0_GUARD).unwrap();
    let mut best: Option<(T, usize)> = None;
    for (k, &(l0, l1)) in pairs.iter().enumerate() {
        if l0 >= guard {
            continue;
        }
        let v = l1 / (T::one() - l0);
        match best {
            Some((bv, _)) if v >= bv => {}
            _ => best = Some((v, k)),
        }
    }
    best
}

/// Original update: `min_a { Λ0(a) u(x_i) + Λ1(a) }` with the node's current
/// value read through `u`.
pub fn node_value_original<T: Scalar>(
    problem: &Problem<T>,
    grid: &Grid<T>,
    h: T,
    node: usize,
    u: &impl Fn(usize) -> T,
) -> Result<T, SchemeError> {
    let x = grid.position(node);
    let self_value = u(node);
    let mut best = T::infinity();
    for (_, a) in problem.controls().iter() {
        let (l0, l1) = control_coefficients(problem, grid, h, node, x, a, u)?;
        let v = l0 * self_value + l1;
        if v < best {
            best = v;
        }
    }
    Ok(best)
}

/// Self-dependency-free update: `min_a Λ1(a)/(1-Λ0(a))`. Also returns the
/// argmin control index for feedback-synthesis reuse; ties break to the
/// lowest index.
pub fn node_value_modified<T: Scalar>(
    problem: &Problem<T>,
    grid: &Grid<T>,
    h: T,
    node: usize,
    u: &impl Fn(usize) -> T,
) -> Result<(T, usize), SchemeError> {
    let x = grid.position(node);
    let guard = T::one() - T::from(LAMBDA0_GUARD).unwrap();
    let mut best: Option<(T, usize)> = None;
    for (k, a) in problem.controls().iter() {
        let (l0, l1) = control_coefficients(problem, grid, h, node, x, a, u)?;
        if l0 >= guard {
            return Err(SchemeError::DegenerateStencil { node });
        }
        let v = l1 / (T::one() - l0);
        match best {
            Some((bv, _)) if v >= bv => {}
            _ => best = Some((v, k)),
        }
    }
    best.map(|(v, k)| (v, k)).ok_or(SchemeError::DegenerateStencil { node })
}

/// Kernel dispatch used by the drivers. Returns the value and argmin index.
pub fn node_value<T: Scalar>(
    problem: &Problem<T>,
    grid: &Grid<T>,
    h: T,
    node: usize,
    kernel: Kernel,
    u: &impl Fn(usize) -> T,
) -> Result<T, SchemeError> {
    match kernel {
        Kernel::Original => node_value_original(problem, grid, h, node, u),
        Kernel::Modified => node_value_modified(problem, grid, h, node, u).map(|(v, _)| v),
    }
}

/// One Gauss-Seidel pass over `order`: each node's update is immediately
/// visible to later nodes. Returns the sup-norm change over the swept nodes.
pub fn sweep<T: Scalar>(
    field: &mut ScalarField<T>,
    problem: &Problem<T>,
    h: T,
    order: &NodeOrder,
    kernel: Kernel,
) -> Result<T, SchemeError> {
    let grid = *field.grid();
    let mut change = T::zero();
    for &node in order.nodes() {
        let old = field.get(node);
        let new = {
            let getter = |i: usize| field.get(i);
            node_value(problem, &grid, h, node, kernel, &getter)?
        };
        field.set(node, new);
        change = change.max((new - old).abs());
    }
    Ok(change)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats<T> {
    /// Full sweeps performed, including the final convergence-check sweep.
    pub iterations: usize,
    /// Sup-norm change of the last sweep.
    pub residual: T,
    pub converged: bool,
}

/// Interior nodes at `BIG`, boundary nodes at the exit cost `g`.
pub fn big_init<T: Scalar>(problem: &Problem<T>, grid: &Grid<T>) -> ScalarField<T> {
    let mut field = ScalarField::constant(*grid, T::from(BIG).unwrap());
    for i in grid.boundary_nodes() {
        field.set(i, problem.exit_cost(grid.position(i)));
    }
    field
}

/// Sweep cap: scales with the information-propagation diameter of the grid.
pub fn default_sweep_cap(nodes_per_axis: usize) -> usize {
    10 * nodes_per_axis
}

/// Iterate Gauss-Seidel sweeps until the sup-norm change drops below `tol`
/// or the sweep cap is reached (reported via `SolveStats::converged`).
/// `init = None` starts from `BIG` with boundary `g`.
pub fn solve_fixed_point<T: Scalar>(
    problem: &Problem<T>,
    grid: &Grid<T>,
    order: &NodeOrder,
    kernel: Kernel,
    tol: T,
    init: Option<ScalarField<T>>,
) -> Result<(ScalarField<T>, SolveStats<T>), SchemeError> {
    let bounds = estimate_bounds(problem, grid);
    let step = choose_time_step(&bounds, grid.spacing())?;
    debug_assert!(step.h * bounds.f_max + step.h.sqrt() * bounds.sigma_inf < grid.spacing());

    let mut field = init.unwrap_or_else(|| big_init(problem, grid));
    let cap = default_sweep_cap(grid.n());
    let mut iterations = 0;
    let mut residual = T::infinity();
    while iterations < cap {
        residual = sweep(&mut field, problem, step.h, order, kernel)?;
        iterations += 1;
        if residual < tol {
            return Ok((field, SolveStats { iterations, residual, converged: true }));
        }
    }
    Ok((field, SolveStats { iterations, residual, converged: false }))
}

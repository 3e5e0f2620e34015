//! Controlled problem definitions: dynamics `f(x, a)`, diffusion rows
//! `σ_k(x, a)`, running cost `l(x, a)`, exit cost `g(x)`, and the discretized
//! control set, plus numerical estimation of `f_min`, `f_max`, `‖σ‖∞`.
//!
//! The built-in families mirror the usual benchmark trio: a stationary
//! advection equation, eikonal equations with several speed profiles, and the
//! Zermelo navigation problem.

use crate::grid::Grid;
use crate::vec2::Vec2;
use crate::Scalar;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("control set must contain at least one point")]
    EmptyControlSet,
    #[error("rotation angle must satisfy 0 <= theta < pi/2, got {0}")]
    ThetaOutOfRange(f64),
    #[error("diffusion coefficient must be nonnegative, got {0}")]
    NegativeEps(f64),
}

/// Discretized control set: a fixed, ordered list of control vectors. The
/// iteration order defines argmin tie-breaking (lowest index wins).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet<T> {
    controls: Vec<Vec2<T>>,
}

impl<T: Scalar> ControlSet<T> {
    pub fn new(controls: Vec<Vec2<T>>) -> Result<Self, ProblemError> {
        if controls.is_empty() {
            return Err(ProblemError::EmptyControlSet);
        }
        Ok(Self { controls })
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    #[inline]
    pub fn get(&self, index: usize) -> Vec2<T> {
        self.controls[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Vec2<T>)> + '_ {
        self.controls.iter().copied().enumerate()
    }
}

/// `n_a` equispaced directions on the unit circle, starting at `(1, 0)` and
/// proceeding counter-clockwise.
pub fn discretize_controls<T: Scalar>(n_a: usize) -> Result<ControlSet<T>, ProblemError> {
    if n_a == 0 {
        return Err(ProblemError::EmptyControlSet);
    }
    let two_pi = T::from(2.0 * std::f64::consts::PI).unwrap();
    let controls = (0..n_a)
        .map(|k| {
            let angle = two_pi * T::from(k).unwrap() / T::from(n_a).unwrap();
            Vec2::new(angle.cos(), angle.sin())
        })
        .collect();
    ControlSet::new(controls)
}

/// Diffusion rows at a state/control pair: `d ∈ {0, 1, 2}` rows of `σ`.
/// `d = 0` encodes `σ ≡ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionRows<T> {
    rows: [Vec2<T>; 2],
    d: usize,
}

impl<T: Scalar> DiffusionRows<T> {
    pub fn none() -> Self {
        Self { rows: [Vec2::zero(); 2], d: 0 }
    }

    pub fn one(row: Vec2<T>) -> Self {
        Self { rows: [row, Vec2::zero()], d: 1 }
    }

    pub fn two(r1: Vec2<T>, r2: Vec2<T>) -> Self {
        Self { rows: [r1, r2], d: 2 }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> &[Vec2<T>] {
        &self.rows[..self.d]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionKind {
    /// σ1 ≡ 0: no diffusion.
    None,
    /// σ2(x) = √(2ε(x)) I₂: isotropic rows along the coordinate axes.
    Isotropic,
    /// σ3(x, a) = √(2ε(x)) a: one row aligned with the control.
    ControlAligned,
}

pub type DiffusionFn<T> = Arc<dyn Fn(Vec2<T>, Vec2<T>) -> DiffusionRows<T> + Send + Sync>;
pub type CostFn<T> = Arc<dyn Fn(Vec2<T>, Vec2<T>) -> T + Send + Sync>;

/// Build a diffusion component from a pointwise coefficient `ε(x) ≥ 0`.
pub fn make_diffusion<T: Scalar>(
    kind: DiffusionKind,
    eps_fn: impl Fn(Vec2<T>) -> T + Send + Sync + 'static,
) -> DiffusionFn<T> {
    match kind {
        DiffusionKind::None => Arc::new(|_, _| DiffusionRows::none()),
        DiffusionKind::Isotropic => Arc::new(move |x, _| {
            let s = (T::from(2.0).unwrap() * eps_fn(x)).sqrt();
            if s == T::zero() {
                // degenerate region: the scheme falls back to d = 0 there
                DiffusionRows::none()
            } else {
                DiffusionRows::two(Vec2::new(s, T::zero()), Vec2::new(T::zero(), s))
            }
        }),
        DiffusionKind::ControlAligned => Arc::new(move |x, a| {
            let s = (T::from(2.0).unwrap() * eps_fn(x)).sqrt();
            if s == T::zero() {
                DiffusionRows::none()
            } else {
                DiffusionRows::one(a * s)
            }
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostKind {
    /// l1 ≡ 1.
    L1,
    /// l2(x) = 1 + |x₁ x₂|.
    L2,
    /// l3(x, a) = 1 + |x₁ x₂| + |a₁ / (2 + a₂)|.
    L3,
}

pub fn make_running_cost<T: Scalar>(kind: CostKind) -> CostFn<T> {
    let one = T::one();
    match kind {
        CostKind::L1 => Arc::new(move |_, _| one),
        CostKind::L2 => Arc::new(move |x, _| one + (x.x * x.y).abs()),
        CostKind::L3 => Arc::new(move |x, a| {
            one + (x.x * x.y).abs() + (a.x / (T::from(2.0).unwrap() + a.y)).abs()
        }),
    }
}

/// A controlled exit-time problem on a square domain. Cheap to clone; the
/// closures are shared.
#[derive(Clone)]
pub struct Problem<T> {
    dynamics: Arc<dyn Fn(Vec2<T>, Vec2<T>) -> Vec2<T> + Send + Sync>,
    diffusion: DiffusionFn<T>,
    running_cost: CostFn<T>,
    exit_cost: Arc<dyn Fn(Vec2<T>) -> T + Send + Sync>,
    controls: ControlSet<T>,
    /// Analytic (f_min, f_max), used over grid sampling when known.
    analytic_speed_bounds: Option<(T, T)>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(
        dynamics: impl Fn(Vec2<T>, Vec2<T>) -> Vec2<T> + Send + Sync + 'static,
        controls: ControlSet<T>,
    ) -> Self {
        Self {
            dynamics: Arc::new(dynamics),
            diffusion: make_diffusion(DiffusionKind::None, |_| T::zero()),
            running_cost: make_running_cost(CostKind::L1),
            exit_cost: Arc::new(|_| T::zero()),
            controls,
            analytic_speed_bounds: None,
        }
    }

    pub fn with_diffusion(mut self, diffusion: DiffusionFn<T>) -> Self {
        self.diffusion = diffusion;
        self
    }

    pub fn with_running_cost(mut self, cost: CostFn<T>) -> Self {
        self.running_cost = cost;
        self
    }

    pub fn with_exit_cost(mut self, g: impl Fn(Vec2<T>) -> T + Send + Sync + 'static) -> Self {
        self.exit_cost = Arc::new(g);
        self
    }

    /// The same problem with `σ ≡ 0`; used by the patchy pre-computation.
    pub fn without_diffusion(&self) -> Self {
        let mut p = self.clone();
        p.diffusion = make_diffusion(DiffusionKind::None, |_| T::zero());
        p
    }

    pub fn with_analytic_speed_bounds(mut self, f_min: T, f_max: T) -> Self {
        self.analytic_speed_bounds = Some((f_min, f_max));
        self
    }

    #[inline]
    pub fn dynamics(&self, x: Vec2<T>, a: Vec2<T>) -> Vec2<T> {
        (self.dynamics)(x, a)
    }

    #[inline]
    pub fn diffusion(&self, x: Vec2<T>, a: Vec2<T>) -> DiffusionRows<T> {
        (self.diffusion)(x, a)
    }

    #[inline]
    pub fn running_cost(&self, x: Vec2<T>, a: Vec2<T>) -> T {
        (self.running_cost)(x, a)
    }

    #[inline]
    pub fn exit_cost(&self, x: Vec2<T>) -> T {
        (self.exit_cost)(x)
    }

    pub fn controls(&self) -> &ControlSet<T> {
        &self.controls
    }

    pub fn analytic_speed_bounds(&self) -> Option<(T, T)> {
        self.analytic_speed_bounds
    }
}

/// Advection: `f(x, a) = b(x)`, control-independent, `l ≡ 1`, `g ≡ 0`.
pub fn make_advection<T: Scalar>(
    b: impl Fn(Vec2<T>) -> Vec2<T> + Send + Sync + 'static,
) -> Problem<T> {
    Problem::new(move |x, _| b(x), discretize_controls(16).unwrap())
}

/// Advection along a constant field, with the analytic speed bound `|b|`.
pub fn make_constant_advection<T: Scalar>(b: Vec2<T>) -> Problem<T> {
    let speed = b.norm();
    make_advection(move |_| b).with_analytic_speed_bounds(speed, speed)
}

/// Eikonal: `f(x, a) = c(x) a` over unit-circle controls, `l ≡ 1`, `g ≡ 0`.
pub fn make_eikonal<T: Scalar>(c: impl Fn(Vec2<T>) -> T + Send + Sync + 'static) -> Problem<T> {
    Problem::new(move |x, a| a * c(x), discretize_controls(16).unwrap())
}

/// Eikonal with uniform unit speed (distance to the boundary).
pub fn make_unit_eikonal<T: Scalar>() -> Problem<T> {
    make_eikonal(|_| T::one()).with_analytic_speed_bounds(T::one(), T::one())
}

/// Eikonal with speed `c(x) = 1 + χ_{x₁ ≥ 0}`.
pub fn make_split_eikonal<T: Scalar>() -> Problem<T> {
    let two = T::from(2.0).unwrap();
    make_eikonal(move |x: Vec2<T>| if x.x >= T::zero() { two } else { T::one() })
        .with_analytic_speed_bounds(T::one(), two)
}

/// Eikonal with the ramp speed `c(x) = 1 + max{x₂, max{x₁, 0}}`.
pub fn make_ramp_eikonal<T: Scalar>() -> Problem<T> {
    make_eikonal(move |x: Vec2<T>| T::one() + x.y.max(x.x.max(T::zero())))
        .with_analytic_speed_bounds(T::one(), T::from(2.0).unwrap())
}

/// Zermelo navigation on `[-1, 1]²`:
/// `f(x, a) = (R_θ(x/|x|) + (η/2) a) / (1 + |x|²)` with `η ∈ {0, 1}`.
///
/// At the origin the drift direction `x/|x|` is undefined; it is replaced by
/// the rotated unit vector `R_θ(1, 0)`, an admissible fixed choice since the
/// drift magnitude stays finite there.
pub fn make_zermelo<T: Scalar>(theta: T, eta: u8) -> Result<Problem<T>, ProblemError> {
    let theta_f = theta.to_f64().unwrap_or(f64::NAN);
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta_f) {
        return Err(ProblemError::ThetaOutOfRange(theta_f));
    }
    let half_eta = T::from(eta as f64 / 2.0).unwrap();
    let dynamics = move |x: Vec2<T>, a: Vec2<T>| {
        let r2 = x.dot(x);
        let dir = if r2 == T::zero() {
            Vec2::new(T::one(), T::zero())
        } else {
            x * (T::one() / r2.sqrt())
        };
        (dir.rotated(theta) + a * half_eta) * (T::one() / (T::one() + r2))
    };
    let problem = Problem::new(dynamics, discretize_controls(16).unwrap());
    // On [-1,1]²: f_min = 1/6 (corner, control anti-aligned), f_max = 3/2
    // (origin, control aligned). With η = 0 the control term drops out and
    // the speed ranges over [1/3, 1].
    let (f_min, f_max) = if eta == 1 {
        (T::from(1.0 / 6.0).unwrap(), T::from(1.5).unwrap())
    } else {
        (T::from(1.0 / 3.0).unwrap(), T::one())
    };
    Ok(problem.with_analytic_speed_bounds(f_min, f_max))
}

/// Bounds characterizing a problem over a grid: speed extrema, the largest
/// diffusion row norm, anisotropy `Υ = f_max/f_min`, and the
/// advection/diffusion ratio `ω = f_min/‖σ‖∞²` (infinite when `σ ≡ 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemBounds<T> {
    pub f_min: T,
    pub f_max: T,
    pub sigma_inf: T,
    pub upsilon: T,
    pub omega: T,
    /// Set when the sampled `f_min` vanishes; `Υ` and `ω` are then undefined.
    pub degenerate: bool,
}

impl<T: Scalar> ProblemBounds<T> {
    /// `1/ω = ‖σ‖∞² / f_min`, the quantity compared against the mesh
    /// threshold. Exact (zero) when there is no diffusion.
    pub fn omega_inv(&self) -> T {
        self.sigma_inf * self.sigma_inf / self.f_min
    }
}

/// Sample `f_min`, `f_max` and `‖σ‖∞` over all grid nodes × controls.
/// Analytic speed bounds attached to the problem take precedence.
pub fn estimate_bounds<T: Scalar>(problem: &Problem<T>, grid: &Grid<T>) -> ProblemBounds<T> {
    let mut sigma_inf = T::zero();
    let mut sampled_min = T::infinity();
    let mut sampled_max = T::zero();
    for i in 0..grid.node_count() {
        let x = grid.position(i);
        for (_, a) in problem.controls().iter() {
            let speed = problem.dynamics(x, a).norm();
            sampled_min = sampled_min.min(speed);
            sampled_max = sampled_max.max(speed);
            for row in problem.diffusion(x, a).rows() {
                sigma_inf = sigma_inf.max(row.norm());
            }
        }
    }
    let (f_min, f_max) = problem
        .analytic_speed_bounds()
        .unwrap_or((sampled_min, sampled_max));
    let degenerate = f_min <= T::zero();
    let upsilon = if degenerate { T::nan() } else { f_max / f_min };
    let omega = if degenerate {
        T::nan()
    } else if sigma_inf == T::zero() {
        T::infinity()
    } else {
        f_min / (sigma_inf * sigma_inf)
    };
    ProblemBounds { f_min, f_max, sigma_inf, upsilon, omega, degenerate }
}

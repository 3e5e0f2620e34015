//! Named problem configurations and the benchmark harness: run a
//! (grid × diffusion coefficient × method) matrix deterministically and
//! report iteration counts, wall times, and the regime verdict per cell.

use crate::grid::Grid;
use crate::problem::{
    estimate_bounds, make_advection, make_diffusion, make_ramp_eikonal,
    make_running_cost, make_split_eikonal, make_unit_eikonal, make_zermelo, CostKind,
    DiffusionKind, Problem, ProblemError,
};
use crate::runner::{run, Method, RunConfig, RunMetrics};
use crate::scheme::alpha_bounds;
use crate::vec2::Vec2;
use crate::Scalar;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchError {
    #[error("unknown problem key `{0}`")]
    UnknownProblem(String),
    #[error("benchmark needs a nonempty `{0}` list")]
    EmptyList(&'static str),
    #[error("grid sizes must be >= 3, got {0}")]
    GridTooSmall(usize),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// The built-in problem families, by CLI key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKey {
    /// `advection`: f = (1, 0).
    Advection,
    /// `eikonal`: unit speed.
    Eikonal,
    /// `eikonal-split`: speed 1 + χ_{x₁≥0}.
    EikonalSplit,
    /// `eikonal-ramp`: speed 1 + max{x₂, max{x₁, 0}}.
    EikonalRamp,
    /// `zermelo`: rotated radial drift with control authority η/2.
    Zermelo,
}

impl ProblemKey {
    pub fn parse(key: &str) -> Result<Self, BenchError> {
        match key {
            "advection" => Ok(Self::Advection),
            "eikonal" => Ok(Self::Eikonal),
            "eikonal-split" => Ok(Self::EikonalSplit),
            "eikonal-ramp" => Ok(Self::EikonalRamp),
            "zermelo" => Ok(Self::Zermelo),
            other => Err(BenchError::UnknownProblem(other.to_string())),
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Self::Advection => "advection",
            Self::Eikonal => "eikonal",
            Self::EikonalSplit => "eikonal-split",
            Self::EikonalRamp => "eikonal-ramp",
            Self::Zermelo => "zermelo",
        }
    }
}

/// A full problem configuration: family, diffusion, running cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec<T> {
    pub key: ProblemKey,
    pub diffusion: DiffusionKind,
    /// Diffusion coefficient ε (ignored when `diffusion` is `None`).
    pub eps: T,
    /// Restrict the coefficient to the upper half plane: ε(x) = ε·χ_{x₂≥0}.
    pub eps_upper: bool,
    pub cost: CostKind,
    /// Zermelo drift rotation.
    pub theta: T,
    /// Zermelo control authority switch (0 or 1).
    pub eta: u8,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn new(key: ProblemKey) -> Self {
        Self {
            key,
            diffusion: DiffusionKind::None,
            eps: T::zero(),
            eps_upper: false,
            cost: CostKind::L1,
            theta: T::from(std::f64::consts::FRAC_PI_4).unwrap(),
            eta: 1,
        }
    }

    pub fn build(&self) -> Result<Problem<T>, ProblemError> {
        let base = match self.key {
            ProblemKey::Advection => make_advection(|_| Vec2::new(T::one(), T::zero()))
                .with_analytic_speed_bounds(T::one(), T::one()),
            ProblemKey::Eikonal => make_unit_eikonal(),
            ProblemKey::EikonalSplit => make_split_eikonal(),
            ProblemKey::EikonalRamp => make_ramp_eikonal(),
            ProblemKey::Zermelo => make_zermelo(self.theta, self.eta)?,
        };
        let eps = self.eps;
        if eps.to_f64().unwrap_or(0.0) < 0.0 {
            return Err(ProblemError::NegativeEps(eps.to_f64().unwrap()));
        }
        let kind = if eps == T::zero() { DiffusionKind::None } else { self.diffusion };
        let upper = self.eps_upper;
        let diffusion = make_diffusion(kind, move |x: Vec2<T>| {
            if upper && x.y < T::zero() {
                T::zero()
            } else {
                eps
            }
        });
        Ok(base
            .with_diffusion(diffusion)
            .with_running_cost(make_running_cost(self.cost)))
    }
}

/// One benchmark campaign: fixed problem family and diffusion kind, varied
/// over grids, coefficients, and methods.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec<T> {
    pub problem: ProblemSpec<T>,
    pub grids: Vec<usize>,
    pub eps_list: Vec<T>,
    pub methods: Vec<Method>,
    pub patches: usize,
    pub coarse_n: usize,
    pub tol: T,
}

impl<T: Scalar> BenchSpec<T> {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.grids.is_empty() {
            return Err(BenchError::EmptyList("grids"));
        }
        if self.eps_list.is_empty() {
            return Err(BenchError::EmptyList("eps"));
        }
        if self.methods.is_empty() {
            return Err(BenchError::EmptyList("methods"));
        }
        if let Some(&n) = self.grids.iter().find(|&&n| n < 3) {
            return Err(BenchError::GridTooSmall(n));
        }
        Ok(())
    }
}

/// One cell of the result matrix. A failed cell records the error message and
/// leaves the numeric fields empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchCell {
    pub method: Method,
    pub grid_n: usize,
    pub eps: f64,
    /// Whether the upwind diffusion ball condition holds for this cell.
    pub regime: bool,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub cells: Vec<BenchCell>,
}

impl BenchReport {
    /// Aligned text table; regime cells are marked with `*`.
    pub fn text_table(&self) -> String {
        let mut rows = vec![[
            "method".to_string(),
            "grid".to_string(),
            "eps".to_string(),
            "regime".to_string(),
            "iterations".to_string(),
            "total_s".to_string(),
            "status".to_string(),
        ]];
        for cell in &self.cells {
            let (iters, total, status) = match (&cell.metrics, &cell.error) {
                (Some(m), _) => (
                    m.iterations.to_string(),
                    format!("{:.3}", m.total_seconds),
                    if m.converged { "ok".to_string() } else { "no-convergence".to_string() },
                ),
                (None, Some(e)) => ("-".to_string(), "-".to_string(), format!("failed: {e}")),
                (None, None) => ("-".to_string(), "-".to_string(), "skipped".to_string()),
            };
            rows.push([
                cell.method.name().to_string(),
                cell.grid_n.to_string(),
                format!("{:.3e}", cell.eps),
                if cell.regime { "*".to_string() } else { String::new() },
                iters,
                total,
                status,
            ]);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap())
            .collect();
        let mut out = String::new();
        for row in &rows {
            for (c, cellv) in row.iter().enumerate() {
                let _ = write!(out, "{:<width$}  ", cellv, width = widths[c]);
            }
            out.truncate(out.trim_end().len());
            out.push('\n');
        }
        out
    }

    /// Machine-readable rows, one line per cell.
    pub fn csv(&self) -> String {
        let mut out = String::from(
            "method,grid_n,eps,regime,iterations,precompute_seconds,solve_seconds,total_seconds,converged\n",
        );
        for cell in &self.cells {
            match &cell.metrics {
                Some(m) => {
                    let _ = writeln!(
                        out,
                        "{},{},{:e},{},{},{:.6},{:.6},{:.6},{}",
                        cell.method.name(),
                        cell.grid_n,
                        cell.eps,
                        cell.regime,
                        m.iterations,
                        m.precompute_seconds,
                        m.solve_seconds,
                        m.total_seconds,
                        m.converged
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "{},{},{:e},{},,,,,failed",
                        cell.method.name(),
                        cell.grid_n,
                        cell.eps,
                        cell.regime
                    );
                }
            }
        }
        out
    }

    /// Iteration counts of one method across the matrix, in cell order.
    pub fn iterations(&self, method: Method) -> Vec<Option<usize>> {
        self.cells
            .iter()
            .filter(|c| c.method == method)
            .map(|c| c.metrics.as_ref().map(|m| m.iterations))
            .collect()
    }
}

/// Run the matrix in deterministic mode (one worker). Cell failures are
/// recorded and the run continues.
pub fn run_bench<T: Scalar>(spec: &BenchSpec<T>) -> Result<BenchReport, BenchError> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &method in &spec.methods {
        for &n in &spec.grids {
            for &eps in &spec.eps_list {
                cells.push(run_cell(spec, method, n, eps));
            }
        }
    }
    Ok(BenchReport { cells })
}

fn run_cell<T: Scalar>(spec: &BenchSpec<T>, method: Method, n: usize, eps: T) -> BenchCell {
    let eps_f = eps.to_f64().unwrap_or(f64::NAN);
    let fail = |message: String, regime: bool| BenchCell {
        method,
        grid_n: n,
        eps: eps_f,
        regime,
        metrics: None,
        error: Some(message),
    };

    let problem_spec = ProblemSpec { eps, ..spec.problem };
    let problem = match problem_spec.build() {
        Ok(p) => p,
        Err(e) => return fail(e.to_string(), false),
    };
    let grid = match Grid::new(Vec2::new(-T::one(), -T::one()), Vec2::new(T::one(), T::one()), n) {
        Ok(g) => g,
        Err(e) => return fail(e.to_string(), false),
    };
    let bounds = estimate_bounds(&problem, &grid);
    let regime = alpha_bounds(&bounds, grid.spacing())
        .map(|r| r.condition_holds)
        .unwrap_or(false);

    let config = RunConfig {
        method,
        eps: spec.tol,
        patches: spec.patches,
        workers: 1,
        coarse_n: spec.coarse_n,
    };
    match run(&problem, &grid, &config) {
        Ok((_, metrics)) => BenchCell {
            method,
            grid_n: n,
            eps: eps_f,
            regime,
            metrics: Some(metrics),
            error: None,
        },
        Err(e) => fail(e.to_string(), regime),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> BenchSpec<f64> {
        BenchSpec {
            problem: ProblemSpec {
                diffusion: DiffusionKind::Isotropic,
                ..ProblemSpec::new(ProblemKey::Eikonal)
            },
            grids: vec![21],
            eps_list: vec![0.0, 1e-3],
            methods: vec![Method::Dd, Method::Pdd],
            patches: 4,
            coarse_n: 11,
            tol: 1e-6,
        }
    }

    #[test]
    fn problem_keys_round_trip() {
        for key in ["advection", "eikonal", "eikonal-split", "eikonal-ramp", "zermelo"] {
            assert_eq!(ProblemKey::parse(key).unwrap().key(), key);
        }
        assert!(matches!(ProblemKey::parse("heat"), Err(BenchError::UnknownProblem(_))));
    }

    #[test]
    fn eps_upper_profile_vanishes_below_axis() {
        let spec = ProblemSpec {
            diffusion: DiffusionKind::Isotropic,
            eps: 0.1,
            eps_upper: true,
            ..ProblemSpec::new(ProblemKey::Eikonal)
        };
        let p = spec.build().unwrap();
        let a = Vec2::new(1.0, 0.0);
        assert_eq!(p.diffusion(Vec2::new(0.0, -0.5), a).d(), 0);
        assert_eq!(p.diffusion(Vec2::new(0.0, 0.5), a).d(), 2);
    }

    #[test]
    fn zero_eps_means_no_diffusion() {
        let spec = ProblemSpec {
            diffusion: DiffusionKind::Isotropic,
            eps: 0.0,
            ..ProblemSpec::new(ProblemKey::Eikonal)
        };
        let p = spec.build().unwrap();
        assert_eq!(p.diffusion(Vec2::zero(), Vec2::new(1.0, 0.0)).d(), 0);
    }

    #[test]
    fn empty_lists_rejected() {
        let mut s = small_spec();
        s.eps_list.clear();
        assert_eq!(s.validate().unwrap_err(), BenchError::EmptyList("eps"));
        let mut s = small_spec();
        s.grids = vec![2];
        assert_eq!(s.validate().unwrap_err(), BenchError::GridTooSmall(2));
    }

    #[test]
    fn matrix_runs_and_reports() {
        let spec = small_spec();
        let report = run_bench(&spec).unwrap();
        assert_eq!(report.cells.len(), 4);
        for cell in &report.cells {
            let m = cell.metrics.as_ref().expect("cell should run");
            assert!(m.converged);
            assert!(m.iterations > 0);
        }
        // eps = 0 and eps = 1e-3 are both under the regime at dx = 0.1
        assert!(report.cells.iter().all(|c| c.regime));
        let table = report.text_table();
        assert!(table.contains("method"));
        assert!(table.contains("dd"));
        let csv = report.csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("method,grid_n,eps,"));
    }

    #[test]
    fn failed_cells_do_not_abort_the_matrix() {
        let mut spec = small_spec();
        spec.problem.theta = -1.0; // invalid once the key is zermelo
        spec.problem.key = ProblemKey::Zermelo;
        let report = run_bench(&spec).unwrap();
        assert_eq!(report.cells.len(), 4);
        for cell in &report.cells {
            assert!(cell.metrics.is_none());
            assert!(cell.error.is_some());
        }
        assert!(report.text_table().contains("failed"));
    }

    #[test]
    fn bench_is_deterministic() {
        let spec = small_spec();
        let a = run_bench(&spec).unwrap();
        let b = run_bench(&spec).unwrap();
        assert_eq!(a.iterations(Method::Dd), b.iterations(Method::Dd));
        assert_eq!(a.iterations(Method::Pdd), b.iterations(Method::Pdd));
    }
}

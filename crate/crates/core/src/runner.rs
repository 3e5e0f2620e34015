//! Parallel execution over a decomposition: classical static blocks (DD) or
//! the dynamic patchy decomposition (PDD).
//!
//! A run proceeds in rounds. Each round sweeps every subdomain once with the
//! self-dependency-free kernel; subdomains exchange information only through
//! the shared value field at their interfaces (sharp transmission: a node is
//! written by its owner, read by everyone). The run converges when the
//! largest per-node change of a round drops below the tolerance.

use crate::grid::{Grid, ScalarField};
use crate::patchy::{build_decomposition, PatchyConfig, DEFAULT_COARSE_N};
use crate::problem::{estimate_bounds, Problem};
use crate::scheme::{
    big_init, choose_time_step, default_sweep_cap, node_value, Kernel, SchemeError,
    DEFAULT_TOL,
};
use crate::Scalar;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Barrier;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Static axis-aligned block decomposition, cold start.
    Dd,
    /// Dynamic patchy decomposition, warm start from the coarse solve.
    Pdd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dd => "dd",
            Method::Pdd => "pdd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig<T> {
    pub method: Method,
    /// Convergence tolerance on the per-round sup-norm change.
    pub eps: T,
    /// Number of subdomains.
    pub patches: usize,
    /// Worker threads; 1 runs the deterministic sequential driver.
    pub workers: usize,
    /// Coarse grid size for the patchy pre-computation.
    pub coarse_n: usize,
}

impl<T: Scalar> RunConfig<T> {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            eps: T::from(DEFAULT_TOL).unwrap(),
            patches: 4,
            workers: 1,
            coarse_n: DEFAULT_COARSE_N,
        }
    }
}

/// Flat run summary for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub method: Method,
    pub grid_n: usize,
    pub dx: f64,
    pub eps: f64,
    pub patches: usize,
    pub workers: usize,
    /// Rounds performed, including the final convergence-check round.
    pub iterations: usize,
    pub precompute_seconds: f64,
    pub solve_seconds: f64,
    pub total_seconds: f64,
    pub converged: bool,
}

/// Sharp-interface transmission: when two subdomains propose values for the
/// same node, the smaller (more optimistic) one wins.
pub fn transmission_merge<T: Scalar>(a: T, b: T) -> T {
    a.min(b)
}

/// Partition the interior into `p` axis-aligned blocks, as square a layout as
/// `p` allows (`r × c` with `r·c = p`, `r ≤ c`). Each block's nodes come in
/// descending index order, the same default the plain solver uses.
pub fn make_static_decomposition<T: Scalar>(grid: &Grid<T>, p: usize) -> Vec<Vec<usize>> {
    let n = grid.n();
    let interior = n - 2;
    let p = p.max(1).min(interior * interior);
    let mut r = (p as f64).sqrt().floor() as usize;
    while p % r != 0 {
        r -= 1;
    }
    let c = p / r;

    // near-equal bands over interior rows 1..n-1 and cols 1..n-1
    let band = |count: usize, parts: usize, k: usize| -> (usize, usize) {
        let base = count / parts;
        let rem = count % parts;
        let start = k * base + k.min(rem);
        let len = base + usize::from(k < rem);
        (1 + start, 1 + start + len)
    };

    let mut blocks = Vec::with_capacity(p);
    for br in 0..r {
        let (r0, r1) = band(interior, r, br);
        for bc in 0..c {
            let (c0, c1) = band(interior, c, bc);
            let mut nodes = Vec::with_capacity((r1 - r0) * (c1 - c0));
            for row in r0..r1 {
                for col in c0..c1 {
                    nodes.push(grid.index(row, col));
                }
            }
            nodes.reverse();
            blocks.push(nodes);
        }
    }
    blocks
}

/// One round: sweep each subdomain once. Within a subdomain the sweep is
/// Gauss-Seidel (own updates visible immediately); foreign interior nodes are
/// read from the round-start snapshot, reproducing the schedule of patches
/// running simultaneously with one exchange per round. Returns the sup-norm
/// change over all nodes.
fn sequential_round<T: Scalar>(
    field: &mut ScalarField<T>,
    snapshot: &mut ScalarField<T>,
    owner: &[u32],
    problem: &Problem<T>,
    h: T,
    subdomains: &[Vec<usize>],
) -> Result<T, SchemeError> {
    let grid = *field.grid();
    snapshot.clone_from(field);
    let mut change = T::zero();
    for (p, nodes) in subdomains.iter().enumerate() {
        let p = p as u32;
        for &i in nodes {
            let old = field.get(i);
            let new = {
                let get = |j: usize| {
                    if owner[j] == p {
                        field.get(j)
                    } else {
                        snapshot.get(j)
                    }
                };
                node_value(problem, &grid, h, i, Kernel::Modified, &get)?
            };
            field.set(i, new);
            change = change.max((new - old).abs());
        }
    }
    Ok(change)
}

/// Node → subdomain index map; nodes outside every subdomain (the grid
/// boundary) get `u32::MAX`.
fn owner_map<T: Scalar>(grid: &Grid<T>, subdomains: &[Vec<usize>]) -> Vec<u32> {
    let mut owner = vec![u32::MAX; grid.node_count()];
    for (p, nodes) in subdomains.iter().enumerate() {
        for &i in nodes {
            owner[i] = p as u32;
        }
    }
    owner
}

/// Concurrent rounds over a lock-free shared field. Each worker owns a fixed
/// set of subdomains; within a round, a worker's updates are immediately
/// visible to every thread. A barrier separates rounds; worker 0 reduces the
/// residuals and decides convergence.
fn concurrent_rounds<T: Scalar>(
    field: &mut ScalarField<T>,
    problem: &Problem<T>,
    h: T,
    subdomains: &[Vec<usize>],
    workers: usize,
    eps: T,
    cap: usize,
) -> Result<(usize, bool), SchemeError> {
    let grid = *field.grid();
    let shared: Vec<AtomicU64> = field
        .values()
        .iter()
        .map(|&v| AtomicU64::new(v.to_f64().unwrap().to_bits()))
        .collect();
    let residuals: Vec<AtomicU64> = (0..workers).map(|_| AtomicU64::new(0)).collect();
    let done = AtomicBool::new(false);
    let rounds = AtomicU64::new(0);
    let failed = AtomicBool::new(false);
    let barrier = Barrier::new(workers);

    std::thread::scope(|scope| {
        for w in 0..workers {
            let shared = &shared;
            let residuals = &residuals;
            let done = &done;
            let rounds = &rounds;
            let failed = &failed;
            let barrier = &barrier;
            let mine: Vec<&Vec<usize>> =
                subdomains.iter().skip(w).step_by(workers).collect();
            scope.spawn(move || {
                let get = |j: usize| {
                    T::from(f64::from_bits(shared[j].load(Ordering::Relaxed))).unwrap()
                };
                for round in 0..cap {
                    let mut change = T::zero();
                    for nodes in &mine {
                        for &i in nodes.iter() {
                            let old = get(i);
                            let new = match node_value(problem, &grid, h, i, Kernel::Modified, &get)
                            {
                                Ok(v) => v,
                                Err(_) => {
                                    failed.store(true, Ordering::Relaxed);
                                    old
                                }
                            };
                            shared[i].store(new.to_f64().unwrap().to_bits(), Ordering::Relaxed);
                            change = change.max((new - old).abs());
                        }
                    }
                    residuals[w].store(change.to_f64().unwrap().to_bits(), Ordering::Relaxed);
                    barrier.wait();
                    if w == 0 {
                        let max = residuals
                            .iter()
                            .map(|r| f64::from_bits(r.load(Ordering::Relaxed)))
                            .fold(0.0_f64, f64::max);
                        rounds.store(round as u64 + 1, Ordering::Relaxed);
                        if T::from(max).unwrap() < eps || failed.load(Ordering::Relaxed) {
                            done.store(true, Ordering::Relaxed);
                        }
                    }
                    barrier.wait();
                    if done.load(Ordering::Relaxed) {
                        break;
                    }
                }
            });
        }
    });

    for (i, slot) in shared.iter().enumerate() {
        field.set(i, T::from(f64::from_bits(slot.load(Ordering::Relaxed))).unwrap());
    }
    if failed.load(Ordering::Relaxed) {
        // re-run one sequential round to surface the underlying error
        let owner = owner_map(&grid, subdomains);
        let mut snapshot = field.clone();
        sequential_round(field, &mut snapshot, &owner, problem, h, subdomains)?;
    }
    let performed = rounds.load(Ordering::Relaxed) as usize;
    Ok((performed, done.load(Ordering::Relaxed)))
}

fn drive<T: Scalar>(
    field: &mut ScalarField<T>,
    problem: &Problem<T>,
    grid: &Grid<T>,
    subdomains: &[Vec<usize>],
    config: &RunConfig<T>,
) -> Result<(usize, bool), SchemeError> {
    let bounds = estimate_bounds(problem, grid);
    let h = choose_time_step(&bounds, grid.spacing())?.h;
    let cap = default_sweep_cap(grid.n());
    if config.workers <= 1 {
        let owner = owner_map(grid, subdomains);
        let mut snapshot = field.clone();
        let mut iterations = 0;
        while iterations < cap {
            let change = sequential_round(field, &mut snapshot, &owner, problem, h, subdomains)?;
            iterations += 1;
            if change < config.eps {
                return Ok((iterations, true));
            }
        }
        Ok((iterations, false))
    } else {
        concurrent_rounds(field, problem, h, subdomains, config.workers, config.eps, cap)
    }
}

fn metrics<T: Scalar>(
    config: &RunConfig<T>,
    grid: &Grid<T>,
    iterations: usize,
    converged: bool,
    precompute: f64,
    solve: f64,
) -> RunMetrics {
    RunMetrics {
        method: config.method,
        grid_n: grid.n(),
        dx: grid.spacing().to_f64().unwrap(),
        eps: config.eps.to_f64().unwrap(),
        patches: config.patches,
        workers: config.workers,
        iterations,
        precompute_seconds: precompute,
        solve_seconds: solve,
        total_seconds: precompute + solve,
        converged,
    }
}

/// Static block decomposition, cold start from the large-value field.
pub fn run_dd<T: Scalar>(
    problem: &Problem<T>,
    grid: &Grid<T>,
    config: &RunConfig<T>,
) -> Result<(ScalarField<T>, RunMetrics), SchemeError> {
    let t0 = Instant::now();
    let subdomains = make_static_decomposition(grid, config.patches);
    let mut field = big_init(problem, grid);
    let precompute = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let (iterations, converged) = drive(&mut field, problem, grid, &subdomains, config)?;
    let solve = t1.elapsed().as_secs_f64();
    Ok((field, metrics(config, grid, iterations, converged, precompute, solve)))
}

/// Patchy decomposition: coarse solve, membership growth, causal per-patch
/// orders, warm start from the prolonged coarse value.
pub fn run_pdd<T: Scalar>(
    problem: &Problem<T>,
    grid: &Grid<T>,
    config: &RunConfig<T>,
) -> Result<(ScalarField<T>, RunMetrics), SchemeError> {
    let t0 = Instant::now();
    let patchy_config = PatchyConfig {
        coarse_n: config.coarse_n,
        num_patches: config.patches,
        coarse_tol: config.eps.max(T::from(DEFAULT_TOL).unwrap()),
    };
    let (decomposition, u_hat, _) = build_decomposition(problem, grid, &patchy_config)?;
    let subdomains: Vec<Vec<usize>> =
        decomposition.patches.iter().map(|p| p.nodes.clone()).collect();
    let mut field = u_hat;
    for i in grid.boundary_nodes() {
        field.set(i, problem.exit_cost(grid.position(i)));
    }
    let precompute = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let (iterations, converged) = drive(&mut field, problem, grid, &subdomains, config)?;
    let solve = t1.elapsed().as_secs_f64();
    Ok((field, metrics(config, grid, iterations, converged, precompute, solve)))
}

/// Dispatch on the configured method.
pub fn run<T: Scalar>(
    problem: &Problem<T>,
    grid: &Grid<T>,
    config: &RunConfig<T>,
) -> Result<(ScalarField<T>, RunMetrics), SchemeError> {
    match config.method {
        Method::Dd => run_dd(problem, grid, config),
        Method::Pdd => run_pdd(problem, grid, config),
    }
}

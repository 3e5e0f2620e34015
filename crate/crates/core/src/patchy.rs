//! Patchy pre-computation: from a cheap coarse solve, synthesize a feedback
//! control, grow one membership function per boundary arc by advecting it
//! along the closed-loop dynamics, and assign every interior node to a patch.
//!
//! The resulting decomposition aligns patch interfaces with the optimal flow,
//! so a per-patch causal node ordering (ascending coarse value) lets the
//! parallel solver converge in few rounds.

use crate::grid::{interp_at, interp_stencil, prolong, Grid, ScalarField};
use crate::problem::{estimate_bounds, Problem};
use crate::scheme::{
    big_init, choose_time_step, default_sweep_cap, solve_fixed_point, Kernel, NodeOrder,
    SchemeError, SolveStats, DEFAULT_TOL,
};
use crate::vec2::Vec2;
use crate::Scalar;

/// Membership threshold: a node is a candidate for patch `p` when `φ_p ≥ τ`.
pub const TAU_P: f64 = 0.5;

/// Convergence tolerance for the membership advection fixed point. Loose on
/// purpose: only the `φ_p ≥ τ` comparison matters, not `φ_p` itself.
pub const TOL_P: f64 = 1e-2;

/// Default nodes per axis of the coarse pre-computation grid.
pub const DEFAULT_COARSE_N: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchyConfig<T> {
    /// Nodes per axis of the coarse grid.
    pub coarse_n: usize,
    /// Number of patches (boundary arcs).
    pub num_patches: usize,
    /// Tolerance of the coarse solve.
    pub coarse_tol: T,
}

impl<T: Scalar> Default for PatchyConfig<T> {
    fn default() -> Self {
        Self {
            coarse_n: DEFAULT_COARSE_N,
            num_patches: 4,
            coarse_tol: T::from(DEFAULT_TOL).unwrap(),
        }
    }
}

/// Argmin control index per node (boundary nodes included).
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackControl {
    pub control_index: Vec<usize>,
}

/// One patch: an id and its owned interior nodes, ordered causally by
/// ascending coarse value (ties by node index).
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub id: usize,
    pub nodes: Vec<usize>,
    /// The boundary arc `Γ_p` seeding this patch, in counter-clockwise order.
    pub arc: Vec<usize>,
}

/// A full decomposition of the interior node set.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub patches: Vec<Patch>,
    /// Owner patch per node; `None` exactly on the grid boundary.
    pub owner: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecomputeStats<T> {
    pub coarse: SolveStats<T>,
    /// Advection sweeps spent growing each membership function, summed.
    pub growth_sweeps: usize,
}

/// Solve the diffusion-free problem on a coarse grid over the same box and
/// prolong the result onto `fine_grid`.
pub fn coarse_solve<T: Scalar>(
    problem: &Problem<T>,
    fine_grid: &Grid<T>,
    coarse_n: usize,
    tol: T,
) -> Result<(ScalarField<T>, SolveStats<T>), SchemeError> {
    let coarse_grid = Grid::new(fine_grid.lower(), fine_grid.upper(), coarse_n)?;
    let reduced = problem.without_diffusion();
    let order = NodeOrder::default_order(&coarse_grid);
    let (coarse, stats) =
        solve_fixed_point(&reduced, &coarse_grid, &order, Kernel::Modified, tol, None)?;
    let u_hat = prolong(&coarse, fine_grid)?;
    Ok((u_hat, stats))
}

/// Hard clamp into the domain box (no error for large escapes; synthesis at
/// boundary nodes may step outside by up to one cell).
fn clamp_hard<T: Scalar>(grid: &Grid<T>, p: Vec2<T>) -> Vec2<T> {
    Vec2::new(
        p.x.max(grid.lower().x).min(grid.upper().x),
        p.y.max(grid.lower().y).min(grid.upper().y),
    )
}

/// Feedback synthesis from an approximate value function:
/// `a*(x_i) = argmin_a û(x_i + h f(x_i, a)) + h l(x_i, a)`, diffusion-free
/// dynamics, ties to the lowest control index.
pub fn synthesize_feedback<T: Scalar>(
    problem: &Problem<T>,
    grid: &Grid<T>,
    u_hat: &ScalarField<T>,
) -> Result<FeedbackControl, SchemeError> {
    let reduced = problem.without_diffusion();
    let bounds = estimate_bounds(&reduced, grid);
    let h = choose_time_step(&bounds, grid.spacing())?.h;
    let mut control_index = Vec::with_capacity(grid.node_count());
    for i in 0..grid.node_count() {
        let x = grid.position(i);
        let mut best = T::infinity();
        let mut best_k = 0;
        for (k, a) in reduced.controls().iter() {
            let foot = clamp_hard(grid, x + reduced.dynamics(x, a) * h);
            let v = interp_at(u_hat, foot)? + h * reduced.running_cost(x, a);
            if v < best {
                best = v;
                best_k = k;
            }
        }
        control_index.push(best_k);
    }
    Ok(FeedbackControl { control_index })
}

/// Split the boundary into `num_patches` contiguous arcs of (near-)equal
/// length. The walk is counter-clockwise starting just after the bottom-left
/// corner, so every side's terminal corner belongs to the arc that traversed
/// that side. When the length does not divide evenly the leading arcs take
/// one extra node.
pub fn split_boundary<T: Scalar>(grid: &Grid<T>, num_patches: usize) -> Vec<Vec<usize>> {
    let n = grid.n();
    let mut walk = Vec::with_capacity(4 * (n - 1));
    // bottom edge, left to right, starting after the bottom-left corner
    for col in 1..n {
        walk.push(grid.index(n - 1, col));
    }
    // right edge, bottom to top
    for row in (0..n - 1).rev() {
        walk.push(grid.index(row, n - 1));
    }
    // top edge, right to left
    for col in (0..n - 1).rev() {
        walk.push(grid.index(0, col));
    }
    // left edge, top to bottom, ending at the bottom-left corner
    for row in 1..n {
        walk.push(grid.index(row, 0));
    }

    let total = walk.len();
    let p = num_patches.max(1).min(total);
    let base = total / p;
    let rem = total % p;
    let mut arcs = Vec::with_capacity(p);
    let mut start = 0;
    for k in 0..p {
        let len = base + usize::from(k < rem);
        arcs.push(walk[start..start + len].to_vec());
        start += len;
    }
    arcs
}

/// Grow the membership function of one arc: the fixed point of the discrete
/// advection `φ(x_i) = I[φ](x_i + h f(x_i, a*(x_i)))` (self-dependency
/// removed) with boundary data `χ_{Γ_p}`. Returns `φ_p` and the sweep count.
pub fn grow_patch<T: Scalar>(
    problem: &Problem<T>,
    grid: &Grid<T>,
    feedback: &FeedbackControl,
    arc: &[usize],
) -> Result<(ScalarField<T>, usize), SchemeError> {
    let reduced = problem.without_diffusion();
    let bounds = estimate_bounds(&reduced, grid);
    let h = choose_time_step(&bounds, grid.spacing())?.h;

    let mut phi = ScalarField::constant(*grid, T::zero());
    for &i in arc {
        phi.set(i, T::one());
    }

    let order = NodeOrder::default_order(grid);
    let tol = T::from(TOL_P).unwrap();
    let guard = T::one() - T::from(1e-12).unwrap();
    let cap = default_sweep_cap(grid.n());
    let mut sweeps = 0;
    while sweeps < cap {
        let mut change = T::zero();
        for &i in order.nodes() {
            let x = grid.position(i);
            let a = reduced.controls().get(feedback.control_index[i]);
            let foot = x + reduced.dynamics(x, a) * h;
            let stencil = interp_stencil(grid, i, foot)?;
            if stencil.self_weight >= guard {
                return Err(SchemeError::DegenerateStencil { node: i });
            }
            let mut acc = T::zero();
            for &(j, w) in &stencil.neighbors {
                acc = acc + w * phi.get(j);
            }
            let new = acc / (T::one() - stencil.self_weight);
            change = change.max((new - phi.get(i)).abs());
            phi.set(i, new);
        }
        sweeps += 1;
        if change < tol {
            break;
        }
    }
    Ok((phi, sweeps))
}

/// Assign each interior node to the patch with the largest membership among
/// candidates (`φ_p ≥ τ`); nodes with no candidate fall back to the overall
/// argmax. Ties break to the lowest patch id.
pub fn assign_patches<T: Scalar>(grid: &Grid<T>, phis: &[ScalarField<T>]) -> Vec<Option<usize>> {
    let tau = T::from(TAU_P).unwrap();
    let mut owner = vec![None; grid.node_count()];
    for i in 0..grid.node_count() {
        if grid.is_boundary(i) {
            continue;
        }
        let mut best_candidate: Option<(usize, T)> = None;
        let mut best_overall: Option<(usize, T)> = None;
        for (p, phi) in phis.iter().enumerate() {
            let v = phi.get(i);
            if best_overall.map_or(true, |(_, bv)| v > bv) {
                best_overall = Some((p, v));
            }
            if v >= tau && best_candidate.map_or(true, |(_, bv)| v > bv) {
                best_candidate = Some((p, v));
            }
        }
        owner[i] = best_candidate.or(best_overall).map(|(p, _)| p);
    }
    owner
}

/// Run the whole pipeline: coarse solve, prolongation, feedback synthesis,
/// membership growth, assignment, and causal per-patch ordering. Also returns
/// the prolonged coarse value `û` (the warm start for the parallel solver).
pub fn build_decomposition<T: Scalar>(
    problem: &Problem<T>,
    grid: &Grid<T>,
    config: &PatchyConfig<T>,
) -> Result<(Decomposition, ScalarField<T>, PrecomputeStats<T>), SchemeError> {
    let (u_hat, coarse_stats) = coarse_solve(problem, grid, config.coarse_n, config.coarse_tol)?;
    let feedback = synthesize_feedback(problem, grid, &u_hat)?;
    let arcs = split_boundary(grid, config.num_patches);

    let mut phis = Vec::with_capacity(arcs.len());
    let mut growth_sweeps = 0;
    for arc in &arcs {
        let (phi, sweeps) = grow_patch(problem, grid, &feedback, arc)?;
        growth_sweeps += sweeps;
        phis.push(phi);
    }

    let owner = assign_patches(grid, &phis);
    let mut patches: Vec<Patch> = arcs
        .into_iter()
        .enumerate()
        .map(|(id, arc)| Patch { id, nodes: Vec::new(), arc })
        .collect();
    for i in 0..grid.node_count() {
        if let Some(p) = owner[i] {
            patches[p].nodes.push(i);
        }
    }
    for patch in &mut patches {
        patch.nodes.sort_by(|&a, &b| {
            u_hat
                .get(a)
                .partial_cmp(&u_hat.get(b))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
    }

    let stats = PrecomputeStats { coarse: coarse_stats, growth_sweeps };
    Ok((Decomposition { patches, owner }, u_hat, stats))
}

/// Interior nodes at `BIG`, boundary at the exit cost — exported for callers
/// that want the same cold start the plain solver uses.
pub fn cold_start<T: Scalar>(problem: &Problem<T>, grid: &Grid<T>) -> ScalarField<T> {
    big_init(problem, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_constant_advection, make_unit_eikonal};

    fn unit_grid(n: usize) -> Grid<f64> {
        Grid::new(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0), n).unwrap()
    }

    #[test]
    fn boundary_walk_order_and_corners() {
        let g = unit_grid(5);
        let arcs = split_boundary(&g, 4);
        assert_eq!(arcs.len(), 4);
        for arc in &arcs {
            assert_eq!(arc.len(), 4);
        }
        // bottom side ends at the bottom-right corner
        let bottom: Vec<usize> = (1..5).map(|c| g.index(4, c)).collect();
        assert_eq!(arcs[0], bottom);
        let right: Vec<usize> = (0..4).rev().map(|r| g.index(r, 4)).collect();
        assert_eq!(arcs[1], right);
        let top: Vec<usize> = (0..4).rev().map(|c| g.index(0, c)).collect();
        assert_eq!(arcs[2], top);
        let left: Vec<usize> = (1..5).map(|r| g.index(r, 0)).collect();
        assert_eq!(arcs[3], left);
    }

    #[test]
    fn uneven_split_front_loads_extra_nodes() {
        let g = unit_grid(4); // 12 boundary nodes
        let arcs = split_boundary(&g, 5);
        let lens: Vec<usize> = arcs.iter().map(Vec::len).collect();
        assert_eq!(lens, [3, 3, 2, 2, 2]);
        let total: usize = lens.iter().sum();
        assert_eq!(total, 12);
    }

    #[test]
    fn split_covers_boundary_without_overlap() {
        let g = unit_grid(9);
        let arcs = split_boundary(&g, 3);
        let mut seen: Vec<usize> = arcs.concat();
        seen.sort_unstable();
        let mut expect: Vec<usize> = g.boundary_nodes().collect();
        expect.sort_unstable();
        assert_eq!(seen, expect);
    }

    #[test]
    fn coarse_solve_reproduces_advection_profile() {
        let p = make_constant_advection(Vec2::new(1.0, 0.0));
        let fine = unit_grid(41);
        let (u_hat, stats) = coarse_solve(&p, &fine, 21, 1e-8).unwrap();
        assert!(stats.converged);
        // away from the edges, where prolongation does not smear the jump to
        // the zero exit cost
        for i in fine.interior_nodes() {
            let x = fine.position(i);
            if x.x.abs() <= 0.8 && x.y.abs() <= 0.8 {
                assert!((u_hat.get(i) - (1.0 - x.x)).abs() < 1e-6, "at {:?}", x);
            }
        }
    }

    #[test]
    fn feedback_points_to_nearest_edge() {
        let p = make_unit_eikonal::<f64>();
        let g = unit_grid(21);
        let (u_hat, _) = coarse_solve(&p, &g, 21, 1e-8).unwrap();
        let fb = synthesize_feedback(&p, &g, &u_hat).unwrap();
        // (0.5, 0): nearest boundary is the right edge → control (1, 0)
        let right = g.index(10, 15);
        assert_eq!(fb.control_index[right], 0);
        // (-0.5, 0): left edge → control (-1, 0), index 8 of 16
        let left = g.index(10, 5);
        assert_eq!(fb.control_index[left], 8);
        // (0, 0.5): top edge → control (0, 1), index 4
        let up = g.index(5, 10);
        assert_eq!(fb.control_index[up], 4);
    }

    #[test]
    fn membership_follows_the_flow() {
        let p = make_constant_advection(Vec2::new(1.0, 0.0));
        let g = unit_grid(21);
        let (u_hat, _) = coarse_solve(&p, &g, 21, 1e-8).unwrap();
        let fb = synthesize_feedback(&p, &g, &u_hat).unwrap();
        let arcs = split_boundary(&g, 4);
        // everything flows to the right edge: its membership saturates the
        // interior, the left edge's stays near zero
        let (phi_right, _) = grow_patch(&p, &g, &fb, &arcs[1]).unwrap();
        let (phi_left, _) = grow_patch(&p, &g, &fb, &arcs[3]).unwrap();
        let center = g.index(10, 10);
        assert!(phi_right.get(center) > 0.9, "{}", phi_right.get(center));
        assert!(phi_left.get(center) < 0.1, "{}", phi_left.get(center));
    }

    #[test]
    fn assignment_covers_interior_with_fallback() {
        let g = unit_grid(9);
        // φ values below τ everywhere: fallback must still assign everything
        let phis = vec![
            ScalarField::from_fn(g, |p| 0.2 + 0.1 * p.x),
            ScalarField::from_fn(g, |p| 0.2 - 0.1 * p.x),
        ];
        let owner = assign_patches(&g, &phis);
        for i in 0..g.node_count() {
            if g.is_boundary(i) {
                assert_eq!(owner[i], None);
            } else {
                let p = g.position(i);
                let expect = if p.x > 0.0 { 0 } else if p.x < 0.0 { 1 } else { 0 };
                assert_eq!(owner[i], Some(expect), "at {:?}", p);
            }
        }
    }

    #[test]
    fn assignment_prefers_largest_membership() {
        let g = unit_grid(5);
        let phis = vec![
            ScalarField::constant(g, 0.6),
            ScalarField::constant(g, 0.8),
            ScalarField::constant(g, 0.8),
        ];
        let owner = assign_patches(&g, &phis);
        let i = g.index(2, 2);
        // 0.8 ties between patches 1 and 2: lowest id wins
        assert_eq!(owner[i], Some(1));
    }

    #[test]
    fn decomposition_partitions_interior_causally() {
        let p = make_unit_eikonal::<f64>();
        let g = unit_grid(25);
        let config = PatchyConfig { coarse_n: 13, num_patches: 4, coarse_tol: 1e-7 };
        let (dec, u_hat, stats) = build_decomposition(&p, &g, &config).unwrap();
        assert!(stats.coarse.converged);
        assert_eq!(dec.patches.len(), 4);
        let mut all: Vec<usize> = dec.patches.iter().flat_map(|p| p.nodes.clone()).collect();
        all.sort_unstable();
        let mut expect: Vec<usize> = g.interior_nodes().collect();
        expect.sort_unstable();
        assert_eq!(all, expect);
        for patch in &dec.patches {
            assert!(!patch.nodes.is_empty());
            for w in patch.nodes.windows(2) {
                let (a, b) = (u_hat.get(w[0]), u_hat.get(w[1]));
                assert!(a < b || (a == b && w[0] < w[1]));
            }
        }
    }

    #[test]
    fn eikonal_patches_match_quadrant_symmetry() {
        // Unit eikonal with four side arcs: each side's patch should contain
        // the node adjacent to that side's midpoint.
        let p = make_unit_eikonal::<f64>();
        let g = unit_grid(21);
        let config = PatchyConfig { coarse_n: 21, num_patches: 4, coarse_tol: 1e-7 };
        let (dec, _, _) = build_decomposition(&p, &g, &config).unwrap();
        assert_eq!(dec.owner[g.index(19, 10)], Some(0)); // near bottom
        assert_eq!(dec.owner[g.index(10, 19)], Some(1)); // near right
        assert_eq!(dec.owner[g.index(1, 10)], Some(2)); // near top
        assert_eq!(dec.owner[g.index(10, 1)], Some(3)); // near left
    }
}

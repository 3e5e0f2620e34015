//! Uniform square 2D grids, per-node scalar fields, and bilinear
//! interpolation stencils with an identified self-weight.
//!
//! Node convention: `index = row * n + col`, row 0 at the top (largest `y`),
//! col 0 at the left (smallest `x`). Boundary nodes are exactly those with
//! row or col in `{0, n-1}`.

use crate::vec2::Vec2;
use crate::Scalar;
use thiserror::Error;

/// Tolerance on stencil weight sums and floating-point containment slack,
/// relative to the spacing.
pub const WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 3 nodes per axis, got {0}")]
    TooFewNodes(usize),
    #[error("domain box is empty or non-square")]
    BadDomain,
    #[error("grids cover different domain boxes")]
    DomainMismatch,
    #[error("point ({x}, {y}) lies outside the domain box")]
    PointOutsideDomain { x: f64, y: f64 },
    #[error("point ({x}, {y}) escapes the first-neighbor cells of node {node}")]
    PointOutsideNeighborCells { x: f64, y: f64, node: usize },
}

/// Uniform square grid over an axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T> {
    lower: Vec2<T>,
    upper: Vec2<T>,
    n: usize,
    dx: T,
}

impl<T: Scalar> Grid<T> {
    /// Build an `n × n` node grid over `[lower, upper]`. The domain must be a
    /// square so the spacing is identical on both axes.
    pub fn new(lower: Vec2<T>, upper: Vec2<T>, n: usize) -> Result<Self, GridError> {
        if n < 3 {
            return Err(GridError::TooFewNodes(n));
        }
        let wx = upper.x - lower.x;
        let wy = upper.y - lower.y;
        if wx <= T::zero() || wy <= T::zero() {
            return Err(GridError::BadDomain);
        }
        let rel = ((wx - wy) / wx).abs();
        if rel > T::from(WEIGHT_TOL).unwrap() {
            return Err(GridError::BadDomain);
        }
        let dx = wx / T::from(n - 1).unwrap();
        Ok(Self { lower, upper, n, dx })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    pub fn spacing(&self) -> T {
        self.dx
    }

    pub fn lower(&self) -> Vec2<T> {
        self.lower
    }

    pub fn upper(&self) -> Vec2<T> {
        self.upper
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.n && col < self.n);
        row * self.n + col
    }

    #[inline]
    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.n, index % self.n)
    }

    /// Physical position of a node: `x` grows with col, `y` shrinks with row
    /// (row 0 is the top edge).
    #[inline]
    pub fn position(&self, index: usize) -> Vec2<T> {
        let (row, col) = self.row_col(index);
        Vec2::new(
            self.lower.x + T::from(col).unwrap() * self.dx,
            self.upper.y - T::from(row).unwrap() * self.dx,
        )
    }

    #[inline]
    pub fn is_boundary(&self, index: usize) -> bool {
        let (row, col) = self.row_col(index);
        row == 0 || col == 0 || row == self.n - 1 || col == self.n - 1
    }

    /// Interior node indices in ascending order.
    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.n;
        (1..n - 1).flat_map(move |row| (1..n - 1).map(move |col| row * n + col))
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.node_count()).filter(|&i| self.is_boundary(i))
    }

    pub fn interior_count(&self) -> usize {
        (self.n - 2) * (self.n - 2)
    }

    fn same_box(&self, other: &Self) -> bool {
        self.lower == other.lower && self.upper == other.upper
    }

    fn slack(&self) -> T {
        T::from(WEIGHT_TOL).unwrap() * self.dx
    }

    /// Clamp a point to the domain box, tolerating escapes up to the
    /// floating-point slack. Larger escapes are an error.
    pub fn clamp_to_box(&self, p: Vec2<T>) -> Result<Vec2<T>, GridError> {
        let s = self.slack();
        let mut q = p;
        for (v, lo, hi) in [
            (&mut q.x, self.lower.x, self.upper.x),
            (&mut q.y, self.lower.y, self.upper.y),
        ] {
            if *v < lo - s || *v > hi + s {
                return Err(GridError::PointOutsideDomain {
                    x: p.x.to_f64().unwrap_or(f64::NAN),
                    y: p.y.to_f64().unwrap_or(f64::NAN),
                });
            }
            *v = v.max(lo).min(hi);
        }
        Ok(q)
    }
}

/// Per-node scalar values over a grid (`u`, `u_c`, `û`, `φ_p`).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    pub fn constant(grid: Grid<T>, value: T) -> Self {
        let values = vec![value; grid.node_count()];
        Self { grid, values }
    }

    pub fn from_values(grid: Grid<T>, values: Vec<T>) -> Self {
        assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid<T>, f: impl Fn(Vec2<T>) -> T) -> Self {
        let values = (0..grid.node_count()).map(|i| f(grid.position(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn get(&self, index: usize) -> T {
        self.values[index]
    }

    #[inline]
    pub fn set(&mut self, index: usize, value: T) {
        self.values[index] = value;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn sup_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

/// Bilinear weights of one cell, with the base node's weight split out as the
/// self-weight `λ0`. The three remaining corners carry `(node, λ)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpStencil<T> {
    pub self_weight: T,
    pub neighbors: [(usize, T); 3],
}

impl<T: Scalar> InterpStencil<T> {
    pub fn weight_sum(&self) -> T {
        self.neighbors
            .iter()
            .fold(self.self_weight, |acc, &(_, w)| acc + w)
    }
}

/// Bilinear stencil for `point`, expressed over the cell that contains it and
/// has `base_node` as a corner. The point must lie in the closed union of the
/// base node's first-neighbor cells.
pub fn interp_stencil<T: Scalar>(
    grid: &Grid<T>,
    base_node: usize,
    point: Vec2<T>,
) -> Result<InterpStencil<T>, GridError> {
    let point = grid.clamp_to_box(point)?;
    let n = grid.n();
    let dx = grid.spacing();
    let slack = T::from(WEIGHT_TOL).unwrap();
    let (row, col) = grid.row_col(base_node);
    let base = grid.position(base_node);
    let off = point - base;

    let escape = |v: T| v.abs() / dx > T::one() + slack;
    if escape(off.x) || escape(off.y) {
        return Err(GridError::PointOutsideNeighborCells {
            x: point.x.to_f64().unwrap_or(f64::NAN),
            y: point.y.to_f64().unwrap_or(f64::NAN),
            node: base_node,
        });
    }

    // Fraction along each axis inside the containing cell, and the index step
    // toward the cell's far corner. Zero offsets pick whichever neighbor stays
    // in the grid, with zero weight either way.
    let axis = |off: T, idx: usize, positive_step: bool| -> (T, isize) {
        let frac = (off.abs() / dx).max(T::zero()).min(T::one());
        let dir = if off > T::zero() {
            true
        } else if off < T::zero() {
            false
        } else {
            // degenerate axis: keep the step in-grid
            if positive_step {
                idx + 1 < n
            } else {
                idx > 0
            }
        };
        (frac, if dir { 1 } else { -1 })
    };

    // x grows with col; y shrinks with row.
    let (px, step_col) = axis(off.x, col, true);
    let (py, step_row_up) = axis(off.y, row, false);
    let step_row = -step_row_up; // off.y > 0 means one row up (smaller row)

    let col2 = (col as isize + step_col) as usize;
    let row2 = (row as isize + step_row) as usize;
    if col2 >= n || row2 >= n {
        return Err(GridError::PointOutsideNeighborCells {
            x: point.x.to_f64().unwrap_or(f64::NAN),
            y: point.y.to_f64().unwrap_or(f64::NAN),
            node: base_node,
        });
    }

    let one = T::one();
    Ok(InterpStencil {
        self_weight: (one - px) * (one - py),
        neighbors: [
            (grid.index(row, col2), px * (one - py)),
            (grid.index(row2, col), (one - px) * py),
            (grid.index(row2, col2), px * py),
        ],
    })
}

/// Reconstructed value `λ0·u(base)` + weighted neighbors. The caller supplies
/// the base node's value through the field itself.
pub fn interp_value<T: Scalar>(field: &ScalarField<T>, base_node: usize, stencil: &InterpStencil<T>) -> T {
    let mut v = stencil.self_weight * field.get(base_node);
    for &(idx, w) in &stencil.neighbors {
        v = v + w * field.get(idx);
    }
    v
}

/// Bilinear interpolation of `field` at an arbitrary in-box point. Locates
/// the containing cell globally; used where no base-node convention applies.
pub fn interp_at<T: Scalar>(field: &ScalarField<T>, point: Vec2<T>) -> Result<T, GridError> {
    let grid = field.grid();
    let point = grid.clamp_to_box(point)?;
    let n = grid.n();
    let dx = grid.spacing();
    let one = T::one();

    let fx = ((point.x - grid.lower().x) / dx).max(T::zero());
    let fy = ((grid.upper().y - point.y) / dx).max(T::zero());
    let col = (fx.floor().to_usize().unwrap()).min(n - 2);
    let row = (fy.floor().to_usize().unwrap()).min(n - 2);
    let px = (fx - T::from(col).unwrap()).min(one);
    let py = (fy - T::from(row).unwrap()).min(one);

    let v00 = field.get(grid.index(row, col));
    let v01 = field.get(grid.index(row, col + 1));
    let v10 = field.get(grid.index(row + 1, col));
    let v11 = field.get(grid.index(row + 1, col + 1));
    Ok((one - px) * (one - py) * v00
        + px * (one - py) * v01
        + (one - px) * py * v10
        + px * py * v11)
}

/// Interpolate a coarse field onto every node of a fine grid over the same
/// domain box. Fine nodes that coincide with coarse nodes reproduce the
/// coarse values exactly.
pub fn prolong<T: Scalar>(coarse: &ScalarField<T>, fine_grid: &Grid<T>) -> Result<ScalarField<T>, GridError> {
    if !coarse.grid().same_box(fine_grid) {
        return Err(GridError::DomainMismatch);
    }
    let mut values = Vec::with_capacity(fine_grid.node_count());
    for i in 0..fine_grid.node_count() {
        values.push(interp_at(coarse, fine_grid.position(i))?);
    }
    Ok(ScalarField::from_values(*fine_grid, values))
}

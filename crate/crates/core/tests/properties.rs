//! Randomized properties of the interpolation and update kernels.

use patchy_hjb::grid::{interp_at, interp_stencil, interp_value, Grid, ScalarField};
use patchy_hjb::scheme::explicit_fixed_point;
use patchy_hjb::vec2::Vec2;
use proptest::prelude::*;

fn unit_grid(n: usize) -> Grid<f64> {
    Grid::new(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0), n).unwrap()
}

proptest! {
    /// Interpolation weights form a convex combination: nonnegative, sum 1.
    #[test]
    fn stencil_weights_are_convex(
        n in 5usize..40,
        row_f in 0.0f64..1.0,
        col_f in 0.0f64..1.0,
        ox in -1.0f64..1.0,
        oy in -1.0f64..1.0,
    ) {
        let g = unit_grid(n);
        let row = 1 + (row_f * (n - 2) as f64) as usize;
        let col = 1 + (col_f * (n - 2) as f64) as usize;
        let node = g.index(row.min(n - 2), col.min(n - 2));
        // a point within the node's first-neighbor cells
        let p = g.position(node) + Vec2::new(ox, oy) * (0.999 * g.spacing());
        let stencil = interp_stencil(&g, node, p).unwrap();
        let mut sum = stencil.self_weight;
        prop_assert!(stencil.self_weight >= -1e-12);
        for &(_, w) in &stencil.neighbors {
            prop_assert!(w >= -1e-12, "negative weight {w}");
            sum += w;
        }
        prop_assert!((sum - 1.0).abs() < 1e-12, "weight sum {sum}");
    }

    /// Bilinear interpolation reproduces affine functions exactly, both
    /// through the local stencil and the global locator.
    #[test]
    fn interpolation_is_affine_exact(
        n in 5usize..40,
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        c in -3.0f64..3.0,
        px in -1.0f64..1.0,
        py in -1.0f64..1.0,
    ) {
        let g = unit_grid(n);
        let f = move |p: Vec2<f64>| a * p.x + b * p.y + c;
        let field = ScalarField::from_fn(g, f);
        let p = Vec2::new(px, py);
        let global = interp_at(&field, p).unwrap();
        prop_assert!((global - f(p)).abs() < 1e-10, "global: {global} vs {}", f(p));

        // pick the nearest interior node as stencil base; stay within its cells
        let dx = g.spacing();
        let row = (((1.0 - py) / dx).round() as usize).clamp(1, n - 2);
        let col = (((px + 1.0) / dx).round() as usize).clamp(1, n - 2);
        let node = g.index(row, col);
        let base = g.position(node);
        let q = base + (p - base) * (dx / (2.0 * dx.max((p - base).norm())));
        let stencil = interp_stencil(&g, node, q).unwrap();
        let local = interp_value(&field, node, &stencil);
        prop_assert!((local - f(q)).abs() < 1e-10, "local: {local} vs {}", f(q));
    }

    /// The closed-form explicitation returns a genuine fixed point of the
    /// implicit update `v = min_a (w_a v + r_a)`, and picks its argmin.
    #[test]
    fn explicitation_returns_the_fixed_point(
        pairs in prop::collection::vec((0.0f64..0.999, 0.0f64..10.0), 1..12),
    ) {
        let (v, arg) = explicit_fixed_point(&pairs).unwrap();
        let image = pairs
            .iter()
            .map(|&(w, r)| w * v + r)
            .fold(f64::INFINITY, f64::min);
        prop_assert!((v - image).abs() <= 1e-9 * (1.0 + v.abs()), "v = {v}, image = {image}");
        let (w, r) = pairs[arg];
        prop_assert!((v - (w * v + r)).abs() <= 1e-9 * (1.0 + v.abs()));
    }
}

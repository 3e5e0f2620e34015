//! On-disk formats: solution and patch-map CSV, run-metrics JSON, and simple
//! PPM heatmaps for quick visual checks.

use crate::grid::{Grid, ScalarField};
use crate::patchy::Decomposition;
use crate::runner::RunMetrics;
use crate::vec2::Vec2;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("file holds {got} nodes, expected a square grid")]
    NotSquare { got: usize },
}

/// Write `x,y,u` rows in node (row-major) order, with enough digits for an
/// exact `f64` round-trip.
pub fn write_solution_csv(path: &Path, field: &ScalarField<f64>) -> Result<(), IoError> {
    let grid = field.grid();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,y,u")?;
    for i in 0..grid.node_count() {
        let p = grid.position(i);
        writeln!(out, "{:.17e},{:.17e},{:.17e}", p.x, p.y, field.get(i))?;
    }
    out.flush()?;
    Ok(())
}

/// Read a solution CSV back into a field. The grid is reconstructed from the
/// coordinate columns.
pub fn read_solution_csv(path: &Path) -> Result<ScalarField<f64>, IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if k == 0 {
            continue; // header
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let mut next = |name: &str| -> Result<f64, IoError> {
            cols.next()
                .ok_or_else(|| IoError::Malformed {
                    line: k + 1,
                    message: format!("missing column {name}"),
                })?
                .trim()
                .parse()
                .map_err(|e| IoError::Malformed { line: k + 1, message: format!("{name}: {e}") })
        };
        rows.push((next("x")?, next("y")?, next("u")?));
    }
    let count = rows.len();
    let n = (count as f64).sqrt().round() as usize;
    if n < 3 || n * n != count {
        return Err(IoError::NotSquare { got: count });
    }
    let lower = Vec2::new(rows[0].0, rows[count - 1].1);
    let upper = Vec2::new(rows[n - 1].0, rows[0].1);
    let grid = Grid::new(lower, upper, n).map_err(|e| IoError::Malformed {
        line: 2,
        message: e.to_string(),
    })?;
    let values = rows.into_iter().map(|(_, _, u)| u).collect();
    Ok(ScalarField::from_values(grid, values))
}

/// Write `x,y,patch` rows in node order. Boundary nodes, which no patch owns,
/// get patch `-1`.
pub fn write_patches_csv(
    path: &Path,
    grid: &Grid<f64>,
    decomposition: &Decomposition,
) -> Result<(), IoError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,y,patch")?;
    for i in 0..grid.node_count() {
        let p = grid.position(i);
        let owner = decomposition.owner[i].map(|v| v as i64).unwrap_or(-1);
        writeln!(out, "{:.17e},{:.17e},{owner}", p.x, p.y)?;
    }
    out.flush()?;
    Ok(())
}

/// Serialize run metrics as a flat JSON object.
pub fn metrics_json(metrics: &RunMetrics) -> String {
    let obj = serde_json::json!({
        "method": metrics.method.name(),
        "grid_n": metrics.grid_n,
        "dx": metrics.dx,
        "eps": metrics.eps,
        "patches": metrics.patches,
        "workers": metrics.workers,
        "iterations": metrics.iterations,
        "precompute_seconds": metrics.precompute_seconds,
        "solve_seconds": metrics.solve_seconds,
        "total_seconds": metrics.total_seconds,
        "converged": metrics.converged,
    });
    serde_json::to_string_pretty(&obj).expect("metrics serialization cannot fail")
}

pub fn write_metrics_json(path: &Path, metrics: &RunMetrics) -> Result<(), IoError> {
    std::fs::write(path, metrics_json(metrics) + "\n")?;
    Ok(())
}

fn heat_color(t: f64) -> [u8; 3] {
    // blue → cyan → yellow → red
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 1.0 / 3.0 {
        let s = 3.0 * t;
        (0.0, s, 1.0)
    } else if t < 2.0 / 3.0 {
        let s = 3.0 * t - 1.0;
        (s, 1.0, 1.0 - s)
    } else {
        let s = 3.0 * t - 2.0;
        (1.0, 1.0 - s, 0.0)
    };
    [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
}

/// Binary PPM heatmap of a field, one pixel per node, values normalized over
/// the finite range.
pub fn write_field_ppm(path: &Path, field: &ScalarField<f64>) -> Result<(), IoError> {
    let grid = field.grid();
    let n = grid.n();
    let finite: Vec<f64> = field.values().iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P6\n{n} {n}\n255\n")?;
    for i in 0..grid.node_count() {
        let v = field.get(i);
        let px = if v.is_finite() {
            heat_color((v - lo) / span)
        } else {
            [0, 0, 0]
        };
        out.write_all(&px)?;
    }
    out.flush()?;
    Ok(())
}

/// Binary PPM patch map: one distinct color per patch, black for boundary.
pub fn write_patches_ppm(
    path: &Path,
    grid: &Grid<f64>,
    decomposition: &Decomposition,
) -> Result<(), IoError> {
    let palette: [[u8; 3]; 8] = [
        [230, 60, 60],
        [60, 140, 230],
        [70, 190, 90],
        [240, 190, 40],
        [170, 90, 220],
        [70, 210, 210],
        [240, 120, 40],
        [150, 150, 150],
    ];
    let n = grid.n();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "P6\n{n} {n}\n255\n")?;
    for i in 0..grid.node_count() {
        let px = match decomposition.owner[i] {
            Some(p) => palette[p % palette.len()],
            None => [0, 0, 0],
        };
        out.write_all(&px)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patchy::{build_decomposition, PatchyConfig};
    use crate::problem::make_unit_eikonal;
    use crate::runner::Method;

    fn unit_grid(n: usize) -> Grid<f64> {
        Grid::new(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0), n).unwrap()
    }

    #[test]
    fn solution_csv_roundtrip_is_exact() {
        let g = unit_grid(7);
        let field = ScalarField::from_fn(g, |p| (13.0 * p.x).sin() * (7.0 * p.y).cos() / 3.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        write_solution_csv(&path, &field).unwrap();
        let back = read_solution_csv(&path).unwrap();
        assert_eq!(back.grid().n(), 7);
        assert_eq!(back.values(), field.values());
        assert_eq!(back.grid().lower(), g.lower());
        assert_eq!(back.grid().upper(), g.upper());
    }

    #[test]
    fn solution_csv_header_and_order() {
        let g = unit_grid(3);
        let field = ScalarField::constant(g, 1.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        write_solution_csv(&path, &field).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x,y,u");
        // first data row is the top-left node (-1, 1)
        let first = lines.next().unwrap();
        assert!(first.starts_with("-1.00000000000000000e0,1.00000000000000000e0,"));
        assert_eq!(text.lines().count(), 1 + 9);
    }

    #[test]
    fn malformed_csv_is_reported_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,y,u\n1.0,2.0\n").unwrap();
        match read_solution_csv(&path) {
            Err(IoError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn non_square_csv_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "x,y,u\n0.0,0.0,1.0\n1.0,0.0,2.0\n").unwrap();
        assert!(matches!(read_solution_csv(&path), Err(IoError::NotSquare { got: 2 })));
    }

    #[test]
    fn patches_csv_marks_boundary() {
        let p = make_unit_eikonal::<f64>();
        let g = unit_grid(15);
        let config = PatchyConfig { coarse_n: 15, num_patches: 4, coarse_tol: 1e-6 };
        let (dec, _, _) = build_decomposition(&p, &g, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("patches.csv");
        write_patches_csv(&path, &g, &dec).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x,y,patch");
        let first = lines.next().unwrap(); // top-left corner: boundary
        assert!(first.ends_with(",-1"));
        assert_eq!(text.lines().count(), 1 + g.node_count());
    }

    #[test]
    fn metrics_json_keys() {
        let m = RunMetrics {
            method: Method::Pdd,
            grid_n: 101,
            dx: 0.02,
            eps: 1e-6,
            patches: 4,
            workers: 2,
            iterations: 12,
            precompute_seconds: 0.5,
            solve_seconds: 1.5,
            total_seconds: 2.0,
            converged: true,
        };
        let parsed: serde_json::Value = serde_json::from_str(&metrics_json(&m)).unwrap();
        assert_eq!(parsed["method"], "pdd");
        assert_eq!(parsed["grid_n"], 101);
        assert_eq!(parsed["iterations"], 12);
        assert_eq!(parsed["converged"], true);
        assert_eq!(parsed["total_seconds"], 2.0);
        for key in [
            "method", "grid_n", "dx", "eps", "patches", "workers", "iterations",
            "precompute_seconds", "solve_seconds", "total_seconds", "converged",
        ] {
            assert!(parsed.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn ppm_headers_and_size() {
        let g = unit_grid(9);
        let field = ScalarField::from_fn(g, |p| p.x + p.y);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.ppm");
        write_field_ppm(&path, &field).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P6\n9 9\n255\n";
        assert!(bytes.starts_with(header));
        assert_eq!(bytes.len(), header.len() + 3 * 81);
    }
}

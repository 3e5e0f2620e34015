//! Command-line front end: solve a problem (single / DD / PDD), print the
//! regime analysis, emit a patch map, or run the benchmark matrix.
//!
//! Exit codes: 0 success, 1 usage error, 2 non-convergence, 3 I/O failure.

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use patchy_hjb::bench::{run_bench, BenchSpec, ProblemKey, ProblemSpec};
use patchy_hjb::grid::Grid;
use patchy_hjb::io::{
    write_field_ppm, write_metrics_json, write_patches_csv, write_patches_ppm, write_solution_csv,
};
use patchy_hjb::patchy::{build_decomposition, PatchyConfig, DEFAULT_COARSE_N, TAU_P};
use patchy_hjb::problem::{estimate_bounds, CostKind, DiffusionKind};
use patchy_hjb::runner::{run, Method, RunConfig, RunMetrics};
use patchy_hjb::scheme::{
    alpha_bounds, solve_fixed_point, Kernel, NodeOrder, DEFAULT_TOL,
};
use patchy_hjb::vec2::Vec2;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hjb", about = "Semi-Lagrangian HJB solver with patchy domain decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem and write the solution CSV (plus optional artifacts).
    Solve(SolveArgs),
    /// Print the advection/diffusion regime analysis for a configuration.
    Regime(ProblemArgs),
    /// Build the patchy decomposition and write the patch map CSV.
    Decompose(DecomposeArgs),
    /// Run a (grid × eps × method) benchmark matrix and write the table.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemFlag {
    Advection,
    Eikonal,
    EikonalSplit,
    EikonalRamp,
    Zermelo,
}

impl ProblemFlag {
    fn key(self) -> ProblemKey {
        match self {
            Self::Advection => ProblemKey::Advection,
            Self::Eikonal => ProblemKey::Eikonal,
            Self::EikonalSplit => ProblemKey::EikonalSplit,
            Self::EikonalRamp => ProblemKey::EikonalRamp,
            Self::Zermelo => ProblemKey::Zermelo,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DiffusionFlag {
    None,
    Iso,
    Control,
}

impl DiffusionFlag {
    fn kind(self) -> DiffusionKind {
        match self {
            Self::None => DiffusionKind::None,
            Self::Iso => DiffusionKind::Isotropic,
            Self::Control => DiffusionKind::ControlAligned,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CostFlag {
    L1,
    L2,
    L3,
}

impl CostFlag {
    fn kind(self) -> CostKind {
        match self {
            Self::L1 => CostKind::L1,
            Self::L2 => CostKind::L2,
            Self::L3 => CostKind::L3,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodFlag {
    Single,
    Dd,
    Pdd,
}

/// Problem/grid flags shared by all subcommands.
#[derive(Args)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value = "eikonal")]
    problem: ProblemFlag,
    /// Diffusion shape; with ε = 0 every shape degenerates to no diffusion.
    #[arg(long, value_enum, default_value = "iso")]
    diffusion: DiffusionFlag,
    /// Diffusion coefficient ε.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Restrict ε to the upper half plane: ε(x) = ε·χ_{x₂≥0}.
    #[arg(long)]
    eps_upper: bool,
    #[arg(long, value_enum, default_value = "l1")]
    cost: CostFlag,
    /// Zermelo drift rotation angle (radians).
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
    theta: f64,
    /// Nodes per axis of the solve grid.
    #[arg(long, default_value_t = 101)]
    grid: usize,
}

impl ProblemArgs {
    fn spec(&self) -> ProblemSpec<f64> {
        ProblemSpec {
            diffusion: self.diffusion.kind(),
            eps: self.eps,
            eps_upper: self.eps_upper,
            cost: self.cost.kind(),
            theta: self.theta,
            ..ProblemSpec::new(self.problem.key())
        }
    }

    fn grid(&self) -> anyhow::Result<Grid<f64>> {
        Grid::new(Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0), self.grid)
            .map_err(|e| anyhow!(e))
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "single")]
    method: MethodFlag,
    /// Subdomain count for dd/pdd.
    #[arg(long, default_value_t = 4)]
    patches: usize,
    /// Worker threads for dd/pdd (1 = sequential).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Force the sequential deterministic schedule regardless of --workers.
    #[arg(long)]
    deterministic: bool,
    /// Convergence tolerance.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Patch membership threshold (pdd).
    #[arg(long, default_value_t = TAU_P)]
    tau_p: f64,
    /// Coarse grid nodes per axis (pdd).
    #[arg(long, default_value_t = DEFAULT_COARSE_N)]
    coarse: usize,
    /// Solution CSV path.
    #[arg(long, default_value = "solution.csv")]
    out: PathBuf,
    /// Metrics JSON path.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Also emit a PPM heatmap next to the CSV.
    #[arg(long)]
    ppm: bool,
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 4)]
    patches: usize,
    #[arg(long, default_value_t = DEFAULT_COARSE_N)]
    coarse: usize,
    /// Patch map CSV path.
    #[arg(long, default_value = "patches.csv")]
    out: PathBuf,
    #[arg(long)]
    ppm: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Grid sizes (nodes per axis); repeatable or comma-separated.
    #[arg(long = "grids", value_delimiter = ',', default_values_t = [101_usize])]
    grids: Vec<usize>,
    /// Diffusion coefficients; repeatable or comma-separated.
    #[arg(long = "eps-list", value_delimiter = ',', required = true)]
    eps_list: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    patches: usize,
    #[arg(long, default_value_t = DEFAULT_COARSE_N)]
    coarse: usize,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Text table output path (also writes `<path>.csv`).
    #[arg(long, default_value = "bench.txt")]
    out: PathBuf,
}

/// Error that should map to the non-convergence exit code.
#[derive(Debug)]
struct NonConvergence;

impl std::fmt::Display for NonConvergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "solver did not converge within the round cap")
    }
}

impl std::error::Error for NonConvergence {}

fn cmd_solve(args: &SolveArgs) -> anyhow::Result<()> {
    let problem = args.problem.spec().build()?;
    let grid = args.problem.grid()?;
    let workers = if args.deterministic { 1 } else { args.workers.max(1) };

    let (field, metrics) = match args.method {
        MethodFlag::Single => {
            let order = NodeOrder::default_order(&grid);
            let (field, stats) =
                solve_fixed_point(&problem, &grid, &order, Kernel::Modified, args.tol, None)
                    .map_err(|e| anyhow!(e))?;
            let metrics = RunMetrics {
                method: Method::Dd,
                grid_n: grid.n(),
                dx: grid.spacing(),
                eps: args.tol,
                patches: 1,
                workers: 1,
                iterations: stats.iterations,
                precompute_seconds: 0.0,
                solve_seconds: 0.0,
                total_seconds: 0.0,
                converged: stats.converged,
            };
            (field, metrics)
        }
        MethodFlag::Dd | MethodFlag::Pdd => {
            let method = if matches!(args.method, MethodFlag::Dd) { Method::Dd } else { Method::Pdd };
            let config = RunConfig {
                method,
                eps: args.tol,
                patches: args.patches,
                workers,
                coarse_n: args.coarse,
            };
            run(&problem, &grid, &config).map_err(|e| anyhow!(e))?
        }
    };

    write_solution_csv(&args.out, &field).context("writing solution CSV")?;
    if let Some(path) = &args.metrics {
        write_metrics_json(path, &metrics).context("writing metrics JSON")?;
    }
    if args.ppm {
        write_field_ppm(&args.out.with_extension("ppm"), &field).context("writing PPM")?;
    }
    if matches!(args.method, MethodFlag::Pdd) {
        // patch map artifact alongside the solution
        let config = PatchyConfig {
            coarse_n: args.coarse,
            num_patches: args.patches,
            coarse_tol: args.tol.max(DEFAULT_TOL),
        };
        let (dec, _, _) = build_decomposition(&problem, &grid, &config).map_err(|e| anyhow!(e))?;
        let map_path = args.out.with_file_name(format!(
            "{}_patches.csv",
            args.out.file_stem().and_then(|s| s.to_str()).unwrap_or("solution")
        ));
        write_patches_csv(&map_path, &grid, &dec).context("writing patch map")?;
        if args.ppm {
            write_patches_ppm(&map_path.with_extension("ppm"), &grid, &dec)
                .context("writing patch PPM")?;
        }
    }
    if !metrics.converged {
        return Err(anyhow!(NonConvergence));
    }
    println!(
        "{}: {} iterations, converged = {}",
        metrics.method.name(),
        metrics.iterations,
        metrics.converged
    );
    Ok(())
}

fn cmd_regime(args: &ProblemArgs) -> anyhow::Result<()> {
    let problem = args.spec().build()?;
    let grid = args.grid()?;
    let bounds = estimate_bounds(&problem, &grid);
    let report = alpha_bounds(&bounds, grid.spacing()).map_err(|e| anyhow!(e))?;
    println!("{}", report.to_text());
    Ok(())
}

fn cmd_decompose(args: &DecomposeArgs) -> anyhow::Result<()> {
    let problem = args.problem.spec().build()?;
    let grid = args.problem.grid()?;
    let config = PatchyConfig {
        coarse_n: args.coarse,
        num_patches: args.patches,
        coarse_tol: DEFAULT_TOL,
    };
    let (dec, _, _) = build_decomposition(&problem, &grid, &config).map_err(|e| anyhow!(e))?;
    write_patches_csv(&args.out, &grid, &dec).context("writing patch map")?;
    if args.ppm {
        write_patches_ppm(&args.out.with_extension("ppm"), &grid, &dec)
            .context("writing patch PPM")?;
    }
    println!("wrote {} patches to {}", dec.patches.len(), args.out.display());
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<()> {
    let spec = BenchSpec {
        problem: args.problem.spec(),
        grids: args.grids.clone(),
        eps_list: args.eps_list.clone(),
        methods: vec![Method::Dd, Method::Pdd],
        patches: args.patches,
        coarse_n: args.coarse,
        tol: args.tol,
    };
    let report = run_bench(&spec)?;
    let table = report.text_table();
    std::fs::write(&args.out, &table).context("writing bench table")?;
    let csv_path = args.out.with_extension("csv");
    std::fs::write(&csv_path, report.csv()).context("writing bench CSV")?;
    print!("{table}");
    Ok(())
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.is::<NonConvergence>() {
        return 2;
    }
    for cause in err.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<patchy_hjb::io::IoError>().is_some()
        {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are success, real usage errors are code 1
            let _ = e.print();
            return if e.exit_code() == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Regime(args) => cmd_regime(args),
        Command::Decompose(args) => cmd_decompose(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

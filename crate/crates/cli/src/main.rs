//! Command line front end: named problems, experiment orchestration, and
//! bit-stable CSV outputs.
//!
//! Subcommands: `mesh-check`, `solve`, `diagnose`, `infsup`, `study`.
//! Exit codes: 0 success, 1 check failure, 2 usage/parse error,
//! 3 numerical failure.

mod csv;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use heatl1::diagnostics::{
    cauchy_study, convergence_study, diagnose, generate_mesh, infsup_constant, mass_budget,
    DiagnosticsError, ExponentPack, TruncationWindow,
};
use heatl1::fespace::{estimate_lumping_constants, estimate_projection_constant, sharp_c1};
use heatl1::mesh::{check_quality, load_mesh, Mesh, MeshError};
use heatl1::quadrature::QuadratureSpec;
use heatl1::registry::lookup;
use heatl1::scheme::{
    build_partition, check_reverse_cfl, solve, CflPolicy, CqSource, Grading, JumpInnerProduct,
    SchemeConfig, SchemeError, SpaceTimeFeFunction, SPACETIME_DOF_CAP,
};

#[derive(Parser)]
#[command(
    name = "heatl1",
    version,
    about = "Mass-lumped P1 finite element solver and verification toolkit for the heat equation with L1 data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or load a mesh and report its quality (exit 0 iff nonobtuse).
    MeshCheck(MeshCheckArgs),
    /// Run the solver and write a trajectory summary CSV.
    Solve(SolveArgs),
    /// Run the solver and write estimate-monitor CSVs.
    Diagnose(DiagnoseArgs),
    /// Inf-sup constants of the space-time form over a sweep of grids.
    Infsup(InfsupArgs),
    /// Refinement studies: manufactured error rates or Cauchy differences.
    Study(StudyArgs),
}

#[derive(Args)]
struct MeshCheckArgs {
    /// Structured unit square mesh with N cells per side
    #[arg(long, value_name = "N", conflicts_with_all = ["interval", "file", "n"])]
    unit_square: Option<usize>,
    /// Uniform interval mesh with N cells
    #[arg(long, value_name = "N", conflicts_with_all = ["file", "n"])]
    interval: Option<usize>,
    /// Mesh file to load
    #[arg(long, conflicts_with = "n")]
    file: Option<PathBuf>,
    /// Dimension for --n (1 or 2)
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Cells per side of the built-in domain
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Problem name, e.g. zero, sine1d, sine2d, dirac(0.0625), spike-rhs(1.5), impulse-rhs
    #[arg(long)]
    problem: String,
    /// Spatial dimension (1 or 2)
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Cells per side
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Number of time steps
    #[arg(long, default_value_t = 64)]
    nt: usize,
    /// Final time
    #[arg(long, default_value_t = 0.25)]
    t_final: f64,
    /// Inverse CFL policy: enforce or warn
    #[arg(long, default_value = "warn")]
    cfl: String,
    /// C_Q for the step-size check: a number or "auto" (measured)
    #[arg(long, default_value = "auto")]
    cq: String,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for measured constants
    #[arg(long, default_value_t = heatl1::rng::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Also write per-vertex nodal values
    #[arg(long)]
    dump_nodal: bool,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Smallest dyadic truncation level exponent (k = 2^e)
    #[arg(long, default_value_t = -4)]
    k_min_exp: i32,
    /// Largest dyadic truncation level exponent
    #[arg(long, default_value_t = 8)]
    k_max_exp: i32,
    /// Window level for the weak-form residual ("auto" = above max |u|)
    #[arg(long, default_value = "auto")]
    window_k: String,
}

#[derive(Args)]
struct InfsupArgs {
    /// Spatial dimension (1 or 2)
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Comma-separated cells-per-side list
    #[arg(long, default_value = "4,8")]
    n: String,
    /// Comma-separated step-count list
    #[arg(long, default_value = "4,8")]
    nt: String,
    /// Final time
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// Also assemble the consistent-jump variant
    #[arg(long)]
    consistent_mass: bool,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for measured constants
    #[arg(long, default_value_t = heatl1::rng::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Args)]
struct StudyArgs {
    /// Problem name
    #[arg(long)]
    problem: String,
    /// Spatial dimension (1 or 2)
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Explicit ladder as n:nt pairs, e.g. 8:16,16:64,32:256
    #[arg(long)]
    ladder: Option<String>,
    /// Coarsest cells per side when no ladder is given
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Coarsest step count when no ladder is given
    #[arg(long, default_value_t = 16)]
    nt: usize,
    /// Number of ladder levels when no ladder is given (n doubles, nt quadruples)
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Final time
    #[arg(long, default_value_t = 0.25)]
    t_final: f64,
    /// Exponent of the gradient norm in Cauchy studies (below (d+2)/(d+1))
    #[arg(long, default_value_t = 1.2)]
    q: f64,
    /// rates, cauchy, or auto (rates when the problem has a closed form)
    #[arg(long, default_value = "auto")]
    kind: String,
    /// Inverse CFL policy: enforce or warn
    #[arg(long, default_value = "enforce")]
    cfl: String,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for measured constants
    #[arg(long, default_value_t = heatl1::rng::DEFAULT_SEED)]
    seed: u64,
}

/// Failure with a process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn check(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
    fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<MeshError> for Failure {
    fn from(e: MeshError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<SchemeError> for Failure {
    fn from(e: SchemeError) -> Self {
        match e {
            SchemeError::CflViolated { .. } => Failure::check(e.to_string()),
            SchemeError::InvalidArgument(_) | SchemeError::SizeCap { .. } => {
                Failure::usage(e.to_string())
            }
            other => Failure::numerical(other.to_string()),
        }
    }
}

impl From<DiagnosticsError> for Failure {
    fn from(e: DiagnosticsError) -> Self {
        match e {
            DiagnosticsError::InvalidExponent(_)
            | DiagnosticsError::EmptyField
            | DiagnosticsError::MissingAnalytic => Failure::usage(e.to_string()),
            DiagnosticsError::Mesh(m) => m.into(),
            DiagnosticsError::Scheme(s) => s.into(),
            other => Failure::numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::numerical(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::MeshCheck(args) => cmd_mesh_check(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Infsup(args) => cmd_infsup(args),
        Command::Study(args) => cmd_study(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn parse_cfl(s: &str) -> Result<CflPolicy, Failure> {
    match s {
        "enforce" => Ok(CflPolicy::Enforce),
        "warn" => Ok(CflPolicy::Warn),
        other => Err(Failure::usage(format!(
            "--cfl must be 'enforce' or 'warn', got '{other}'"
        ))),
    }
}

fn parse_cq(s: &str) -> Result<CqSource<f64>, Failure> {
    if s == "auto" {
        return Ok(CqSource::Measured);
    }
    let v: f64 = s
        .parse()
        .map_err(|e| Failure::usage(format!("--cq must be a number or 'auto': {e}")))?;
    if !(v > 0.0) {
        return Err(Failure::usage("--cq must be positive"));
    }
    Ok(CqSource::Fixed(v))
}

fn cmd_mesh_check(args: MeshCheckArgs) -> Result<(), Failure> {
    let mesh: Mesh<f64> = if let Some(n) = args.unit_square {
        heatl1::mesh::generate_unit_square_mesh(n)?
    } else if let Some(n) = args.interval {
        heatl1::mesh::generate_interval_mesh(n)?
    } else if let Some(path) = &args.file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
        load_mesh(&text)?
    } else if let Some(n) = args.n {
        match args.dim {
            1 => heatl1::mesh::generate_interval_mesh(n)?,
            2 => heatl1::mesh::generate_unit_square_mesh(n)?,
            d => return Err(Failure::usage(format!("--dim must be 1 or 2, got {d}"))),
        }
    } else {
        return Err(Failure::usage(
            "specify --unit-square N, --interval N, --n N, or --file PATH",
        ));
    };

    let q = check_quality(&mesh);
    println!(
        "vertices {}  elements {}  interior {}  h {}",
        mesh.n_vertices(),
        mesh.n_elements(),
        mesh.n_interior(),
        csv::fmt(mesh.mesh_size())
    );
    println!("max_dihedral_angle {}", csv::fmt(q.max_dihedral_angle));
    println!("is_nonobtuse {}", q.is_nonobtuse);
    println!("quasiuniformity_ratio {}", csv::fmt(q.quasiuniformity_ratio));
    println!("offdiag_stiffness_max {}", csv::fmt(q.offdiag_stiffness_max));
    if let Some(e) = q.degenerate_element {
        println!("degenerate_element {e}");
    }
    if q.is_nonobtuse {
        Ok(())
    } else {
        Err(Failure::check(
            "mesh is not nonobtuse; the discrete comparison principle is not guaranteed",
        ))
    }
}

struct Run {
    mesh: Arc<Mesh<f64>>,
    trajectory: SpaceTimeFeFunction<f64>,
    t_final: f64,
}

fn run_solver(args: &RunArgs) -> Result<Run, Failure> {
    if args.dim != 1 && args.dim != 2 {
        return Err(Failure::usage(format!(
            "--dim must be 1 or 2, got {}",
            args.dim
        )));
    }
    let data = lookup::<f64>(&args.problem, args.dim, args.t_final)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let mesh = generate_mesh::<f64>(args.dim, args.n)?;
    let partition = Arc::new(
        build_partition(args.t_final, args.nt, Grading::<f64>::Uniform)
            .map_err(Failure::from)?,
    );
    // resolve "auto" here so the solver enforces with the same (seeded)
    // measurement the warning reports
    let cq = match parse_cq(&args.cq)? {
        CqSource::Fixed(v) => v,
        CqSource::Measured => estimate_lumping_constants(&mesh, 200, args.seed).cq,
    };
    let config = SchemeConfig::<f64> {
        cfl: parse_cfl(&args.cfl)?,
        cq: CqSource::Fixed(cq),
        ..SchemeConfig::default()
    };
    if cq > 0.0 {
        let cfl = check_reverse_cfl(mesh.mesh_size(), &partition, cq);
        if !cfl.ok && config.cfl == CflPolicy::Warn {
            eprintln!(
                "warning: h^2 = {} exceeds the step-size bound {} (C_Q = {})",
                csv::fmt(cfl.h_squared),
                csv::fmt(cfl.bound),
                csv::fmt(cfl.cq)
            );
        }
    }
    let trajectory = solve(&data, &mesh, &partition, &config)?;
    Ok(Run {
        mesh,
        trajectory,
        t_final: args.t_final,
    })
}

fn write_trajectory_csv(run: &Run, out: &std::path::Path) -> Result<(), Failure> {
    let mut table = csv::Table::new(&["step", "t", "l1", "l2", "h1_semi"]);
    let u = &run.trajectory;
    for n in 0..=u.n_steps() {
        let s = u.state(n);
        table.row(vec![
            n.to_string(),
            csv::fmt(u.partition().node(n)),
            csv::fmt(s.l1_norm()),
            csv::fmt(s.l2_norm()),
            csv::fmt(s.h1_seminorm()),
        ]);
    }
    table.write(out, "trajectory.csv")?;
    Ok(())
}

fn cmd_solve(args: SolveArgs) -> Result<(), Failure> {
    let run = run_solver(&args.run)?;
    write_trajectory_csv(&run, &args.run.out)?;
    if args.dump_nodal {
        let mut table = csv::Table::new(&["step", "vertex", "x", "y", "value"]);
        let u = &run.trajectory;
        for n in 0..=u.n_steps() {
            let s = u.state(n);
            for v in 0..run.mesh.n_vertices() {
                let p = run.mesh.vertex(v);
                table.row(vec![
                    n.to_string(),
                    v.to_string(),
                    csv::fmt(p[0]),
                    csv::fmt(p[1]),
                    csv::fmt(s.values()[v]),
                ]);
            }
        }
        table.write(&args.run.out, "nodal.csv")?;
    }
    println!(
        "wrote {} steps to {}",
        run.trajectory.n_steps(),
        args.run.out.join("trajectory.csv").display()
    );
    Ok(())
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<(), Failure> {
    if args.k_min_exp > args.k_max_exp {
        return Err(Failure::usage(format!(
            "empty truncation grid: k_min_exp {} > k_max_exp {}",
            args.k_min_exp, args.k_max_exp
        )));
    }
    let data = lookup::<f64>(&args.run.problem, args.run.dim, args.run.t_final)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let run = run_solver(&args.run)?;
    let mesh = &run.mesh;
    let u = &run.trajectory;
    let spec = QuadratureSpec::<f64>::default();

    let measured = estimate_lumping_constants(mesh, 500, args.run.seed);
    let c1 = sharp_c1::<f64>(args.run.dim);
    let cp = estimate_projection_constant(mesh, &spec)
        .map_err(|e| Failure::numerical(e.to_string()))?;
    let budget = mass_budget(&data, mesh.as_ref(), run.t_final, c1, cp, &spec);

    let max_u = (0..=u.n_steps())
        .map(|n| u.state(n).max_abs_nodal())
        .fold(0.0f64, f64::max);
    let window = if args.window_k == "auto" {
        TruncationWindow::new(max_u + 1.0)
    } else {
        let k: f64 = args
            .window_k
            .parse()
            .map_err(|e| Failure::usage(format!("--window-k must be a number or 'auto': {e}")))?;
        if !(k > 0.0) {
            return Err(Failure::usage("--window-k must be positive"));
        }
        TruncationWindow::new(k)
    };
    let k_grid: Vec<f64> = (args.k_min_exp..=args.k_max_exp)
        .map(|e| 2.0f64.powi(e))
        .collect();
    let report = diagnose(u, &data, &k_grid, budget, window, &spec).map_err(Failure::from)?;

    let mut monitor = csv::Table::new(&["k", "theta_term", "grad_term", "lhs", "bound", "ratio", "pass"]);
    for r in &report.monitor {
        monitor.row(vec![
            csv::fmt(r.k),
            csv::fmt(r.theta_term),
            csv::fmt(r.grad_term),
            csv::fmt(r.lhs),
            csv::fmt(r.bound),
            csv::fmt(r.ratio),
            r.pass.to_string(),
        ]);
    }
    monitor.write(&args.run.out, "monitor.csv")?;

    let mut summary = csv::Table::new(&["name", "value"]);
    let mut put = |name: &str, v: f64| summary.row(vec![name.to_string(), csv::fmt(v)]);
    put("f_total", report.budget.f_total);
    put("u0_term", report.budget.u0_term);
    put("c1_sharp", c1);
    put("c2_measured", measured.c2);
    put("cq_measured", measured.cq);
    put("cp_measured", cp);
    put("linfty_l1", report.linfty_l1);
    put("linfty_l1_bound", report.linfty_l1_bound);
    put("weak_grad_qbar", report.weak_grad);
    put("weak_fn", report.weak_fn);
    put("residual", report.residual);
    put("window_k", report.residual_window);
    summary.write(&args.run.out, "diagnostics.csv")?;

    println!(
        "monitor rows: {} (all pass: {}); wrote {} and {}",
        report.monitor.len(),
        report.monitor_pass && report.l1_bound_pass,
        args.run.out.join("monitor.csv").display(),
        args.run.out.join("diagnostics.csv").display()
    );
    Ok(())
}

fn parse_list(s: &str, what: &str) -> Result<Vec<usize>, Failure> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|e| Failure::usage(format!("cannot parse {what} entry '{tok}': {e}")))
        })
        .collect()
}

fn cmd_infsup(args: InfsupArgs) -> Result<(), Failure> {
    let ns = parse_list(&args.n, "--n")?;
    let nts = parse_list(&args.nt, "--nt")?;
    let mut table = csv::Table::new(&[
        "dim", "n", "nt", "dof", "h", "min_tau", "cq_measured", "cfl_ok", "variant", "sigma_min",
    ]);
    let variants: Vec<(JumpInnerProduct, &str)> = if args.consistent_mass {
        vec![
            (JumpInnerProduct::Lumped, "lumped"),
            (JumpInnerProduct::Consistent, "consistent"),
        ]
    } else {
        vec![(JumpInnerProduct::Lumped, "lumped")]
    };
    for &n in &ns {
        let mesh = generate_mesh::<f64>(args.dim, n)?;
        let measured = estimate_lumping_constants(&mesh, 200, args.seed);
        for &nt in &nts {
            let dof = (nt + 1) * mesh.n_interior();
            if dof > SPACETIME_DOF_CAP {
                return Err(Failure::usage(format!(
                    "n = {n}, nt = {nt} gives {dof} space-time unknowns, cap is {SPACETIME_DOF_CAP}"
                )));
            }
            let partition =
                Arc::new(build_partition(args.t_final, nt, Grading::<f64>::Uniform)?);
            let cfl = check_reverse_cfl(mesh.mesh_size(), &partition, measured.cq);
            for &(variant, name) in &variants {
                let sigma = infsup_constant(mesh.as_ref(), &partition, variant, SPACETIME_DOF_CAP)
                    .map_err(Failure::from)?;
                table.row(vec![
                    args.dim.to_string(),
                    n.to_string(),
                    nt.to_string(),
                    dof.to_string(),
                    csv::fmt(mesh.mesh_size()),
                    csv::fmt(partition.min_step()),
                    csv::fmt(measured.cq),
                    cfl.ok.to_string(),
                    name.to_string(),
                    csv::fmt(sigma),
                ]);
            }
        }
    }
    table.write(&args.out, "infsup.csv")?;
    println!("wrote {}", args.out.join("infsup.csv").display());
    Ok(())
}

fn cmd_study(args: StudyArgs) -> Result<(), Failure> {
    let pack = ExponentPack::new(args.dim);
    let q_bar: f64 = pack.q_bar_f();
    if !(args.q >= 1.0 && args.q < q_bar) {
        return Err(Failure::usage(format!(
            "--q must lie in [1, q_bar) where q_bar = (d+2)/(d+1) = {q_bar} for dimension {}",
            args.dim
        )));
    }
    let ladder: Vec<(usize, usize)> = match &args.ladder {
        Some(text) => {
            let mut out = Vec::new();
            for pair in text.split(',') {
                let mut it = pair.trim().split(':');
                let n = it
                    .next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| Failure::usage(format!("bad ladder entry '{pair}'")))?;
                let nt = it
                    .next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| Failure::usage(format!("bad ladder entry '{pair}'")))?;
                if it.next().is_some() {
                    return Err(Failure::usage(format!("bad ladder entry '{pair}'")));
                }
                out.push((n, nt));
            }
            out
        }
        None => (0..args.levels)
            .map(|l| (args.n << l, args.nt << (2 * l)))
            .collect(),
    };
    if ladder.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 <= w[0].1) {
        return Err(Failure::usage("ladder must be strictly refining"));
    }

    let data = lookup::<f64>(&args.problem, args.dim, args.t_final)
        .map_err(|e| Failure::usage(e.to_string()))?;
    let config = SchemeConfig::<f64> {
        cfl: parse_cfl(&args.cfl)?,
        ..SchemeConfig::default()
    };

    let kind = match args.kind.as_str() {
        "auto" => {
            if data.analytic.is_some() {
                "rates"
            } else {
                "cauchy"
            }
        }
        "rates" | "cauchy" => args.kind.as_str(),
        other => {
            return Err(Failure::usage(format!(
                "--kind must be rates, cauchy, or auto, got '{other}'"
            )))
        }
    };

    match kind {
        "rates" => {
            let table = convergence_study(&data, args.dim, &ladder, args.t_final, &config)
                .map_err(Failure::from)?;
            let mut rates = csv::Table::new(&["n", "nt", "h", "tau_max", "err_linf_l2", "err_l2_h1"]);
            for r in &table.rows {
                rates.row(vec![
                    r.n.to_string(),
                    r.nt.to_string(),
                    csv::fmt(r.h),
                    csv::fmt(r.tau_max),
                    csv::fmt(r.err_linf_l2),
                    csv::fmt(r.err_l2_h1),
                ]);
            }
            rates.write(&args.out, "rates.csv")?;
            let mut orders = csv::Table::new(&["name", "value"]);
            orders.row(vec!["order_linf_l2".into(), csv::fmt(table.order_linf_l2)]);
            orders.row(vec!["order_l2_h1".into(), csv::fmt(table.order_l2_h1)]);
            orders.write(&args.out, "orders.csv")?;
            println!(
                "orders: linf_l2 {:.3}, l2_h1 {:.3}; wrote {}",
                table.order_linf_l2,
                table.order_l2_h1,
                args.out.join("rates.csv").display()
            );
        }
        _ => {
            let rows = cauchy_study(&data, args.dim, &ladder, args.t_final, args.q, &config)
                .map_err(Failure::from)?;
            let mut cauchy = csv::Table::new(&["n_coarse", "n_fine", "diff_linf_l1", "diff_lq_w1q"]);
            for r in &rows {
                cauchy.row(vec![
                    r.n_coarse.to_string(),
                    r.n_fine.to_string(),
                    csv::fmt(r.diff_linf_l1),
                    csv::fmt(r.diff_lq_w1q),
                ]);
            }
            cauchy.write(&args.out, "cauchy.csv")?;
            println!("wrote {}", args.out.join("cauchy.csv").display());
        }
    }
    Ok(())
}

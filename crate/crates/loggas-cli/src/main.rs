//! Scenario-driven command line for the log-gas laboratory.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 numerical failure.  Set `LOGGAS_LOG=info` or `debug` for progress on
//! stderr.  All floating output uses 17 significant digits; with a fixed
//! seed every artifact is byte-reproducible regardless of `--workers`.

mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use loggas::fluctuation::{
    hermite_g, johansson_continued, johansson_equal_time, pde_evolve_kernel, GMap, Sign,
};
use loggas::hydro::{HydroField, MomentClosure};
use loggas::potential::equilibrium_density;
use loggas::{ou, sde, support, verify};

use output::{fmt_float, Field, Format, Table};
use scenario::Scenario;

#[derive(Parser)]
#[command(name = "loggas", version, about = "dissipative log-gas laboratory")]
struct Cli {
    /// Scenario file (JSON, schema_version 1).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory (overrides the scenario's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Kernel evaluation method (eval-kernel only).
    #[arg(long, global = true, value_enum, default_value_t = Method::Stationary)]
    method: Method,
    /// Artifact format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the finite-N particle SDE and record trajectories.
    SimulateSde,
    /// Solve the hydrodynamic limit; record density and field probes.
    SolveHydro,
    /// Track the support edges over the scenario horizon.
    TrackSupport,
    /// Evaluate fluctuation covariance kernels on a probe grid.
    EvalKernel,
    /// Identify the spectral OU representation and simulate its modes.
    IdentifyOu,
    /// Run the verification suite and emit a JSON report.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// G-map continuation flow of the stationary kernel.
    Stationary,
    /// Hermite closed form (harmonic potential, β = 2 only).
    ClosedForm,
    /// Conservative transport of the initial kernel slice along
    /// characteristics.
    Pde,
}

impl Method {
    fn label(self) -> &'static str {
        match self {
            Method::Stationary => "stationary",
            Method::ClosedForm => "closed-form",
            Method::Pde => "pde",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

enum AppError {
    Config(String),
    Numerical(String),
    Verification,
}

impl From<loggas::Error> for AppError {
    fn from(e: loggas::Error) -> Self {
        AppError::Numerical(e.to_string())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Numerical(format!("i/o error: {e}"))
    }
}

type AppResult<T> = Result<T, AppError>;

fn log_enabled(level: &str) -> bool {
    match std::env::var("LOGGAS_LOG").as_deref() {
        Ok("debug") => true,
        Ok("info") => level == "info",
        _ => false,
    }
}

macro_rules! log_info {
    ($($arg:tt)*) => {
        if log_enabled("info") { eprintln!($($arg)*); }
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Verification) => ExitCode::from(1),
        Err(AppError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

struct Ctx {
    sc: Scenario,
    out_dir: PathBuf,
    seed: u64,
    format: Format,
    method: Method,
}

fn run(cli: Cli) -> AppResult<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(AppError::Config("--workers must be ≥ 1".into()));
        }
        // A default pool may already exist; the explicit size is best-effort.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let path = cli
        .scenario
        .ok_or_else(|| AppError::Config("--scenario <path> is required".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut sc = Scenario::parse(&text).map_err(AppError::Config)?;
    if let Some(seed) = cli.seed {
        sc.seed = seed;
    }
    let out_dir = cli.out.unwrap_or_else(|| sc.output_dir.clone());
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| AppError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let ctx = Ctx {
        seed: sc.seed,
        out_dir,
        format: match cli.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        },
        method: cli.method,
        sc,
    };
    match cli.command {
        Command::SimulateSde => simulate_sde(&ctx),
        Command::SolveHydro => solve_hydro(&ctx),
        Command::TrackSupport => track_support(&ctx),
        Command::EvalKernel => eval_kernel(&ctx),
        Command::IdentifyOu => identify_ou(&ctx),
        Command::Verify => run_verify(&ctx),
    }
}

fn hydro_field(ctx: &Ctx) -> AppResult<HydroField> {
    let p = ctx.sc.potential().map_err(AppError::Config)?;
    let init = ctx.sc.initial_data().map_err(AppError::Config)?;
    let k_max = 6.max(p.degree().saturating_sub(2));
    Ok(HydroField::new(
        p,
        ctx.sc.beta,
        init,
        ctx.sc.horizon,
        k_max,
        MomentClosure::FreezeInitial,
    )?)
}

fn simulate_sde(ctx: &Ctx) -> AppResult<()> {
    let p = ctx.sc.potential().map_err(AppError::Config)?;
    let init = ctx.sc.initial_data().map_err(AppError::Config)?;
    let template = sde::quantile_init(&init, ctx.sc.n_particles)?;
    let steps = (ctx.sc.horizon / ctx.sc.dt).ceil() as usize;
    log_info!(
        "simulate-sde: N={} replicas={} steps={steps}",
        ctx.sc.n_particles,
        ctx.sc.replicas
    );
    let radius = ctx.sc.potential.radius;
    let per_replica: Vec<loggas::Result<Vec<(f64, Vec<f64>)>>> = (0..ctx.sc.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            rng.set_stream(r as u64 + 1);
            let mut state = template.clone();
            let mut rows = vec![(0.0, state.lambdas.clone())];
            for k in 0..steps {
                let dt = ctx.sc.dt.min(ctx.sc.horizon - k as f64 * ctx.sc.dt);
                sde::step(&mut state, dt, &p, ctx.sc.beta, radius, &mut rng, 1.0)?;
                rows.push((state.t, state.lambdas.clone()));
            }
            Ok(rows)
        })
        .collect();
    let mut table = Table::new("trajectory", &["replica", "t", "i", "lambda"]);
    for (r, res) in per_replica.into_iter().enumerate() {
        for (t, lambdas) in res? {
            for (i, &l) in lambdas.iter().enumerate() {
                table.push(vec![
                    Field::Int(r as i64),
                    Field::Float(t),
                    Field::Int(i as i64),
                    Field::Float(l),
                ]);
            }
        }
    }
    let path = table.write(&ctx.out_dir, ctx.format)?;
    log_info!("wrote {}", path.display());
    Ok(())
}

fn solve_hydro(ctx: &Ctx) -> AppResult<()> {
    let field = hydro_field(ctx)?;
    let (a0, b0) = field.init.support();
    let times: Vec<f64> = (0..=8).map(|i| ctx.sc.horizon * i as f64 / 8.0).collect();
    // Density on a grid 20% wider than the initial support.
    let span = 0.6 * (b0 - a0);
    let mid = 0.5 * (a0 + b0);
    let mut density = Table::new("density", &["t", "x", "rho"]);
    for &t in &times {
        let rhos: Vec<loggas::Result<f64>> = (0..=60)
            .into_par_iter()
            .map(|i| {
                let x = mid - span + 2.0 * span * i as f64 / 60.0;
                field.density(t, x)
            })
            .collect();
        for (i, rho) in rhos.into_iter().enumerate() {
            let x = mid - span + 2.0 * span * i as f64 / 60.0;
            density.push(vec![Field::Float(t), Field::Float(x), Field::Float(rho?)]);
        }
    }
    let path = density.write(&ctx.out_dir, ctx.format)?;
    log_info!("wrote {}", path.display());
    // Field probes in the upper half-plane.
    let mut table = Table::new("field", &["t", "re_z", "im_z", "re_U", "im_U"]);
    for &t in &times {
        for i in 0..9 {
            for &im in &[0.05, 0.3, 1.0] {
                let z = Complex64::new(mid - span + 2.0 * span * i as f64 / 8.0, im);
                let u = field.u(t, z)?;
                table.push(vec![
                    Field::Float(t),
                    Field::Float(z.re),
                    Field::Float(z.im),
                    Field::Float(u.re),
                    Field::Float(u.im),
                ]);
            }
        }
    }
    let path = table.write(&ctx.out_dir, ctx.format)?;
    log_info!("wrote {}", path.display());
    Ok(())
}

fn track_support(ctx: &Ctx) -> AppResult<()> {
    let field = hydro_field(ctx)?;
    let times: Vec<f64> = (0..=20).map(|i| ctx.sc.horizon * i as f64 / 20.0).collect();
    let traj = support::track_support(&field, &times)?;
    let mut table = Table::new("edge", &["t", "a_star", "a", "b_star", "b", "margin"]);
    for (i, &t) in traj.times.iter().enumerate() {
        table.push(vec![
            Field::Float(t),
            Field::Float(traj.a_star[i]),
            Field::Float(traj.a[i]),
            Field::Float(traj.b_star[i]),
            Field::Float(traj.b[i]),
            Field::Float(traj.jacobian_margin[i]),
        ]);
    }
    let path = table.write(&ctx.out_dir, ctx.format)?;
    log_info!("wrote {}", path.display());
    Ok(())
}

fn eval_kernel(ctx: &Ctx) -> AppResult<()> {
    let p = ctx.sc.potential().map_err(AppError::Config)?;
    let eq = equilibrium_density(&p, ctx.sc.beta).map_err(|e| {
        AppError::Config(format!("kernel evaluation needs a closed-form equilibrium: {e}"))
    })?;
    let a = eq.half_width;
    let x2 = 0.3 * a;
    let xs: Vec<f64> = (-4..=4)
        .filter(|&i| i != 0)
        .map(|i| 0.2 * a * i as f64)
        .collect();
    let (t1, t2) = (ctx.sc.horizon, 0.0);
    let method = ctx.method.label().to_string();
    let mut table = Table::new(
        "kernel",
        &["t1", "x1", "t2", "x2", "eps1", "eps2", "re", "im", "method"],
    );
    let mut push = |t1: f64, x1: f64, e1: i64, e2: i64, v: Complex64, m: &str| {
        table.push(vec![
            Field::Float(t1),
            Field::Float(x1),
            Field::Float(t2),
            Field::Float(x2),
            Field::Int(e1),
            Field::Int(e2),
            Field::Float(v.re),
            Field::Float(v.im),
            Field::Str(m.to_string()),
        ]);
    };
    // Equal-time signed kernels and real combination (closed form).
    for &x1 in &xs {
        let ks = johansson_equal_time(x1, x2, a)?;
        push(t2, x1, 1, 1, ks.pp, "equal-time");
        push(t2, x1, 1, -1, ks.pm, "equal-time");
        push(t2, x1, -1, 1, ks.mp, "equal-time");
        push(t2, x1, -1, -1, ks.mm, "equal-time");
        push(t2, x1, 0, 0, Complex64::new(ks.real, 0.0), "equal-time");
    }
    // Two-time real kernel by the requested method.
    match ctx.method {
        Method::Stationary => {
            let gm = GMap::new(eq)?;
            for &x1 in &xs {
                let g = gm.stationary_two_time_g(t1, t2, x1, x2)?;
                push(t1, x1, 0, 0, Complex64::new(g, 0.0), &method);
            }
        }
        Method::ClosedForm => {
            if (a - std::f64::consts::SQRT_2).abs() > 1e-12 || p.degree() != 2 {
                return Err(AppError::Config(
                    "--method closed-form needs the harmonic potential at β = 2".into(),
                ));
            }
            for &x1 in &xs {
                let g = hermite_g(t1 - t2, x1, x2)?;
                push(t1, x1, 0, 0, Complex64::new(g, 0.0), &method);
            }
        }
        Method::Pde => {
            let field = hydro_field(ctx)?;
            let pp = pde_evolve_kernel(
                &field,
                &|z| johansson_continued(z, x2, a, Sign::Plus, Sign::Plus).unwrap(),
                t2,
                t1,
                &xs,
            )?;
            let pm = pde_evolve_kernel(
                &field,
                &|z| johansson_continued(z, x2, a, Sign::Plus, Sign::Minus).unwrap(),
                t2,
                t1,
                &xs,
            )?;
            for (i, &x1) in xs.iter().enumerate() {
                let g = -(pp[i] - pm[i]).re / (2.0 * std::f64::consts::PI.powi(2));
                push(t1, x1, 0, 0, Complex64::new(g, 0.0), &method);
            }
        }
    }
    let path = table.write(&ctx.out_dir, ctx.format)?;
    log_info!("wrote {}", path.display());
    Ok(())
}

fn identify_ou(ctx: &Ctx) -> AppResult<()> {
    let spec = ou::identify(ou::hermite_mode_kernel, 64)?;
    let mut table = Table::new("spectral", &["n", "A", "K", "noise_sq"]);
    for m in &spec.modes {
        table.push(vec![
            Field::Int(m.n),
            Field::Float(m.drift),
            Field::Float(m.stationary_cov),
            Field::Float(m.noise_sq),
        ]);
    }
    let path = table.write(&ctx.out_dir, ctx.format)?;
    log_info!("wrote {}", path.display());
    // Simulate the modes that are stable at the scenario step size.
    let n_stable = (0.4 / ctx.sc.dt).floor() as usize;
    if n_stable == 0 {
        return Err(AppError::Config(format!(
            "dt = {} leaves no OU mode inside the stability margin dt·Â < 1/2",
            ctx.sc.dt
        )));
    }
    let sub = ou::OuSpectral {
        modes: spec.modes.iter().take(n_stable.min(64)).copied().collect(),
    };
    let traj = ou::simulate(&sub, ctx.sc.horizon, ctx.sc.dt, ctx.seed, None, 1.0)?;
    let mut table = Table::new("ou_trajectory", &["t", "n", "re", "im"]);
    for (k, &t) in traj.times.iter().enumerate() {
        for (mi, &n) in traj.modes.iter().enumerate() {
            table.push(vec![
                Field::Float(t),
                Field::Int(n),
                Field::Float(traj.values[mi][k]),
                Field::Float(0.0),
            ]);
        }
    }
    let path = table.write(&ctx.out_dir, ctx.format)?;
    log_info!("wrote {}", path.display());
    Ok(())
}

fn run_verify(ctx: &Ctx) -> AppResult<()> {
    let results = verify::run_all(ctx.sc.replicas.max(2));
    let mut all = true;
    let mut checks = Vec::new();
    for c in &results {
        println!(
            "check {:2} [{}] {} — observed {:.3e} (threshold {:.1e}) in {:.1}s: {}",
            c.id,
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.threshold,
            c.seconds,
            c.detail
        );
        all &= c.passed;
        checks.push(format!(
            "{{\"id\":{},\"name\":{:?},\"passed\":{},\"observed\":{},\"threshold\":{},\"seconds\":{},\"detail\":{:?}}}",
            c.id,
            c.name,
            c.passed,
            if c.observed.is_finite() {
                fmt_float(c.observed)
            } else {
                format!("{:?}", c.observed.to_string())
            },
            fmt_float(c.threshold),
            fmt_float(c.seconds),
            c.detail
        ));
    }
    let report = format!(
        "{{\"passed\":{all},\"checks\":[{}]}}\n",
        checks.join(",")
    );
    let path = ctx.out_dir.join("report.json");
    std::fs::write(&path, report)?;
    log_info!("wrote {}", path.display());
    if all {
        Ok(())
    } else {
        Err(AppError::Verification)
    }
}

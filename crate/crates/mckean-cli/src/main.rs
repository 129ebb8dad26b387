//! Command-line driver: polynomial closures, coefficient tables, measure
//! metrics, simulation, fixed-point solving, value search, dynamic-programming
//! residuals, and the self-check battery. Experiments are config-shaped: one
//! JSON file, with a few flags overriding its scalars.

mod checks;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use mckean::closure::star_closure;
use mckean::coeff::{coeff_table, CoefficientTable};
use mckean::config::RunConfig;
use mckean::control::{dpp_residual, value_search, Backend, ValueResult};
use mckean::dynamics::{
    moment_flow, picard_solve, simulate_particles, write_flow_csv, ControlPath,
};
use mckean::measure::{k_star, read_particles_csv, write_particles_csv, MeasureState};
use mckean::metric::{metric_d_abs, metric_d_sq};
use mckean::poly::Polynomial;

#[derive(Parser)]
#[command(
    name = "mckean",
    about = "Controlled McKean-Vlasov jump-diffusions: closure algebra, measure metrics, simulation, and dynamic programming",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Overrides {
    /// Configuration file (JSON).
    #[arg(long, short = 'c')]
    config: PathBuf,
    /// Override simulation.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override simulation.dt.
    #[arg(long)]
    dt: Option<f64>,
    /// Override simulation.particles.
    #[arg(long)]
    particles: Option<usize>,
    /// Override output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            cfg.simulation.seed = seed;
        }
        if let Some(dt) = self.dt {
            if dt <= 0.0 {
                bail!("--dt must be positive");
            }
            cfg.simulation.dt = dt;
        }
        if let Some(n) = self.particles {
            if n == 0 {
                bail!("--particles must be >= 1");
            }
            cfg.simulation.particles = n;
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        Ok(cfg)
    }

    fn base_dir(&self) -> PathBuf {
        self.config
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the closure of a polynomial under derivatives and the jump image.
    Closure {
        /// Polynomial expression, e.g. "x^3" or "2m1x + 2m2".
        expr: String,
        /// Also write the closure set as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Build and print the coefficient table for the configured jump law.
    Coeffs {
        #[command(flatten)]
        common: Overrides,
        /// Number of basis elements.
        #[arg(long, default_value_t = 50)]
        j_max: usize,
        /// Exponential-moment bound b of the ball; default grows the initial
        /// measure's exponential moment by the invariance envelope.
        #[arg(long)]
        bound: Option<f64>,
        /// Write the table as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Distance between two particle measures (CSV files) in both metrics.
    Metric {
        #[command(flatten)]
        common: Overrides,
        mu: PathBuf,
        nu: PathBuf,
        #[arg(long, default_value_t = 50)]
        j_max: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Simulate the configured model under the fixed control and write flows.
    Simulate {
        #[command(flatten)]
        common: Overrides,
    },
    /// Freeze-the-law fixed-point iteration under the fixed control.
    Picard {
        #[command(flatten)]
        common: Overrides,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
    },
    /// Exhaustive value search over piecewise-constant controls.
    Value {
        #[command(flatten)]
        common: Overrides,
    },
    /// Dynamic-programming residual at an intermediate breakpoint.
    Dpp {
        #[command(flatten)]
        common: Overrides,
        /// The split time; must be a breakpoint of the uniform control grid.
        #[arg(long)]
        theta: f64,
    },
    /// Run the invariant battery; exits non-zero on any failure.
    Check {
        #[command(flatten)]
        common: Overrides,
    },
}

fn main() {
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}

/// Thread count comes from MCKEAN_THREADS; default is available parallelism.
fn init_threads() {
    if let Ok(value) = std::env::var("MCKEAN_THREADS") {
        if let Ok(n) = value.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        } else {
            eprintln!("warning: ignoring non-numeric MCKEAN_THREADS = {value}");
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Closure { expr, json } => cmd_closure(&expr, json.as_deref()),
        Command::Coeffs {
            common,
            j_max,
            bound,
            json,
        } => cmd_coeffs(&common, j_max, bound, json.as_deref()),
        Command::Metric {
            common,
            mu,
            nu,
            j_max,
            json,
        } => cmd_metric(&common, &mu, &nu, j_max, json.as_deref()),
        Command::Simulate { common } => cmd_simulate(&common),
        Command::Picard {
            common,
            tol,
            max_iter,
        } => cmd_picard(&common, tol, max_iter),
        Command::Value { common } => cmd_value(&common),
        Command::Dpp { common, theta } => cmd_dpp(&common, theta),
        Command::Check { common } => checks::cmd_check(&common.load()?, &common.base_dir()),
    }
}

fn cmd_closure(expr: &str, json: Option<&Path>) -> anyhow::Result<i32> {
    let poly = Polynomial::parse(expr)?;
    let closure = star_closure(&poly);
    println!("closure of {poly}: {} elements", closure.len());
    for member in closure.iter() {
        println!("  {member}");
    }
    if let Some(path) = json {
        std::fs::write(path, serde_json::to_string_pretty(&closure)?)?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

/// The exponential-moment ball that provably contains the configured flow:
/// the initial measure's exponential moment grown by `e^{K* T}`.
fn default_bound(cfg: &RunConfig, base_dir: &Path) -> anyhow::Result<f64> {
    let delta = cfg.model.bounds.delta;
    let rate = k_star(cfg.model.bounds.c0, delta, &cfg.model.jump)?;
    let base = match cfg.initial.particles(base_dir) {
        Ok(mu) => mu.exp_moment(delta),
        Err(_) => 2.0,
    };
    Ok(base.max(1.0) * (rate * (cfg.simulation.horizon - cfg.simulation.t0)).exp())
}

fn build_table(
    cfg: &RunConfig,
    base_dir: &Path,
    j_max: usize,
    bound: Option<f64>,
) -> anyhow::Result<(CoefficientTable, f64)> {
    let bound = match bound {
        Some(b) => b,
        None => default_bound(cfg, base_dir)?,
    };
    let table = coeff_table(bound, j_max, &cfg.model.jump, cfg.model.bounds.delta)?;
    Ok((table, bound))
}

fn cmd_coeffs(
    common: &Overrides,
    j_max: usize,
    bound: Option<f64>,
    json: Option<&Path>,
) -> anyhow::Result<i32> {
    let cfg = common.load()?;
    let (table, bound) = build_table(&cfg, &common.base_dir(), j_max, bound)?;
    println!(
        "coefficient table: {} basis elements, ball bound b = {bound:.6}, delta = {}",
        table.len(),
        table.delta
    );
    println!("{:>4}  {:>12}  {:>12}  {:>12}  deps", "j", "c_j", "s_j", "envelope");
    for j in 0..table.len() {
        println!(
            "{:>4}  {:>12.5e}  {:>12.6}  {:>12.6}  {:?}",
            j + 1,
            table.c[j],
            table.s_hat[j],
            table.envelope[j],
            table.deps[j]
        );
    }
    if let Some(path) = json {
        std::fs::write(path, serde_json::to_string_pretty(&table)?)?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

#[derive(Serialize)]
struct MetricReport {
    j_max: usize,
    bound_b: f64,
    d_squared: f64,
    d_squared_tail: f64,
    d_abs: f64,
    d_abs_tail: f64,
}

fn cmd_metric(
    common: &Overrides,
    mu_path: &Path,
    nu_path: &Path,
    j_max: usize,
    json: Option<&Path>,
) -> anyhow::Result<i32> {
    let cfg = common.load()?;
    let mu = read_particles_csv(mu_path)?;
    let nu = read_particles_csv(nu_path)?;
    let (table, bound) = build_table(&cfg, &common.base_dir(), j_max, None)?;
    let sq = metric_d_sq(&mu, &nu, &table, j_max)?;
    let ab = metric_d_abs(&mu, &nu, &table, j_max)?;
    println!("d^2(mu, nu) = {:.10e}  (tail <= {:.3e})", sq.value, sq.tail_bound);
    println!("d(mu, nu)   = {:.10e}  (tail <= {:.3e})", ab.value, ab.tail_bound);
    if let Some(path) = json {
        let report = MetricReport {
            j_max,
            bound_b: bound,
            d_squared: sq.value,
            d_squared_tail: sq.tail_bound,
            d_abs: ab.value,
            d_abs_tail: ab.tail_bound,
        };
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
        println!("wrote {}", path.display());
    }
    Ok(0)
}

fn ensure_out_dir(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("creating {}", cfg.output.dir.display()))?;
    Ok(cfg.output.dir.clone())
}

fn cmd_simulate(common: &Overrides) -> anyhow::Result<i32> {
    let cfg = common.load()?;
    let out_dir = ensure_out_dir(&cfg)?;
    let path = cfg.fixed_path()?;
    let seed = cfg.simulation.seed;
    match cfg.control.backend {
        Backend::Moment => {
            let state = cfg
                .initial
                .state(&common.base_dir(), cfg.simulation.order)?;
            let mu0 = state.moments(cfg.simulation.order)?;
            let flow = moment_flow(&cfg.model, &mu0, &path, cfg.simulation.order, cfg.simulation.dt)?;
            let file = out_dir.join("flow.csv");
            write_flow_csv(&file, &flow, Some(seed))?;
            println!(
                "moment flow: {} grid times, order {}, wrote {}",
                flow.len(),
                flow.order(),
                file.display()
            );
        }
        Backend::Particle => {
            let mu0 = cfg.initial.particles(&common.base_dir())?;
            let out = simulate_particles(&cfg.model, &mu0, &path, &cfg.sim_params())?;
            let file = out_dir.join("flow.csv");
            write_flow_csv(&file, &out.flow, Some(seed))?;
            println!(
                "particle flow: {} particles, {} grid times, wrote {}",
                cfg.simulation.particles,
                out.flow.len(),
                file.display()
            );
            for (i, (t, cloud)) in out.snapshots.iter().enumerate() {
                let snap = out_dir.join(format!("particles_{i:04}.csv"));
                write_particles_csv(&snap, cloud, Some(seed))?;
                println!("  snapshot t = {t:.6}: {}", snap.display());
            }
            let terminal = out_dir.join("particles_terminal.csv");
            write_particles_csv(&terminal, &out.terminal, Some(seed))?;
            println!("  terminal cloud: {}", terminal.display());
        }
    }
    Ok(0)
}

fn cmd_picard(common: &Overrides, tol: f64, max_iter: usize) -> anyhow::Result<i32> {
    let cfg = common.load()?;
    let out_dir = ensure_out_dir(&cfg)?;
    let path = cfg.fixed_path()?;
    let state = cfg
        .initial
        .state(&common.base_dir(), cfg.simulation.order)?;
    let mu0 = state.moments(cfg.simulation.order)?;
    let outcome = picard_solve(
        &cfg.model,
        &mu0,
        &path,
        cfg.simulation.order,
        cfg.simulation.dt,
        tol,
        max_iter,
    )?;
    println!("converged in {} sweeps; gaps:", outcome.iterations);
    for (k, gap) in outcome.gaps.iter().enumerate() {
        println!("  sweep {:>2}: {gap:.6e}", k + 1);
    }
    let file = out_dir.join("picard_flow.csv");
    write_flow_csv(&file, &outcome.flow, Some(cfg.simulation.seed))?;
    println!("wrote {}", file.display());
    Ok(0)
}

#[derive(Serialize)]
struct ValueArtifact {
    seed: u64,
    /// The exhaustive piecewise-constant search can only over-approximate the
    /// true infimum over all admissible controls.
    value_kind: &'static str,
    #[serde(flatten)]
    result: ValueResult,
}

fn cmd_value(common: &Overrides) -> anyhow::Result<i32> {
    let cfg = common.load()?;
    let out_dir = ensure_out_dir(&cfg)?;
    let state = initial_for_backend(&cfg, &common.base_dir())?;
    let result = value_search(
        &cfg.model,
        cfg.simulation.t0,
        cfg.simulation.horizon,
        &state,
        cfg.control.n_intervals,
        &cfg.solve_config(),
    )?;
    println!(
        "value = {:.12} ({} backend, {} candidates)",
        result.value, result.backend, result.candidates
    );
    for (k, (w, a)) in result
        .control
        .breakpoints()
        .windows(2)
        .zip(result.control.values())
        .enumerate()
    {
        println!(
            "  [{:.4}, {:.4}): a = {:?}, running cost {:.6e}",
            w[0], w[1], a, result.interval_costs[k]
        );
    }
    println!("  terminal cost {:.6e}", result.terminal_cost);
    let artifact = ValueArtifact {
        seed: cfg.simulation.seed,
        value_kind: "piecewise_constant_upper_bound",
        result,
    };
    let file = out_dir.join("value.json");
    std::fs::write(&file, serde_json::to_string_pretty(&artifact)?)?;
    println!("wrote {}", file.display());
    Ok(0)
}

fn initial_for_backend(cfg: &RunConfig, base_dir: &Path) -> anyhow::Result<MeasureState> {
    Ok(match cfg.control.backend {
        Backend::Particle => MeasureState::Particles(cfg.initial.particles(base_dir)?),
        Backend::Moment => cfg.initial.state(base_dir, cfg.simulation.order)?,
    })
}

#[derive(Serialize)]
struct DppArtifact {
    seed: u64,
    theta: f64,
    n_intervals: usize,
    residual: f64,
}

fn cmd_dpp(common: &Overrides, theta: f64) -> anyhow::Result<i32> {
    let cfg = common.load()?;
    let out_dir = ensure_out_dir(&cfg)?;
    let state = cfg
        .initial
        .state(&common.base_dir(), cfg.simulation.order)?;
    let residual = dpp_residual(
        &cfg.model,
        cfg.simulation.t0,
        cfg.simulation.horizon,
        &state,
        theta,
        cfg.control.n_intervals,
        &cfg.solve_config(),
    )?;
    println!("dynamic-programming residual at theta = {theta}: {residual:.6e}");
    let artifact = DppArtifact {
        seed: cfg.simulation.seed,
        theta,
        n_intervals: cfg.control.n_intervals,
        residual,
    };
    let file = out_dir.join("dpp.json");
    std::fs::write(&file, serde_json::to_string_pretty(&artifact)?)?;
    println!("wrote {}", file.display());
    Ok(0)
}

//! Command-line front end: `run`, `sweep`, `eval` and `gradcheck`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{parse_config, ExperimentConfig, Method, Overrides};
use crate::curriculum::{run_directory, run_experiment, write_artifacts};
use crate::envs::{feasible_goal_grid, EnvKind};
use crate::error::{Error, Result};
use crate::eval_report::{estimate_coverage, write_heatmap};
use crate::grad_suite;
use crate::nn::TensorList;
use crate::policy_opt::GaussianPolicy;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN_ERROR: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "goalgan", version, about = "Goal-generation curricula for goal-reaching policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run(RunArgs),
    /// Dimension study over point-mass environments, methods and seeds.
    Sweep(SweepArgs),
    /// Coverage of a saved policy checkpoint.
    Eval(EvalArgs),
    /// Finite-difference checks of all analytic gradients.
    Gradcheck(GradArgs),
}

#[derive(Debug, Args, Default)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root (default: $GOALGAN_OUTPUT_ROOT, else ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "iters")]
    iterations: Option<usize>,
    #[arg(long)]
    rmin: Option<f64>,
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Episodes per policy step.
    #[arg(long)]
    episodes: Option<usize>,
    /// Coverage evaluation cadence in outer iterations.
    #[arg(long)]
    eval_every: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            iterations: self.iterations,
            workers: self.workers,
            output_dir: self.out.clone(),
            r_min: self.rmin,
            r_max: self.rmax,
            horizon: self.horizon,
            episodes_per_iteration: self.episodes,
            eval_every: self.eval_every,
            ..Overrides::default()
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    method: Option<String>,
    /// `multipath-maze` or `point-mass`.
    #[arg(long)]
    env: Option<String>,
    /// Point-mass dimension.
    #[arg(long, short = 'n')]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Only `ndim` is available.
    #[arg(long, default_value = "ndim")]
    study: String,
    /// Seeds 0..seeds.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![2, 3, 4, 5, 6])]
    dims: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "goalgan,gan-fit-all,oracle,uniform,uniform-l2")]
    methods: Vec<String>,
    /// Runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 4)]
    rollouts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    grid_resolution: Option<f64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write the per-goal table here.
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradArgs {
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::UnknownMethod(_) => EXIT_CONFIG_ERROR,
        _ => EXIT_RUN_ERROR,
    }
}

fn config_error(path: &str, e: Error) -> Error {
    match e {
        Error::Config { .. } | Error::UnknownMethod(_) => e,
        other => Error::Config {
            path: path.to_string(),
            message: other.to_string(),
        },
    }
}

fn parse_env_kind(s: &str) -> Result<EnvKind> {
    match s {
        "multipath-maze" | "multi-path-maze" | "maze" => Ok(EnvKind::MultiPathMaze),
        "point-mass" | "pointmass" => Ok(EnvKind::PointMass),
        other => Err(Error::Config {
            path: "env".into(),
            message: format!("unknown environment `{other}` (expected multipath-maze or point-mass)"),
        }),
    }
}

/// Run one configured experiment and write its artifacts. Returns the run
/// directory; a run that stopped early still writes a partial manifest.
pub fn execute_run(config: &ExperimentConfig) -> Result<PathBuf> {
    let tag = format!("{} {} seed {}", config.method, config.env.tag(), config.seed);
    let result = run_experiment(config, &mut |r| match r.coverage {
        Some(c) => log::info!("[{tag}] iteration {} coverage {c:.3} goid {:.3}", r.iteration, r.goid_fraction),
        None => log::debug!("[{tag}] iteration {} goid {:.3}", r.iteration, r.goid_fraction),
    })?;
    let dir = run_directory(&config.output_root(), config);
    write_artifacts(&result, &dir)?;
    match result.error {
        Some(e) => Err(Error::InvalidArgument(format!("run stopped early ({e}); partial artifacts in {}", dir.display()))),
        None => Ok(dir),
    }
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let mut o = a.common.overrides();
    o.method = a.method.as_deref().map(str::parse).transpose()?;
    o.env_kind = a.env.as_deref().map(parse_env_kind).transpose()?;
    o.dim = a.dim;
    o.seed = a.seed;
    let config = parse_config(a.common.config.as_deref(), &o).map_err(|e| config_error("", e))?;
    let dir = execute_run(&config)?;
    println!("{}", dir.display());
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    if a.study != "ndim" {
        return Err(Error::Config {
            path: "study".into(),
            message: format!("unknown study `{}` (expected ndim)", a.study),
        });
    }
    let mut base_overrides = a.common.overrides();
    base_overrides.iterations = base_overrides.iterations.or(Some(200));
    let base = parse_config(a.common.config.as_deref(), &base_overrides).map_err(|e| config_error("", e))?;
    let methods: Vec<Method> = a.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    let mut configs = Vec::new();
    for &dim in &a.dims {
        for &method in &methods {
            for seed in 0..a.seeds {
                let mut c = base.clone();
                c.method = method;
                c.env.kind = EnvKind::PointMass;
                c.env.dim = dim;
                c.seed = seed;
                c.validate().map_err(|e| config_error("", e))?;
                configs.push(c);
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let outcomes: Vec<Result<PathBuf>> = pool.install(|| configs.par_iter().map(execute_run).collect());
    let mut failures = 0;
    for (c, o) in configs.iter().zip(&outcomes) {
        match o {
            Ok(dir) => println!("{}", dir.display()),
            Err(e) => {
                failures += 1;
                eprintln!("{} {} seed {}: {e}", c.method, c.env.tag(), c.seed);
            }
        }
    }
    if failures > 0 {
        return Err(Error::InvalidArgument(format!("{failures} of {} runs failed", configs.len())));
    }
    Ok(())
}

fn checkpoint_env(list: &TensorList, path: &Path) -> Result<ExperimentConfig> {
    let attr = |k: &str| {
        list.attr(k).ok_or_else(|| Error::TensorFormat {
            path: path.to_path_buf(),
            message: format!("missing attribute {k}"),
        })
    };
    let num = |k: &str| -> Result<usize> {
        attr(k)?.parse().map_err(|_| Error::TensorFormat {
            path: path.to_path_buf(),
            message: format!("attribute {k} is not a number"),
        })
    };
    let mut c = ExperimentConfig::default();
    c.env.kind = parse_env_kind(attr("env.kind")?)?;
    c.env.dim = num("env.dim")?;
    c.env.horizon = num("env.horizon")?;
    Ok(c)
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let list = TensorList::load(&a.checkpoint)?;
    let mut c = checkpoint_env(&list, &a.checkpoint)?;
    c.eval.grid_resolution = a.grid_resolution;
    let env = c.env_config()?;
    let policy = GaussianPolicy::from_tensors(&list)?;
    let grid = feasible_goal_grid(&env, c.eval.grid_spec(&env))?;
    let report = estimate_coverage(&policy, &grid, a.rollouts, &env, a.seed, a.workers.max(1), 0)?;
    if let Some(p) = &a.heatmap {
        write_heatmap(p, env.dim, &report)?;
    }
    println!("coverage {:.6} over {} goals x {} rollouts", report.mean, grid.len(), a.rollouts);
    Ok(())
}

fn cmd_gradcheck(a: GradArgs) -> Result<bool> {
    let mut ok = true;
    for r in grad_suite::run_all(a.cases, a.seed) {
        println!(
            "{:<14} {} cases={} failed={} checked={} skipped={} max_rel_error={:.3e}",
            r.name,
            if r.passes() { "PASS" } else { "FAIL" },
            r.cases,
            r.failed_cases,
            r.report.checked,
            r.report.skipped,
            r.report.max_rel_error
        );
        ok &= r.passes();
    }
    Ok(ok)
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG_ERROR } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gradcheck(a) => match cmd_gradcheck(a) {
            Ok(true) => Ok(()),
            Ok(false) => return EXIT_RUN_ERROR,
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

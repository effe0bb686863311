//! C interface to the goalgan library.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns a
//! [`GgStatus`]; on failure a description is available from
//! [`gg_last_error_message`] on the same thread.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use goalgan::config::{ExperimentConfig, Method};
use goalgan::curriculum::{run_experiment, write_artifacts, ExperimentResult};
use goalgan::envs::{feasible_goal_grid, EnvConfig, EnvKind, EnvState};
use goalgan::eval_report::estimate_coverage;
use goalgan::nn::TensorList;
use goalgan::policy_opt::rollout::policy_observation;
use goalgan::policy_opt::GaussianPolicy;
use goalgan::Error;

/// Result codes. Zero means success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Bad configuration value, unknown key or unknown method.
    Config = 3,
    InvalidArgument = 4,
    Io = 5,
    /// The experiment stopped before finishing.
    Run = 6,
    /// The requested value does not exist (for example no coverage was
    /// estimated at that iteration).
    NotFound = 7,
    /// A Rust panic was caught at the boundary.
    Panic = 8,
}

/// Experiment configuration.
pub struct GgConfig {
    inner: ExperimentConfig,
}

/// Finished (or partially finished) experiment.
pub struct GgResult {
    inner: ExperimentResult,
}

/// Policy loaded from a checkpoint together with its environment.
pub struct GgPolicy {
    policy: GaussianPolicy,
    env: EnvConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GgStatus {
    match e {
        Error::Config { .. } | Error::UnknownMethod(_) => GgStatus::Config,
        Error::Io { .. } | Error::TensorFormat { .. } => GgStatus::Io,
        _ => GgStatus::InvalidArgument,
    }
}

fn fail(status: GgStatus, msg: impl Into<String>) -> GgStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> GgStatus {
    let s = status_of(&e);
    fail(s, e.to_string())
}

/// Run `f`, converting panics into `GgStatus::Panic`.
fn guard(f: impl FnOnce() -> GgStatus) -> GgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(GgStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, GgStatus> {
    if p.is_null() {
        return Err(fail(GgStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GgStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

macro_rules! handle {
    ($p:expr, $what:expr) => {
        match $p.as_ref() {
            Some(h) => h,
            None => return fail(GgStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! handle_mut {
    ($p:expr, $what:expr) => {
        match $p.as_mut() {
            Some(h) => h,
            None => return fail(GgStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! out_ptr {
    ($p:expr) => {
        if $p.is_null() {
            return fail(GgStatus::NullPointer, "output pointer is null");
        }
    };
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New configuration holding the defaults.
#[no_mangle]
pub extern "C" fn gg_config_default() -> *mut GgConfig {
    Box::into_raw(Box::new(GgConfig {
        inner: ExperimentConfig::default(),
    }))
}

/// Parse a TOML document into a new configuration stored in `*out`.
#[no_mangle]
pub unsafe extern "C" fn gg_config_from_toml(text: *const c_char, out: *mut *mut GgConfig) -> GgStatus {
    guard(|| {
        out_ptr!(out);
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match ExperimentConfig::from_toml(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(GgConfig { inner }));
                GgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn gg_config_free(config: *mut GgConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Set the method by name (`goalgan`, `uniform`, ...).
#[no_mangle]
pub unsafe extern "C" fn gg_config_set_method(config: *mut GgConfig, name: *const c_char) -> GgStatus {
    guard(|| {
        let c = handle_mut!(config, "config");
        let name = match str_arg(name, "name") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match name.parse::<Method>() {
            Ok(m) => {
                c.inner.method = m;
                GgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Select the environment: `multipath-maze` (dim must be 2) or `point-mass`.
#[no_mangle]
pub unsafe extern "C" fn gg_config_set_env(config: *mut GgConfig, kind: *const c_char, dim: usize) -> GgStatus {
    guard(|| {
        let c = handle_mut!(config, "config");
        let kind = match str_arg(kind, "kind") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let kind = match kind {
            "multipath-maze" => EnvKind::MultiPathMaze,
            "point-mass" => EnvKind::PointMass,
            other => return fail(GgStatus::Config, format!("unknown environment `{other}`")),
        };
        c.inner.env.kind = kind;
        c.inner.env.dim = dim;
        GgStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn gg_config_set_seed(config: *mut GgConfig, seed: u64) -> GgStatus {
    guard(|| {
        handle_mut!(config, "config").inner.seed = seed;
        GgStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn gg_config_set_iterations(config: *mut GgConfig, iterations: usize) -> GgStatus {
    guard(|| {
        handle_mut!(config, "config").inner.iterations = iterations;
        GgStatus::Ok
    })
}

/// Check the configuration without running anything.
#[no_mangle]
pub unsafe extern "C" fn gg_config_validate(config: *const GgConfig) -> GgStatus {
    guard(|| match handle!(config, "config").inner.validate() {
        Ok(()) => GgStatus::Ok,
        Err(e) => from_error(e),
    })
}

/// Run the configured experiment. On `GG_STATUS_OK` or `GG_STATUS_RUN`
/// (stopped early) `*out` receives a result handle.
#[no_mangle]
pub unsafe extern "C" fn gg_run(config: *const GgConfig, out: *mut *mut GgResult) -> GgStatus {
    guard(|| {
        let c = handle!(config, "config");
        out_ptr!(out);
        match run_experiment(&c.inner, &mut |_| {}) {
            Ok(inner) => {
                let err = inner.error.clone();
                *out = Box::into_raw(Box::new(GgResult { inner }));
                match err {
                    None => GgStatus::Ok,
                    Some(e) => fail(GgStatus::Run, e),
                }
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn gg_result_free(result: *mut GgResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of completed outer iterations.
#[no_mangle]
pub unsafe extern "C" fn gg_result_iterations(result: *const GgResult, out: *mut usize) -> GgStatus {
    guard(|| {
        let r = handle!(result, "result");
        out_ptr!(out);
        *out = r.inner.iterations_completed();
        GgStatus::Ok
    })
}

/// Coverage recorded after `iteration` (0 is the initial policy).
#[no_mangle]
pub unsafe extern "C" fn gg_result_coverage(result: *const GgResult, iteration: usize, out: *mut f64) -> GgStatus {
    guard(|| {
        let r = handle!(result, "result");
        out_ptr!(out);
        match r.inner.coverage_at(iteration) {
            Some(c) => {
                *out = c;
                GgStatus::Ok
            }
            None => fail(GgStatus::NotFound, format!("no coverage recorded at iteration {iteration}")),
        }
    })
}

/// Coverage of the final policy with the final evaluation budget.
#[no_mangle]
pub unsafe extern "C" fn gg_result_final_coverage(result: *const GgResult, out: *mut f64) -> GgStatus {
    guard(|| {
        let r = handle!(result, "result");
        out_ptr!(out);
        match &r.inner.final_coverage {
            Some(c) => {
                *out = c.mean;
                GgStatus::Ok
            }
            None => fail(GgStatus::NotFound, "no final coverage (zero iterations)"),
        }
    })
}

/// Write all artifacts of the result into `directory`.
#[no_mangle]
pub unsafe extern "C" fn gg_result_write(result: *const GgResult, directory: *const c_char) -> GgStatus {
    guard(|| {
        let r = handle!(result, "result");
        let dir = match str_arg(directory, "directory") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match write_artifacts(&r.inner, Path::new(dir)) {
            Ok(_) => GgStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

fn load_policy(path: &Path) -> Result<GgPolicy, Error> {
    let list = TensorList::load(path)?;
    let bad = |m: String| Error::TensorFormat {
        path: path.to_path_buf(),
        message: m,
    };
    let attr = |k: &str| list.attr(k).ok_or_else(|| bad(format!("missing attribute {k}")));
    let num = |k: &str| -> Result<usize, Error> { attr(k)?.parse().map_err(|_| bad(format!("bad attribute {k}"))) };
    let kind = match attr("env.kind")? {
        "multipath-maze" => EnvKind::MultiPathMaze,
        "point-mass" => EnvKind::PointMass,
        other => return Err(bad(format!("unknown environment {other}"))),
    };
    let mut env = EnvConfig::from_kind(kind, num("env.dim")?)?;
    env.horizon = num("env.horizon")?;
    let policy = GaussianPolicy::from_tensors(&list)?;
    Ok(GgPolicy { policy, env })
}

/// Load the policy stored in a run checkpoint.
#[no_mangle]
pub unsafe extern "C" fn gg_policy_load(path: *const c_char, out: *mut *mut GgPolicy) -> GgStatus {
    guard(|| {
        out_ptr!(out);
        let path = match str_arg(path, "path") {
            Ok(t) => t,
            Err(s) => return s,
        };
        match load_policy(Path::new(path)) {
            Ok(p) => {
                *out = Box::into_raw(Box::new(p));
                GgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn gg_policy_free(policy: *mut GgPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Goal-space dimension of the policy's environment.
#[no_mangle]
pub unsafe extern "C" fn gg_policy_dim(policy: *const GgPolicy, out: *mut usize) -> GgStatus {
    guard(|| {
        let p = handle!(policy, "policy");
        out_ptr!(out);
        *out = p.env.dim;
        GgStatus::Ok
    })
}

/// Mean action for the given state and goal. All four arrays hold `dim`
/// values, which must equal the policy's dimension.
#[no_mangle]
pub unsafe extern "C" fn gg_policy_mean_action(
    policy: *const GgPolicy,
    position: *const f64,
    velocity: *const f64,
    goal: *const f64,
    dim: usize,
    action_out: *mut f64,
) -> GgStatus {
    guard(|| {
        let p = handle!(policy, "policy");
        if position.is_null() || velocity.is_null() || goal.is_null() || action_out.is_null() {
            return fail(GgStatus::NullPointer, "array argument is null");
        }
        if dim != p.env.dim {
            return fail(
                GgStatus::InvalidArgument,
                format!("dimension {dim} does not match the policy's {}", p.env.dim),
            );
        }
        let state = EnvState {
            position: std::slice::from_raw_parts(position, dim).to_vec(),
            velocity: std::slice::from_raw_parts(velocity, dim).to_vec(),
            steps: 0,
        };
        let g = std::slice::from_raw_parts(goal, dim);
        let obs = policy_observation(&state, g, &p.env);
        match p.policy.head(&obs) {
            Ok(head) => {
                std::slice::from_raw_parts_mut(action_out, dim).copy_from_slice(&head.mean);
                GgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Coverage of the policy on the default evaluation grid of its
/// environment with `rollouts` episodes per goal.
#[no_mangle]
pub unsafe extern "C" fn gg_policy_coverage(policy: *const GgPolicy, rollouts: usize, seed: u64, out: *mut f64) -> GgStatus {
    guard(|| {
        let p = handle!(policy, "policy");
        out_ptr!(out);
        let spec = goalgan::envs::GridSpec::default_for(&p.env);
        let grid = match feasible_goal_grid(&p.env, spec) {
            Ok(g) => g,
            Err(e) => return from_error(e),
        };
        match estimate_coverage(&p.policy, &grid, rollouts, &p.env, seed, 1, 0) {
            Ok(r) => {
                *out = r.mean;
                GgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

use rand::Rng as _;
use rayon::prelude::*;

use crate::envs::{self, distance, EnvConfig, EnvState};
use crate::error::{check_len, Error, Result};
use crate::policy_opt::GaussianPolicy;
use crate::rng::{item_rng, Rng};

/// How an episode is rewarded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardMode {
    /// Sparse indicator; the episode ends on the first success.
    Indicator,
    /// Negative distance to the goal at every step; runs to the horizon.
    L2Dense,
}

/// One episode. Per-step arrays are flat (`steps x width`).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub goal: Vec<f64>,
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Baseline estimates, filled in after collection.
    pub values: Vec<f64>,
    /// Whether the goal was reached within the horizon.
    pub success: bool,
    /// Projection of the last state into goal space.
    pub final_goal: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Inputs are divided by the goal box half-width so that positions and
/// goals enter the network in roughly `[-1, 1]`.
pub fn observation_scale(env: &EnvConfig) -> f64 {
    let b = &env.goal_space.bounds;
    let half = b
        .lo
        .iter()
        .zip(&b.hi)
        .map(|(l, h)| 0.5 * (h - l))
        .fold(0.0f64, f64::max);
    if half > 0.0 {
        1.0 / half
    } else {
        1.0
    }
}

/// Policy input: scaled position, velocity and goal.
pub fn write_observation(state: &EnvState, goal: &[f64], scale: f64, out: &mut [f64]) {
    let n = state.position.len();
    for i in 0..n {
        out[i] = state.position[i] * scale;
        out[n + i] = state.velocity[i] * scale;
    }
    for (o, g) in out[2 * n..].iter_mut().zip(goal) {
        *o = g * scale;
    }
}

pub fn policy_observation(state: &EnvState, goal: &[f64], env: &EnvConfig) -> Vec<f64> {
    let mut obs = vec![0.0; env.policy_input_dim()];
    write_observation(state, goal, observation_scale(env), &mut obs);
    obs
}

/// Run one episode toward `goal` from the fixed start state.
///
/// With `record == false` only the outcome fields are populated, which is
/// what evaluation needs.
pub fn run_episode(
    policy: &GaussianPolicy,
    goal: &[f64],
    env: &EnvConfig,
    mode: RewardMode,
    rng: &mut Rng,
    record: bool,
) -> Trajectory {
    let obs_dim = env.policy_input_dim();
    let act_dim = env.dim;
    let scale = observation_scale(env);
    let tol = env.goal_space.tolerance;
    let mut state = envs::start_state(env);
    let mut obs = vec![0.0; obs_dim];
    let mut action = vec![0.0; act_dim];
    let mut trace = vec![0.0; policy.net.trace_len()];
    let cap = if record { env.horizon.min(64) } else { 0 };
    let mut traj = Trajectory {
        goal: goal.to_vec(),
        observations: Vec::with_capacity(cap * obs_dim),
        actions: Vec::with_capacity(cap * act_dim),
        rewards: Vec::with_capacity(cap),
        log_probs: Vec::with_capacity(cap),
        values: Vec::new(),
        success: false,
        final_goal: Vec::new(),
    };
    let mut steps = 0;
    while steps < env.horizon {
        write_observation(&state, goal, scale, &mut obs);
        let lp = policy.sample_into(&obs, &mut trace, rng, &mut action);
        // Non-finite parameters would make the env reject the action.
        if action.iter().any(|a| !a.is_finite()) {
            action.iter_mut().for_each(|a| *a = 0.0);
        }
        envs::advance(&mut state, &action, env);
        steps += 1;
        let d = distance(&state.position, goal);
        let reached = d <= tol;
        let reward = match mode {
            RewardMode::Indicator => {
                if reached {
                    1.0
                } else {
                    0.0
                }
            }
            RewardMode::L2Dense => -d,
        };
        if record {
            traj.observations.extend_from_slice(&obs);
            traj.actions.extend_from_slice(&action);
            traj.log_probs.push(lp);
        }
        traj.rewards.push(reward);
        traj.success |= reached;
        if reached && mode == RewardMode::Indicator {
            break;
        }
    }
    if !record {
        traj.rewards.clear();
    }
    traj.final_goal = state.position;
    traj
}

/// Collect `episodes` trajectories, each toward a goal drawn uniformly (with
/// replacement) from `goals`.
///
/// Episode `i` uses its own generator derived from `(batch_seed, i)`; output
/// order is episode order, so results are identical for any worker count.
pub fn collect_rollouts(
    policy: &GaussianPolicy,
    goals: &[Vec<f64>],
    episodes: usize,
    env: &EnvConfig,
    mode: RewardMode,
    batch_seed: u64,
    workers: usize,
) -> Result<Vec<Trajectory>> {
    if goals.is_empty() {
        return Err(Error::InvalidArgument("no goals to roll out".into()));
    }
    for g in goals {
        check_len("rollout goal", env.goal_space.dim(), g.len())?;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rollout goal"));
        }
    }
    let run = |i: usize| {
        let mut rng = item_rng(batch_seed, i);
        let goal = &goals[rng.random_range(0..goals.len())];
        run_episode(policy, goal, env, mode, &mut rng, true)
    };
    Ok(parallel_map(episodes, workers, run))
}

/// Success (1) or failure (0) of one evaluation episode per `(goal, repeat)`.
pub fn evaluate_goals(
    policy: &GaussianPolicy,
    goals: &[Vec<f64>],
    repeats: usize,
    env: &EnvConfig,
    batch_seed: u64,
    workers: usize,
) -> Vec<Vec<bool>> {
    let flat = parallel_map(goals.len() * repeats, workers, |k| {
        let mut rng = item_rng(batch_seed, k);
        run_episode(policy, &goals[k / repeats], env, RewardMode::Indicator, &mut rng, false).success
    });
    flat.chunks(repeats.max(1)).map(|c| c.to_vec()).collect()
}

/// Ordered map over `0..count`, fanned out to a local pool when `workers > 1`.
pub(crate) fn parallel_map<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers <= 1 || count < 2 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(e) => {
            log::warn!("falling back to sequential rollouts: {e}");
            (0..count).map(f).collect()
        }
    }
}

//! Goal-conditioned rollouts and trust-region policy improvement.

pub mod gae;
mod policy;
pub mod rollout;
mod success;
pub mod trpo;
mod value;

use serde::{Deserialize, Serialize};

pub use gae::{compute_gae, normalize};
pub use policy::GaussianPolicy;
pub use rollout::{collect_rollouts, evaluate_goals, run_episode, RewardMode, Trajectory};
pub use success::{SuccessEntry, SuccessTable};
pub use trpo::{trpo_update, PolicyBatch, StepStatus, TrpoStats};
pub use value::ValueFunction;

use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::TensorList;
use crate::rng::{next_seed, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    /// Bound on the mean KL(old || new) of one policy step.
    pub max_kl: f64,
    pub inner_iterations: usize,
    pub episodes_per_iteration: usize,
    pub cg_iterations: usize,
    pub cg_damping: f64,
    pub backtrack_ratio: f64,
    pub max_backtracks: usize,
    /// Fisher-vector products use every `fisher_stride`-th sample.
    pub fisher_stride: usize,
    pub value_passes: usize,
    pub policy_hidden: Vec<usize>,
    pub value_hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Rollout workers; 1 keeps everything on the calling thread. Set from
    /// the experiment's top-level worker count rather than the `rl` table.
    #[serde(skip, default = "one")]
    pub workers: usize,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            gamma: 0.998,
            gae_lambda: 0.995,
            max_kl: 0.01,
            inner_iterations: 5,
            episodes_per_iteration: 100,
            cg_iterations: 10,
            cg_damping: 1e-3,
            backtrack_ratio: 0.8,
            max_backtracks: 10,
            fisher_stride: 5,
            value_passes: 3,
            policy_hidden: vec![32, 32],
            value_hidden: vec![32, 32],
            init_log_std: 0.0,
            workers: 1,
        }
    }
}

fn one() -> usize {
    1
}

impl RlConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.max_kl > 0.0) {
            return bad("max_kl must be positive");
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return bad("backtrack_ratio must lie in (0, 1)");
        }
        if self.inner_iterations == 0 || self.episodes_per_iteration == 0 {
            return bad("inner_iterations and episodes_per_iteration must be positive");
        }
        if self.fisher_stride == 0 || self.workers == 0 {
            return bad("fisher_stride and workers must be positive");
        }
        if !self.init_log_std.is_finite() || !(self.cg_damping >= 0.0) {
            return bad("init_log_std must be finite and cg_damping non-negative");
        }
        Ok(())
    }
}

/// Diagnostics of one collect / estimate / step / fit cycle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerStats {
    pub episodes: usize,
    pub samples: usize,
    pub mean_success: f64,
    pub step: TrpoStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyUpdate {
    /// Aggregated over every rollout of the update.
    pub table: SuccessTable,
    pub inner: Vec<InnerStats>,
}

impl PolicyUpdate {
    pub fn mean_kl(&self) -> f64 {
        mean(self.inner.iter().map(|s| s.step.mean_kl))
    }

    pub fn mean_improvement(&self) -> f64 {
        mean(self.inner.iter().map(|s| s.step.improvement()))
    }

    pub fn samples(&self) -> usize {
        self.inner.iter().map(|s| s.samples).sum()
    }

    pub fn episodes(&self) -> usize {
        self.inner.iter().map(|s| s.episodes).sum()
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Policy, baseline and the settings that drive their updates.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyLearner {
    pub policy: GaussianPolicy,
    pub value: ValueFunction,
    pub rl: RlConfig,
    pub mode: RewardMode,
}

impl PolicyLearner {
    pub fn new(env: &EnvConfig, rl: RlConfig, mode: RewardMode, init_rng: &mut Rng) -> Result<Self> {
        rl.validate()?;
        let obs = env.policy_input_dim();
        let policy = GaussianPolicy::new(obs, env.dim, &rl.policy_hidden, rl.init_log_std, init_rng);
        let value = ValueFunction::new(obs, &rl.value_hidden, init_rng);
        Ok(Self {
            policy,
            value,
            rl,
            mode,
        })
    }

    /// Turn trajectories into a policy batch plus value-regression data.
    pub fn prepare_batch(&self, trajectories: &[Trajectory], horizon: usize) -> (PolicyBatch, Vec<f64>, Vec<f64>) {
        let samples: usize = trajectories.iter().map(Trajectory::len).sum();
        let obs_dim = self.policy.input_dim();
        let vin = self.value.input_dim();
        let mut batch = PolicyBatch {
            observations: Vec::with_capacity(samples * obs_dim),
            actions: Vec::with_capacity(samples * self.policy.action_dim()),
            advantages: Vec::with_capacity(samples),
        };
        let mut value_inputs = vec![0.0; samples * vin];
        let mut targets = Vec::with_capacity(samples);
        let mut trace = vec![0.0; self.value.net.trace_len()];
        let mut row = 0;
        for t in trajectories {
            let mut values = Vec::with_capacity(t.len());
            for step in 0..t.len() {
                let input = &mut value_inputs[row * vin..(row + 1) * vin];
                let obs = &t.observations[step * obs_dim..(step + 1) * obs_dim];
                ValueFunction::write_input(obs, step as f64 / horizon as f64, input);
                values.push(self.value.predict_input(input, &mut trace));
                row += 1;
            }
            let (adv, tgt) = compute_gae(&t.rewards, &values, self.rl.gamma, self.rl.gae_lambda);
            batch.advantages.extend(adv);
            targets.extend(tgt);
            batch.observations.extend_from_slice(&t.observations);
            batch.actions.extend_from_slice(&t.actions);
        }
        normalize(&mut batch.advantages);
        (batch, value_inputs, targets)
    }

    /// Run `inner_iterations` cycles of {collect episodes, GAE, policy step,
    /// value fit} on `goals`. The returned table aggregates all rollouts.
    pub fn update_policy(&mut self, goals: &[Vec<f64>], env: &EnvConfig, rng: &mut Rng) -> Result<PolicyUpdate> {
        let mut table = SuccessTable::new();
        let mut inner = Vec::with_capacity(self.rl.inner_iterations);
        for _ in 0..self.rl.inner_iterations {
            let seed = next_seed(rng);
            let trajs = collect_rollouts(
                &self.policy,
                goals,
                self.rl.episodes_per_iteration,
                env,
                self.mode,
                seed,
                self.rl.workers,
            )?;
            table.extend(&trajs);
            inner.push(self.learn_from(&trajs, env.horizon, rng));
        }
        Ok(PolicyUpdate { table, inner })
    }

    /// One policy step followed by a value fit on already collected
    /// trajectories.
    pub fn learn_from(&mut self, trajectories: &[Trajectory], horizon: usize, rng: &mut Rng) -> InnerStats {
        let (batch, value_inputs, targets) = self.prepare_batch(trajectories, horizon);
        let step = trpo_update(&mut self.policy, &batch, &self.rl);
        self.value.fit(&value_inputs, &targets, self.rl.value_passes, rng);
        let successes = trajectories.iter().filter(|t| t.success).count();
        InnerStats {
            episodes: trajectories.len(),
            samples: batch.len(),
            mean_success: successes as f64 / trajectories.len().max(1) as f64,
            step,
        }
    }

    pub fn to_tensors(&self, list: &mut TensorList) {
        self.policy.to_tensors(list);
        self.value.to_tensors(list);
    }
}

//! Least-squares goal generator, difficulty labels and initialization.

mod gan;
mod labels;

pub use gan::{GanConfig, GanPair, GanTrainStats};
pub use labels::{label_goals, positive_fraction, GoidThresholds, LabeledGoal};

use crate::envs::EnvConfig;
use crate::error::Result;
use crate::policy_opt::rollout::observation_scale;
use crate::policy_opt::{collect_rollouts, GaussianPolicy, RewardMode};
use crate::rng::{next_seed, Rng};

/// Goal-space positions visited by `policy` when asked to reach uniformly
/// sampled goals.
pub fn visited_goals(
    policy: &GaussianPolicy,
    env: &EnvConfig,
    episodes: usize,
    goal_rng: &mut Rng,
    rollout_rng: &mut Rng,
    workers: usize,
) -> Result<Vec<Vec<f64>>> {
    let goals: Vec<Vec<f64>> = (0..episodes).map(|_| env.goal_space.sample_uniform(goal_rng)).collect();
    let trajs = collect_rollouts(policy, &goals, episodes, env, RewardMode::Indicator, next_seed(rollout_rng), workers)?;
    let scale = observation_scale(env);
    let width = env.policy_input_dim();
    let mut visited = Vec::new();
    for t in &trajs {
        for obs in t.observations.chunks_exact(width).skip(1) {
            visited.push(obs[..env.dim].iter().map(|v| v / scale).collect());
        }
        visited.push(t.final_goal.clone());
    }
    Ok(visited)
}

/// Fit a fresh GAN to the visitation distribution of the initial policy.
pub fn initialize_gan(
    gan: &mut GanPair,
    policy: &GaussianPolicy,
    env: &EnvConfig,
    goal_rng: &mut Rng,
    rollout_rng: &mut Rng,
    noise_rng: &mut Rng,
    workers: usize,
) -> Result<GanTrainStats> {
    let visited = visited_goals(policy, env, gan.config.init_episodes, goal_rng, rollout_rng, workers)?;
    let iterations = gan.config.init_iterations;
    Ok(gan.fit_to_goals(&visited, iterations, noise_rng))
}

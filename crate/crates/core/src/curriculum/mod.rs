//! Outer goal-generation loop: sample goals, improve the policy on them,
//! label them by difficulty, refit the generator, update the replay buffer.

mod experiment;
mod replay;

pub use experiment::{run_directory, run_experiment, write_artifacts, ExperimentResult};
pub use replay::ReplayBuffer;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::baselines::{gan_fit_all_labels, true_label_goals};
use crate::envs::EnvConfig;
use crate::error::Result;
use crate::goal_gan::{label_goals, GanPair, GanTrainStats, GoidThresholds, LabeledGoal};
use crate::policy_opt::{GaussianPolicy, PolicyLearner, PolicyUpdate, SuccessTable};
use crate::rng::{next_seed, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    /// Goals drawn from the generator each iteration.
    pub gan_goals: usize,
    /// Goals drawn from the replay buffer each iteration.
    pub replay_goals: usize,
    /// Fresh rollouts per goal for the true-label variant.
    pub true_label_rollouts: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            gan_goals: 200,
            replay_goals: 100,
            true_label_rollouts: 3,
        }
    }
}

/// Randomness consumed by the outer loop, one generator per named stream.
#[derive(Clone, Debug)]
pub struct LoopRngs {
    pub rollout: Rng,
    pub gan_noise: Rng,
    pub goal_sampling: Rng,
    pub labeling: Rng,
}

/// Inputs a labeler may use besides the success table.
pub struct LabelContext<'a> {
    pub policy: &'a GaussianPolicy,
    pub env: &'a EnvConfig,
    pub thresholds: GoidThresholds,
    pub rng: &'a mut Rng,
    pub workers: usize,
}

/// Turns the outcome of a policy update into generator training labels.
pub trait GoalLabeler {
    fn label(&self, update: &PolicyUpdate, ctx: &mut LabelContext<'_>) -> Vec<LabeledGoal>;

    /// Episodes whose outcomes the labels were computed from.
    fn label_rollouts(&self, update: &PolicyUpdate) -> usize;
}

/// Labels from the update's own rollouts, positive inside the GOID band.
pub struct GoidLabeler;

impl GoalLabeler for GoidLabeler {
    fn label(&self, update: &PolicyUpdate, ctx: &mut LabelContext<'_>) -> Vec<LabeledGoal> {
        label_goals(&update.table, ctx.thresholds)
    }

    fn label_rollouts(&self, update: &PolicyUpdate) -> usize {
        update.table.total_attempts()
    }
}

/// Every attempted goal is a positive.
pub struct FitAllLabeler;

impl GoalLabeler for FitAllLabeler {
    fn label(&self, update: &PolicyUpdate, _ctx: &mut LabelContext<'_>) -> Vec<LabeledGoal> {
        gan_fit_all_labels(&update.table)
    }

    fn label_rollouts(&self, _update: &PolicyUpdate) -> usize {
        0
    }
}

/// Labels from fresh rollouts of the updated policy on every attempted goal.
pub struct TrueLabeler {
    pub rollouts: usize,
}

impl GoalLabeler for TrueLabeler {
    fn label(&self, update: &PolicyUpdate, ctx: &mut LabelContext<'_>) -> Vec<LabeledGoal> {
        let goals: Vec<Vec<f64>> = update.table.entries().iter().map(|e| e.goal.clone()).collect();
        true_label_goals(ctx.policy, &goals, ctx.thresholds, self.rollouts, ctx.env, next_seed(ctx.rng), ctx.workers)
    }

    fn label_rollouts(&self, update: &PolicyUpdate) -> usize {
        update.table.len() * self.rollouts
    }
}

/// Everything the generator-driven loop carries between iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct CurriculumState {
    pub iteration: usize,
    pub learner: PolicyLearner,
    pub gan: GanPair,
    pub replay: ReplayBuffer,
    pub thresholds: GoidThresholds,
    pub config: CurriculumConfig,
}

/// What one outer iteration did, for logging.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterOutcome {
    pub update: PolicyUpdate,
    pub labeled: Vec<LabeledGoal>,
    pub gan_goals: Vec<Vec<f64>>,
    pub replay_goals: usize,
    pub gan_stats: GanTrainStats,
    pub inserted: usize,
    pub label_rollouts: usize,
}

impl OuterOutcome {
    /// Fraction of attempted generator goals inside the GOID band.
    pub fn generated_goid_fraction(&self, thresholds: GoidThresholds) -> f64 {
        goid_fraction_among(&self.update.table, &self.gan_goals, thresholds)
    }
}

pub(crate) fn goal_key(g: &[f64]) -> Vec<u64> {
    g.iter().map(|v| v.to_bits()).collect()
}

/// Fraction of table entries whose goal is in `subset` (all entries when
/// `subset` is empty) that fall inside the GOID band.
pub fn goid_fraction_among(table: &SuccessTable, subset: &[Vec<f64>], thresholds: GoidThresholds) -> f64 {
    let keys: HashSet<Vec<u64>> = subset.iter().map(|g| goal_key(g)).collect();
    let (mut n, mut pos) = (0usize, 0usize);
    for e in table.entries() {
        if keys.is_empty() || keys.contains(&goal_key(&e.goal)) {
            n += 1;
            pos += thresholds.contains(e.fraction()) as usize;
        }
    }
    if n == 0 {
        0.0
    } else {
        pos as f64 / n as f64
    }
}

impl CurriculumState {
    /// Generator goals and replay goals for this iteration. A buffer with
    /// fewer goals than requested contributes all of them and the generator
    /// makes up the difference.
    pub fn sample_training_goals(&self, noise_rng: &mut Rng, replay_rng: &mut Rng) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let replay = self.replay.sample(self.config.replay_goals, replay_rng);
        let total = self.config.gan_goals + self.config.replay_goals;
        let gan = self.gan.sample_goals(total - replay.len(), noise_rng);
        (gan, replay)
    }

    /// One full iteration on a copy of the state; `self` is untouched, so a
    /// failure leaves the previous state available.
    pub fn run_outer_iteration(
        &self,
        labeler: &dyn GoalLabeler,
        env: &EnvConfig,
        rngs: &mut LoopRngs,
    ) -> Result<(CurriculumState, OuterOutcome)> {
        let mut next = self.clone();
        let (gan_goals, replay_goals) = next.sample_training_goals(&mut rngs.gan_noise, &mut rngs.goal_sampling);
        let mut goals = gan_goals.clone();
        goals.extend(replay_goals.iter().cloned());
        let update = next.learner.update_policy(&goals, env, &mut rngs.rollout)?;
        let labeled = {
            let mut ctx = LabelContext {
                policy: &next.learner.policy,
                env,
                thresholds: next.thresholds,
                rng: &mut rngs.labeling,
                workers: next.learner.rl.workers,
            };
            labeler.label(&update, &mut ctx)
        };
        let label_rollouts = labeler.label_rollouts(&update);
        let iterations = next.gan.config.train_iterations;
        let gan_stats = next.gan.train(&labeled, iterations, &mut rngs.gan_noise);
        let inserted = next.replay.update(&gan_goals);
        next.iteration += 1;
        Ok((
            next,
            OuterOutcome {
                update,
                labeled,
                gan_goals,
                replay_goals: replay_goals.len(),
                gan_stats,
                inserted,
                label_rollouts,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goal_gan::GanConfig;
    use crate::policy_opt::{RewardMode, RlConfig};
    use crate::rng::{SeedStreams, Stream};

    fn state(env: &EnvConfig) -> (CurriculumState, LoopRngs) {
        let s = SeedStreams::new(1);
        let rl = RlConfig {
            inner_iterations: 1,
            episodes_per_iteration: 20,
            ..RlConfig::default()
        };
        let learner = PolicyLearner::new(env, rl, RewardMode::Indicator, &mut s.stream(Stream::PolicyInit)).unwrap();
        let gan_cfg = GanConfig {
            train_iterations: 5,
            generator_hidden: vec![16, 16],
            discriminator_hidden: vec![16, 16],
            ..GanConfig::default()
        };
        let gan = GanPair::new(gan_cfg, &env.goal_space.bounds, &mut s.stream(Stream::GanInit)).unwrap();
        let st = CurriculumState {
            iteration: 0,
            learner,
            gan,
            replay: ReplayBuffer::new(env.goal_space.tolerance),
            thresholds: GoidThresholds::default(),
            config: CurriculumConfig::default(),
        };
        let rngs = LoopRngs {
            rollout: s.stream(Stream::Rollout),
            gan_noise: s.stream(Stream::GanNoise),
            goal_sampling: s.stream(Stream::GoalSampling),
            labeling: s.stream(Stream::Labeling),
        };
        (st, rngs)
    }

    #[test]
    fn goal_mixture_sizes() {
        let env = EnvConfig::multi_path_maze();
        let (mut st, mut rngs) = state(&env);
        let (g, r) = st.sample_training_goals(&mut rngs.gan_noise, &mut rngs.goal_sampling);
        assert_eq!((g.len(), r.len()), (300, 0));
        st.replay.update(&(0..40).map(|i| vec![-4.5 + 0.5 * (i % 20) as f64, if i < 20 { -4.5 } else { 4.5 }]).collect::<Vec<_>>());
        assert_eq!(st.replay.len(), 40);
        let (g, r) = st.sample_training_goals(&mut rngs.gan_noise, &mut rngs.goal_sampling);
        assert_eq!((g.len(), r.len()), (260, 40));
        let many: Vec<Vec<f64>> = (0..400).map(|i| vec![-4.9 + 0.49 * (i % 20) as f64, -4.9 + 0.49 * (i / 20) as f64]).collect();
        st.replay.update(&many);
        assert!(st.replay.len() >= 100);
        let (g, r) = st.sample_training_goals(&mut rngs.gan_noise, &mut rngs.goal_sampling);
        assert_eq!((g.len(), r.len()), (200, 100));
    }

    #[test]
    fn outer_iteration_advances_by_one_and_labels_attempted_goals() {
        let env = EnvConfig::point_mass(3).unwrap();
        let (st, mut rngs) = state(&env);
        let (next, out) = st.run_outer_iteration(&GoidLabeler, &env, &mut rngs).unwrap();
        assert_eq!(st.iteration, 0);
        assert_eq!(next.iteration, 1);
        assert_eq!(out.labeled.len(), out.update.table.len());
        for (l, e) in out.labeled.iter().zip(out.update.table.entries()) {
            assert_eq!(l.goal, e.goal);
        }
        assert!(!next.replay.is_empty() && next.replay.len() <= 300);
        assert_eq!(out.label_rollouts, 20);
    }

    #[test]
    fn fit_all_labeler_marks_every_attempt() {
        let env = EnvConfig::multi_path_maze();
        let (st, mut rngs) = state(&env);
        let (_, out) = st.run_outer_iteration(&FitAllLabeler, &env, &mut rngs).unwrap();
        assert!(out.labeled.iter().all(|l| l.label));
        assert!(!out.gan_stats.skipped);
    }
}

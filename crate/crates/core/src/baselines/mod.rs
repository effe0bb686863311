//! Comparison goal-selection methods.

mod oracle;
mod sagg;

pub use oracle::{rejection_sample_goid, OracleConfig, OracleSample};
pub use sagg::{sagg_competence, sagg_riac_iteration, SaggMode, SaggRegion, SaggRiac, SaggRiacConfig, SaggStats};

use crate::envs::{distance, EnvConfig, GoalSpace};
use crate::goal_gan::{GoidThresholds, LabeledGoal};
use crate::policy_opt::{evaluate_goals, GaussianPolicy, SuccessTable};
use crate::rng::Rng;

/// `count` goals uniform over the full goal box, feasible or not.
pub fn uniform_goals(space: &GoalSpace, count: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..count).map(|_| space.sample_uniform(rng)).collect()
}

/// Negative distance from the projected next state to the goal.
pub fn l2_dense_reward(next_position: &[f64], goal: &[f64]) -> f64 {
    -distance(next_position, goal)
}

/// Every attempted goal labeled positive.
pub fn gan_fit_all_labels(table: &SuccessTable) -> Vec<LabeledGoal> {
    table
        .entries()
        .iter()
        .map(|e| LabeledGoal {
            goal: e.goal.clone(),
            fraction: e.fraction(),
            label: true,
        })
        .collect()
}

/// Labels from `rollouts` fresh evaluation episodes per goal under the
/// given policy.
pub fn true_label_goals(
    policy: &GaussianPolicy,
    goals: &[Vec<f64>],
    thresholds: GoidThresholds,
    rollouts: usize,
    env: &EnvConfig,
    batch_seed: u64,
    workers: usize,
) -> Vec<LabeledGoal> {
    let outcomes = evaluate_goals(policy, goals, rollouts, env, batch_seed, workers);
    goals
        .iter()
        .zip(outcomes)
        .map(|(g, o)| label_from_outcomes(g, &o, thresholds))
        .collect()
}

pub(crate) fn label_from_outcomes(goal: &[f64], outcomes: &[bool], thresholds: GoidThresholds) -> LabeledGoal {
    let fraction = outcomes.iter().filter(|&&s| s).count() as f64 / outcomes.len().max(1) as f64;
    LabeledGoal {
        goal: goal.to_vec(),
        fraction,
        label: thresholds.contains(fraction),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvConfig;
    use crate::rng::{SeedStreams, Stream};

    #[test]
    fn uniform_goals_cover_the_full_box() {
        let env = EnvConfig::point_mass(6).unwrap();
        let mut rng = SeedStreams::new(0).stream(Stream::GoalSampling);
        let n = 100_000;
        let goals = uniform_goals(&env.goal_space, n, &mut rng);
        assert!(goals.iter().all(|g| env.goal_space.bounds.contains(g)));
        let feasible = goals.iter().filter(|g| crate::envs::is_feasible(g, &env)).count() as f64 / n as f64;
        // Analytic ratio: (10 * 2 * 0.6^4) / 10^6.
        let p = 10.0 * 2.0 * 0.6f64.powi(4) / 1e6;
        assert!((env.feasible_volume_ratio() - p).abs() < 1e-15);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((feasible - p).abs() <= 4.0 * sigma + 1.0 / n as f64, "{feasible} vs {p}");
        let again = uniform_goals(&env.goal_space, 10, &mut SeedStreams::new(0).stream(Stream::GoalSampling));
        assert_eq!(&goals[..10], &again[..]);
    }

    #[test]
    fn l2_reward_values() {
        assert_eq!(l2_dense_reward(&[1.0, 1.0], &[1.0, 1.0]), 0.0);
        assert_eq!(l2_dense_reward(&[0.0, 0.0], &[1.5, 2.0]), -2.5);
        let goal = [3.0, 4.0];
        let mut last = f64::NEG_INFINITY;
        for k in 0..10 {
            let t = k as f64 / 10.0;
            let r = l2_dense_reward(&[3.0 * t, 4.0 * t], &goal);
            assert!(r > last);
            last = r;
        }
    }

    #[test]
    fn fit_all_marks_everything_positive() {
        let mut t = SuccessTable::new();
        t.record(&[0.0], false);
        t.record(&[1.0], true);
        t.record(&[1.0], false);
        t.record(&[2.0], true);
        let labels = gan_fit_all_labels(&t);
        assert_eq!(labels.len(), 3);
        assert!(labels.iter().all(|l| l.label));
        assert!(gan_fit_all_labels(&SuccessTable::new()).is_empty());
    }

    #[test]
    fn label_from_three_rollouts() {
        let th = GoidThresholds::default();
        let l = label_from_outcomes(&[0.0], &[true, true, false], th);
        assert!((l.fraction - 2.0 / 3.0).abs() < 1e-15 && l.label);
        assert!(!label_from_outcomes(&[0.0], &[false; 3], th).label);
    }
}

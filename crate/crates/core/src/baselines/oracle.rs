use serde::{Deserialize, Serialize};

use crate::envs::{sample_feasible_goal, EnvConfig};
use crate::error::{Error, Result};
use crate::goal_gan::GoidThresholds;
use crate::policy_opt::{evaluate_goals, GaussianPolicy};
use crate::rng::{next_seed, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub rollouts_per_candidate: usize,
    /// Candidates tested per call before giving up.
    pub candidate_budget: usize,
    /// Candidates evaluated together before checking the stop condition.
    pub chunk: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            rollouts_per_candidate: 4,
            candidate_budget: 5000,
            chunk: 50,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OracleSample {
    pub goals: Vec<Vec<f64>>,
    /// Success estimate recorded for each accepted goal.
    pub estimates: Vec<f64>,
    pub candidates_tested: usize,
    /// Evaluation episodes spent, the oracle's labeling cost.
    pub rollouts: usize,
    pub budget_exhausted: bool,
}

/// Draw uniform feasible goals and keep those whose success estimate from
/// fresh rollouts lies inside the threshold band, until `count` are
/// accepted or the candidate budget runs out.
pub fn rejection_sample_goid(
    policy: &GaussianPolicy,
    env: &EnvConfig,
    thresholds: GoidThresholds,
    config: &OracleConfig,
    count: usize,
    goal_rng: &mut Rng,
    rollout_rng: &mut Rng,
    workers: usize,
) -> Result<OracleSample> {
    if config.rollouts_per_candidate < 2 {
        return Err(Error::InvalidArgument("oracle needs at least 2 rollouts per candidate".into()));
    }
    let mut out = OracleSample::default();
    while out.goals.len() < count {
        if out.candidates_tested >= config.candidate_budget {
            out.budget_exhausted = true;
            break;
        }
        let n = config.chunk.max(1).min(config.candidate_budget - out.candidates_tested);
        let candidates: Vec<Vec<f64>> = (0..n).map(|_| sample_feasible_goal(env, goal_rng)).collect();
        let outcomes = evaluate_goals(
            policy,
            &candidates,
            config.rollouts_per_candidate,
            env,
            next_seed(rollout_rng),
            workers,
        );
        out.candidates_tested += n;
        out.rollouts += n * config.rollouts_per_candidate;
        for (g, o) in candidates.into_iter().zip(outcomes) {
            let est = o.iter().filter(|&&s| s).count() as f64 / o.len() as f64;
            if thresholds.contains(est) && out.goals.len() < count {
                out.goals.push(g);
                out.estimates.push(est);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{SeedStreams, Stream};

    #[test]
    fn always_successful_policy_exhausts_budget() {
        // Every goal within tolerance of the start: each estimate is 1.
        let mut env = EnvConfig::point_mass(2).unwrap();
        env.goal_space.tolerance = 20.0;
        let mut rng = SeedStreams::new(0).stream(Stream::PolicyInit);
        let policy = GaussianPolicy::new(env.policy_input_dim(), 2, &[8], 0.0, &mut rng);
        let cfg = OracleConfig {
            candidate_budget: 40,
            chunk: 16,
            ..OracleConfig::default()
        };
        let s = rejection_sample_goid(
            &policy,
            &env,
            GoidThresholds::default(),
            &cfg,
            10,
            &mut SeedStreams::new(0).stream(Stream::GoalSampling),
            &mut SeedStreams::new(0).stream(Stream::Labeling),
            1,
        )
        .unwrap();
        assert!(s.goals.is_empty() && s.budget_exhausted);
        assert_eq!(s.candidates_tested, 40);
        assert!(s.rollouts >= s.candidates_tested * 4);
    }

    #[test]
    fn accepted_estimates_lie_in_band() {
        let env = EnvConfig::point_mass(2).unwrap();
        let mut rng = SeedStreams::new(1).stream(Stream::PolicyInit);
        let policy = GaussianPolicy::new(env.policy_input_dim(), 2, &[8], 0.5, &mut rng);
        let cfg = OracleConfig {
            candidate_budget: 200,
            ..OracleConfig::default()
        };
        let th = GoidThresholds::default();
        let s = rejection_sample_goid(
            &policy,
            &env,
            th,
            &cfg,
            5,
            &mut SeedStreams::new(1).stream(Stream::GoalSampling),
            &mut SeedStreams::new(1).stream(Stream::Labeling),
            1,
        )
        .unwrap();
        assert_eq!(s.goals.len(), s.estimates.len());
        assert!(s.estimates.iter().all(|&e| th.contains(e)));
        assert!(s.goals.iter().all(|g| crate::envs::is_feasible(g, &env)));
    }

    #[test]
    fn single_rollout_is_rejected() {
        let env = EnvConfig::point_mass(2).unwrap();
        let mut rng = SeedStreams::new(1).stream(Stream::PolicyInit);
        let policy = GaussianPolicy::new(env.policy_input_dim(), 2, &[8], 0.5, &mut rng);
        let cfg = OracleConfig {
            rollouts_per_candidate: 1,
            ..OracleConfig::default()
        };
        let mut g = SeedStreams::new(1).stream(Stream::GoalSampling);
        let mut r = SeedStreams::new(1).stream(Stream::Labeling);
        assert!(rejection_sample_goid(&policy, &env, GoidThresholds::default(), &cfg, 5, &mut g, &mut r, 1).is_err());
    }
}

//! Coverage estimation and the tabular data products of a run.

mod svg;
mod tables;

pub use svg::render_svg;
pub use tables::{
    artifact_stem, read_curve, write_curve, write_heatmap, write_manifest, write_run_log, write_scatter,
    IterationRecord, Manifest, PolicyStepRecord, CURVE_HEADER,
};

use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::goal_gan::GoidThresholds;
use crate::policy_opt::{evaluate_goals, GaussianPolicy, SuccessTable};

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageReport {
    pub iteration: usize,
    pub goals: Vec<Vec<f64>>,
    /// Success fraction per grid goal.
    pub estimates: Vec<f64>,
    pub rollouts_per_goal: usize,
    pub mean: f64,
}

/// Success fraction of `policy` on every grid goal and their mean.
pub fn estimate_coverage(
    policy: &GaussianPolicy,
    grid: &[Vec<f64>],
    rollouts_per_goal: usize,
    env: &EnvConfig,
    batch_seed: u64,
    workers: usize,
    iteration: usize,
) -> Result<CoverageReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("coverage grid is empty".into()));
    }
    if rollouts_per_goal == 0 {
        return Err(Error::InvalidArgument("coverage needs at least one rollout per goal".into()));
    }
    let outcomes = evaluate_goals(policy, grid, rollouts_per_goal, env, batch_seed, workers);
    let estimates: Vec<f64> = outcomes
        .iter()
        .map(|o| o.iter().filter(|&&s| s).count() as f64 / o.len() as f64)
        .collect();
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    Ok(CoverageReport {
        iteration,
        goals: grid.to_vec(),
        estimates,
        rollouts_per_goal,
        mean,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoalClass {
    Low,
    Goid,
    High,
}

impl GoalClass {
    /// A fraction exactly at a threshold belongs to the GOID band, matching
    /// the inclusive labels.
    pub fn of(fraction: f64, thresholds: GoidThresholds) -> Self {
        if thresholds.contains(fraction) {
            GoalClass::Goid
        } else if fraction > thresholds.r_max {
            GoalClass::High
        } else {
            GoalClass::Low
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GoalClass::Low => "low",
            GoalClass::Goid => "goid",
            GoalClass::High => "high",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoalScatterRecord {
    pub goal: Vec<f64>,
    pub fraction: f64,
    pub class: GoalClass,
}

pub fn scatter_records(table: &SuccessTable, thresholds: GoidThresholds) -> Vec<GoalScatterRecord> {
    table
        .entries()
        .iter()
        .map(|e| GoalScatterRecord {
            goal: e.goal.clone(),
            fraction: e.fraction(),
            class: GoalClass::of(e.fraction(), thresholds),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{feasible_goal_grid, GridSpec};
    use crate::goal_gan::label_goals;
    use crate::rng::{SeedStreams, Stream};

    fn frozen_policy(env: &EnvConfig) -> GaussianPolicy {
        let mut rng = SeedStreams::new(0).stream(Stream::PolicyInit);
        let mut p = GaussianPolicy::new(env.policy_input_dim(), env.dim, &[8], -40.0, &mut rng);
        p.net.scale_output_layer(0.0);
        p
    }

    #[test]
    fn motionless_policy_covers_only_the_start_cell() {
        let env = EnvConfig::multi_path_maze();
        let grid = feasible_goal_grid(&env, GridSpec::default_for(&env)).unwrap();
        let p = frozen_policy(&env);
        let rep = estimate_coverage(&p, &grid, 2, &env, 5, 1, 0).unwrap();
        assert_eq!(rep.estimates.len(), grid.len());
        for (g, e) in grid.iter().zip(&rep.estimates) {
            let at_start = crate::envs::distance(g, &[0.0, 0.0]) <= env.goal_space.tolerance;
            assert_eq!(*e, if at_start { 1.0 } else { 0.0 });
        }
        let mean = rep.estimates.iter().sum::<f64>() / rep.estimates.len() as f64;
        assert_eq!(rep.mean, mean);
        // Without a grid cell near the start the coverage is zero.
        let far: Vec<Vec<f64>> = grid.iter().filter(|g| crate::envs::distance(g, &[0.0, 0.0]) > 1.0).cloned().collect();
        assert_eq!(estimate_coverage(&p, &far, 1, &env, 5, 1, 0).unwrap().mean, 0.0);
        assert!(estimate_coverage(&p, &[], 1, &env, 5, 1, 0).is_err());
    }

    #[test]
    fn classes_partition_and_agree_with_labels() {
        let th = GoidThresholds::default();
        let mut t = SuccessTable::new();
        for (i, &(s, n)) in [(0, 3), (1, 4), (2, 4), (4, 4), (1, 10), (9, 10), (3, 3)].iter().enumerate() {
            for k in 0..n {
                t.record(&[i as f64], k < s);
            }
        }
        let recs = scatter_records(&t, th);
        let labels = label_goals(&t, th);
        for (r, l) in recs.iter().zip(&labels) {
            assert_eq!(r.class == GoalClass::Goid, l.label);
            let n = [GoalClass::Low, GoalClass::Goid, GoalClass::High].iter().filter(|&&c| c == r.class).count();
            assert_eq!(n, 1);
        }
        let names: Vec<&str> = recs.iter().map(|r| r.class.name()).collect();
        assert_eq!(names, vec!["low", "goid", "goid", "high", "goid", "goid", "high"]);
    }
}

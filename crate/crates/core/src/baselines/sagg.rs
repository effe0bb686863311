use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envs::{distance, AxisBox, EnvConfig};
use crate::error::{Error, Result};
use crate::policy_opt::rollout::parallel_map;
use crate::policy_opt::{run_episode, InnerStats, PolicyLearner, SuccessTable, Trajectory};
use crate::rng::{item_rng, next_seed, standard_normal, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaggRiacConfig {
    /// Competence history length used for the interest measure.
    pub window: usize,
    /// Distance within which an attempt counts as full competence.
    pub epsilon_max: f64,
    /// Kept alongside `epsilon_max`; the competence formula uses the latter.
    pub competence_threshold: f64,
    pub new_goals: usize,
    pub max_goals_per_region: usize,
    /// Probabilities of (interest-weighted region, uniform, perturbed
    /// previous goal).
    pub mode_probabilities: [f64; 3],
    pub mode3_variance: f64,
    /// Environment steps per policy update; defaults to
    /// episodes-per-iteration times the horizon.
    pub step_budget: Option<usize>,
}

impl Default for SaggRiacConfig {
    fn default() -> Self {
        Self {
            window: 100,
            epsilon_max: 0.1,
            competence_threshold: 0.1,
            new_goals: 300,
            max_goals_per_region: 100,
            mode_probabilities: [0.7, 0.2, 0.1],
            mode3_variance: 0.1,
            step_budget: None,
        }
    }
}

impl SaggRiacConfig {
    pub fn validate(&self) -> Result<()> {
        let p = self.mode_probabilities;
        if p.iter().any(|&v| !(v >= 0.0)) || ((p[0] + p[1] + p[2]) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("sagg mode probabilities must be non-negative and sum to 1".into()));
        }
        if self.window < 2 || self.max_goals_per_region == 0 || self.new_goals == 0 {
            return Err(Error::InvalidArgument(
                "sagg window must be at least 2; region capacity and new_goals positive".into(),
            ));
        }
        Ok(())
    }
}

/// Competence in `[-1, 0]`: 0 when the final descriptor is within
/// `epsilon_max` of the goal, else minus the distance relative to the goal
/// space diameter (capped at 1).
pub fn sagg_competence(goal: &[f64], reached: &[f64], epsilon_max: f64, diameter: f64) -> f64 {
    let d = distance(goal, reached);
    if d <= epsilon_max {
        0.0
    } else {
        -(d / diameter).min(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SaggMode {
    Region,
    Uniform,
    Perturb,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaggRegion {
    pub bounds: AxisBox,
    /// `(goal, competence)` in insertion order.
    pub points: Vec<(Vec<f64>, f64)>,
}

fn interest_of(points: &[(Vec<f64>, f64)], window: usize) -> f64 {
    let w = &points[points.len().saturating_sub(window)..];
    if w.len() < 2 {
        return 0.0;
    }
    let half = w.len() / 2;
    let mean = |s: &[(Vec<f64>, f64)]| s.iter().map(|p| p.1).sum::<f64>() / s.len() as f64;
    (mean(&w[..half]) - mean(&w[half..])).abs()
}

impl SaggRegion {
    pub fn interest(&self, window: usize) -> f64 {
        interest_of(&self.points, window)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SaggStats {
    pub episodes: usize,
    pub steps: usize,
    pub regions: usize,
    pub inner: Option<InnerStats>,
}

/// Region tree (stored as its leaves) plus goal history.
#[derive(Clone, Debug, PartialEq)]
pub struct SaggRiac {
    pub config: SaggRiacConfig,
    pub regions: Vec<SaggRegion>,
    pub attempted: Vec<Vec<f64>>,
    pub mode_counts: [usize; 3],
    root: AxisBox,
    diameter: f64,
}

impl SaggRiac {
    pub fn new(config: SaggRiacConfig, root: AxisBox) -> Result<Self> {
        config.validate()?;
        let diameter = root.diameter();
        Ok(Self {
            config,
            regions: vec![SaggRegion {
                bounds: root.clone(),
                points: Vec::new(),
            }],
            attempted: Vec::new(),
            mode_counts: [0; 3],
            root,
            diameter,
        })
    }

    pub fn root(&self) -> &AxisBox {
        &self.root
    }

    pub fn competence(&self, goal: &[f64], reached: &[f64]) -> f64 {
        sagg_competence(goal, reached, self.config.epsilon_max, self.diameter)
    }

    /// Leaves are half-open on their upper faces except where they touch the
    /// root's upper face, so every point of the root has exactly one owner.
    fn owns(&self, region: &AxisBox, p: &[f64]) -> bool {
        (0..p.len()).all(|d| p[d] >= region.lo[d] && (p[d] < region.hi[d] || (region.hi[d] == self.root.hi[d] && p[d] <= region.hi[d])))
    }

    pub fn region_index(&self, p: &[f64]) -> Option<usize> {
        self.regions.iter().position(|r| self.owns(&r.bounds, p))
    }

    /// Record a competence sample; split the owning region once it holds
    /// more than the configured number of goals.
    pub fn update_regions(&mut self, goal: &[f64], competence: f64) {
        let mut g = goal.to_vec();
        self.root.clip(&mut g);
        let idx = self.region_index(&g).expect("clipped goal lies in some region");
        self.regions[idx].points.push((g, competence));
        if self.regions[idx].points.len() > self.config.max_goals_per_region {
            let region = self.regions.swap_remove(idx);
            let (a, b) = self.split(region);
            self.regions.push(a);
            self.regions.push(b);
        }
    }

    fn split(&self, region: SaggRegion) -> (SaggRegion, SaggRegion) {
        let window = self.config.window;
        let dim = region.bounds.dim();
        let mut best: Option<(f64, usize, f64)> = None;
        for d in 0..dim {
            let mut xs: Vec<f64> = region.points.iter().map(|p| p.0[d]).collect();
            xs.sort_by(f64::total_cmp);
            for q in [0.25, 0.5, 0.75] {
                let thr = xs[((xs.len() - 1) as f64 * q).round() as usize];
                if !(thr > region.bounds.lo[d] && thr < region.bounds.hi[d]) {
                    continue;
                }
                let (l, r): (Vec<_>, Vec<_>) = region.points.iter().cloned().partition(|p| p.0[d] < thr);
                let score = (interest_of(&l, window) - interest_of(&r, window)).abs();
                if score > 0.0 && best.is_none_or(|b| score > b.0) {
                    best = Some((score, d, thr));
                }
            }
        }
        let (d, thr) = match best {
            Some((_, d, thr)) => (d, thr),
            None => {
                let widths: Vec<f64> = (0..dim).map(|k| region.bounds.hi[k] - region.bounds.lo[k]).collect();
                let d = (0..dim).fold(0, |best, k| if widths[k] > widths[best] { k } else { best });
                let mut xs: Vec<f64> = region.points.iter().map(|p| p.0[d]).collect();
                xs.sort_by(f64::total_cmp);
                let median = xs[xs.len() / 2];
                let thr = if median > region.bounds.lo[d] && median < region.bounds.hi[d] {
                    median
                } else {
                    0.5 * (region.bounds.lo[d] + region.bounds.hi[d])
                };
                (d, thr)
            }
        };
        let mut left_box = region.bounds.clone();
        left_box.hi[d] = thr;
        let mut right_box = region.bounds.clone();
        right_box.lo[d] = thr;
        let (l, r): (Vec<_>, Vec<_>) = region.points.into_iter().partition(|p| p.0[d] < thr);
        (
            SaggRegion {
                bounds: left_box,
                points: l,
            },
            SaggRegion {
                bounds: right_box,
                points: r,
            },
        )
    }

    /// Leaves lie inside the root, have pairwise disjoint interiors and
    /// their volumes add up to the root's.
    pub fn is_partition(&self) -> bool {
        let inside = self.regions.iter().all(|r| self.root.contains(&r.bounds.lo) && self.root.contains(&r.bounds.hi));
        let vol: f64 = self.regions.iter().map(|r| r.bounds.volume()).sum();
        let total = self.root.volume();
        let disjoint = (0..self.regions.len()).all(|i| {
            (i + 1..self.regions.len()).all(|j| {
                let (a, b) = (&self.regions[i].bounds, &self.regions[j].bounds);
                (0..a.dim()).any(|d| a.hi[d] <= b.lo[d] || b.hi[d] <= a.lo[d])
            })
        });
        inside && disjoint && (vol - total).abs() <= 1e-9 * total
    }

    pub fn generate_goal(&mut self, rng: &mut Rng) -> (Vec<f64>, SaggMode) {
        let p = self.config.mode_probabilities;
        let u: f64 = rng.random();
        let mode = if u < p[0] {
            SaggMode::Region
        } else if u < p[0] + p[1] {
            SaggMode::Uniform
        } else {
            SaggMode::Perturb
        };
        self.mode_counts[mode as usize] += 1;
        let goal = match mode {
            SaggMode::Region => {
                let w: Vec<f64> = self.regions.iter().map(|r| r.interest(self.config.window)).collect();
                let total: f64 = w.iter().sum();
                let idx = if total > 0.0 {
                    let mut x = rng.random::<f64>() * total;
                    let mut k = 0;
                    while k + 1 < w.len() && x >= w[k] {
                        x -= w[k];
                        k += 1;
                    }
                    k
                } else {
                    rng.random_range(0..self.regions.len())
                };
                self.regions[idx].bounds.sample_uniform(rng)
            }
            SaggMode::Uniform => self.root.sample_uniform(rng),
            SaggMode::Perturb => {
                if self.attempted.is_empty() {
                    self.root.sample_uniform(rng)
                } else {
                    let base = &self.attempted[rng.random_range(0..self.attempted.len())];
                    let std = self.config.mode3_variance.sqrt();
                    let mut g: Vec<f64> = base.iter().map(|v| v + std * standard_normal(rng)).collect();
                    self.root.clip(&mut g);
                    g
                }
            }
        };
        (goal, mode)
    }
}

/// Generate goals, roll out until the step budget is spent (cycling through
/// the goals in order), feed both the reached and the attempted goals into
/// the region tree, then take one policy step on the batch.
pub fn sagg_riac_iteration(
    state: &mut SaggRiac,
    learner: &mut PolicyLearner,
    env: &EnvConfig,
    goal_rng: &mut Rng,
    rollout_rng: &mut Rng,
) -> Result<(SaggStats, SuccessTable)> {
    let budget = state
        .config
        .step_budget
        .unwrap_or(learner.rl.episodes_per_iteration * env.horizon);
    let goals: Vec<Vec<f64>> = (0..state.config.new_goals).map(|_| state.generate_goal(goal_rng).0).collect();
    let chunk = learner.rl.episodes_per_iteration.max(1);
    let mut trajs: Vec<Trajectory> = Vec::new();
    let mut steps = 0;
    while steps < budget {
        let seed = next_seed(rollout_rng);
        let offset = trajs.len();
        let batch = parallel_map(chunk, learner.rl.workers, |i| {
            let mut rng = item_rng(seed, i);
            let goal = &goals[(offset + i) % goals.len()];
            run_episode(&learner.policy, goal, env, learner.mode, &mut rng, true)
        });
        for t in batch {
            if steps >= budget {
                break;
            }
            steps += t.len();
            trajs.push(t);
        }
    }
    for t in &trajs {
        state.update_regions(&t.final_goal, 0.0);
        let c = state.competence(&t.goal, &t.final_goal);
        state.update_regions(&t.goal, c);
        state.attempted.push(t.goal.clone());
    }
    let table = SuccessTable::from_trajectories(&trajs);
    let inner = learner.learn_from(&trajs, env.horizon, rollout_rng);
    Ok((
        SaggStats {
            episodes: trajs.len(),
            steps,
            regions: state.regions.len(),
            inner: Some(inner),
        },
        table,
    ))
}

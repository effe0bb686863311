//! Whole runs: method dispatch, periodic coverage and artifact emission.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::baselines::{rejection_sample_goid, sagg_riac_iteration, uniform_goals, SaggRiac};
use crate::config::{ExperimentConfig, Method};
use crate::curriculum::{
    goid_fraction_among, CurriculumState, FitAllLabeler, GoalLabeler, GoidLabeler, LoopRngs, ReplayBuffer,
    TrueLabeler,
};
use crate::envs::{feasible_goal_grid, EnvConfig};
use crate::error::{Error, Result};
use crate::eval_report::{
    artifact_stem, estimate_coverage, render_svg, scatter_records, write_curve, write_heatmap, write_manifest,
    write_run_log, write_scatter, CoverageReport, GoalClass, GoalScatterRecord, IterationRecord, Manifest,
    PolicyStepRecord,
};
use crate::goal_gan::{initialize_gan, positive_fraction, GanPair, GanTrainStats};
use crate::nn::TensorList;
use crate::policy_opt::{InnerStats, PolicyLearner, RewardMode, StepStatus, SuccessTable};
use crate::rng::{item_rng, next_seed, SeedStreams, Stream};

/// Everything a run produced, ready to be written out.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Row 0 describes the initial policy; row `i` follows outer iteration `i`.
    pub records: Vec<IterationRecord>,
    pub steps: Vec<PolicyStepRecord>,
    pub coverage: Vec<CoverageReport>,
    /// Coverage with `eval.final_rollouts` per goal after the last iteration.
    pub final_coverage: Option<CoverageReport>,
    pub scatters: Vec<(usize, Vec<GoalScatterRecord>)>,
    pub checkpoint: TensorList,
    pub grid_points: usize,
    /// Success estimates of every goal the rejection oracle accepted.
    pub oracle_estimates: Vec<f64>,
    /// Set when the run stopped early; the other fields hold what was done.
    pub error: Option<String>,
    pub wall_clock_seconds: f64,
}

impl ExperimentResult {
    pub fn iterations_completed(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    /// Sum of rollouts spent on labels across the run.
    pub fn label_rollouts(&self) -> usize {
        self.records.iter().map(|r| r.label_rollouts).sum()
    }

    pub fn coverage_at(&self, iteration: usize) -> Option<f64> {
        self.records.get(iteration).and_then(|r| r.coverage)
    }
}

enum Driver {
    Gan {
        state: Box<CurriculumState>,
        labeler: Box<dyn GoalLabeler>,
    },
    Uniform {
        learner: PolicyLearner,
    },
    Oracle {
        learner: PolicyLearner,
    },
    Sagg {
        learner: PolicyLearner,
        sagg: Box<SaggRiac>,
    },
}

/// What one outer iteration reports, independent of the method.
struct Step {
    table: SuccessTable,
    inner: Vec<InnerStats>,
    gan: Option<GanTrainStats>,
    goid_fraction: f64,
    positive_fraction: f64,
    generated: usize,
    replay: usize,
    buffer: usize,
    label_rollouts: usize,
    oracle_estimates: Vec<f64>,
}

impl Driver {
    fn learner(&self) -> &PolicyLearner {
        match self {
            Driver::Gan { state, .. } => &state.learner,
            Driver::Uniform { learner } | Driver::Oracle { learner } | Driver::Sagg { learner, .. } => learner,
        }
    }

    fn gan(&self) -> Option<&GanPair> {
        match self {
            Driver::Gan { state, .. } => Some(&state.gan),
            _ => None,
        }
    }

    fn step(&mut self, c: &ExperimentConfig, env: &EnvConfig, rngs: &mut LoopRngs) -> Result<Step> {
        let th = c.thresholds;
        let total = c.curriculum.gan_goals + c.curriculum.replay_goals;
        match self {
            Driver::Gan { state, labeler } => {
                let (next, out) = state.run_outer_iteration(labeler.as_ref(), env, rngs)?;
                **state = next;
                Ok(Step {
                    goid_fraction: out.generated_goid_fraction(th),
                    positive_fraction: positive_fraction(&out.labeled),
                    generated: out.gan_goals.len(),
                    replay: out.replay_goals,
                    buffer: state.replay.len(),
                    label_rollouts: out.label_rollouts,
                    oracle_estimates: Vec::new(),
                    gan: Some(out.gan_stats),
                    table: out.update.table,
                    inner: out.update.inner,
                })
            }
            Driver::Uniform { learner } => {
                let goals = uniform_goals(&env.goal_space, total, &mut rngs.goal_sampling);
                let update = learner.update_policy(&goals, env, &mut rngs.rollout)?;
                let f = goid_fraction_among(&update.table, &[], th);
                Ok(Step {
                    goid_fraction: f,
                    positive_fraction: f,
                    generated: goals.len(),
                    replay: 0,
                    buffer: 0,
                    label_rollouts: 0,
                    oracle_estimates: Vec::new(),
                    gan: None,
                    table: update.table,
                    inner: update.inner,
                })
            }
            Driver::Oracle { learner } => {
                let sample = rejection_sample_goid(
                    &learner.policy,
                    env,
                    th,
                    &c.oracle,
                    total,
                    &mut rngs.goal_sampling,
                    &mut rngs.labeling,
                    c.workers,
                )?;
                let estimates = sample.estimates.clone();
                let goals = if sample.goals.is_empty() {
                    log::warn!(
                        "oracle accepted no goal out of {} candidates; training on uniform goals",
                        sample.candidates_tested
                    );
                    uniform_goals(&env.goal_space, total, &mut rngs.goal_sampling)
                } else {
                    sample.goals
                };
                let update = learner.update_policy(&goals, env, &mut rngs.rollout)?;
                let f = goid_fraction_among(&update.table, &[], th);
                Ok(Step {
                    goid_fraction: f,
                    positive_fraction: f,
                    generated: goals.len(),
                    replay: 0,
                    buffer: 0,
                    label_rollouts: sample.rollouts,
                    oracle_estimates: estimates,
                    gan: None,
                    table: update.table,
                    inner: update.inner,
                })
            }
            Driver::Sagg { learner, sagg } => {
                let mut table = SuccessTable::new();
                let mut inner = Vec::new();
                for _ in 0..c.rl.inner_iterations {
                    let (stats, t) = sagg_riac_iteration(sagg, learner, env, &mut rngs.goal_sampling, &mut rngs.rollout)?;
                    table.merge(&t);
                    inner.extend(stats.inner);
                }
                let f = goid_fraction_among(&table, &[], th);
                Ok(Step {
                    goid_fraction: f,
                    positive_fraction: f,
                    generated: table.len(),
                    replay: 0,
                    buffer: sagg.regions.len(),
                    label_rollouts: 0,
                    oracle_estimates: Vec::new(),
                    gan: None,
                    table,
                    inner,
                })
            }
        }
    }
}

fn coverage_seed(base: u64, iteration: usize) -> u64 {
    next_seed(&mut item_rng(base, iteration))
}

/// Run `config.iterations` outer iterations of the configured method.
///
/// Configuration problems are returned as errors before any work starts.
/// Failures during the run are reported in [`ExperimentResult::error`] so
/// that partial results can still be written.
pub fn run_experiment(
    config: &ExperimentConfig,
    progress: &mut dyn FnMut(&IterationRecord),
) -> Result<ExperimentResult> {
    config.validate()?;
    let config = &config.resolved()?;
    let started = Instant::now();
    let env = config.env_config()?;
    let grid = feasible_goal_grid(&env, config.eval.grid_spec(&env))?;
    if grid.is_empty() {
        return Err(Error::Config {
            path: "eval.grid_resolution".into(),
            message: "coverage grid has no feasible point".into(),
        });
    }
    let streams = SeedStreams::new(config.seed);
    let mut rngs = LoopRngs {
        rollout: streams.stream(Stream::Rollout),
        gan_noise: streams.stream(Stream::GanNoise),
        goal_sampling: streams.stream(Stream::GoalSampling),
        labeling: streams.stream(Stream::Labeling),
    };
    let eval_base = next_seed(&mut streams.stream(Stream::Evaluation));

    let mut rl = config.rl.clone();
    rl.workers = config.workers;
    let mode = if config.method == Method::UniformL2 {
        RewardMode::L2Dense
    } else {
        RewardMode::Indicator
    };
    let learner = PolicyLearner::new(&env, rl, mode, &mut streams.stream(Stream::PolicyInit))?;

    let mut result = ExperimentResult {
        config: config.clone(),
        records: Vec::new(),
        steps: Vec::new(),
        coverage: Vec::new(),
        final_coverage: None,
        scatters: Vec::new(),
        checkpoint: TensorList::default(),
        grid_points: grid.len(),
        oracle_estimates: Vec::new(),
        error: None,
        wall_clock_seconds: 0.0,
    };

    let mut init_stats = None;
    let mut driver = match config.method {
        Method::GoalGan | Method::GanFitAll | Method::GoalGanTrueLabel => {
            let mut gan = GanPair::new(config.gan.clone(), &env.goal_space.bounds, &mut streams.stream(Stream::GanInit))?;
            let stats = initialize_gan(
                &mut gan,
                &learner.policy,
                &env,
                &mut rngs.goal_sampling,
                &mut rngs.rollout,
                &mut rngs.gan_noise,
                config.workers,
            )?;
            init_stats = Some(stats);
            let labeler: Box<dyn GoalLabeler> = match config.method {
                Method::GoalGan => Box::new(GoidLabeler),
                Method::GanFitAll => Box::new(FitAllLabeler),
                _ => Box::new(TrueLabeler {
                    rollouts: config.curriculum.true_label_rollouts,
                }),
            };
            Driver::Gan {
                state: Box::new(CurriculumState {
                    iteration: 0,
                    learner,
                    gan,
                    replay: ReplayBuffer::new(env.goal_space.tolerance),
                    thresholds: config.thresholds,
                    config: config.curriculum.clone(),
                }),
                labeler,
            }
        }
        Method::Uniform | Method::UniformL2 => Driver::Uniform { learner },
        Method::Oracle => Driver::Oracle { learner },
        Method::SaggRiac => Driver::Sagg {
            learner,
            sagg: Box::new(SaggRiac::new(config.sagg.clone(), env.goal_space.bounds.clone())?),
        },
    };

    let cov = estimate_coverage(
        &driver.learner().policy,
        &grid,
        config.eval.rollouts,
        &env,
        coverage_seed(eval_base, 0),
        config.workers,
        0,
    )?;
    let initial = IterationRecord {
        iteration: 0,
        env_steps: 0,
        episodes: 0,
        coverage: Some(cov.mean),
        goid_fraction: 0.0,
        positive_label_fraction: 0.0,
        buffer_size: 0,
        generated_goals: 0,
        replay_goals: 0,
        discriminator_loss: init_stats.map(|s| s.discriminator_loss),
        generator_loss: init_stats.map(|s| s.generator_loss),
        mean_kl: 0.0,
        max_kl: 0.0,
        surrogate_improvement: 0.0,
        accepted_steps: 0,
        mean_success: 0.0,
        label_rollouts: 0,
    };
    progress(&initial);
    result.records.push(initial);
    result.coverage.push(cov);

    let (mut env_steps, mut episodes) = (0usize, 0usize);
    for i in 1..=config.iterations {
        let step = match driver.step(config, &env, &mut rngs) {
            Ok(s) => s,
            Err(e) => {
                result.error = Some(format!("iteration {i}: {e}"));
                break;
            }
        };
        let samples: usize = step.inner.iter().map(|s| s.samples).sum();
        let eps: usize = step.inner.iter().map(|s| s.episodes).sum();
        env_steps += samples;
        episodes += eps;
        for (k, s) in step.inner.iter().enumerate() {
            result.steps.push(PolicyStepRecord {
                iteration: i,
                inner: k,
                status: s.step.status.name().to_string(),
                mean_kl: s.step.mean_kl,
                surrogate_improvement: s.step.improvement(),
                mean_success: s.mean_success,
                samples: s.samples,
            });
        }
        let n = step.inner.len().max(1) as f64;
        let evaluate = i % config.eval.every == 0 || i == config.iterations;
        let coverage = if evaluate {
            let rep = estimate_coverage(
                &driver.learner().policy,
                &grid,
                config.eval.rollouts,
                &env,
                coverage_seed(eval_base, i),
                config.workers,
                i,
            )?;
            let mean = rep.mean;
            result.coverage.push(rep);
            if config.eval.scatter {
                result.scatters.push((i, scatter_records(&step.table, config.thresholds)));
            }
            Some(mean)
        } else {
            None
        };
        let record = IterationRecord {
            iteration: i,
            env_steps,
            episodes,
            coverage,
            goid_fraction: step.goid_fraction,
            positive_label_fraction: step.positive_fraction,
            buffer_size: step.buffer,
            generated_goals: step.generated,
            replay_goals: step.replay,
            discriminator_loss: step.gan.filter(|g| !g.skipped).map(|g| g.discriminator_loss),
            generator_loss: step.gan.filter(|g| !g.skipped).map(|g| g.generator_loss),
            mean_kl: step.inner.iter().map(|s| s.step.mean_kl).sum::<f64>() / n,
            max_kl: step.inner.iter().map(|s| s.step.mean_kl).fold(0.0, f64::max),
            surrogate_improvement: step.inner.iter().map(|s| s.step.improvement()).sum::<f64>() / n,
            accepted_steps: step.inner.iter().filter(|s| s.step.status == StepStatus::Accepted).count(),
            mean_success: step.inner.iter().map(|s| s.mean_success).sum::<f64>() / n,
            label_rollouts: step.label_rollouts,
        };
        progress(&record);
        result.records.push(record);
        result.oracle_estimates.extend(step.oracle_estimates);
    }

    if result.iterations_completed() > 0 {
        let last = result.iterations_completed();
        result.final_coverage = Some(estimate_coverage(
            &driver.learner().policy,
            &grid,
            config.eval.final_rollouts,
            &env,
            coverage_seed(eval_base, usize::MAX),
            config.workers,
            last,
        )?);
    }

    let ck = &mut result.checkpoint;
    ck.set_attr("method", config.method.name());
    ck.set_attr("env.kind", config.env.kind.label());
    ck.set_attr("env.dim", config.env.dim.to_string());
    ck.set_attr("env.horizon", config.env.horizon.to_string());
    ck.set_attr("iteration", result.records.len().saturating_sub(1).to_string());
    driver.learner().to_tensors(ck);
    if let Some(gan) = driver.gan() {
        gan.to_tensors(ck);
    }
    result.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok(result)
}

fn class_colour(c: GoalClass) -> &'static str {
    match c {
        GoalClass::Low => "red",
        GoalClass::Goid => "blue",
        GoalClass::High => "green",
    }
}

/// Success fraction on a red (0) to green (1) scale.
fn success_colour(p: f64) -> String {
    let p = p.clamp(0.0, 1.0);
    format!("rgb({},{},0)", (255.0 * (1.0 - p)).round(), (200.0 * p).round())
}

/// Directory of one run below the output root.
pub fn run_directory(root: &Path, config: &ExperimentConfig) -> PathBuf {
    root.join(format!("{}_{}_seed{}", config.method, config.env.tag(), config.seed))
}

/// Write curve, run log, heatmaps, scatters, checkpoint and manifest into
/// `dir`. Returns the written paths, manifest last.
pub fn write_artifacts(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let c = &result.config;
    let method = c.method.name();
    let env_tag = c.env.tag();
    let dim = c.env.dim;
    let stem = |kind: &str| artifact_stem(kind, method, &env_tag, c.seed);
    let mut files = Vec::new();

    let p = dir.join(format!("{}.csv", stem("curve")));
    write_curve(&p, &result.records)?;
    files.push(p);
    let p = dir.join(format!("{}.csv", stem("runlog")));
    write_run_log(&p, &result.steps)?;
    files.push(p);
    let env = c.env_config()?;
    let frame = env.feasible_bounds().clone();
    for rep in &result.coverage {
        let p = dir.join(format!("{}_iter{:04}.csv", stem("heatmap"), rep.iteration));
        write_heatmap(&p, dim, rep)?;
        files.push(p);
    }
    if let Some(rep) = &result.final_coverage {
        let p = dir.join(format!("{}_final.csv", stem("heatmap")));
        write_heatmap(&p, dim, rep)?;
        files.push(p);
        if c.eval.svg {
            let pts: Vec<(f64, f64, String)> = rep
                .goals
                .iter()
                .zip(&rep.estimates)
                .map(|(g, &e)| (g[0], g.get(1).copied().unwrap_or(0.0), success_colour(e)))
                .collect();
            let p = dir.join(format!("{}_final.svg", stem("heatmap")));
            render_svg(&p, &format!("{method} coverage {:.3}", rep.mean), &frame, &pts)?;
            files.push(p);
        }
    }
    for (i, recs) in &result.scatters {
        let p = dir.join(format!("{}_iter{:04}.csv", stem("scatter"), i));
        write_scatter(&p, *i, dim, recs)?;
        files.push(p);
        if c.eval.svg {
            let pts: Vec<(f64, f64, String)> = recs
                .iter()
                .map(|r| (r.goal[0], r.goal.get(1).copied().unwrap_or(0.0), class_colour(r.class).to_string()))
                .collect();
            let p = dir.join(format!("{}_iter{:04}.svg", stem("scatter"), i));
            render_svg(&p, &format!("{method} goals, iteration {i}"), &env.goal_space.bounds, &pts)?;
            files.push(p);
        }
    }
    let p = dir.join(format!("{}.tensors", stem("checkpoint")));
    result.checkpoint.save(&p)?;
    files.push(p);

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        method: method.to_string(),
        env: env_tag.clone(),
        seed: c.seed,
        status: if result.error.is_none() { "complete" } else { "partial" }.to_string(),
        error: result.error.clone(),
        iterations_completed: result.iterations_completed(),
        wall_clock_seconds: result.wall_clock_seconds,
        grid_points: result.grid_points,
        final_coverage: result.final_coverage.as_ref().map(|r| r.mean),
        files: files
            .iter()
            .filter_map(|f| f.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        config: c,
    };
    let p = dir.join(format!("{}.toml", stem("manifest")));
    write_manifest(&p, &manifest)?;
    files.push(p);
    Ok(files)
}

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval_report::{CoverageReport, GoalScatterRecord};

/// One row of the learning curve.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Cumulative environment steps spent on policy updates.
    pub env_steps: usize,
    pub episodes: usize,
    pub coverage: Option<f64>,
    /// Fraction of attempted newly generated goals inside the GOID band.
    pub goid_fraction: f64,
    /// Fraction of goals the generator was trained on as positives.
    pub positive_label_fraction: f64,
    pub buffer_size: usize,
    pub generated_goals: usize,
    pub replay_goals: usize,
    pub discriminator_loss: Option<f64>,
    pub generator_loss: Option<f64>,
    pub mean_kl: f64,
    pub max_kl: f64,
    pub surrogate_improvement: f64,
    pub accepted_steps: usize,
    pub mean_success: f64,
    /// Episodes whose outcomes fed goal labels this iteration.
    pub label_rollouts: usize,
}

/// One policy step for the run log.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyStepRecord {
    pub iteration: usize,
    pub inner: usize,
    pub status: String,
    pub mean_kl: f64,
    pub surrogate_improvement: f64,
    pub mean_success: f64,
    pub samples: usize,
}

pub const CURVE_HEADER: &str = "iteration,env_steps,episodes,coverage,goid_fraction,positive_label_fraction,buffer_size,generated_goals,replay_goals,discriminator_loss,generator_loss,mean_kl,max_kl,surrogate_improvement,accepted_steps,mean_success,label_rollouts";

const RUN_LOG_HEADER: &str = "iteration,inner,status,mean_kl,surrogate_improvement,mean_success,samples";

/// `<kind>_<method>_<env>_seed<seed>`, the common prefix of artifact files.
pub fn artifact_stem(kind: &str, method: &str, env: &str, seed: u64) -> String {
    format!("{kind}_{method}_{env}_seed{seed}")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_curve(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut s = String::from(CURVE_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.iteration,
            r.env_steps,
            r.episodes,
            opt(r.coverage),
            r.goid_fraction,
            r.positive_label_fraction,
            r.buffer_size,
            r.generated_goals,
            r.replay_goals,
            opt(r.discriminator_loss),
            opt(r.generator_loss),
            r.mean_kl,
            r.max_kl,
            r.surrogate_improvement,
            r.accepted_steps,
            r.mean_success,
            r.label_rollouts
        );
    }
    write_file(path, &s)
}

pub fn read_curve(path: &Path) -> Result<Vec<IterationRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: String| Error::TensorFormat {
        path: path.to_path_buf(),
        message: format!("line {line}: {msg}"),
    };
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(bad(1, "unexpected header".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 17 {
            return Err(bad(n, format!("expected 17 fields, found {}", f.len())));
        }
        let u = |k: usize| f[k].parse::<usize>().map_err(|e| bad(n, format!("field {k}: {e}")));
        let x = |k: usize| f[k].parse::<f64>().map_err(|e| bad(n, format!("field {k}: {e}")));
        let o = |k: usize| -> Result<Option<f64>> {
            if f[k].is_empty() {
                Ok(None)
            } else {
                x(k).map(Some)
            }
        };
        out.push(IterationRecord {
            iteration: u(0)?,
            env_steps: u(1)?,
            episodes: u(2)?,
            coverage: o(3)?,
            goid_fraction: x(4)?,
            positive_label_fraction: x(5)?,
            buffer_size: u(6)?,
            generated_goals: u(7)?,
            replay_goals: u(8)?,
            discriminator_loss: o(9)?,
            generator_loss: o(10)?,
            mean_kl: x(11)?,
            max_kl: x(12)?,
            surrogate_improvement: x(13)?,
            accepted_steps: u(14)?,
            mean_success: x(15)?,
            label_rollouts: u(16)?,
        });
    }
    Ok(out)
}

fn goal_header(dim: usize) -> String {
    (0..dim).map(|d| format!("g{d}")).collect::<Vec<_>>().join(",")
}

fn goal_fields(g: &[f64]) -> String {
    g.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn write_scatter(path: &Path, iteration: usize, dim: usize, records: &[GoalScatterRecord]) -> Result<()> {
    let mut s = format!("iteration,{},fraction,class\n", goal_header(dim));
    for r in records {
        let _ = writeln!(s, "{iteration},{},{},{}", goal_fields(&r.goal), r.fraction, r.class.name());
    }
    write_file(path, &s)
}

pub fn write_heatmap(path: &Path, dim: usize, report: &CoverageReport) -> Result<()> {
    let mut s = format!("{},success,rollouts\n", goal_header(dim));
    for (g, e) in report.goals.iter().zip(&report.estimates) {
        let _ = writeln!(s, "{},{},{}", goal_fields(g), e, report.rollouts_per_goal);
    }
    write_file(path, &s)
}

pub fn write_run_log(path: &Path, steps: &[PolicyStepRecord]) -> Result<()> {
    let mut s = String::from(RUN_LOG_HEADER);
    s.push('\n');
    for r in steps {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.iteration, r.inner, r.status, r.mean_kl, r.surrogate_improvement, r.mean_success, r.samples
        );
    }
    write_file(path, &s)
}

/// Run description written next to the data files.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest<C: Serialize> {
    pub version: String,
    pub method: String,
    pub env: String,
    pub seed: u64,
    /// `complete`, or `partial` when the run stopped early.
    pub status: String,
    pub error: Option<String>,
    pub iterations_completed: usize,
    pub wall_clock_seconds: f64,
    pub grid_points: usize,
    pub final_coverage: Option<f64>,
    pub files: Vec<String>,
    pub config: C,
}

pub fn write_manifest<C: Serialize>(path: &Path, manifest: &Manifest<C>) -> Result<()> {
    let text = toml::to_string_pretty(manifest).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    write_file(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval_report::GoalClass;

    fn record(i: usize) -> IterationRecord {
        IterationRecord {
            iteration: i,
            env_steps: 1000 * i,
            episodes: 500 * i,
            coverage: i.is_multiple_of(5).then_some(0.1 * i as f64 / 3.0),
            goid_fraction: 1.0 / 3.0,
            positive_label_fraction: 0.2,
            buffer_size: 7,
            generated_goals: 200,
            replay_goals: 100,
            discriminator_loss: Some(0.123456789012345),
            generator_loss: None,
            mean_kl: 0.0099999,
            max_kl: 0.01,
            surrogate_improvement: 1e-3,
            accepted_steps: 5,
            mean_success: 0.5,
            label_rollouts: 500,
        }
    }

    #[test]
    fn curve_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let recs: Vec<IterationRecord> = (0..12).map(record).collect();
        write_curve(&path, &recs).unwrap();
        assert_eq!(read_curve(&path).unwrap(), recs);
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next(), Some(CURVE_HEADER));
    }

    #[test]
    fn scatter_and_heatmap_layout() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![GoalScatterRecord {
            goal: vec![1.0, -0.5],
            fraction: 0.5,
            class: GoalClass::Goid,
        }];
        let p = dir.path().join("s.csv");
        write_scatter(&p, 3, 2, &recs).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "iteration,g0,g1,fraction,class\n3,1,-0.5,0.5,goid\n");
        let rep = CoverageReport {
            iteration: 0,
            goals: vec![vec![0.0, 0.0], vec![1.0, 2.0]],
            estimates: vec![1.0, 0.25],
            rollouts_per_goal: 4,
            mean: 0.625,
        };
        let h = dir.path().join("h.csv");
        write_heatmap(&h, 2, &rep).unwrap();
        assert_eq!(fs::read_to_string(&h).unwrap().lines().count(), 3);
    }

    #[test]
    fn missing_directory_error_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = write_curve(&blocker.join("curve.csv"), &[]).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}

//! Experiment configuration: defaults, strict TOML parsing and overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{OracleConfig, SaggRiacConfig};
use crate::curriculum::CurriculumConfig;
use crate::envs::{EnvConfig, EnvKind, GridSpec};
use crate::error::{Error, Result};
use crate::goal_gan::{GanConfig, GoidThresholds};
use crate::policy_opt::RlConfig;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "GOALGAN_OUTPUT_ROOT";
const FALLBACK_OUTPUT_ROOT: &str = "runs";

/// Goal selection method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Uniform,
    UniformL2,
    GanFitAll,
    Oracle,
    GoalGan,
    GoalGanTrueLabel,
    SaggRiac,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Uniform,
        Method::UniformL2,
        Method::GanFitAll,
        Method::Oracle,
        Method::GoalGan,
        Method::GoalGanTrueLabel,
        Method::SaggRiac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Uniform => "uniform",
            Method::UniformL2 => "uniform-l2",
            Method::GanFitAll => "gan-fit-all",
            Method::Oracle => "oracle",
            Method::GoalGan => "goalgan",
            Method::GoalGanTrueLabel => "goalgan-true-label",
            Method::SaggRiac => "sagg-riac",
        }
    }

    /// Whether goals come from the generator pair.
    pub fn uses_gan(self) -> bool {
        matches!(self, Method::GanFitAll | Method::GoalGan | Method::GoalGanTrueLabel)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSection {
    pub kind: EnvKind,
    /// Goal-space dimension; the maze is always 2.
    pub dim: usize,
    pub horizon: usize,
}

impl Default for EnvSection {
    fn default() -> Self {
        Self {
            kind: EnvKind::MultiPathMaze,
            dim: 2,
            horizon: crate::envs::DEFAULT_HORIZON,
        }
    }
}

impl EnvSection {
    pub fn build(&self) -> Result<EnvConfig> {
        let mut env = EnvConfig::from_kind(self.kind, self.dim)?;
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        env.horizon = self.horizon;
        Ok(env)
    }

    /// Tag used in artifact names, e.g. `multipath-maze` or `point-mass-n4`.
    pub fn tag(&self) -> String {
        match self.kind {
            EnvKind::MultiPathMaze => self.kind.label().to_string(),
            EnvKind::PointMass => format!("{}-n{}", self.kind.label(), self.dim),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Coverage is estimated every `every` outer iterations.
    pub every: usize,
    pub rollouts: usize,
    /// Rollouts per grid goal for the coverage reported at the end of a run.
    pub final_rollouts: usize,
    /// Grid cell size; the environment default when absent.
    pub grid_resolution: Option<f64>,
    pub max_points_per_dim: Option<usize>,
    pub scatter: bool,
    pub svg: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            every: 5,
            rollouts: 1,
            final_rollouts: 4,
            grid_resolution: None,
            max_points_per_dim: None,
            scatter: true,
            svg: false,
        }
    }
}

impl EvalConfig {
    pub fn grid_spec(&self, env: &EnvConfig) -> GridSpec {
        let mut spec = GridSpec::default_for(env);
        if let Some(r) = self.grid_resolution {
            spec.resolution = r;
        }
        if self.max_points_per_dim.is_some() {
            spec.max_points_per_dim = self.max_points_per_dim;
        }
        spec
    }
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub iterations: usize,
    pub seed: u64,
    /// Rollout worker threads; 1 is the bit-exact single-threaded mode.
    pub workers: usize,
    pub output_dir: Option<PathBuf>,
    pub env: EnvSection,
    pub thresholds: GoidThresholds,
    pub rl: RlConfig,
    pub gan: GanConfig,
    pub curriculum: CurriculumConfig,
    pub oracle: OracleConfig,
    pub sagg: SaggRiacConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::GoalGan,
            iterations: 100,
            seed: 0,
            workers: 1,
            output_dir: None,
            env: EnvSection::default(),
            thresholds: GoidThresholds::default(),
            rl: RlConfig::default(),
            gan: GanConfig::default(),
            curriculum: CurriculumConfig::default(),
            oracle: OracleConfig::default(),
            sagg: SaggRiacConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parse TOML text strictly; errors carry the offending key path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
            path: String::new(),
            message: e.message().to_string(),
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().message().to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |path: &str, e: Error| Error::Config {
            path: path.to_string(),
            message: e.to_string(),
        };
        self.env.build().map_err(|e| cfg("env", e))?;
        self.thresholds.validate().map_err(|e| cfg("thresholds", e))?;
        self.rl.validate().map_err(|e| cfg("rl", e))?;
        self.gan.validate().map_err(|e| cfg("gan", e))?;
        self.sagg.validate().map_err(|e| cfg("sagg", e))?;
        if self.workers == 0 {
            return Err(cfg("workers", Error::InvalidArgument("must be positive".into())));
        }
        if self.curriculum.gan_goals + self.curriculum.replay_goals == 0 {
            return Err(cfg("curriculum", Error::InvalidArgument("needs at least one goal per iteration".into())));
        }
        if self.eval.every == 0 || self.eval.rollouts == 0 || self.eval.final_rollouts == 0 {
            return Err(cfg("eval", Error::InvalidArgument("cadence and rollout counts must be positive".into())));
        }
        if self.method == Method::Oracle && self.oracle.rollouts_per_candidate < 2 {
            return Err(cfg(
                "oracle.rollouts_per_candidate",
                Error::InvalidArgument("the oracle needs at least 2 rollouts per candidate".into()),
            ));
        }
        Ok(())
    }

    /// Output directory: the configured one, else `$GOALGAN_OUTPUT_ROOT`,
    /// else `./runs`.
    pub fn output_root(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUTPUT_ROOT_VAR)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(FALLBACK_OUTPUT_ROOT))
        })
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        self.env.build()
    }

    /// Copy with every environment-dependent default filled in, as stored
    /// in run manifests.
    pub fn resolved(&self) -> Result<Self> {
        let env = self.env_config()?;
        let mut c = self.clone();
        c.gan.output_noise_std.get_or_insert(env.default_goal_noise_std());
        Ok(c)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub method: Option<Method>,
    pub env_kind: Option<EnvKind>,
    pub dim: Option<usize>,
    pub horizon: Option<usize>,
    pub iterations: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub episodes_per_iteration: Option<usize>,
    pub eval_every: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(m) = self.method {
            c.method = m;
        }
        if let Some(k) = self.env_kind {
            c.env.kind = k;
            if k == EnvKind::MultiPathMaze && self.dim.is_none() {
                c.env.dim = 2;
            }
        }
        if let Some(d) = self.dim {
            c.env.dim = d;
        }
        if let Some(h) = self.horizon {
            c.env.horizon = h;
        }
        if let Some(n) = self.iterations {
            c.iterations = n;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(w) = self.workers {
            c.workers = w;
        }
        if let Some(o) = &self.output_dir {
            c.output_dir = Some(o.clone());
        }
        if let Some(v) = self.r_min {
            c.thresholds.r_min = v;
        }
        if let Some(v) = self.r_max {
            c.thresholds.r_max = v;
        }
        if let Some(v) = self.episodes_per_iteration {
            c.rl.episodes_per_iteration = v;
        }
        if let Some(v) = self.eval_every {
            c.eval.every = v;
        }
    }
}

/// Defaults, then the file (if any), then the overrides; validated.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut c = match path {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    overrides.apply(&mut c);
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!((c.rl.gamma, c.rl.gae_lambda), (0.998, 0.995));
        assert_eq!((c.thresholds.r_min, c.thresholds.r_max), (0.1, 0.9));
        assert_eq!(c.gan.noise_dim, 4);
        assert_eq!(c.gan.generator_hidden, vec![128, 128]);
        assert_eq!(c.gan.discriminator_hidden, vec![256, 256]);
        assert_eq!(c.rl.policy_hidden, vec![32, 32]);
        assert_eq!((c.rl.inner_iterations, c.rl.episodes_per_iteration), (5, 100));
        assert_eq!(c.gan.train_iterations, 200);
        c.validate().unwrap();
    }

    #[test]
    fn flag_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "seed = 3\n[thresholds]\nr_min = 0.15\nr_max = 0.85\n").unwrap();
        let o = Overrides {
            r_min: Some(0.2),
            ..Overrides::default()
        };
        let c = parse_config(Some(&p), &o).unwrap();
        assert_eq!((c.thresholds.r_min, c.thresholds.r_max), (0.2, 0.85));
        assert_eq!(c.seed, 3);
        let c = parse_config(None, &o).unwrap();
        assert_eq!((c.thresholds.r_min, c.thresholds.r_max), (0.2, 0.9));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml("[thresholds]\nrmax_typo = 0.9\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rmax_typo"), "{msg}");
        let err = ExperimentConfig::from_toml("[rl]\ngamma = \"high\"\n").unwrap_err();
        assert!(err.to_string().contains("rl.gamma"), "{err}");
        // Workers are a top-level setting only.
        assert!(ExperimentConfig::from_toml("[rl]\nworkers = 4\n").is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let c = ExperimentConfig::from_toml(&format!("method = \"{m}\"")).unwrap();
            assert_eq!(c.method, m);
        }
        assert!(matches!("goal-gan".parse::<Method>(), Err(Error::UnknownMethod(_))));
        assert!(ExperimentConfig::from_toml("method = \"nope\"").unwrap_err().to_string().contains("method"));
    }

    #[test]
    fn resolved_config_round_trips_through_toml() {
        let mut c = ExperimentConfig::default();
        c.env.kind = EnvKind::PointMass;
        c.env.dim = 5;
        c.sagg.step_budget = Some(1000);
        c.output_dir = Some("out".into());
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn env_tags() {
        let mut s = EnvSection::default();
        assert_eq!(s.tag(), "multipath-maze");
        s.kind = EnvKind::PointMass;
        s.dim = 4;
        assert_eq!(s.tag(), "point-mass-n4");
    }

    #[test]
    fn goal_noise_resolves_per_environment_unless_set() {
        let mut c = ExperimentConfig::default();
        assert_eq!(c.resolved().unwrap().gan.output_noise_std, Some(1.0));
        c.env.kind = EnvKind::PointMass;
        c.env.dim = 6;
        assert_eq!(c.resolved().unwrap().gan.output_noise_std, Some(0.3));
        c.gan.output_noise_std = Some(0.7);
        assert_eq!(c.resolved().unwrap().gan.output_noise_std, Some(0.7));
        let text = c.resolved().unwrap().to_toml();
        assert!(text.contains("output_noise_std = 0.7"), "{text}");
    }
}

//! Point-mass goal-reaching environments.
//!
//! Both environments start every episode at the origin at rest, project a
//! state to goal space by taking its position, and pay a sparse reward of 1
//! on the first step that ends within the goal tolerance. Stepping is a pure
//! function of `(state, action, goal, config)`.

mod geometry;

pub use geometry::{AxisBox, MazeGeometry};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::Rng;

/// Half-width of the thin dimensions of the N-dim point mass, and the goal
/// tolerance of its 2-D version.
pub const THIN_HALF_WIDTH: f64 = 0.3;
pub const POINT_MASS_ACCEL_BOUND: f64 = 5.0;
pub const MAZE_SPEED_BOUND: f64 = 1.0;
pub const DEFAULT_HORIZON: usize = 400;
pub const DEFAULT_DT: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    /// Velocity-commanded point mass in a maze with several routes.
    #[serde(alias = "multipath-maze")]
    MultiPathMaze,
    /// Acceleration-commanded point mass in `[-5, 5]^N` whose free space is
    /// a thin slab around the `[-5, 5] x [-1, 1]` strip.
    PointMass,
}

impl EnvKind {
    pub fn label(self) -> &'static str {
        match self {
            EnvKind::MultiPathMaze => "multipath-maze",
            EnvKind::PointMass => "point-mass",
        }
    }
}

/// `epsilon_N = 0.3 sqrt(N) / sqrt(2)`: keeps the success ball comparable
/// as typical distances grow with dimension.
pub fn goal_tolerance_for_dim(n: usize) -> f64 {
    THIN_HALF_WIDTH * (n as f64).sqrt() / 2f64.sqrt()
}

/// Goal set, tolerance and metric. Goals are positions; the distance is
/// Euclidean.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalSpace {
    pub bounds: AxisBox,
    pub tolerance: f64,
}

impl GoalSpace {
    pub fn new(bounds: AxisBox, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "goal tolerance must be positive, got {tolerance}"
            )));
        }
        Ok(Self { bounds, tolerance })
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn project(&self, state: &EnvState) -> Vec<f64> {
        state.position.clone()
    }

    pub fn diameter(&self) -> f64 {
        self.bounds.diameter()
    }

    pub fn sample_uniform(&self, rng: &mut Rng) -> Vec<f64> {
        self.bounds.sample_uniform(rng)
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Steps taken since reset.
    pub steps: usize,
}

impl EnvState {
    /// Policy observation: position then velocity.
    pub fn observation(&self) -> Vec<f64> {
        let mut obs = self.position.clone();
        obs.extend_from_slice(&self.velocity);
        obs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Maze(MazeGeometry),
    /// Free space is a box (the slab of the point mass).
    Slab(AxisBox),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub dim: usize,
    pub horizon: usize,
    pub dt: f64,
    /// Per-dimension bound on the commanded velocity (maze) or acceleration.
    pub action_bound: f64,
    pub goal_space: GoalSpace,
    pub region: Region,
}

impl EnvConfig {
    pub fn multi_path_maze() -> Self {
        let maze = MazeGeometry::multi_path();
        Self {
            kind: EnvKind::MultiPathMaze,
            dim: 2,
            horizon: DEFAULT_HORIZON,
            dt: DEFAULT_DT,
            action_bound: MAZE_SPEED_BOUND,
            goal_space: GoalSpace::new(maze.outer.clone(), THIN_HALF_WIDTH).expect("positive"),
            region: Region::Maze(maze),
        }
    }

    pub fn point_mass(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "point mass needs at least 2 dimensions, got {n}"
            )));
        }
        let mut lo = vec![-5.0, -1.0];
        let mut hi = vec![5.0, 1.0];
        lo.resize(n, -THIN_HALF_WIDTH);
        hi.resize(n, THIN_HALF_WIDTH);
        Ok(Self {
            kind: EnvKind::PointMass,
            dim: n,
            horizon: DEFAULT_HORIZON,
            dt: DEFAULT_DT,
            action_bound: POINT_MASS_ACCEL_BOUND,
            goal_space: GoalSpace::new(AxisBox::cube(n, 5.0), goal_tolerance_for_dim(n))?,
            region: Region::Slab(AxisBox::new(lo, hi)),
        })
    }

    pub fn from_kind(kind: EnvKind, dim: usize) -> Result<Self> {
        match kind {
            EnvKind::MultiPathMaze => {
                if dim != 2 {
                    return Err(Error::InvalidArgument(format!(
                        "the multi-path maze is 2-dimensional, got dimension {dim}"
                    )));
                }
                Ok(Self::multi_path_maze())
            }
            EnvKind::PointMass => Self::point_mass(dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument("timestep must be positive".into()));
        }
        if !(self.action_bound > 0.0) {
            return Err(Error::InvalidArgument("action bound must be positive".into()));
        }
        check_len("goal space dimension", self.dim, self.goal_space.dim())
    }

    /// Observation width seen by a goal-conditioned policy.
    pub fn policy_input_dim(&self) -> usize {
        2 * self.dim + self.goal_space.dim()
    }

    /// Smallest box containing every feasible goal.
    pub fn feasible_bounds(&self) -> &AxisBox {
        match &self.region {
            Region::Maze(m) => &m.outer,
            Region::Slab(b) => b,
        }
    }

    /// Std of the noise added to generated goals when the GAN config leaves
    /// it unset. Unit noise in every coordinate would push most goals of the
    /// N-dim point mass out of its 0.3 m slab, so that family uses 0.3 at
    /// every N.
    pub fn default_goal_noise_std(&self) -> f64 {
        match self.kind {
            EnvKind::MultiPathMaze => 1.0,
            EnvKind::PointMass => 0.3,
        }
    }

    /// Volume of feasible goals divided by the volume of the goal box.
    pub fn feasible_volume_ratio(&self) -> f64 {
        let free = match &self.region {
            Region::Maze(m) => m.outer.volume() - m.walls.iter().map(AxisBox::volume).sum::<f64>(),
            Region::Slab(b) => b.volume(),
        };
        free / self.goal_space.bounds.volume()
    }
}

pub fn is_feasible(goal: &[f64], config: &EnvConfig) -> bool {
    if goal.len() != config.goal_space.dim() || goal.iter().any(|g| !g.is_finite()) {
        return false;
    }
    match &config.region {
        Region::Maze(m) => m.is_free(goal),
        Region::Slab(b) => b.contains(goal),
    }
}

/// Uniform draw from the feasible goal set (rejection sampling inside the
/// feasible bounding box).
pub fn sample_feasible_goal(config: &EnvConfig, rng: &mut Rng) -> Vec<f64> {
    loop {
        let g = config.feasible_bounds().sample_uniform(rng);
        if is_feasible(&g, config) {
            return g;
        }
    }
}

/// Fixed start state: origin at rest.
pub fn start_state(config: &EnvConfig) -> EnvState {
    EnvState {
        position: vec![0.0; config.dim],
        velocity: vec![0.0; config.dim],
        steps: 0,
    }
}

/// Start an episode toward `goal`, rejecting goals outside the feasible set.
///
/// Training code that deliberately pursues generated (possibly infeasible)
/// goals uses [`start_state`] directly.
pub fn reset(config: &EnvConfig, goal: &[f64]) -> Result<EnvState> {
    check_len("goal", config.goal_space.dim(), goal.len())?;
    if !is_feasible(goal, config) {
        return Err(Error::InfeasibleGoal { goal: goal.to_vec() });
    }
    Ok(start_state(config))
}

/// 1 when the projected state lies within tolerance of the goal (inclusive).
pub fn indicator_reward(state: &EnvState, goal: &[f64], space: &GoalSpace) -> f64 {
    if distance(&state.position, goal) <= space.tolerance {
        1.0
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
}

pub fn step(state: &EnvState, action: &[f64], goal: &[f64], config: &EnvConfig) -> Result<StepOutcome> {
    check_len("action", config.dim, action.len())?;
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("action"));
    }
    let mut next = state.clone();
    advance(&mut next, action, config);
    let reward = indicator_reward(&next, goal, &config.goal_space);
    let done = reward == 1.0 || next.steps >= config.horizon;
    Ok(StepOutcome {
        state: next,
        reward,
        done,
    })
}

/// In-place dynamics without validation; `action` must have length `dim`
/// and be finite.
pub fn advance(state: &mut EnvState, action: &[f64], config: &EnvConfig) {
    let bound = config.action_bound;
    let dt = config.dt;
    match &config.region {
        Region::Maze(maze) => {
            for (v, &a) in state.velocity.iter_mut().zip(action) {
                *v = a.clamp(-bound, bound);
            }
            for axis in 0..config.dim {
                let delta = state.velocity[axis] * dt;
                if maze.move_axis(&mut state.position, axis, delta) {
                    state.velocity[axis] = 0.0;
                }
            }
        }
        Region::Slab(slab) => {
            for axis in 0..config.dim {
                let accel = action[axis].clamp(-bound, bound);
                let mut p = state.position[axis] + state.velocity[axis] * dt;
                let mut v = state.velocity[axis] + accel * dt;
                if p < slab.lo[axis] {
                    p = slab.lo[axis];
                    v = 0.0;
                } else if p > slab.hi[axis] {
                    p = slab.hi[axis];
                    v = 0.0;
                }
                state.position[axis] = p;
                state.velocity[axis] = v;
            }
        }
    }
    state.steps += 1;
}

/// Evaluation grid over the feasible goals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub resolution: f64,
    /// Upper bound on points per dimension; coarser cells are used when the
    /// resolution would exceed it.
    pub max_points_per_dim: Option<usize>,
}

impl GridSpec {
    pub fn new(resolution: f64) -> Self {
        Self {
            resolution,
            max_points_per_dim: None,
        }
    }

    /// 0.5 m cells for the maze; 1 m cells for the point mass, capped at 4
    /// points per dimension from N = 4 upward.
    pub fn default_for(config: &EnvConfig) -> Self {
        match config.kind {
            EnvKind::MultiPathMaze => Self::new(0.5),
            EnvKind::PointMass => Self {
                resolution: 1.0,
                max_points_per_dim: (config.dim >= 4).then_some(4),
            },
        }
    }
}

/// Cell centers of an axis-aligned grid over the feasible bounding box,
/// keeping only feasible centers, in lexicographic order (last axis fastest).
///
/// Dimensions thinner than one cell collapse to their midpoint as long as at
/// least one dimension holds a full cell; otherwise the grid is empty.
pub fn feasible_goal_grid(config: &EnvConfig, spec: GridSpec) -> Result<Vec<Vec<f64>>> {
    if !(spec.resolution > 0.0) {
        return Err(Error::InvalidArgument("grid resolution must be positive".into()));
    }
    let bounds = config.feasible_bounds();
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(bounds.dim());
    let mut any_full = false;
    for d in 0..bounds.dim() {
        let extent = bounds.hi[d] - bounds.lo[d];
        // Tolerate round-off in extent / resolution.
        let mut count = (extent / spec.resolution + 1e-9).floor() as usize;
        if let Some(cap) = spec.max_points_per_dim {
            count = count.min(cap);
        }
        if count == 0 {
            axes.push(vec![0.5 * (bounds.lo[d] + bounds.hi[d])]);
            continue;
        }
        any_full = true;
        let cell = extent / count as f64;
        axes.push((0..count).map(|i| bounds.lo[d] + (i as f64 + 0.5) * cell).collect());
    }
    if !any_full {
        return Ok(Vec::new());
    }
    let mut grid: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    grid.retain(|g| is_feasible(g, config));
    Ok(grid)
}

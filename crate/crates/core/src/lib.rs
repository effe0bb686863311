//! Automatic goal curricula for goal-conditioned reinforcement learning.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod baselines;
pub mod cli;
pub mod config;
pub mod curriculum;
pub mod envs;
pub mod error;
pub mod eval_report;
pub mod goal_gan;
pub mod grad_suite;
pub mod nn;
pub mod policy_opt;
pub mod rng;

pub use config::{ExperimentConfig, Method};
pub use error::{Error, Result};

//! Diagonal Gaussian action distributions.

use std::f64::consts::PI;

use crate::rng::{standard_normal, Rng};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Mean from a network output plus a state-independent log standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianHead {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl GaussianHead {
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Self {
        debug_assert_eq!(mean.len(), log_std.len());
        Self { mean, log_std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn log_prob(&self, x: &[f64]) -> f64 {
        log_prob(&self.mean, &self.log_std, x)
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &ls)| m + ls.exp() * standard_normal(rng))
            .collect()
    }

    /// `KL(self || other)`.
    pub fn kl(&self, other: &GaussianHead) -> f64 {
        kl(&self.mean, &self.log_std, &other.mean, &other.log_std)
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.log_std)
    }
}

pub fn log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    let mut lp = 0.0;
    for ((&m, &ls), &xi) in mean.iter().zip(log_std).zip(x) {
        let z = (xi - m) * (-ls).exp();
        lp += -0.5 * z * z - ls - HALF_LN_2PI;
    }
    lp
}

/// `KL(p || q)` for diagonal Gaussians.
pub fn kl(mean_p: &[f64], log_std_p: &[f64], mean_q: &[f64], log_std_q: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..mean_p.len() {
        let var_p = (2.0 * log_std_p[i]).exp();
        let var_q = (2.0 * log_std_q[i]).exp();
        let dm = mean_p[i] - mean_q[i];
        total += log_std_q[i] - log_std_p[i] + (var_p + dm * dm) / (2.0 * var_q) - 0.5;
    }
    total
}

pub fn entropy(log_std: &[f64]) -> f64 {
    log_std
        .iter()
        .map(|&ls| ls + 0.5 * (2.0 * PI * std::f64::consts::E).ln())
        .sum()
}

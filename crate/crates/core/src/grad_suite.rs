//! Finite-difference checks of every analytic gradient over randomized
//! network shapes and inputs.

use rand::Rng as _;

use crate::envs::AxisBox;
use crate::goal_gan::{GanConfig, GanPair};
use crate::nn::gradcheck::{check_gradient, FdReport, DEFAULT_STEP};
use crate::nn::Mlp;
use crate::policy_opt::{GaussianPolicy, ValueFunction};
use crate::rng::{standard_normal, Rng, SeedStreams, Stream};

pub const TOLERANCE: f64 = 1e-4;

/// Parameters checked per configuration; large nets are subsampled.
const COORDS_PER_CASE: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    /// Configurations whose worst coordinate exceeded the tolerance.
    pub failed_cases: usize,
    pub report: FdReport,
}

impl SuiteResult {
    pub fn passes(&self) -> bool {
        self.failed_cases == 0 && self.report.checked > 0
    }
}

fn hidden(rng: &mut Rng, lo: usize, hi: usize) -> Vec<usize> {
    let layers = rng.random_range(1..=2);
    (0..layers).map(|_| rng.random_range(lo..=hi)).collect()
}

fn gaussian(n: usize, scale: f64, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| scale * standard_normal(rng)).collect()
}

fn coords(n: usize, rng: &mut Rng) -> Vec<usize> {
    if n <= COORDS_PER_CASE {
        (0..n).collect()
    } else {
        rand::seq::index::sample(rng, n, COORDS_PER_CASE).into_vec()
    }
}

fn relu_patterns(net: &Mlp, inputs: &[Vec<f64>]) -> Vec<bool> {
    inputs
        .iter()
        .flat_map(|x| net.relu_pattern(net.trace(x).expect("input width").as_slice()))
        .collect()
}

fn run_suite(name: &'static str, cases: usize, seed: u64, mut case: impl FnMut(&mut Rng) -> FdReport) -> SuiteResult {
    let mut rng = SeedStreams::new(seed).stream(Stream::Evaluation);
    let mut out = SuiteResult {
        name,
        cases,
        failed_cases: 0,
        report: FdReport::default(),
    };
    for _ in 0..cases {
        let r = case(&mut rng);
        if !r.passes(TOLERANCE) {
            out.failed_cases += 1;
        }
        out.report.merge(&r);
    }
    out
}

/// Gradient of the Gaussian policy log-density.
pub fn policy_suite(cases: usize, seed: u64) -> SuiteResult {
    run_suite("policy", cases, seed, |rng| {
        let obs_dim = rng.random_range(2..=9);
        let act_dim = rng.random_range(1..=4);
        let mut p = GaussianPolicy::new(obs_dim, act_dim, &hidden(rng, 4, 32), rng.random_range(-1.0..0.5), rng);
        p.net.scale_output_layer(50.0);
        let obs = gaussian(obs_dim, 1.0, rng);
        let act = gaussian(act_dim, 1.0, rng);
        let g = p.log_prob_gradient(&obs, &act).expect("shapes agree");
        let params = p.params();
        check_gradient(
            &params,
            &g,
            &coords(params.len(), rng),
            DEFAULT_STEP,
            |q| {
                let mut pp = p.clone();
                pp.set_params(q).expect("same length");
                pp.log_prob(&obs, &act).expect("shapes agree")
            },
            |_| Vec::new(),
        )
    })
}

/// Gradient of the value function's normalized regression loss.
pub fn value_suite(cases: usize, seed: u64) -> SuiteResult {
    run_suite("value", cases, seed, |rng| {
        let obs_dim = rng.random_range(2..=9);
        let mut vf = ValueFunction::new(obs_dim, &hidden(rng, 4, 32), rng);
        vf.set_target_normalization(standard_normal(rng), rng.random_range(0.5..3.0));
        let rows = rng.random_range(1..=8);
        let inputs = gaussian(rows * vf.input_dim(), 1.0, rng);
        let targets = gaussian(rows, 2.0, rng);
        let all: Vec<usize> = (0..rows).collect();
        let g = vf.loss_gradient(&inputs, &targets, &all);
        let params = vf.net.params();
        check_gradient(
            &params,
            &g,
            &coords(params.len(), rng),
            DEFAULT_STEP,
            |q| {
                let mut v = vf.clone();
                v.net.set_params(q).expect("same length");
                v.normalized_loss(&inputs, &targets)
            },
            |_| Vec::new(),
        )
    })
}

fn random_gan(rng: &mut Rng) -> GanPair {
    let dim = rng.random_range(1..=4);
    let config = GanConfig {
        noise_dim: rng.random_range(1..=4),
        generator_hidden: hidden(rng, 4, 48),
        discriminator_hidden: hidden(rng, 4, 48),
        ..GanConfig::default()
    };
    GanPair::new(config, &AxisBox::cube(dim, 5.0), rng).expect("valid config")
}

/// Gradient of the three-term discriminator loss.
pub fn discriminator_suite(cases: usize, seed: u64) -> SuiteResult {
    run_suite("discriminator", cases, seed, |rng| {
        let gan = random_gan(rng);
        let k = gan.goal_dim();
        let real: Vec<(Vec<f64>, f64)> = (0..rng.random_range(1..=6))
            .map(|_| (gaussian(k, 0.6, rng), if rng.random_bool(0.5) { 1.0 } else { 0.0 }))
            .collect();
        let fake: Vec<Vec<f64>> = (0..rng.random_range(0..=6)).map(|_| gaussian(k, 0.6, rng)).collect();
        let (_, g) = gan.discriminator_loss_gradient(&gan.discriminator, &real, &fake, true);
        let params = gan.discriminator.params();
        let inputs: Vec<Vec<f64>> = real.iter().map(|r| r.0.clone()).chain(fake.iter().cloned()).collect();
        check_gradient(
            &params,
            &g,
            &coords(params.len(), rng),
            DEFAULT_STEP,
            |q| {
                let mut d = gan.discriminator.clone();
                d.set_params(q).expect("same length");
                gan.discriminator_loss_gradient(&d, &real, &fake, false).0
            },
            |q| {
                let mut d = gan.discriminator.clone();
                d.set_params(q).expect("same length");
                relu_patterns(&d, &inputs)
            },
        )
    })
}

/// Gradient of the generator loss through the fixed discriminator.
pub fn generator_suite(cases: usize, seed: u64) -> SuiteResult {
    run_suite("generator", cases, seed, |rng| {
        let gan = random_gan(rng);
        let noise: Vec<Vec<f64>> = (0..rng.random_range(1..=6)).map(|_| gan.sample_noise(rng)).collect();
        let (_, g) = gan.generator_loss_gradient(&gan.generator, &noise, true);
        let params = gan.generator.params();
        check_gradient(
            &params,
            &g,
            &coords(params.len(), rng),
            DEFAULT_STEP,
            |q| {
                let mut gen = gan.generator.clone();
                gen.set_params(q).expect("same length");
                gan.generator_loss_gradient(&gen, &noise, false).0
            },
            |q| {
                let mut gen = gan.generator.clone();
                gen.set_params(q).expect("same length");
                let mut pat = relu_patterns(&gen, &noise);
                let outs: Vec<Vec<f64>> = noise.iter().map(|z| gen.forward(z).expect("noise width")).collect();
                pat.extend(relu_patterns(&gan.discriminator, &outs));
                pat
            },
        )
    })
}

/// All four suites with `cases` configurations each.
pub fn run_all(cases: usize, seed: u64) -> Vec<SuiteResult> {
    vec![
        policy_suite(cases, seed),
        value_suite(cases, seed),
        generator_suite(cases, seed),
        discriminator_suite(cases, seed),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for r in run_all(10, 7) {
            assert!(r.passes(), "{r:?}");
        }
    }
}

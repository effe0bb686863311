use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envs::AxisBox;
use crate::error::{check_len, Error, Result};
use crate::goal_gan::LabeledGoal;
use crate::nn::tensor_io::{push_mlp, read_mlp};
use crate::nn::{Activation, Adam, Mlp, TensorList};
use crate::rng::{standard_normal, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub noise_dim: usize,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    /// Std of the Gaussian noise added to every sampled goal coordinate.
    /// Unset means the environment's default (see
    /// `EnvConfig::default_goal_noise_std`), or 1.0 without an environment.
    pub output_noise_std: Option<f64>,
    pub learning_rate: f64,
    pub minibatch: usize,
    /// Discriminator/generator step pairs per outer iteration.
    pub train_iterations: usize,
    /// Step pairs used to fit the initial visitation distribution.
    pub init_iterations: usize,
    /// Rollouts of the untrained policy collected for initialization.
    pub init_episodes: usize,
    /// Least-squares targets: `a` for negatives and fakes, `b` for
    /// positives, `c` for the generator.
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            noise_dim: 4,
            generator_hidden: vec![128, 128],
            discriminator_hidden: vec![256, 256],
            output_noise_std: None,
            learning_rate: 1e-3,
            minibatch: 64,
            train_iterations: 200,
            init_iterations: 1000,
            init_episodes: 100,
            a: -1.0,
            b: 1.0,
            c: 0.0,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.a == self.b {
            return Err(Error::InvalidArgument("gan constants need a != b".into()));
        }
        if self.noise_dim == 0 || self.minibatch == 0 {
            return Err(Error::InvalidArgument("noise_dim and minibatch must be positive".into()));
        }
        if self.output_noise_std.is_some_and(|v| !(v >= 0.0)) || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "output_noise_std must be non-negative and learning_rate positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GanTrainStats {
    pub iterations: usize,
    /// Training was skipped because no goal carried a positive label.
    pub skipped: bool,
    pub discriminator_loss: f64,
    pub generator_loss: f64,
}

/// Generator and discriminator over goals. Both networks work in
/// coordinates normalized to `[-1, 1]` over the goal box; the public
/// interface uses goal coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct GanPair {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub config: GanConfig,
    center: Vec<f64>,
    half_width: Vec<f64>,
    bounds: AxisBox,
    g_opt: Adam,
    d_opt: Adam,
}

impl GanPair {
    pub fn new(config: GanConfig, bounds: &AxisBox, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let k = bounds.dim();
        let mut gs = vec![config.noise_dim];
        gs.extend_from_slice(&config.generator_hidden);
        gs.push(k);
        let mut ds = vec![k];
        ds.extend_from_slice(&config.discriminator_hidden);
        ds.push(1);
        let generator = Mlp::new(&gs, Activation::Relu, Activation::Linear, rng);
        let discriminator = Mlp::new(&ds, Activation::Relu, Activation::Linear, rng);
        Self::from_networks(config, bounds, generator, discriminator)
    }

    pub fn from_networks(config: GanConfig, bounds: &AxisBox, generator: Mlp, discriminator: Mlp) -> Result<Self> {
        let k = bounds.dim();
        check_len("generator input", config.noise_dim, generator.input_dim())?;
        check_len("generator output", k, generator.output_dim())?;
        check_len("discriminator input", k, discriminator.input_dim())?;
        check_len("discriminator output", 1, discriminator.output_dim())?;
        let center = bounds.center();
        let half_width = bounds.lo.iter().zip(&bounds.hi).map(|(l, h)| (0.5 * (h - l)).max(1e-12)).collect();
        let g_opt = Adam::new(generator.num_params(), config.learning_rate);
        let d_opt = Adam::new(discriminator.num_params(), config.learning_rate);
        Ok(Self {
            generator,
            discriminator,
            config,
            center,
            half_width,
            bounds: bounds.clone(),
            g_opt,
            d_opt,
        })
    }

    pub fn goal_dim(&self) -> usize {
        self.center.len()
    }

    pub fn bounds(&self) -> &AxisBox {
        &self.bounds
    }

    pub fn normalize(&self, goal: &[f64]) -> Vec<f64> {
        goal.iter()
            .zip(self.center.iter().zip(&self.half_width))
            .map(|(g, (c, h))| (g - c) / h)
            .collect()
    }

    pub fn denormalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.center.iter().zip(&self.half_width))
            .map(|(v, (c, h))| c + h * v)
            .collect()
    }

    pub fn sample_noise(&self, rng: &mut Rng) -> Vec<f64> {
        (0..self.config.noise_dim).map(|_| standard_normal(rng)).collect()
    }

    /// `G(z)` in goal coordinates, without output noise or clipping.
    pub fn generate(&self, z: &[f64]) -> Vec<f64> {
        self.denormalize(&self.generator.forward(z).expect("noise width"))
    }

    /// Goals `G(z) + noise`, clipped to the goal box.
    pub fn sample_goals(&self, count: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        let noise_std = self.config.output_noise_std.unwrap_or(1.0);
        (0..count)
            .map(|_| {
                let z = self.sample_noise(rng);
                let mut g = self.generate(&z);
                for v in g.iter_mut() {
                    *v += noise_std * standard_normal(rng);
                }
                self.bounds.clip(&mut g);
                g
            })
            .collect()
    }

    /// Generator means `G(z)` only, clipped to the goal box.
    pub fn sample_goals_noiseless(&self, count: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                let z = self.sample_noise(rng);
                let mut g = self.generate(&z);
                self.bounds.clip(&mut g);
                g
            })
            .collect()
    }

    pub fn discriminate(&self, goal: &[f64]) -> f64 {
        self.discriminator.forward(&self.normalize(goal)).expect("goal width")[0]
    }

    /// Mean over labeled goals of `y (D(g) - b)^2 + (1 - y) (D(g) - a)^2`
    /// plus the mean over generated goals of `(D(g) - a)^2`. Empty groups
    /// contribute zero.
    pub fn discriminator_loss(&self, labeled: &[LabeledGoal], generated: &[Vec<f64>]) -> f64 {
        let real: Vec<(Vec<f64>, f64)> = labeled.iter().map(|l| (self.normalize(&l.goal), l.y())).collect();
        let fake: Vec<Vec<f64>> = generated.iter().map(|g| self.normalize(g)).collect();
        self.discriminator_loss_gradient(&self.discriminator, &real, &fake, false).0
    }

    /// Standard least-squares discriminator loss with real data `real`:
    /// `mean (D(x) - b)^2 + mean (D(g) - a)^2`.
    pub fn two_term_discriminator_loss(&self, real: &[Vec<f64>], generated: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        if !real.is_empty() {
            total += real.iter().map(|x| (self.discriminate(x) - self.config.b).powi(2)).sum::<f64>() / real.len() as f64;
        }
        if !generated.is_empty() {
            total += generated
                .iter()
                .map(|x| (self.discriminate(x) - self.config.a).powi(2))
                .sum::<f64>()
                / generated.len() as f64;
        }
        total
    }

    /// Mean of `(D(G(z)) - c)^2` over the noise batch.
    pub fn generator_loss(&self, noise: &[Vec<f64>]) -> f64 {
        self.generator_loss_gradient(&self.generator, noise, false).0
    }

    /// Discriminator loss on normalized inputs and, when `with_grad`, its
    /// gradient with respect to the parameters of `disc`.
    pub fn discriminator_loss_gradient(
        &self,
        disc: &Mlp,
        real: &[(Vec<f64>, f64)],
        fake: &[Vec<f64>],
        with_grad: bool,
    ) -> (f64, Vec<f64>) {
        let (a, b) = (self.config.a, self.config.b);
        let mut grad = vec![0.0; if with_grad { disc.num_params() } else { 0 }];
        let mut trace = vec![0.0; disc.trace_len()];
        let mut loss = 0.0;
        if !real.is_empty() {
            let w = 1.0 / real.len() as f64;
            for (x, y) in real {
                disc.forward_into(x, &mut trace);
                let d = disc.output_of(&trace)[0];
                loss += w * (y * (d - b).powi(2) + (1.0 - y) * (d - a).powi(2));
                if with_grad {
                    let dl = w * (2.0 * y * (d - b) + 2.0 * (1.0 - y) * (d - a));
                    disc.backward(&trace, &[dl], &mut grad, None);
                }
            }
        }
        if !fake.is_empty() {
            let w = 1.0 / fake.len() as f64;
            for x in fake {
                disc.forward_into(x, &mut trace);
                let d = disc.output_of(&trace)[0];
                loss += w * (d - a).powi(2);
                if with_grad {
                    disc.backward(&trace, &[w * 2.0 * (d - a)], &mut grad, None);
                }
            }
        }
        (loss, grad)
    }

    /// Generator loss for the generator `gen` (against the current
    /// discriminator) and, when `with_grad`, its parameter gradient.
    pub fn generator_loss_gradient(&self, gen: &Mlp, noise: &[Vec<f64>], with_grad: bool) -> (f64, Vec<f64>) {
        let c = self.config.c;
        let disc = &self.discriminator;
        let mut grad = vec![0.0; if with_grad { gen.num_params() } else { 0 }];
        let mut gtrace = vec![0.0; gen.trace_len()];
        let mut dtrace = vec![0.0; disc.trace_len()];
        let w = 1.0 / noise.len().max(1) as f64;
        let mut loss = 0.0;
        for z in noise {
            gen.forward_into(z, &mut gtrace);
            disc.forward_into(gen.output_of(&gtrace), &mut dtrace);
            let d = disc.output_of(&dtrace)[0];
            loss += w * (d - c).powi(2);
            if with_grad {
                let dx = disc.input_gradient(&dtrace, &[w * 2.0 * (d - c)]);
                gen.backward(&gtrace, &dx, &mut grad, None);
            }
        }
        (loss, grad)
    }

    /// One discriminator step then one generator step. `real` holds
    /// normalized goals with their labels.
    fn train_step(&mut self, real: &[(Vec<f64>, f64)], rng: &mut Rng) -> (f64, f64) {
        let m = self.config.minibatch;
        let batch: Vec<(Vec<f64>, f64)> = if real.len() <= m {
            real.to_vec()
        } else {
            (0..m).map(|_| real[rng.random_range(0..real.len())].clone()).collect()
        };
        let fake: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let z = self.sample_noise(rng);
                self.generator.forward(&z).expect("noise width")
            })
            .collect();
        let (d_loss, d_grad) = self.discriminator_loss_gradient(&self.discriminator, &batch, &fake, true);
        if d_grad.iter().all(|g| g.is_finite()) {
            let upd = self.d_opt.step(&d_grad);
            self.discriminator.add_scaled(&upd, 1.0);
        }
        let noise: Vec<Vec<f64>> = (0..m).map(|_| self.sample_noise(rng)).collect();
        let (g_loss, g_grad) = self.generator_loss_gradient(&self.generator, &noise, true);
        if g_grad.iter().all(|g| g.is_finite()) {
            let upd = self.g_opt.step(&g_grad);
            self.generator.add_scaled(&upd, 1.0);
        }
        (d_loss, g_loss)
    }

    /// Alternate `iterations` discriminator and generator steps on
    /// minibatches of `labeled`. Skips (and warns) when no goal is positive.
    pub fn train(&mut self, labeled: &[LabeledGoal], iterations: usize, rng: &mut Rng) -> GanTrainStats {
        if !labeled.iter().any(|l| l.label) {
            log::warn!("no positively labeled goals; skipping the generator update");
            return GanTrainStats {
                skipped: true,
                ..GanTrainStats::default()
            };
        }
        let real: Vec<(Vec<f64>, f64)> = labeled.iter().map(|l| (self.normalize(&l.goal), l.y())).collect();
        self.train_normalized(&real, iterations, rng)
    }

    fn train_normalized(&mut self, real: &[(Vec<f64>, f64)], iterations: usize, rng: &mut Rng) -> GanTrainStats {
        let mut stats = GanTrainStats::default();
        for _ in 0..iterations {
            let (d, g) = self.train_step(real, rng);
            stats.iterations += 1;
            stats.discriminator_loss = d;
            stats.generator_loss = g;
        }
        stats
    }

    /// Fit the generator to a set of goals, all treated as positives.
    pub fn fit_to_goals(&mut self, goals: &[Vec<f64>], iterations: usize, rng: &mut Rng) -> GanTrainStats {
        if goals.is_empty() {
            return GanTrainStats {
                skipped: true,
                ..GanTrainStats::default()
            };
        }
        let real: Vec<(Vec<f64>, f64)> = goals.iter().map(|g| (self.normalize(g), 1.0)).collect();
        self.train_normalized(&real, iterations, rng)
    }

    pub fn to_tensors(&self, list: &mut TensorList) {
        push_mlp(list, "generator", &self.generator);
        push_mlp(list, "discriminator", &self.discriminator);
    }

    /// Restore networks saved by [`GanPair::to_tensors`]; optimizer state
    /// starts fresh.
    pub fn from_tensors(list: &TensorList, config: GanConfig, bounds: &AxisBox) -> Result<Self> {
        let generator = read_mlp(list, "generator")?;
        let discriminator = read_mlp(list, "discriminator")?;
        let config = GanConfig {
            noise_dim: generator.input_dim(),
            ..config
        };
        Self::from_networks(config, bounds, generator, discriminator)
    }
}

use rand::seq::SliceRandom;

use crate::error::{check_len, Result};
use crate::nn::tensor_io::{push_mlp, read_mlp};
use crate::nn::{Activation, Adam, Mlp, TensorList};
use crate::rng::Rng;

/// State-value baseline: a tanh MLP over the policy observation plus the
/// fraction of the horizon already used, regressed on normalized targets.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction {
    pub net: Mlp,
    target_mean: f64,
    target_std: f64,
    optimizer: Adam,
}

pub const VALUE_LEARNING_RATE: f64 = 1e-3;
pub const VALUE_MINIBATCH: usize = 64;

impl ValueFunction {
    pub fn new(observation_dim: usize, hidden: &[usize], rng: &mut Rng) -> Self {
        let mut sizes = vec![observation_dim + 1];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let net = Mlp::new(&sizes, Activation::Tanh, Activation::Linear, rng);
        let optimizer = Adam::new(net.num_params(), VALUE_LEARNING_RATE);
        Self {
            net,
            target_mean: 0.0,
            target_std: 1.0,
            optimizer,
        }
    }

    /// Targets are regressed as `(y - mean) / std`.
    pub fn set_target_normalization(&mut self, mean: f64, std: f64) {
        self.target_mean = mean;
        self.target_std = std;
    }

    /// Width of the network input (observation plus time feature).
    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn write_input(observation: &[f64], time_fraction: f64, out: &mut [f64]) {
        let n = observation.len();
        out[..n].copy_from_slice(observation);
        out[n] = time_fraction;
    }

    /// Prediction for an already assembled input row.
    pub fn predict_input(&self, input: &[f64], trace: &mut [f64]) -> f64 {
        self.net.forward_into(input, trace);
        self.net.output_of(trace)[0] * self.target_std + self.target_mean
    }

    pub fn predict(&self, observation: &[f64], time_fraction: f64) -> Result<f64> {
        check_len("value observation", self.input_dim() - 1, observation.len())?;
        let mut input = vec![0.0; self.input_dim()];
        Self::write_input(observation, time_fraction, &mut input);
        let mut trace = vec![0.0; self.net.trace_len()];
        Ok(self.predict_input(&input, &mut trace))
    }

    /// Mean squared error on the normalized scale, the quantity minimized
    /// by [`ValueFunction::fit`].
    pub fn normalized_loss(&self, inputs: &[f64], targets: &[f64]) -> f64 {
        let w = self.input_dim();
        let mut trace = vec![0.0; self.net.trace_len()];
        let mut total = 0.0;
        for (row, &y) in inputs.chunks_exact(w).zip(targets) {
            self.net.forward_into(row, &mut trace);
            let e = self.net.output_of(&trace)[0] - (y - self.target_mean) / self.target_std;
            total += e * e;
        }
        total / targets.len().max(1) as f64
    }

    /// Gradient of [`ValueFunction::normalized_loss`] over the given rows.
    pub fn loss_gradient(&self, inputs: &[f64], targets: &[f64], rows: &[usize]) -> Vec<f64> {
        let w = self.input_dim();
        let mut grad = vec![0.0; self.net.num_params()];
        let mut trace = vec![0.0; self.net.trace_len()];
        let scale = 2.0 / rows.len().max(1) as f64;
        for &r in rows {
            self.net.forward_into(&inputs[r * w..(r + 1) * w], &mut trace);
            let e = self.net.output_of(&trace)[0] - (targets[r] - self.target_mean) / self.target_std;
            self.net.backward(&trace, &[scale * e], &mut grad, None);
        }
        grad
    }

    /// Re-center the target normalization on `targets`, then run `passes`
    /// shuffled minibatch epochs of Adam. `inputs` holds one row of width
    /// [`ValueFunction::input_dim`] per target.
    pub fn fit(&mut self, inputs: &[f64], targets: &[f64], passes: usize, rng: &mut Rng) {
        let n = targets.len();
        assert_eq!(inputs.len(), n * self.input_dim(), "value inputs");
        if n == 0 {
            return;
        }
        let mean = targets.iter().sum::<f64>() / n as f64;
        let var = targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n as f64;
        self.target_mean = mean;
        self.target_std = var.sqrt().max(1e-6);
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..passes {
            order.shuffle(rng);
            for rows in order.chunks(VALUE_MINIBATCH) {
                let grad = self.loss_gradient(inputs, targets, rows);
                if grad.iter().any(|g| !g.is_finite()) {
                    log::warn!("skipping non-finite value-function gradient");
                    continue;
                }
                let update = self.optimizer.step(&grad);
                self.net.add_scaled(&update, 1.0);
            }
        }
    }

    pub fn to_tensors(&self, list: &mut TensorList) {
        push_mlp(list, "value", &self.net);
        list.push("value.target_norm", vec![2], vec![self.target_mean, self.target_std]);
    }

    pub fn from_tensors(list: &TensorList) -> Result<Self> {
        let net = read_mlp(list, "value")?;
        let norm = list.get("value.target_norm").map(|t| t.data.clone()).unwrap_or(vec![0.0, 1.0]);
        check_len("value target normalization", 2, norm.len())?;
        let optimizer = Adam::new(net.num_params(), VALUE_LEARNING_RATE);
        Ok(Self {
            net,
            target_mean: norm[0],
            target_std: norm[1],
            optimizer,
        })
    }
}

use crate::error::{check_len, Result};
use crate::nn::tensor_io::{push_mlp, read_mlp};
use crate::nn::{self, Activation, GaussianHead, Mlp, TensorList};
use crate::rng::{standard_normal, Rng};

/// Goal-conditioned diagonal-Gaussian policy: a tanh MLP produces the mean,
/// the log standard deviation is a free per-dimension parameter.
///
/// Flat parameters are the network parameters followed by the log-std.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    /// Final layer is scaled by 0.01 so initial mean actions are near zero.
    pub fn new(input_dim: usize, action_dim: usize, hidden: &[usize], init_log_std: f64, rng: &mut Rng) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(action_dim);
        let mut net = Mlp::new(&sizes, Activation::Tanh, Activation::Linear, rng);
        net.scale_output_layer(0.01);
        Self {
            net,
            log_std: vec![init_log_std; action_dim],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params() + self.log_std.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.net.params();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        check_len("policy parameters", self.num_params(), flat.len())?;
        let n = self.net.num_params();
        self.net.set_params(&flat[..n])?;
        self.log_std.copy_from_slice(&flat[n..]);
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.net.is_finite() && self.log_std.iter().all(|v| v.is_finite())
    }

    pub fn head(&self, observation: &[f64]) -> Result<GaussianHead> {
        let mean = self.net.forward(observation)?;
        Ok(GaussianHead::new(mean, self.log_std.clone()))
    }

    /// Sample an action; `trace` is a scratch buffer of length
    /// `net.trace_len()`. Returns the log-probability of the sample.
    pub fn sample_into(&self, observation: &[f64], trace: &mut [f64], rng: &mut Rng, action: &mut [f64]) -> f64 {
        self.net.forward_into(observation, trace);
        let mean = self.net.output_of(trace);
        let mut lp = 0.0;
        for i in 0..action.len() {
            let eps = standard_normal(rng);
            action[i] = mean[i] + self.log_std[i].exp() * eps;
            lp += -0.5 * eps * eps - self.log_std[i] - 0.5 * (2.0 * std::f64::consts::PI).ln();
        }
        lp
    }

    /// Gradient of `log pi(action | observation)` with respect to the flat
    /// parameters.
    pub fn log_prob_gradient(&self, observation: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        check_len("action", self.action_dim(), action.len())?;
        let trace = self.net.trace(observation)?;
        let mean = self.net.output_of(trace.as_slice());
        let mut grad = vec![0.0; self.num_params()];
        let n = self.net.num_params();
        let mut d_mean = vec![0.0; self.action_dim()];
        for i in 0..self.action_dim() {
            let inv_var = (-2.0 * self.log_std[i]).exp();
            let diff = action[i] - mean[i];
            d_mean[i] = diff * inv_var;
            grad[n + i] = diff * diff * inv_var - 1.0;
        }
        self.net.backward(trace.as_slice(), &d_mean, &mut grad[..n], None);
        Ok(grad)
    }

    pub fn log_prob(&self, observation: &[f64], action: &[f64]) -> Result<f64> {
        let mean = self.net.forward(observation)?;
        Ok(nn::log_prob(&mean, &self.log_std, action))
    }

    pub fn to_tensors(&self, list: &mut TensorList) {
        push_mlp(list, "policy", &self.net);
        list.push("policy.log_std", vec![self.log_std.len()], self.log_std.clone());
    }

    pub fn from_tensors(list: &TensorList) -> Result<Self> {
        let net = read_mlp(list, "policy")?;
        let log_std = list
            .get("policy.log_std")
            .ok_or_else(|| crate::Error::TensorFormat {
                path: Default::default(),
                message: "missing policy.log_std".into(),
            })?
            .data
            .clone();
        check_len("policy log-std", net.output_dim(), log_std.len())?;
        Ok(Self { net, log_std })
    }
}

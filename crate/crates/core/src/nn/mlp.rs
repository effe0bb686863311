//! Dense feed-forward networks with hand-written reverse- and forward-mode
//! derivatives.
//!
//! Parameters of a network are addressed through one flat layout: for every
//! layer, the row-major weight matrix (`out x in`) followed by the bias.
//! Gradients, Adam moments, conjugate-gradient directions and checkpoint
//! tensors all use this layout.
//!
//! A [`Trace`] records the input and every layer output of one forward pass.
//! Backward passes and Jacobian-vector products read activation derivatives
//! from the recorded outputs, so a trace is all that needs caching per sample.

use rand::Rng as _;

use crate::error::{check_len, Error, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            // Through exp, which is about twice as fast as libm's tanh;
            // the absolute error stays at the 1e-16 level.
            Activation::Tanh => 1.0 - 2.0 / ((2.0 * z).exp() + 1.0),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            "linear" => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    in_dim: usize,
    out_dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Dense {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        check_len("dense weight", in_dim * out_dim, weight.len())?;
        check_len("dense bias", out_dim, bias.len())?;
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidArgument("dense layer with zero width".into()));
        }
        Ok(Self {
            in_dim,
            out_dim,
            weight,
            bias,
            activation,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Recorded activations of one forward pass (input first, output last).
#[derive(Clone, Debug, Default)]
pub struct Trace {
    buf: Vec<f64>,
}

impl Trace {
    pub fn as_slice(&self) -> &[f64] {
        &self.buf
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    // Start of each layer's output inside a trace; index 0 is the input.
    act_offsets: Vec<usize>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network without layers".into()));
        }
        for pair in layers.windows(2) {
            check_len("adjacent layer widths", pair[0].out_dim, pair[1].in_dim)?;
        }
        let mut act_offsets = Vec::with_capacity(layers.len() + 1);
        let mut offset = 0;
        act_offsets.push(0);
        offset += layers[0].in_dim;
        for layer in &layers {
            act_offsets.push(offset);
            offset += layer.out_dim;
        }
        Ok(Self {
            layers,
            act_offsets,
        })
    }

    /// Randomly initialized network with `sizes = [input, hidden..., output]`.
    ///
    /// Weights are drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, biases
    /// start at zero.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                let act = if l == last { output } else { hidden };
                Dense {
                    in_dim: fan_in,
                    out_dim: fan_out,
                    weight,
                    bias: vec![0.0; fan_out],
                    activation: act,
                }
            })
            .collect();
        Self::from_layers(layers).expect("sizes are conformable by construction")
    }

    pub fn zeros(sizes: &[usize], hidden: Activation, output: Activation) -> Self {
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(l, w)| Dense::zeros(w[0], w[1], if l == last { output } else { hidden }))
            .collect();
        Self::from_layers(layers).expect("sizes are conformable by construction")
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    /// Number of values a [`Trace`] of this network holds.
    pub fn trace_len(&self) -> usize {
        self.act_offsets[self.layers.len()] + self.output_dim()
    }

    /// Multiply the last layer's weights and bias by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let last = self.layers.last_mut().expect("non-empty");
        last.weight.iter_mut().for_each(|w| *w *= factor);
        last.bias.iter_mut().for_each(|b| *b *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weight);
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        check_len("flat parameter vector", self.num_params(), flat.len())?;
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weight.len();
            layer.weight.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    /// `params += scale * delta` in the flat layout.
    pub fn add_scaled(&mut self, delta: &[f64], scale: f64) {
        debug_assert_eq!(delta.len(), self.num_params());
        let mut offset = 0;
        for layer in &mut self.layers {
            for p in layer.weight.iter_mut().chain(layer.bias.iter_mut()) {
                *p += scale * delta[offset];
                offset += 1;
            }
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.input_dim(), input.len())?;
        let mut trace = vec![0.0; self.trace_len()];
        self.forward_into(input, &mut trace);
        Ok(self.output_of(&trace).to_vec())
    }

    /// Forward pass that records every activation into `trace`
    /// (length [`Mlp::trace_len`]). Panics on shape mismatch.
    pub fn forward_into(&self, input: &[f64], trace: &mut [f64]) {
        assert_eq!(input.len(), self.input_dim(), "network input width");
        assert_eq!(trace.len(), self.trace_len(), "trace buffer length");
        trace[..input.len()].copy_from_slice(input);
        for (l, layer) in self.layers.iter().enumerate() {
            let (before, after) = trace.split_at_mut(self.act_offsets[l + 1]);
            let x = &before[self.act_offsets[l]..self.act_offsets[l] + layer.in_dim];
            let y = &mut after[..layer.out_dim];
            for (j, yj) in y.iter_mut().enumerate() {
                let row = &layer.weight[j * layer.in_dim..(j + 1) * layer.in_dim];
                let z = layer.bias[j] + dot(row, x);
                *yj = layer.activation.apply(z);
            }
        }
    }

    pub fn trace(&self, input: &[f64]) -> Result<Trace> {
        check_len("network input", self.input_dim(), input.len())?;
        let mut buf = vec![0.0; self.trace_len()];
        self.forward_into(input, &mut buf);
        Ok(Trace { buf })
    }

    pub fn output_of<'a>(&self, trace: &'a [f64]) -> &'a [f64] {
        let start = self.act_offsets[self.layers.len()];
        &trace[start..start + self.output_dim()]
    }

    fn act<'a>(&self, trace: &'a [f64], index: usize) -> &'a [f64] {
        let width = if index == 0 {
            self.input_dim()
        } else {
            self.layers[index - 1].out_dim
        };
        &trace[self.act_offsets[index]..self.act_offsets[index] + width]
    }

    /// Reverse-mode pass: accumulates `d(output . output_grad)/d(params)`
    /// into `grad` (flat layout) and, when requested, writes the gradient
    /// with respect to the input into `input_grad`.
    pub fn backward(
        &self,
        trace: &[f64],
        output_grad: &[f64],
        grad: &mut [f64],
        input_grad: Option<&mut [f64]>,
    ) {
        assert_eq!(output_grad.len(), self.output_dim(), "output gradient width");
        assert_eq!(grad.len(), self.num_params(), "gradient buffer length");
        let want_input = input_grad.is_some();
        let mut delta = output_grad.to_vec();
        let mut offset = self.num_params();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let x = self.act(trace, l);
            let y = self.act(trace, l + 1);
            for (d, &yj) in delta.iter_mut().zip(y) {
                *d *= layer.activation.derivative_at_output(yj);
            }
            offset -= layer.num_params();
            let (gw, gb) = grad[offset..offset + layer.num_params()].split_at_mut(layer.weight.len());
            for (j, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, x, &mut gw[j * layer.in_dim..(j + 1) * layer.in_dim]);
                }
                gb[j] += d;
            }
            if l > 0 || want_input {
                let mut prev = vec![0.0; layer.in_dim];
                for (j, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, &layer.weight[j * layer.in_dim..(j + 1) * layer.in_dim], &mut prev);
                    }
                }
                delta = prev;
            }
        }
        if let Some(out) = input_grad {
            out.copy_from_slice(&delta);
        }
    }

    /// Forward-mode pass: directional derivative of the output along the
    /// flat parameter direction `direction`, evaluated at the traced input.
    pub fn jvp(&self, trace: &[f64], direction: &[f64]) -> Vec<f64> {
        assert_eq!(direction.len(), self.num_params(), "direction length");
        let mut tangent: Vec<f64> = Vec::new();
        let mut offset = 0;
        for (l, layer) in self.layers.iter().enumerate() {
            let x = self.act(trace, l);
            let y = self.act(trace, l + 1);
            let dw = &direction[offset..offset + layer.weight.len()];
            let db = &direction[offset + layer.weight.len()..offset + layer.num_params()];
            offset += layer.num_params();
            let next: Vec<f64> = (0..layer.out_dim)
                .map(|j| {
                    let range = j * layer.in_dim..(j + 1) * layer.in_dim;
                    let mut z = db[j] + dot(&dw[range.clone()], x);
                    if l > 0 {
                        z += dot(&layer.weight[range], &tangent);
                    }
                    z * layer.activation.derivative_at_output(y[j])
                })
                .collect();
            tangent = next;
        }
        tangent
    }

    /// Gradient of `output . output_grad` with respect to the input only.
    pub fn input_gradient(&self, trace: &[f64], output_grad: &[f64]) -> Vec<f64> {
        assert_eq!(output_grad.len(), self.output_dim(), "output gradient width");
        let mut delta = output_grad.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let y = self.act(trace, l + 1);
            for (d, &yj) in delta.iter_mut().zip(y) {
                *d *= layer.activation.derivative_at_output(yj);
            }
            let mut prev = vec![0.0; layer.in_dim];
            for (j, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, &layer.weight[j * layer.in_dim..(j + 1) * layer.in_dim], &mut prev);
                }
            }
            delta = prev;
        }
        delta
    }

    /// Signs of every rectified unit; used to detect finite-difference steps
    /// that cross a kink.
    pub fn relu_pattern(&self, trace: &[f64]) -> Vec<bool> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.activation == Activation::Relu {
                out.extend(self.act(trace, l + 1).iter().map(|&v| v > 0.0));
            }
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Eight independent accumulators let the compiler vectorize and hide
    // add latency without reassociating anything.
    let mut acc = [0.0f64; 8];
    let split = a.len() - a.len() % 8;
    let (ah, at) = a.split_at(split);
    let (bh, bt) = b.split_at(split);
    for (x, y) in ah.chunks_exact(8).zip(bh.chunks_exact(8)) {
        for j in 0..8 {
            acc[j] += x[j] * y[j];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in at.iter().zip(bt) {
        s += x * y;
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{SeedStreams, Stream};
    use approx::assert_relative_eq;

    fn rng() -> Rng {
        SeedStreams::new(11).stream(Stream::PolicyInit)
    }

    /// Independent forward pass written against the public layer accessors,
    /// without the trace machinery.
    fn reference_forward(net: &Mlp, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        for layer in net.layers() {
            let mut y = Vec::with_capacity(layer.out_dim());
            for j in 0..layer.out_dim() {
                let mut z = layer.bias()[j];
                for i in 0..layer.in_dim() {
                    z += layer.weight()[j * layer.in_dim() + i] * x[i];
                }
                y.push(match layer.activation() {
                    // Through exp, which is about twice as fast as libm's tanh;
            // the absolute error stays at the 1e-16 level.
            Activation::Tanh => 1.0 - 2.0 / ((2.0 * z).exp() + 1.0),
                    Activation::Relu => {
                        if z > 0.0 {
                            z
                        } else {
                            0.0
                        }
                    }
                    Activation::Linear => z,
                });
            }
            x = y;
        }
        x
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 5, 2], Activation::Tanh, Activation::Linear);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_linear_layer_passes_input_through() {
        let mut w = vec![0.0; 9];
        w[0] = 1.0;
        w[4] = 1.0;
        w[8] = 1.0;
        let layer = Dense::new(3, 3, w, vec![0.0; 3], Activation::Linear).unwrap();
        let net = Mlp::from_layers(vec![layer]).unwrap();
        let x = [0.25, -4.0, 7.5];
        assert_eq!(net.forward(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn policy_shaped_forward_matches_reference() {
        let mut r = rng();
        let net = Mlp::new(&[6, 32, 32, 2], Activation::Tanh, Activation::Linear, &mut r);
        let input = [0.3, -1.2, 0.05, 0.7, 4.0, -2.5];
        let fast = net.forward(&input).unwrap();
        let slow = reference_forward(&net, &input);
        for (a, b) in fast.iter().zip(&slow) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let net = Mlp::zeros(&[3, 2], Activation::Tanh, Activation::Linear);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape { .. })));
        let a = Dense::zeros(3, 4, Activation::Tanh);
        let b = Dense::zeros(5, 1, Activation::Linear);
        assert!(Mlp::from_layers(vec![a, b]).is_err());
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let mut r = rng();
        let net = Mlp::new(&[4, 8, 3], Activation::Relu, Activation::Linear, &mut r);
        let trace = net.trace(&[0.1, 0.2, -0.3, 0.4]).unwrap();
        let mut grad = vec![0.0; net.num_params()];
        net.backward(trace.as_slice(), &[0.0; 3], &mut grad, None);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn scalar_linear_layer_hand_derivative() {
        // y = w x + b at w = 3, b = -1, x = 2: dy/dw = x, dy/db = 1.
        let layer = Dense::new(1, 1, vec![3.0], vec![-1.0], Activation::Linear).unwrap();
        let net = Mlp::from_layers(vec![layer]).unwrap();
        let trace = net.trace(&[2.0]).unwrap();
        assert_eq!(net.output_of(trace.as_slice()), &[5.0]);
        let mut grad = vec![0.0; 2];
        let mut dx = [0.0];
        net.backward(trace.as_slice(), &[1.0], &mut grad, Some(&mut dx));
        assert_eq!(grad, vec![2.0, 1.0]);
        assert_eq!(dx, [3.0]);
    }

    #[test]
    fn jvp_agrees_with_backward_inner_product() {
        // <J v, u> == <v, J^T u> for any u, v.
        let mut r = rng();
        let net = Mlp::new(&[5, 16, 16, 3], Activation::Tanh, Activation::Linear, &mut r);
        let trace = net.trace(&[0.5, -0.1, 0.9, 2.0, -1.5]).unwrap();
        let v: Vec<f64> = (0..net.num_params()).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.1).collect();
        let u = [0.3, -0.7, 1.1];
        let jv = net.jvp(trace.as_slice(), &v);
        let mut jtu = vec![0.0; net.num_params()];
        net.backward(trace.as_slice(), &u, &mut jtu, None);
        let lhs: f64 = jv.iter().zip(&u).map(|(a, b)| a * b).sum();
        let rhs: f64 = jtu.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    #[test]
    fn input_gradient_matches_full_backward() {
        let mut r = rng();
        let net = Mlp::new(&[3, 8, 8, 2], Activation::Relu, Activation::Linear, &mut r);
        let trace = net.trace(&[0.2, -0.4, 1.3]).unwrap();
        let mut grad = vec![0.0; net.num_params()];
        let mut dx = vec![0.0; 3];
        net.backward(trace.as_slice(), &[0.5, -2.0], &mut grad, Some(&mut dx));
        assert_eq!(net.input_gradient(trace.as_slice(), &[0.5, -2.0]), dx);
    }

    #[test]
    fn flat_params_round_trip_and_add_scaled() {
        let mut r = rng();
        let mut net = Mlp::new(&[2, 3, 1], Activation::Tanh, Activation::Linear, &mut r);
        let p = net.params();
        assert_eq!(p.len(), 2 * 3 + 3 + 3 + 1);
        let ones = vec![1.0; p.len()];
        net.add_scaled(&ones, 0.5);
        let q = net.params();
        for (a, b) in p.iter().zip(&q) {
            assert_eq!(a + 0.5, *b);
        }
        net.set_params(&p).unwrap();
        assert_eq!(net.params(), p);
        assert!(net.set_params(&p[1..]).is_err());
    }

    #[test]
    fn scaled_output_layer_shrinks_outputs() {
        let mut r = rng();
        let mut net = Mlp::new(&[3, 8, 2], Activation::Tanh, Activation::Linear, &mut r);
        let before = net.forward(&[1.0, 2.0, 3.0]).unwrap();
        net.scale_output_layer(0.01);
        let after = net.forward(&[1.0, 2.0, 3.0]).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert_relative_eq!(a * 0.01, *b, max_relative = 1e-12);
        }
    }
}

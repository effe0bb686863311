use crate::nn::{axpy, dot};
use crate::policy_opt::{GaussianPolicy, RlConfig};

/// Flat on-policy samples for one policy step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolicyBatch {
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl PolicyBatch {
    pub fn len(&self) -> usize {
        self.advantages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advantages.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepStatus {
    Accepted,
    /// No backtracked step satisfied both the KL bound and improvement.
    LineSearchFailed,
    /// Policy gradient is exactly zero; nothing to do.
    ZeroGradient,
    /// Gradient or search direction was non-finite; update aborted.
    NonFinite,
    EmptyBatch,
}

impl StepStatus {
    pub fn name(self) -> &'static str {
        match self {
            StepStatus::Accepted => "accepted",
            StepStatus::LineSearchFailed => "line-search-failed",
            StepStatus::ZeroGradient => "zero-gradient",
            StepStatus::NonFinite => "non-finite",
            StepStatus::EmptyBatch => "empty-batch",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrpoStats {
    pub status: StepStatus,
    /// Mean KL(old || new) over the batch for the returned parameters.
    pub mean_kl: f64,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub backtracks: usize,
}

impl TrpoStats {
    pub fn improvement(&self) -> f64 {
        self.surrogate_after - self.surrogate_before
    }

    fn unchanged(status: StepStatus, surrogate: f64) -> Self {
        Self {
            status,
            mean_kl: 0.0,
            surrogate_before: surrogate,
            surrogate_after: surrogate,
            backtracks: 0,
        }
    }
}

/// Old-policy quantities cached once per update.
struct Snapshot {
    obs_dim: usize,
    act_dim: usize,
    trace_len: usize,
    traces: Vec<f64>,
    old_means: Vec<f64>,
    old_log_std: Vec<f64>,
    old_log_probs: Vec<f64>,
}

impl Snapshot {
    fn new(policy: &GaussianPolicy, batch: &PolicyBatch) -> Self {
        let n = batch.len();
        let obs_dim = policy.input_dim();
        let act_dim = policy.action_dim();
        let trace_len = policy.net.trace_len();
        let mut traces = vec![0.0; n * trace_len];
        let mut old_means = vec![0.0; n * act_dim];
        let mut old_log_probs = vec![0.0; n];
        for i in 0..n {
            let tr = &mut traces[i * trace_len..(i + 1) * trace_len];
            policy.net.forward_into(&batch.observations[i * obs_dim..(i + 1) * obs_dim], tr);
            let mean = policy.net.output_of(tr);
            old_means[i * act_dim..(i + 1) * act_dim].copy_from_slice(mean);
            old_log_probs[i] =
                crate::nn::log_prob(mean, &policy.log_std, &batch.actions[i * act_dim..(i + 1) * act_dim]);
        }
        Self {
            obs_dim,
            act_dim,
            trace_len,
            traces,
            old_means,
            old_log_std: policy.log_std.clone(),
            old_log_probs,
        }
    }

    fn trace(&self, i: usize) -> &[f64] {
        &self.traces[i * self.trace_len..(i + 1) * self.trace_len]
    }
}

/// Mean importance-weighted advantage and mean KL(old || candidate).
fn evaluate(candidate: &GaussianPolicy, batch: &PolicyBatch, snap: &Snapshot) -> (f64, f64) {
    let n = batch.len();
    let (o, a) = (snap.obs_dim, snap.act_dim);
    let mut trace = vec![0.0; snap.trace_len];
    let (mut surr, mut kl) = (0.0, 0.0);
    for i in 0..n {
        candidate.net.forward_into(&batch.observations[i * o..(i + 1) * o], &mut trace);
        let mean = candidate.net.output_of(&trace);
        let lp = crate::nn::log_prob(mean, &candidate.log_std, &batch.actions[i * a..(i + 1) * a]);
        surr += (lp - snap.old_log_probs[i]).exp() * batch.advantages[i];
        kl += crate::nn::kl(
            &snap.old_means[i * a..(i + 1) * a],
            &snap.old_log_std,
            mean,
            &candidate.log_std,
        );
    }
    (surr / n as f64, kl / n as f64)
}

/// Gradient of the surrogate at the old parameters.
fn surrogate_gradient(policy: &GaussianPolicy, batch: &PolicyBatch, snap: &Snapshot) -> Vec<f64> {
    let n = batch.len();
    let a = snap.act_dim;
    let n_net = policy.net.num_params();
    let mut grad = vec![0.0; policy.num_params()];
    let inv_var: Vec<f64> = policy.log_std.iter().map(|s| (-2.0 * s).exp()).collect();
    let mut d_mean = vec![0.0; a];
    let w = 1.0 / n as f64;
    for i in 0..n {
        let adv = batch.advantages[i] * w;
        if adv == 0.0 {
            continue;
        }
        for k in 0..a {
            let diff = batch.actions[i * a + k] - snap.old_means[i * a + k];
            d_mean[k] = adv * diff * inv_var[k];
            grad[n_net + k] += adv * (diff * diff * inv_var[k] - 1.0);
        }
        let (net_grad, _) = grad.split_at_mut(n_net);
        policy.net.backward(snap.trace(i), &d_mean, net_grad, None);
    }
    grad
}

/// Product of the mean-KL Hessian (Fisher matrix) with `v`, estimated on
/// every `stride`-th sample, plus `damping * v`.
fn fisher_vector_product(policy: &GaussianPolicy, snap: &Snapshot, n: usize, stride: usize, damping: f64, v: &[f64]) -> Vec<f64> {
    let n_net = policy.net.num_params();
    let a = snap.act_dim;
    let mut out = vec![0.0; v.len()];
    let inv_var: Vec<f64> = policy.log_std.iter().map(|s| (-2.0 * s).exp()).collect();
    let rows: Vec<usize> = (0..n).step_by(stride.max(1)).collect();
    let w = 1.0 / rows.len() as f64;
    let mut u = vec![0.0; a];
    for &i in &rows {
        let tr = snap.trace(i);
        let jv = policy.net.jvp(tr, &v[..n_net]);
        for k in 0..a {
            u[k] = w * jv[k] * inv_var[k];
        }
        policy.net.backward(tr, &u, &mut out[..n_net], None);
    }
    // The Fisher block of a log standard deviation is the constant 2.
    for k in 0..a {
        out[n_net + k] = 2.0 * v[n_net + k];
    }
    axpy(damping, v, &mut out);
    out
}

/// Solve `A x = b` for symmetric positive definite `A`.
pub fn conjugate_gradient<F>(mut apply: F, b: &[f64], iterations: usize) -> Vec<f64>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let mut x = vec![0.0; b.len()];
    let mut r = b.to_vec();
    let mut p = b.to_vec();
    let mut rr = dot(&r, &r);
    for _ in 0..iterations {
        if rr < 1e-20 {
            break;
        }
        let ap = apply(&p);
        let alpha = rr / dot(&p, &ap);
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    x
}

/// One trust-region step on `policy`. Leaves the parameters untouched
/// unless a step is accepted.
pub fn trpo_update(policy: &mut GaussianPolicy, batch: &PolicyBatch, rl: &RlConfig) -> TrpoStats {
    let n = batch.len();
    if n == 0 {
        return TrpoStats::unchanged(StepStatus::EmptyBatch, 0.0);
    }
    let snap = Snapshot::new(policy, batch);
    let (surr_before, _) = evaluate(policy, batch, &snap);
    let g = surrogate_gradient(policy, batch, &snap);
    if g.iter().any(|v| !v.is_finite()) || !surr_before.is_finite() {
        log::warn!("non-finite policy gradient; keeping old parameters");
        return TrpoStats::unchanged(StepStatus::NonFinite, surr_before);
    }
    if g.iter().all(|&v| v == 0.0) {
        return TrpoStats::unchanged(StepStatus::ZeroGradient, surr_before);
    }
    let fvp = |v: &[f64]| fisher_vector_product(policy, &snap, n, rl.fisher_stride, rl.cg_damping, v);
    let dir = conjugate_gradient(fvp, &g, rl.cg_iterations);
    let shs = dot(&dir, &fisher_vector_product(policy, &snap, n, rl.fisher_stride, rl.cg_damping, &dir));
    if !shs.is_finite() || shs <= 0.0 || dir.iter().any(|v| !v.is_finite()) {
        log::warn!("degenerate search direction (sHs = {shs}); keeping old parameters");
        return TrpoStats::unchanged(StepStatus::NonFinite, surr_before);
    }
    let full_scale = (2.0 * rl.max_kl / shs).sqrt();
    let old = policy.params();
    let mut candidate = policy.clone();
    let mut trial = vec![0.0; old.len()];
    let mut frac = 1.0;
    for backtracks in 0..=rl.max_backtracks {
        for ((t, o), d) in trial.iter_mut().zip(&old).zip(&dir) {
            *t = o + frac * full_scale * d;
        }
        candidate.set_params(&trial).expect("same shape");
        let (surr, kl) = evaluate(&candidate, batch, &snap);
        if surr.is_finite() && kl.is_finite() && kl <= rl.max_kl && surr > surr_before {
            *policy = candidate;
            return TrpoStats {
                status: StepStatus::Accepted,
                mean_kl: kl,
                surrogate_before: surr_before,
                surrogate_after: surr,
                backtracks,
            };
        }
        frac *= rl.backtrack_ratio;
    }
    TrpoStats {
        backtracks: rl.max_backtracks,
        ..TrpoStats::unchanged(StepStatus::LineSearchFailed, surr_before)
    }
}

//! Shared policy/value network with exact analytic gradients.
//!
//! Three per-unit-group encoders (presence / positions / speeds) feed a
//! 128-unit trunk consumed by a masked-softmax actor head and a scalar
//! critic head. One parameter set serves every agent. Backprop is written
//! out by hand; a finite-difference oracle in the tests checks every layer.

pub mod checkpoint;

use rand::Rng;

use crate::env::{ActionMask, Observation, OBS_ROWS};
use crate::dynamics::N_ACTIONS;

pub const PRESENT_DIM: usize = OBS_ROWS;
pub const POSITION_DIM: usize = 2 * OBS_ROWS;
pub const SPEED_DIM: usize = 2 * OBS_ROWS;
pub const ENCODER_DIM: usize = 64;
pub const TRUNK_DIM: usize = 128;
const CONCAT_DIM: usize = 3 * ENCODER_DIM;

/// Logit offset applied to masked actions before the softmax.
pub const MASK_LOGIT: f64 = -1e8;

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("action mask allows no action")]
    AllMasked,
    #[error("non-finite loss at batch index {0}")]
    NonFiniteLoss(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            w: vec![0.0; in_dim * out_dim],
            b: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut l = Self::zeros(in_dim, out_dim);
        for w in l.w.iter_mut() {
            *w = rng.gen_range(-bound..bound);
        }
        l
    }

    fn forward(&self, x: &[f64], y: &mut [f64]) {
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            y[o] = self.b[o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
    }

    /// Accumulate parameter gradients and return the input gradient.
    fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Linear, dx: &mut [f64]) {
        for o in 0..self.out_dim {
            let g = dy[o];
            if g == 0.0 {
                continue;
            }
            grad.b[o] += g;
            let grow = &mut grad.w[o * self.in_dim..(o + 1) * self.in_dim];
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] += g * x[i];
                dx[i] += row[i] * g;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub enc_present: Linear,
    pub enc_position: Linear,
    pub enc_speed: Linear,
    pub trunk: Linear,
    pub actor: Linear,
    pub critic: Linear,
}

impl NetworkParams {
    pub fn init(rng: &mut impl Rng) -> Self {
        Self {
            enc_present: Linear::init(PRESENT_DIM, ENCODER_DIM, rng),
            enc_position: Linear::init(POSITION_DIM, ENCODER_DIM, rng),
            enc_speed: Linear::init(SPEED_DIM, ENCODER_DIM, rng),
            trunk: Linear::init(CONCAT_DIM, TRUNK_DIM, rng),
            actor: Linear::init(TRUNK_DIM, N_ACTIONS, rng),
            critic: Linear::init(TRUNK_DIM, 1, rng),
        }
    }

    pub fn zeros() -> Self {
        Self {
            enc_present: Linear::zeros(PRESENT_DIM, ENCODER_DIM),
            enc_position: Linear::zeros(POSITION_DIM, ENCODER_DIM),
            enc_speed: Linear::zeros(SPEED_DIM, ENCODER_DIM),
            trunk: Linear::zeros(CONCAT_DIM, TRUNK_DIM),
            actor: Linear::zeros(TRUNK_DIM, N_ACTIONS),
            critic: Linear::zeros(TRUNK_DIM, 1),
        }
    }

    /// Named flat views over every parameter tensor, in a fixed order shared
    /// by the optimizer and the checkpoint format.
    pub fn tensors(&self) -> Vec<(&'static str, &Vec<f64>)> {
        vec![
            ("enc_present.w", &self.enc_present.w),
            ("enc_present.b", &self.enc_present.b),
            ("enc_position.w", &self.enc_position.w),
            ("enc_position.b", &self.enc_position.b),
            ("enc_speed.w", &self.enc_speed.w),
            ("enc_speed.b", &self.enc_speed.b),
            ("trunk.w", &self.trunk.w),
            ("trunk.b", &self.trunk.b),
            ("actor.w", &self.actor.w),
            ("actor.b", &self.actor.b),
            ("critic.w", &self.critic.w),
            ("critic.b", &self.critic.b),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Vec<f64>)> {
        vec![
            ("enc_present.w", &mut self.enc_present.w),
            ("enc_present.b", &mut self.enc_present.b),
            ("enc_position.w", &mut self.enc_position.w),
            ("enc_position.b", &mut self.enc_position.b),
            ("enc_speed.w", &mut self.enc_speed.w),
            ("enc_speed.b", &mut self.enc_speed.b),
            ("trunk.w", &mut self.trunk.w),
            ("trunk.b", &mut self.trunk.b),
            ("actor.w", &mut self.actor.w),
            ("actor.b", &mut self.actor.b),
            ("critic.w", &mut self.critic.w),
            ("critic.b", &mut self.critic.b),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    x_present: [f64; PRESENT_DIM],
    x_position: [f64; POSITION_DIM],
    x_speed: [f64; SPEED_DIM],
    h_present: [f64; ENCODER_DIM],
    h_position: [f64; ENCODER_DIM],
    h_speed: [f64; ENCODER_DIM],
    concat: [f64; CONCAT_DIM],
    h_trunk: [f64; TRUNK_DIM],
    pub probs: [f64; N_ACTIONS],
    pub log_probs: [f64; N_ACTIONS],
    pub value: f64,
    mask: ActionMask,
}

fn relu_inplace(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Masked forward pass: action probabilities, state value, and the cache.
pub fn forward(
    params: &NetworkParams,
    obs: &Observation,
    mask: &ActionMask,
) -> Result<([f64; N_ACTIONS], f64, ForwardCache), NeuralError> {
    if !mask.0.iter().any(|&m| m) {
        return Err(NeuralError::AllMasked);
    }

    let (x_present, x_position, x_speed) = obs.feature_groups();

    let mut h_present = [0.0; ENCODER_DIM];
    let mut h_position = [0.0; ENCODER_DIM];
    let mut h_speed = [0.0; ENCODER_DIM];
    params.enc_present.forward(&x_present, &mut h_present);
    params.enc_position.forward(&x_position, &mut h_position);
    params.enc_speed.forward(&x_speed, &mut h_speed);
    relu_inplace(&mut h_present);
    relu_inplace(&mut h_position);
    relu_inplace(&mut h_speed);

    let mut concat = [0.0; CONCAT_DIM];
    concat[..ENCODER_DIM].copy_from_slice(&h_present);
    concat[ENCODER_DIM..2 * ENCODER_DIM].copy_from_slice(&h_position);
    concat[2 * ENCODER_DIM..].copy_from_slice(&h_speed);

    let mut h_trunk = [0.0; TRUNK_DIM];
    params.trunk.forward(&concat, &mut h_trunk);
    relu_inplace(&mut h_trunk);

    let mut logits = [0.0; N_ACTIONS];
    params.actor.forward(&h_trunk, &mut logits);
    for (l, &m) in logits.iter_mut().zip(mask.0.iter()) {
        if !m {
            *l += MASK_LOGIT;
        }
    }

    // Stable masked softmax with log-probabilities.
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs = [0.0; N_ACTIONS];
    let mut sum = 0.0;
    for (p, &l) in probs.iter_mut().zip(logits.iter()) {
        *p = (l - max).exp();
        sum += *p;
    }
    let log_sum = sum.ln();
    let mut log_probs = [0.0; N_ACTIONS];
    for i in 0..N_ACTIONS {
        probs[i] /= sum;
        log_probs[i] = logits[i] - max - log_sum;
    }

    let mut value_out = [0.0; 1];
    params.critic.forward(&h_trunk, &mut value_out);
    let value = value_out[0];

    let cache = ForwardCache {
        x_present,
        x_position,
        x_speed,
        h_present,
        h_position,
        h_speed,
        concat,
        h_trunk,
        probs,
        log_probs,
        value,
        mask: *mask,
    };
    Ok((probs, value, cache))
}

/// One transition prepared for the combined actor-critic loss. The advantage
/// and value target are constants w.r.t. the parameters.
#[derive(Debug, Clone, Copy)]
pub struct LossSample {
    pub observation: Observation,
    pub mask: ActionMask,
    pub action: usize,
    pub advantage: f64,
    pub value_target: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

/// Mean combined loss over the batch and its exact gradients:
/// `-mean(log pi(a|s) * A) + beta1 * mean((target - V)^2) - beta2 * mean(H)`.
pub fn loss_and_gradients(
    params: &NetworkParams,
    batch: &[LossSample],
    beta1: f64,
    beta2: f64,
) -> Result<(LossBreakdown, NetworkParams), NeuralError> {
    assert!(!batch.is_empty(), "empty batch");
    let mut grads = NetworkParams::zeros();
    let mut loss = LossBreakdown::default();
    let inv_b = 1.0 / batch.len() as f64;

    for (idx, sample) in batch.iter().enumerate() {
        let (probs, value, cache) = forward(params, &sample.observation, &sample.mask)?;

        // Entropy over valid actions only; masked entries have p = 0 exactly.
        let entropy: f64 = (0..N_ACTIONS)
            .filter(|&i| sample.mask.0[i] && probs[i] > 0.0)
            .map(|i| -probs[i] * cache.log_probs[i])
            .sum();

        let policy_term = -cache.log_probs[sample.action] * sample.advantage;
        let value_err = value - sample.value_target;
        let value_term = value_err * value_err;

        let contribution =
            inv_b * (policy_term + beta1 * value_term - beta2 * entropy);
        if !contribution.is_finite() {
            return Err(NeuralError::NonFiniteLoss(idx));
        }
        loss.policy += inv_b * policy_term;
        loss.value += inv_b * value_term;
        loss.entropy += inv_b * entropy;
        loss.total += contribution;

        // d loss / d logits.
        let mut dlogits = [0.0; N_ACTIONS];
        for i in 0..N_ACTIONS {
            let indicator = if i == sample.action { 1.0 } else { 0.0 };
            let p = probs[i];
            let policy_g = -sample.advantage * (indicator - p);
            let entropy_g = if sample.mask.0[i] && p > 0.0 {
                // dH/dl_i = -p_i (log p_i + H)
                -p * (cache.log_probs[i] + entropy)
            } else {
                0.0
            };
            dlogits[i] = inv_b * (policy_g - beta2 * entropy_g);
        }
        let dvalue = inv_b * beta1 * 2.0 * value_err;

        backward(params, &cache, &dlogits, dvalue, &mut grads);
    }

    Ok((loss, grads))
}

fn backward(
    params: &NetworkParams,
    cache: &ForwardCache,
    dlogits: &[f64; N_ACTIONS],
    dvalue: f64,
    grads: &mut NetworkParams,
) {
    let mut dh_trunk = [0.0; TRUNK_DIM];
    params
        .actor
        .backward(&cache.h_trunk, dlogits, &mut grads.actor, &mut dh_trunk);
    params
        .critic
        .backward(&cache.h_trunk, &[dvalue], &mut grads.critic, &mut dh_trunk);

    for i in 0..TRUNK_DIM {
        if cache.h_trunk[i] <= 0.0 {
            dh_trunk[i] = 0.0;
        }
    }

    let mut dconcat = [0.0; CONCAT_DIM];
    params
        .trunk
        .backward(&cache.concat, &dh_trunk, &mut grads.trunk, &mut dconcat);

    let mut dh = [[0.0; ENCODER_DIM]; 3];
    for g in 0..3 {
        let src = &dconcat[g * ENCODER_DIM..(g + 1) * ENCODER_DIM];
        let act = match g {
            0 => &cache.h_present,
            1 => &cache.h_position,
            _ => &cache.h_speed,
        };
        for i in 0..ENCODER_DIM {
            dh[g][i] = if act[i] > 0.0 { src[i] } else { 0.0 };
        }
    }

    let mut sink_p = [0.0; PRESENT_DIM];
    let mut sink_x = [0.0; POSITION_DIM];
    let mut sink_v = [0.0; SPEED_DIM];
    params
        .enc_present
        .backward(&cache.x_present, &dh[0], &mut grads.enc_present, &mut sink_p);
    params
        .enc_position
        .backward(&cache.x_position, &dh[1], &mut grads.enc_position, &mut sink_x);
    params
        .enc_speed
        .backward(&cache.x_speed, &dh[2], &mut grads.enc_speed, &mut sink_v);

    let _ = cache.mask;
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
pub const GRAD_CLIP_NORM: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub first_moment: NetworkParams,
    pub second_moment: NetworkParams,
    pub step: u64,
}

impl OptimizerState {
    pub fn new() -> Self {
        Self {
            first_moment: NetworkParams::zeros(),
            second_moment: NetworkParams::zeros(),
            step: 0,
        }
    }
}

impl Default for OptimizerState {
    fn default() -> Self {
        Self::new()
    }
}

pub fn global_grad_norm(grads: &NetworkParams) -> f64 {
    grads
        .tensors()
        .iter()
        .flat_map(|(_, t)| t.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Adam update after global-norm gradient clipping.
pub fn optimizer_step(
    opt: &mut OptimizerState,
    params: &mut NetworkParams,
    grads: &NetworkParams,
    lr: f64,
) {
    let norm = global_grad_norm(grads);
    let scale = if norm > GRAD_CLIP_NORM {
        GRAD_CLIP_NORM / norm
    } else {
        1.0
    };

    opt.step += 1;
    let t = opt.step as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);

    let mut p = params.tensors_mut();
    let g = grads.tensors();
    let mut m = opt.first_moment.tensors_mut();
    let mut v = opt.second_moment.tensors_mut();
    for k in 0..p.len() {
        let pt = &mut p[k].1;
        let gt = g[k].1;
        let mt = &mut m[k].1;
        let vt = &mut v[k].1;
        for i in 0..pt.len() {
            let grad = gt[i] * scale;
            mt[i] = ADAM_BETA1 * mt[i] + (1.0 - ADAM_BETA1) * grad;
            vt[i] = ADAM_BETA2 * vt[i] + (1.0 - ADAM_BETA2) * grad * grad;
            let m_hat = mt[i] / bc1;
            let v_hat = vt[i] / bc2;
            pt[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

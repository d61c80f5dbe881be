//! Soft actor-critic agent: squashed-Gaussian actor, twin Q critics with
//! soft-updated targets, uniform replay, and automatic entropy-temperature
//! tuning. All gradients are computed by hand through the `nn` kernel.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CheckpointError, ConfigError, SacError};
use crate::nn::{self, AdamState, Gradients, Mlp, ScalarAdam};
use crate::sim::{ActionCommand, StackedObservation, ACTION_DIM, STACKED_OBS_DIM};

const LN_2PI: f64 = 1.8378770664093453; // ln(2 * pi)
/// Added inside the tanh-correction logarithm for numerical stability.
pub const SQUASH_EPS: f64 = 1e-6;

const CKPT_MAGIC: &[u8; 5] = b"WGCKP";
const CKPT_VERSION: u8 = 1;

/// Agent hyperparameters. Defaults follow the training setup: gamma 0.98,
/// learning rate 1e-4 and initial temperature 0.5, with standard values for
/// everything the setup leaves open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub gamma: f64,
    /// Shared Adam learning rate for the actor, critics and temperature.
    pub learning_rate: f64,
    pub initial_alpha: f64,
    /// Soft-update coefficient for the target critics.
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Entropy level the temperature is tuned toward (-1 per action dim).
    pub target_entropy: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            gamma: 0.98,
            learning_rate: 1e-4,
            initial_alpha: 0.5,
            tau: 0.005,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            target_entropy: -(ACTION_DIM as f64),
            actor_hidden: vec![256, 256],
            critic_hidden: vec![256, 256, 256],
            log_std_min: -20.0,
            log_std_max: 2.0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(ConfigError::invalid("gamma", "must lie in (0, 1]"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ConfigError::invalid("learning_rate", "must be positive"));
        }
        if !(self.initial_alpha.is_finite() && self.initial_alpha > 0.0) {
            return Err(ConfigError::invalid("initial_alpha", "must be positive"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(ConfigError::invalid("tau", "must lie in (0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(ConfigError::invalid("batch_size", "must be at least 1"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(ConfigError::invalid(
                "buffer_capacity",
                "must hold at least one batch",
            ));
        }
        if self.actor_hidden.is_empty() || self.actor_hidden.contains(&0) {
            return Err(ConfigError::invalid(
                "actor_hidden",
                "must list positive layer widths",
            ));
        }
        if self.critic_hidden.is_empty() || self.critic_hidden.contains(&0) {
            return Err(ConfigError::invalid(
                "critic_hidden",
                "must list positive layer widths",
            ));
        }
        if !self.log_std_min.is_finite()
            || !self.log_std_max.is_finite()
            || self.log_std_min > self.log_std_max
        {
            return Err(ConfigError::invalid(
                "log_std_min",
                "must be finite and not exceed log_std_max",
            ));
        }
        if !self.target_entropy.is_finite() {
            return Err(ConfigError::invalid("target_entropy", "must be finite"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Replay buffer
// ---------------------------------------------------------------------------

/// Uniform ring replay buffer (structure-of-arrays). At capacity the oldest
/// transition is overwritten. `done` is stored true only for success
/// termination, never for time truncation, so the two bootstrap differently.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    obs_dim: usize,
    act_dim: usize,
    capacity: usize,
    obs: Vec<f64>,
    act: Vec<f64>,
    rew: Vec<f64>,
    next_obs: Vec<f64>,
    done: Vec<bool>,
    next: usize,
    len: usize,
}

/// A sampled minibatch in dense form.
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    /// 1.0 for success termination, else 0.0.
    pub done: Array1<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0 && obs_dim > 0 && act_dim > 0);
        ReplayBuffer {
            obs_dim,
            act_dim,
            capacity,
            obs: Vec::new(),
            act: Vec::new(),
            rew: Vec::new(),
            next_obs: Vec::new(),
            done: Vec::new(),
            next: 0,
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, obs: &[f64], action: &[f64], reward: f64, next_obs: &[f64], done: bool) {
        assert_eq!(obs.len(), self.obs_dim);
        assert_eq!(next_obs.len(), self.obs_dim);
        assert_eq!(action.len(), self.act_dim);
        if self.len < self.capacity {
            self.obs.extend_from_slice(obs);
            self.act.extend_from_slice(action);
            self.rew.push(reward);
            self.next_obs.extend_from_slice(next_obs);
            self.done.push(done);
            self.len += 1;
        } else {
            let o = self.next * self.obs_dim;
            self.obs[o..o + self.obs_dim].copy_from_slice(obs);
            self.next_obs[o..o + self.obs_dim].copy_from_slice(next_obs);
            let a = self.next * self.act_dim;
            self.act[a..a + self.act_dim].copy_from_slice(action);
            self.rew[self.next] = reward;
            self.done[self.next] = done;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Convenience wrapper over [`ReplayBuffer::push`] for the environment's
    /// transition types.
    pub fn push_transition(
        &mut self,
        obs: &StackedObservation,
        action: &ActionCommand,
        reward: f64,
        next_obs: &StackedObservation,
        done: bool,
    ) {
        self.push(
            &obs.to_array(),
            &action.to_array(),
            reward,
            &next_obs.to_array(),
            done,
        );
    }

    /// Uniform sample of `n` transitions with replacement from the filled
    /// region.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Batch {
        assert!(self.len > 0, "sampling from an empty buffer");
        let mut obs = Array2::zeros((n, self.obs_dim));
        let mut actions = Array2::zeros((n, self.act_dim));
        let mut rewards = Array1::zeros(n);
        let mut next_obs = Array2::zeros((n, self.obs_dim));
        let mut done = Array1::zeros(n);
        for row in 0..n {
            let idx = rng.random_range(0..self.len);
            let o = idx * self.obs_dim;
            obs.row_mut(row)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&self.obs[o..o + self.obs_dim]);
            next_obs
                .row_mut(row)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&self.next_obs[o..o + self.obs_dim]);
            let a = idx * self.act_dim;
            actions
                .row_mut(row)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&self.act[a..a + self.act_dim]);
            rewards[row] = self.rew[idx];
            done[row] = if self.done[idx] { 1.0 } else { 0.0 };
        }
        Batch {
            obs,
            actions,
            rewards,
            next_obs,
            done,
        }
    }

    #[cfg(test)]
    fn stored_rewards(&self) -> &[f64] {
        &self.rew
    }
}

// ---------------------------------------------------------------------------
// Agent
// ---------------------------------------------------------------------------

/// How `select_action` turns the policy distribution into a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    /// Sample `u ~ N(mean, std)` and return `tanh(u)`.
    Stochastic,
    /// Return `tanh(mean)`.
    Deterministic,
}

/// Losses reported by one update step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossReport {
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub actor_loss: f64,
    pub alpha_loss: f64,
    pub alpha: f64,
}

/// The agent. The actor maps a stacked observation to per-dimension mean and
/// log-std (output width `2 * action_dim`); critics score `[obs, action]`
/// pairs; target critics trail the online ones by tau-blending.
#[derive(Debug, Clone)]
pub struct SacAgent {
    config: SacConfig,
    obs_dim: usize,
    action_dim: usize,
    actor: Mlp,
    q1: Mlp,
    q2: Mlp,
    q1_target: Mlp,
    q2_target: Mlp,
    actor_opt: AdamState,
    q1_opt: AdamState,
    q2_opt: AdamState,
    log_alpha: f64,
    alpha_opt: ScalarAdam,
}

/// Batched policy head evaluation with everything the update needs.
pub(crate) struct PolicyBatch {
    pub log_std_raw: Array2<f64>,
    pub std: Array2<f64>,
    pub noise: Array2<f64>,
    pub action: Array2<f64>,
    pub log_prob: Array1<f64>,
    pub trace: Option<nn::ForwardTrace>,
}

impl SacAgent {
    /// Agent for the grasping task: 30-dim stacked observations, 5-dim
    /// actions, critic input 35.
    pub fn new(config: SacConfig, rng: &mut ChaCha8Rng) -> Result<Self, ConfigError> {
        Self::with_dims(config, STACKED_OBS_DIM, ACTION_DIM, rng)
    }

    /// Agent over arbitrary observation/action dimensions.
    pub fn with_dims(
        config: SacConfig,
        obs_dim: usize,
        action_dim: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut actor_widths = vec![obs_dim];
        actor_widths.extend_from_slice(&config.actor_hidden);
        actor_widths.push(2 * action_dim);
        let mut critic_widths = vec![obs_dim + action_dim];
        critic_widths.extend_from_slice(&config.critic_hidden);
        critic_widths.push(1);

        // Draw order is fixed: actor, q1, q2. Targets start as exact copies.
        let actor = Mlp::new(&actor_widths, rng);
        let q1 = Mlp::new(&critic_widths, rng);
        let q2 = Mlp::new(&critic_widths, rng);
        let q1_target = q1.clone();
        let q2_target = q2.clone();

        let lr = config.learning_rate;
        Ok(SacAgent {
            actor_opt: AdamState::new(&actor, lr),
            q1_opt: AdamState::new(&q1, lr),
            q2_opt: AdamState::new(&q2, lr),
            alpha_opt: ScalarAdam::new(lr),
            log_alpha: config.initial_alpha.ln(),
            actor,
            q1,
            q2,
            q1_target,
            q2_target,
            obs_dim,
            action_dim,
            config,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.config
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn log_alpha(&self) -> f64 {
        self.log_alpha
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn q1(&self) -> &Mlp {
        &self.q1
    }

    pub fn q2(&self) -> &Mlp {
        &self.q2
    }

    pub fn q1_target(&self) -> &Mlp {
        &self.q1_target
    }

    pub fn q2_target(&self) -> &Mlp {
        &self.q2_target
    }

    #[cfg(test)]
    pub(crate) fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    #[cfg(test)]
    pub(crate) fn set_log_alpha(&mut self, v: f64) {
        self.log_alpha = v;
    }

    fn check_finite(obs: &[f64]) -> Result<(), SacError> {
        if obs.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(SacError::NonFiniteObservation)
        }
    }

    fn head_split(&self, out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mean = out[..self.action_dim].to_vec();
        let log_std = out[self.action_dim..]
            .iter()
            .map(|&v| v.clamp(self.config.log_std_min, self.config.log_std_max))
            .collect();
        (mean, log_std)
    }

    /// Action in `(-1, 1)^action_dim`, sampled or deterministic.
    pub fn select_action_raw(
        &self,
        obs: &[f64],
        mode: ActionMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>, SacError> {
        Self::check_finite(obs)?;
        assert_eq!(obs.len(), self.obs_dim, "observation length mismatch");
        let out = self.actor.forward(obs);
        let (mean, log_std) = self.head_split(&out);
        let action = match mode {
            ActionMode::Deterministic => mean.iter().map(|m| m.tanh()).collect(),
            ActionMode::Stochastic => mean
                .iter()
                .zip(&log_std)
                .map(|(m, ls)| {
                    let eps: f64 = rng.sample(StandardNormal);
                    (m + ls.exp() * eps).tanh()
                })
                .collect(),
        };
        Ok(action)
    }

    /// Typed wrapper for the grasping dimensions.
    pub fn select_action(
        &self,
        obs: &StackedObservation,
        mode: ActionMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<ActionCommand, SacError> {
        assert_eq!(self.action_dim, ACTION_DIM);
        let a = self.select_action_raw(&obs.to_array(), mode, rng)?;
        Ok(ActionCommand::from_array([a[0], a[1], a[2], a[3], a[4]]))
    }

    /// Deterministic (mean) action without consuming randomness.
    pub fn deterministic_action(&self, obs: &StackedObservation) -> Result<ActionCommand, SacError> {
        assert_eq!(self.action_dim, ACTION_DIM);
        let flat = obs.to_array();
        Self::check_finite(&flat)?;
        let out = self.actor.forward(&flat);
        let (mean, _) = self.head_split(&out);
        Ok(ActionCommand::from_array([
            mean[0].tanh(),
            mean[1].tanh(),
            mean[2].tanh(),
            mean[3].tanh(),
            mean[4].tanh(),
        ]))
    }

    /// Log-density of the squashed policy at pre-squash point `u`:
    /// the diagonal-Gaussian log-density minus the tanh volume correction
    /// `sum_i ln(1 - tanh(u_i)^2 + eps)`.
    pub fn log_prob(&self, obs: &[f64], u: &[f64]) -> f64 {
        assert_eq!(obs.len(), self.obs_dim);
        assert_eq!(u.len(), self.action_dim);
        let out = self.actor.forward(obs);
        let (mean, log_std) = self.head_split(&out);
        let mut lp = 0.0;
        for j in 0..self.action_dim {
            let std = log_std[j].exp();
            let z = (u[j] - mean[j]) / std;
            lp += -log_std[j] - 0.5 * z * z - 0.5 * LN_2PI;
            let th = u[j].tanh();
            lp -= (1.0 - th * th + SQUASH_EPS).ln();
        }
        lp
    }

    /// Batched policy evaluation using externally supplied standard-normal
    /// noise (reparameterized sampling).
    pub(crate) fn policy_forward(
        &self,
        obs: &Array2<f64>,
        noise: &Array2<f64>,
        with_trace: bool,
    ) -> PolicyBatch {
        let b = obs.nrows();
        let ad = self.action_dim;
        let (out, trace) = if with_trace {
            let trace = self.actor.forward_trace(obs);
            (trace.output().clone(), Some(trace))
        } else {
            (self.actor.forward_batch(obs), None)
        };
        let mean = out.slice(ndarray::s![.., ..ad]).to_owned();
        let log_std_raw = out.slice(ndarray::s![.., ad..]).to_owned();
        let log_std = log_std_raw.mapv(|v| v.clamp(self.config.log_std_min, self.config.log_std_max));
        let std = log_std.mapv(f64::exp);
        let u = &mean + &(&std * noise);
        let action = u.mapv(f64::tanh);
        let mut log_prob = Array1::zeros(b);
        for i in 0..b {
            let mut lp = 0.0;
            for j in 0..ad {
                let eps = noise[[i, j]];
                lp += -log_std[[i, j]] - 0.5 * eps * eps - 0.5 * LN_2PI;
                let th = action[[i, j]];
                lp -= (1.0 - th * th + SQUASH_EPS).ln();
            }
            log_prob[i] = lp;
        }
        PolicyBatch {
            log_std_raw,
            std,
            noise: noise.clone(),
            action,
            log_prob,
            trace,
        }
    }

    /// Actor loss and gradients on a frozen batch with frozen noise, using
    /// the current critics. Shared by `update` and the descent tests.
    pub(crate) fn actor_grads(
        &self,
        obs: &Array2<f64>,
        noise: &Array2<f64>,
    ) -> (Gradients, f64, Array1<f64>) {
        let b = obs.nrows();
        let ad = self.action_dim;
        let alpha = self.alpha();
        let pf = self.policy_forward(obs, noise, true);
        let qin = concatenate![Axis(1), obs.view(), pf.action.view()];
        let (tr1, tr2) = rayon::join(|| self.q1.forward_trace(&qin), || self.q2.forward_trace(&qin));
        let q1v = tr1.output().column(0).to_owned();
        let q2v = tr2.output().column(0).to_owned();
        let ones = Array2::ones((b, 1));
        let (gin1, gin2) = rayon::join(
            || self.q1.backward_input_only(&tr1, &ones),
            || self.q2.backward_input_only(&tr2, &ones),
        );

        let mut loss = 0.0;
        let mut upstream = Array2::zeros((b, 2 * ad));
        let b_f = b as f64;
        for i in 0..b {
            let qmin = q1v[i].min(q2v[i]);
            loss += alpha * pf.log_prob[i] - qmin;
            let gin = if q1v[i] <= q2v[i] { &gin1 } else { &gin2 };
            for j in 0..ad {
                let th = pf.action[[i, j]];
                let d = 1.0 - th * th; // da/du
                let t = -2.0 * th * d / (d + SQUASH_EPS); // d/du of the correction log
                let sigma_eps = pf.std[[i, j]] * pf.noise[[i, j]];
                let dq_da = gin[[i, self.obs_dim + j]];
                let dlogp_dmu = -t;
                let dlogp_dls = -1.0 - t * sigma_eps;
                upstream[[i, j]] = (alpha * dlogp_dmu - dq_da * d) / b_f;
                let raw = pf.log_std_raw[[i, j]];
                let inside = raw > self.config.log_std_min && raw < self.config.log_std_max;
                upstream[[i, ad + j]] = if inside {
                    (alpha * dlogp_dls - dq_da * d * sigma_eps) / b_f
                } else {
                    0.0
                };
            }
        }
        let trace = pf.trace.as_ref().expect("trace requested");
        let (grads, _) = self.actor.backward(trace, &upstream);
        (grads, loss / b_f, pf.log_prob)
    }

    /// One SAC update: critic regression toward the entropy-regularized
    /// twin-min bootstrap target, an actor step on `alpha * log pi - min Q`,
    /// a temperature step toward the target entropy, and a tau-blend of the
    /// target critics. Draw order from `rng`: batch indices, next-action
    /// noise, new-action noise.
    pub fn update(
        &mut self,
        buffer: &ReplayBuffer,
        batch_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<LossReport, SacError> {
        if buffer.len() < batch_size {
            return Err(SacError::BufferUnderfilled {
                len: buffer.len(),
                batch: batch_size,
            });
        }
        let batch = buffer.sample(batch_size, rng);
        let noise_next = normal_matrix(batch_size, self.action_dim, rng);
        let noise_new = normal_matrix(batch_size, self.action_dim, rng);
        let b = batch_size;
        let b_f = b as f64;
        let alpha = self.alpha();
        let gamma = self.config.gamma;

        // Bootstrap targets from freshly sampled next actions.
        let pf_next = self.policy_forward(&batch.next_obs, &noise_next, false);
        let qin_next = concatenate![Axis(1), batch.next_obs.view(), pf_next.action.view()];
        let (q1n, q2n) = rayon::join(
            || self.q1_target.forward_batch(&qin_next),
            || self.q2_target.forward_batch(&qin_next),
        );
        let mut y = Array1::zeros(b);
        for i in 0..b {
            let qmin = q1n[[i, 0]].min(q2n[[i, 0]]);
            debug_assert!(qmin <= q1n[[i, 0]] && qmin <= q2n[[i, 0]]);
            let soft = qmin - alpha * pf_next.log_prob[i];
            y[i] = batch.rewards[i] + gamma * (1.0 - batch.done[i]) * soft;
        }

        // Critic regression and the actor step run concurrently; the actor
        // loss is evaluated on the pre-update critics.
        let qin = concatenate![Axis(1), batch.obs.view(), batch.actions.view()];
        let critic_leg = || {
            let run = |q: &Mlp| {
                let tr = q.forward_trace(&qin);
                let mut up = Array2::zeros((b, 1));
                let mut loss = 0.0;
                for i in 0..b {
                    let e = tr.output()[[i, 0]] - y[i];
                    loss += e * e;
                    up[[i, 0]] = 2.0 * e / b_f;
                }
                let mut grads = Gradients::zeros_like(q);
                q.backward_into(&tr, &up, &mut grads);
                (grads, loss / b_f)
            };
            let (g1, l1) = run(&self.q1);
            let (g2, l2) = run(&self.q2);
            (g1, l1, g2, l2)
        };
        let ((g1, q1_loss, g2, q2_loss), (actor_grads, actor_loss, log_prob_new)) =
            rayon::join(critic_leg, || self.actor_grads(&batch.obs, &noise_new));
        self.q1_opt.apply(&mut self.q1, &g1);
        self.q2_opt.apply(&mut self.q2, &g2);
        self.actor_opt.apply(&mut self.actor, &actor_grads);

        // Temperature: log-space Adam toward the target entropy.
        let mean_excess =
            log_prob_new.iter().map(|lp| lp + self.config.target_entropy).sum::<f64>() / b_f;
        let alpha_loss = -self.log_alpha * mean_excess;
        self.alpha_opt.apply(&mut self.log_alpha, -mean_excess);

        // Target critics trail the online critics.
        self.q1_target.blend_from(&self.q1, self.config.tau);
        self.q2_target.blend_from(&self.q2, self.config.tau);

        Ok(LossReport {
            q1_loss,
            q2_loss,
            actor_loss,
            alpha_loss,
            alpha: self.alpha(),
        })
    }

    // -- checkpointing -------------------------------------------------------

    pub fn to_checkpoint(&self, config_hash: [u8; 32]) -> PolicyCheckpoint {
        PolicyCheckpoint {
            config_hash,
            obs_dim: self.obs_dim as u32,
            action_dim: self.action_dim as u32,
            log_alpha: self.log_alpha,
            actor: self.actor.clone(),
            critics: Some(CheckpointCritics {
                q1: self.q1.clone(),
                q2: self.q2.clone(),
                q1_target: self.q1_target.clone(),
                q2_target: self.q2_target.clone(),
            }),
        }
    }

    /// Rebuild an agent from a checkpoint. Optimizer moments are not stored;
    /// they restart fresh, which leaves evaluation byte-identical and only
    /// affects continued training. Missing critics load as zeros (such a
    /// checkpoint is evaluation-only).
    pub fn from_checkpoint(
        ckpt: &PolicyCheckpoint,
        config: SacConfig,
    ) -> Result<Self, CheckpointError> {
        let obs_dim = ckpt.obs_dim as usize;
        let action_dim = ckpt.action_dim as usize;
        if ckpt.actor.input_dim() != obs_dim || ckpt.actor.output_dim() != 2 * action_dim {
            return Err(CheckpointError::Corrupt(format!(
                "actor shape {:?} does not fit obs {obs_dim} / action {action_dim}",
                ckpt.actor.widths()
            )));
        }
        let critic_widths: Vec<usize> = {
            let mut w = vec![obs_dim + action_dim];
            w.extend_from_slice(&config.critic_hidden);
            w.push(1);
            w
        };
        let (q1, q2, q1_target, q2_target) = match &ckpt.critics {
            Some(c) => {
                for net in [&c.q1, &c.q2, &c.q1_target, &c.q2_target] {
                    if net.input_dim() != obs_dim + action_dim || net.output_dim() != 1 {
                        return Err(CheckpointError::Corrupt(format!(
                            "critic shape {:?} does not fit obs {obs_dim} / action {action_dim}",
                            net.widths()
                        )));
                    }
                }
                (
                    c.q1.clone(),
                    c.q2.clone(),
                    c.q1_target.clone(),
                    c.q2_target.clone(),
                )
            }
            None => (
                Mlp::zeros(&critic_widths),
                Mlp::zeros(&critic_widths),
                Mlp::zeros(&critic_widths),
                Mlp::zeros(&critic_widths),
            ),
        };
        let lr = config.learning_rate;
        Ok(SacAgent {
            actor_opt: AdamState::new(&ckpt.actor, lr),
            q1_opt: AdamState::new(&q1, lr),
            q2_opt: AdamState::new(&q2, lr),
            alpha_opt: ScalarAdam::new(lr),
            log_alpha: ckpt.log_alpha,
            actor: ckpt.actor.clone(),
            q1,
            q2,
            q1_target,
            q2_target,
            obs_dim,
            action_dim,
            config,
        })
    }
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

// ---------------------------------------------------------------------------
// Checkpoint file format
// ---------------------------------------------------------------------------

/// Serialized policy: header (magic, version, config hash, dimensions,
/// temperature, flags) followed by the actor network and optionally the four
/// critic networks in the `nn` binary format. Round-trips are bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCheckpoint {
    pub config_hash: [u8; 32],
    pub obs_dim: u32,
    pub action_dim: u32,
    pub log_alpha: f64,
    pub actor: Mlp,
    pub critics: Option<CheckpointCritics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointCritics {
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
}

impl PolicyCheckpoint {
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(CKPT_MAGIC)?;
        w.write_all(&[CKPT_VERSION])?;
        w.write_all(&self.config_hash)?;
        w.write_all(&self.obs_dim.to_le_bytes())?;
        w.write_all(&self.action_dim.to_le_bytes())?;
        w.write_all(&self.log_alpha.to_le_bytes())?;
        w.write_all(&[u8::from(self.critics.is_some())])?;
        self.actor.write_to(w)?;
        if let Some(c) = &self.critics {
            c.q1.write_to(w)?;
            c.q2.write_to(w)?;
            c.q1_target.write_to(w)?;
            c.q2_target.write_to(w)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 5];
        nn::read_exact(r, &mut magic)?;
        if &magic != CKPT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = nn::read_u8(r)?;
        if version != CKPT_VERSION {
            return Err(CheckpointError::UnsupportedVersion {
                found: version,
                supported: CKPT_VERSION,
            });
        }
        let mut config_hash = [0u8; 32];
        nn::read_exact(r, &mut config_hash)?;
        let obs_dim = nn::read_u32(r)?;
        let action_dim = nn::read_u32(r)?;
        let log_alpha = nn::read_f64(r)?;
        let flags = nn::read_u8(r)?;
        let actor = Mlp::read_from(r)?;
        let critics = if flags & 1 != 0 {
            Some(CheckpointCritics {
                q1: Mlp::read_from(r)?,
                q2: Mlp::read_from(r)?,
                q1_target: Mlp::read_from(r)?,
                q2_target: Mlp::read_from(r)?,
            })
        } else {
            None
        };
        Ok(PolicyCheckpoint {
            config_hash,
            obs_dim,
            action_dim,
            log_alpha,
            actor,
            critics,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let file = File::create(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        w.flush().map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let file = File::open(path).map_err(|source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut r = BufReader::new(file);
        Self::read_from(&mut r)
    }

    /// Hard check that the checkpoint fits an environment's dimensions.
    pub fn ensure_dims(&self, want_obs: u32, want_act: u32) -> Result<(), CheckpointError> {
        if self.obs_dim != want_obs || self.action_dim != want_act {
            return Err(CheckpointError::DimMismatch {
                found_obs: self.obs_dim,
                found_act: self.action_dim,
                want_obs,
                want_act,
            });
        }
        Ok(())
    }
}

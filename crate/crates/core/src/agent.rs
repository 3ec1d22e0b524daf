//! DDPG impression-allocation agent: actor/critic with target copies, an
//! optional shared convolutional extractor, FIFO replay, and repeated-sampling
//! experience generation.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::{observe_by_age, AgeOrder};
use crate::error::{Error, Result};
use crate::fpc::{observe_indices, sample_component, sample_indices, BlendRule, Direction, Observation};
use crate::lifecycle::{Marketplace, StepReport};
use crate::mechanism::{allocate_for_action, reward};
use crate::nn::{adam_step, Activation, AdamConfig, AdamState, Conv1d, Layer, Network, Tensor};
use crate::rng::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentVariant {
    TPerm,
    Fpc,
    FpcCnn,
    FpcCnnExp,
}

impl AgentVariant {
    pub const ALL: [AgentVariant; 4] = [
        AgentVariant::TPerm,
        AgentVariant::Fpc,
        AgentVariant::FpcCnn,
        AgentVariant::FpcCnnExp,
    ];

    pub fn uses_principal_component(self) -> bool {
        self != AgentVariant::TPerm
    }

    pub fn uses_conv(self) -> bool {
        matches!(self, AgentVariant::FpcCnn | AgentVariant::FpcCnnExp)
    }

    /// Observations drawn per step.
    pub fn repeats(self, m: usize) -> usize {
        if self == AgentVariant::FpcCnnExp {
            m
        } else {
            1
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentVariant::TPerm => "t-perm",
            AgentVariant::Fpc => "fpc",
            AgentVariant::FpcCnn => "fpc-cnn",
            AgentVariant::FpcCnnExp => "fpc-cnn-exp",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionCadence {
    /// One soft update per repeated sample.
    #[default]
    PerSample,
    /// One soft update per environment step, from the first sample.
    PerStep,
}

/// Agent block of the experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub variant: AgentVariant,
    /// Products per sampled observation.
    pub n_s: usize,
    /// Repeated observation times.
    pub m: usize,
    /// Rewards discount factor.
    pub gamma: f64,
    /// Target network decay rate: `θ' ← τθ' + (1−τ)θ`.
    pub tau: f64,
    /// First principal component decay rate.
    pub beta: f64,
    pub blend_rule: BlendRule,
    pub direction_cadence: DirectionCadence,
    pub age_order: AgeOrder,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub batch_size: usize,
    /// Mean gradient updates per environment step; fractional parts accumulate.
    pub updates_per_step: f64,
    pub replay_capacity: usize,
    /// Dense head widths shared by actor and critic.
    pub hidden: Vec<usize>,
    pub conv_channels: Vec<usize>,
    pub conv_kernel: usize,
    pub conv_stride: usize,
    pub noise_start: f64,
    pub noise_end: f64,
    /// Multiplies `n · R(s, a)` before it is used as the reward.
    pub reward_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            variant: AgentVariant::FpcCnnExp,
            n_s: 500,
            m: 5,
            gamma: 0.99,
            tau: 0.99,
            beta: 0.999,
            blend_rule: BlendRule::Difference,
            direction_cadence: DirectionCadence::PerSample,
            age_order: AgeOrder::OldestFirst,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            batch_size: 64,
            updates_per_step: 6.4,
            replay_capacity: 25_000,
            hidden: vec![512, 256],
            conv_channels: vec![32, 16],
            conv_kernel: 8,
            conv_stride: 4,
            noise_start: 0.2,
            noise_end: 0.01,
            reward_scale: 10.0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} outside [0, 1]")))
            }
        };
        unit("gamma", self.gamma)?;
        unit("tau", self.tau)?;
        unit("beta", self.beta)?;
        if self.n_s == 0 || self.n_s > n {
            return Err(Error::Config(format!("n_s = {} must lie in 1..={n}", self.n_s)));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.replay_capacity < self.batch_size {
            return Err(Error::Config("replay_capacity must hold at least one batch".into()));
        }
        if !(self.updates_per_step >= 0.0 && self.updates_per_step.is_finite()) {
            return Err(Error::Config("updates_per_step must be nonnegative".into()));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be nonempty and positive".into()));
        }
        if self.noise_start < 0.0 || self.noise_end < 0.0 {
            return Err(Error::Config("noise scales must be nonnegative".into()));
        }
        if self.variant.uses_conv() {
            if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
                return Err(Error::Config("conv_channels must be nonempty and positive".into()));
            }
            let mut len = self.n_s;
            for _ in &self.conv_channels {
                len = crate::nn::conv_output_len(len, self.conv_kernel, self.conv_stride).ok_or_else(|| {
                    Error::Config(format!(
                        "n_s = {} too short for {} conv layers of kernel {} / stride {}",
                        self.n_s,
                        self.conv_channels.len(),
                        self.conv_kernel,
                        self.conv_stride
                    ))
                })?;
            }
        }
        Ok(())
    }

    /// Exploration stdev at training step `t` of `total`, decaying
    /// exponentially from `noise_start` to `noise_end`.
    pub fn noise_at(&self, t: u64, total: u64) -> f64 {
        if total <= 1 || self.noise_start <= 0.0 {
            return self.noise_start;
        }
        if self.noise_end <= 0.0 {
            return if t + 1 >= total { 0.0 } else { self.noise_start };
        }
        let frac = (t as f64 / (total - 1) as f64).min(1.0);
        self.noise_start * (self.noise_end / self.noise_start).powf(frac)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub s_hat: Arc<Observation>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_hat_next: Arc<Observation>,
}

/// All `m²` pairings `(ŝ_t^i, a_t, r_t, ŝ_{t+1}^j)`.
pub fn generate_experiences(
    current: &[Arc<Observation>],
    action: &[f64],
    r: f64,
    next: &[Arc<Observation>],
) -> Result<Vec<Experience>> {
    if current.is_empty() || next.is_empty() {
        return Err(Error::Empty("observation lists"));
    }
    if current.len() != next.len() {
        return Err(Error::Dimension {
            expected: current.len(),
            actual: next.len(),
        });
    }
    let shape = current[0].shape();
    if let Some(bad) = current.iter().chain(next).find(|o| o.shape() != shape) {
        return Err(Error::Shape {
            expected: vec![shape.0, shape.1],
            actual: vec![bad.rows, bad.d],
        });
    }
    let mut out = Vec::with_capacity(current.len() * next.len());
    for s in current {
        for s_next in next {
            out.push(Experience {
                s_hat: Arc::clone(s),
                a: action.to_vec(),
                r,
                s_hat_next: Arc::clone(s_next),
            });
        }
    }
    Ok(out)
}

/// Bounded FIFO experience store.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    storage: VecDeque<Experience>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            storage: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn push(&mut self, e: Experience) {
        if self.capacity == 0 {
            return;
        }
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(e);
    }

    pub fn extend(&mut self, es: impl IntoIterator<Item = Experience>) {
        es.into_iter().for_each(|e| self.push(e));
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.storage.iter()
    }

    /// Uniform minibatch of distinct experiences.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize) -> Result<Vec<&Experience>> {
        if self.storage.len() < k || k == 0 {
            return Err(Error::InsufficientExperience {
                have: self.storage.len(),
                need: k.max(1),
            });
        }
        Ok(index::sample(rng, self.storage.len(), k)
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
}

/// Stacked minibatch tensors.
#[derive(Clone, Debug)]
pub struct Batch {
    pub s: Tensor,
    pub a: Tensor,
    pub r: Vec<f64>,
    pub s_next: Tensor,
}

impl Batch {
    pub fn from_experiences(es: &[&Experience]) -> Result<Self> {
        let first = es.first().ok_or(Error::Empty("minibatch"))?;
        let (rows, d) = first.s_hat.shape();
        let feat = rows * d;
        let ad = first.a.len();
        let mut s = Vec::with_capacity(es.len() * feat);
        let mut s_next = Vec::with_capacity(es.len() * feat);
        let mut a = Vec::with_capacity(es.len() * ad);
        let mut r = Vec::with_capacity(es.len());
        for e in es {
            if e.s_hat.data.len() != feat || e.s_hat_next.data.len() != feat || e.a.len() != ad {
                return Err(Error::Shape {
                    expected: vec![rows, d],
                    actual: vec![e.s_hat.rows, e.s_hat.d],
                });
            }
            s.extend_from_slice(&e.s_hat.data);
            s_next.extend_from_slice(&e.s_hat_next.data);
            a.extend_from_slice(&e.a);
            r.push(e.r);
        }
        let k = es.len();
        Ok(Self {
            s: Tensor::matrix(k, feat, s)?,
            a: Tensor::matrix(k, ad, a)?,
            r,
            s_next: Tensor::matrix(k, feat, s_next)?,
        })
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

/// Row-wise `[features | action]`.
fn concat_columns(left: &Tensor, right: &Tensor) -> Result<Tensor> {
    let (k, lf) = left.dims2()?;
    let (k2, rf) = right.dims2()?;
    if k != k2 {
        return Err(Error::Dimension { expected: k, actual: k2 });
    }
    let mut data = Vec::with_capacity(k * (lf + rf));
    for i in 0..k {
        data.extend_from_slice(left.row(i));
        data.extend_from_slice(right.row(i));
    }
    Tensor::matrix(k, lf + rf, data)
}

/// Splits `[k, lf + rf]` into its left and right column blocks.
fn split_columns(t: &Tensor, lf: usize) -> Result<(Tensor, Tensor)> {
    let (k, total) = t.dims2()?;
    let rf = total - lf;
    let mut left = Vec::with_capacity(k * lf);
    let mut right = Vec::with_capacity(k * rf);
    for i in 0..k {
        let row = t.row(i);
        left.extend_from_slice(&row[..lf]);
        right.extend_from_slice(&row[lf..]);
    }
    Ok((Tensor::matrix(k, lf, left)?, Tensor::matrix(k, rf, right)?))
}

/// Online and target actor/critic. When present the convolutional extractor
/// is shared by actor and critic and trained through the critic loss only.
#[derive(Clone, Debug)]
pub struct ActorCritic {
    pub extractor: Option<Network>,
    pub actor: Network,
    pub critic: Network,
    pub target_extractor: Option<Network>,
    pub target_actor: Network,
    pub target_critic: Network,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub extractor_opt: Option<AdamState>,
    pub gamma: f64,
    pub tau: f64,
    obs_rows: usize,
    obs_d: usize,
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, cfg: &AgentConfig, d: usize) -> Result<Self> {
        let n_s = cfg.n_s;
        let extractor = if cfg.variant.uses_conv() {
            let mut layers = Vec::new();
            let (mut len, mut channels) = (n_s, d);
            for &out in &cfg.conv_channels {
                let conv = Conv1d::new(rng, len, channels, out, cfg.conv_kernel, cfg.conv_stride, Activation::Relu)?;
                len = conv.out_len();
                channels = out;
                layers.push(Layer::Conv1d(conv));
            }
            Some(Network::new(layers)?)
        } else {
            None
        };
        let features = extractor.as_ref().map_or(n_s * d, Network::outputs);

        let mut actor_widths = vec![features];
        actor_widths.extend(&cfg.hidden);
        actor_widths.push(d);
        let actor = Network::mlp(rng, &actor_widths, Activation::Relu, Activation::Identity)?;

        let mut critic_widths = vec![features + d];
        critic_widths.extend(&cfg.hidden);
        critic_widths.push(1);
        let critic = Network::mlp(rng, &critic_widths, Activation::Relu, Activation::Identity)?;

        let extractor_opt = extractor
            .as_ref()
            .map(|e| AdamState::for_network(e, AdamConfig::with_lr(cfg.critic_lr)));
        Ok(Self {
            target_extractor: extractor.clone(),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor_opt: AdamState::for_network(&actor, AdamConfig::with_lr(cfg.actor_lr)),
            critic_opt: AdamState::for_network(&critic, AdamConfig::with_lr(cfg.critic_lr)),
            extractor_opt,
            extractor,
            actor,
            critic,
            gamma: cfg.gamma,
            tau: cfg.tau,
            obs_rows: n_s,
            obs_d: d,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.obs_d
    }

    fn check_observation(&self, obs: &Observation) -> Result<()> {
        if obs.shape() != (self.obs_rows, self.obs_d) || obs.data.len() != self.obs_rows * self.obs_d {
            return Err(Error::Shape {
                expected: vec![self.obs_rows, self.obs_d],
                actual: vec![obs.rows, obs.d],
            });
        }
        Ok(())
    }

    fn features(extractor: Option<&Network>, s: &Tensor) -> Result<Tensor> {
        match extractor {
            Some(e) => e.predict(s),
            None => Ok(s.clone()),
        }
    }

    /// `μ(ŝ)` plus Gaussian noise of stdev `noise` per coordinate.
    pub fn act<R: Rng + ?Sized>(&self, obs: &Observation, noise: f64, rng: &mut R) -> Result<Vec<f64>> {
        self.check_observation(obs)?;
        let s = Tensor::matrix(1, obs.data.len(), obs.data.clone())?;
        let f = Self::features(self.extractor.as_ref(), &s)?;
        let mut a = self.actor.predict(&f)?.data;
        if noise > 0.0 {
            for v in &mut a {
                *v += noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(a)
    }

    /// Bootstrapped targets `y = r + γ·Q'(ŝ', μ'(ŝ'))`.
    pub fn targets(&self, batch: &Batch) -> Result<Vec<f64>> {
        let f_next = Self::features(self.target_extractor.as_ref(), &batch.s_next)?;
        let a_next = self.target_actor.predict(&f_next)?;
        let q_next = self.target_critic.predict(&concat_columns(&f_next, &a_next)?)?;
        Ok(batch
            .r
            .iter()
            .zip(&q_next.data)
            .map(|(r, q)| r + self.gamma * q)
            .collect())
    }

    /// Mean squared TD error against fixed `targets`.
    pub fn critic_loss(&self, batch: &Batch, targets: &[f64]) -> Result<f64> {
        let f = Self::features(self.extractor.as_ref(), &batch.s)?;
        let q = self.critic.predict(&concat_columns(&f, &batch.a)?)?;
        Ok(q.data.iter().zip(targets).map(|(q, y)| (y - q).powi(2)).sum::<f64>() / batch.len() as f64)
    }

    /// Gradients of [`Self::critic_loss`] for the critic and the extractor.
    pub fn critic_gradients(&self, batch: &Batch, targets: &[f64]) -> Result<(f64, crate::nn::Grads, Option<crate::nn::Grads>)> {
        let k = batch.len() as f64;
        let (f, ext_cache) = match &self.extractor {
            Some(e) => {
                let (f, c) = e.forward(&batch.s)?;
                (f, Some(c))
            }
            None => (batch.s.clone(), None),
        };
        let feat = f.shape[1];
        let (q, cache) = self.critic.forward(&concat_columns(&f, &batch.a)?)?;
        let mut loss = 0.0;
        let mut dq = Vec::with_capacity(batch.len());
        for (q, y) in q.data.iter().zip(targets) {
            loss += (y - q).powi(2);
            dq.push(2.0 * (q - y) / k);
        }
        let dq = Tensor::matrix(batch.len(), 1, dq)?;
        let (critic_grads, ext_grads) = match (&self.extractor, ext_cache) {
            (Some(e), Some(c)) => {
                let (g, dx) = self.critic.backward(&cache, &dq)?;
                let (df, _) = split_columns(&dx, feat)?;
                (g, Some(e.backward_params(&c, &df)?))
            }
            _ => (self.critic.backward_params(&cache, &dq)?, None),
        };
        Ok((loss / k, critic_grads, ext_grads))
    }

    /// Mean `Q(ŝ, μ(ŝ))` over the batch states.
    pub fn actor_objective(&self, batch: &Batch) -> Result<f64> {
        let f = Self::features(self.extractor.as_ref(), &batch.s)?;
        let a = self.actor.predict(&f)?;
        let q = self.critic.predict(&concat_columns(&f, &a)?)?;
        Ok(q.data.iter().sum::<f64>() / batch.len() as f64)
    }

    /// Ascent direction `(1/k) Σ ∇_θ μ(ŝ_k) ∇_a Q(ŝ_k, a)|_{a=μ(ŝ_k)}`.
    pub fn actor_gradients(&self, batch: &Batch) -> Result<(f64, crate::nn::Grads)> {
        let k = batch.len();
        let f = Self::features(self.extractor.as_ref(), &batch.s)?;
        let feat = f.shape[1];
        let (a, actor_cache) = self.actor.forward(&f)?;
        let (q, critic_cache) = self.critic.forward(&concat_columns(&f, &a)?)?;
        let objective = q.data.iter().sum::<f64>() / k as f64;
        let dq = Tensor::matrix(k, 1, vec![1.0 / k as f64; k])?;
        let dx = self.critic.backward_input(&critic_cache, &dq)?;
        let (_, da) = split_columns(&dx, feat)?;
        let grads = self.actor.backward_params(&actor_cache, &da)?;
        Ok((objective, grads))
    }

    /// One critic step, one actor step, then soft target updates.
    pub fn train_step(&mut self, batch: &Batch) -> Result<TrainStats> {
        let targets = self.targets(batch)?;
        let (critic_loss, critic_grads, ext_grads) = self.critic_gradients(batch, &targets)?;
        adam_step(&mut self.critic, &critic_grads, &mut self.critic_opt)?;
        if let (Some(e), Some(g), Some(opt)) = (self.extractor.as_mut(), ext_grads, self.extractor_opt.as_mut()) {
            adam_step(e, &g, opt)?;
        }

        let (actor_objective, mut ascent) = self.actor_gradients(batch)?;
        ascent.0.iter_mut().for_each(|t| t.data.iter_mut().for_each(|v| *v = -*v));
        adam_step(&mut self.actor, &ascent, &mut self.actor_opt)?;

        self.target_critic.soft_update_from(&self.critic, self.tau)?;
        self.target_actor.soft_update_from(&self.actor, self.tau)?;
        if let (Some(t), Some(e)) = (self.target_extractor.as_mut(), self.extractor.as_ref()) {
            t.soft_update_from(e, self.tau)?;
        }
        Ok(TrainStats {
            critic_loss,
            actor_objective,
        })
    }
}

/// Versioned on-disk image of an agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub step: u64,
    pub actor: Network,
    pub critic: Network,
    pub target_actor: Network,
    pub target_critic: Network,
    pub extractor: Option<Network>,
    pub target_extractor: Option<Network>,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub extractor_opt: Option<AdamState>,
    pub direction: Option<Direction>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn capture(ac: &ActorCritic, direction: Option<&Direction>, step: u64) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            step,
            actor: ac.actor.clone(),
            critic: ac.critic.clone(),
            target_actor: ac.target_actor.clone(),
            target_critic: ac.target_critic.clone(),
            extractor: ac.extractor.clone(),
            target_extractor: ac.target_extractor.clone(),
            actor_opt: ac.actor_opt.clone(),
            critic_opt: ac.critic_opt.clone(),
            extractor_opt: ac.extractor_opt.clone(),
            direction: direction.cloned(),
        }
    }

    /// Overwrites the networks and optimizer state of `ac`.
    pub fn restore_into(self, ac: &mut ActorCritic) -> Result<Option<Direction>> {
        if self.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {CHECKPOINT_VERSION})",
                self.format_version
            )));
        }
        ac.actor.copy_from(&self.actor)?;
        ac.critic.copy_from(&self.critic)?;
        ac.target_actor.copy_from(&self.target_actor)?;
        ac.target_critic.copy_from(&self.target_critic)?;
        match (ac.extractor.as_mut(), self.extractor.as_ref()) {
            (Some(dst), Some(src)) => dst.copy_from(src)?,
            (None, None) => {}
            _ => return Err(Error::Checkpoint("extractor presence differs".into())),
        }
        match (ac.target_extractor.as_mut(), self.target_extractor.as_ref()) {
            (Some(dst), Some(src)) => dst.copy_from(src)?,
            (None, None) => {}
            _ => return Err(Error::Checkpoint("target extractor presence differs".into())),
        }
        ac.actor_opt = self.actor_opt;
        ac.critic_opt = self.critic_opt;
        ac.extractor_opt = self.extractor_opt;
        Ok(self.direction)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let ck: Checkpoint = serde_json::from_reader(file)?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {}", ck.format_version)));
        }
        Ok(ck)
    }
}

/// Outcome of one agent-driven environment step.
#[derive(Clone, Debug)]
pub struct AgentStep {
    pub action: Vec<f64>,
    pub report: StepReport,
    pub reward: f64,
    pub experiences_added: usize,
    pub updates: usize,
    pub stats: Option<TrainStats>,
}

/// Training-loop state: observations, projection direction, replay buffer,
/// and the RNG streams of one agent run.
pub struct Trainer {
    pub cfg: AgentConfig,
    pub ac: ActorCritic,
    pub buffer: ReplayBuffer,
    pub direction: Option<Direction>,
    current: Vec<Arc<Observation>>,
    obs_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    update_credit: f64,
    step: u64,
    total_steps: u64,
}

impl Trainer {
    /// Builds the networks and takes the initial observations, seeding the
    /// projection direction from the first sample.
    pub fn new(cfg: AgentConfig, market: &Marketplace, seed: u64, total_steps: u64) -> Result<Self> {
        cfg.validate(market.len())?;
        let d = market.config().d;
        let mut init_rng = seeded(seed, "agent-init");
        let ac = ActorCritic::new(&mut init_rng, &cfg, d)?;
        let mut trainer = Self {
            buffer: ReplayBuffer::new(cfg.replay_capacity),
            ac,
            direction: None,
            current: Vec::new(),
            obs_rng: seeded(seed, "agent-observe"),
            noise_rng: seeded(seed, "agent-noise"),
            replay_rng: seeded(seed, "agent-replay"),
            update_credit: 0.0,
            step: 0,
            total_steps,
            cfg,
        };
        trainer.current = trainer.observe(market)?;
        Ok(trainer)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn current_observations(&self) -> &[Arc<Observation>] {
        &self.current
    }

    /// Draws this variant's repeated observations of `market`.
    pub fn observe(&mut self, market: &Marketplace) -> Result<Vec<Arc<Observation>>> {
        let reps = self.cfg.variant.repeats(self.cfg.m);
        let mut out = Vec::with_capacity(reps);
        for j in 0..reps {
            let indices = sample_indices(&mut self.obs_rng, market.len(), self.cfg.n_s)?;
            if !self.cfg.variant.uses_principal_component() {
                out.push(Arc::new(observe_by_age(market, &indices, self.cfg.age_order)));
                continue;
            }
            if self.direction.is_none() {
                let e0 = sample_component(market, &indices)?;
                self.direction = Some(Direction::new(e0, self.cfg.beta, self.cfg.blend_rule)?);
            }
            let dir = self.direction.as_mut().expect("direction initialized");
            let sampled = observe_indices(market, &dir.e_hat, &indices)?;
            if j == 0 || self.cfg.direction_cadence == DirectionCadence::PerSample {
                dir.update(&sampled.e_t)?;
            }
            out.push(Arc::new(sampled.observation));
        }
        Ok(out)
    }

    pub fn noise_scale(&self) -> f64 {
        self.cfg.noise_at(self.step, self.total_steps)
    }

    /// Scaled lifecycle reward of the current population.
    pub fn scaled_reward(cfg: &AgentConfig, market: &Marketplace) -> f64 {
        cfg.reward_scale * market.len() as f64 * reward(market.products())
    }

    /// Plays one action, stores the resulting experiences, and trains.
    pub fn step(&mut self, market: &mut Marketplace) -> Result<AgentStep> {
        let noise = self.noise_scale();
        let action = self.ac.act(&self.current[0], noise, &mut self.noise_rng)?;
        let u = allocate_for_action(&action, market.products())?;
        let report = market.step(&u)?;
        let r = Self::scaled_reward(&self.cfg, market);
        let next = self.observe(market)?;
        let experiences = generate_experiences(&self.current, &action, r, &next)?;
        let added = experiences.len();
        self.buffer.extend(experiences);
        self.current = next;

        self.update_credit += self.cfg.updates_per_step;
        let mut updates = 0;
        let mut last = None;
        while self.update_credit >= 1.0 - 1e-9 {
            self.update_credit -= 1.0;
            if self.buffer.len() < self.cfg.batch_size {
                continue;
            }
            let picked = self.buffer.sample(&mut self.replay_rng, self.cfg.batch_size)?;
            let batch = Batch::from_experiences(&picked)?;
            last = Some(self.ac.train_step(&batch)?);
            updates += 1;
        }
        self.step += 1;
        Ok(AgentStep {
            action,
            report,
            reward: r,
            experiences_added: added,
            updates,
            stats: last,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(&self.ac, self.direction.as_ref(), self.step)
    }
}

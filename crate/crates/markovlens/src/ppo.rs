//! PPO trainer: rollout collection, generalized advantage estimation, and
//! clipped-surrogate updates over the fixed MLP policy/value networks.
//! Discrete heads emit logits; continuous heads are squash-free Gaussians
//! with a state-independent log-std, clipped to the action bounds only at
//! execution time.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::env::{Action, ActionSpace, Environment};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, adam_step_vec, mlp_backward, mlp_forward, mlp_forward_batch, AdamState,
    MlpParams, VecAdamState,
};
use crate::perturb::EnvRecipe;
use crate::streams;

const ADV_EPS: f64 = 1e-8;
const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub minibatch_size: usize,
    pub epochs_per_update: usize,
    pub rollout_length: usize,
    pub total_timesteps: usize,
    pub max_grad_norm: f64,
}

impl PpoConfig {
    pub fn new(total_timesteps: usize) -> PpoConfig {
        PpoConfig {
            learning_rate: 3e-4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            entropy_coef: 0.0,
            value_coef: 0.5,
            minibatch_size: 64,
            epochs_per_update: 4,
            rollout_length: 2048,
            total_timesteps,
            max_grad_norm: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("ppo config: {msg}")))
            }
        };
        c(
            self.gamma > 0.0 && self.gamma <= 1.0,
            "gamma must be in (0, 1]",
        )?;
        c(
            (0.0..=1.0).contains(&self.gae_lambda),
            "gae_lambda must be in [0, 1]",
        )?;
        c(self.clip_ratio > 0.0, "clip_ratio must be > 0")?;
        c(self.learning_rate > 0.0, "learning_rate must be > 0")?;
        c(self.value_coef >= 0.0, "value_coef must be ≥ 0")?;
        c(self.entropy_coef >= 0.0, "entropy_coef must be ≥ 0")?;
        c(self.minibatch_size >= 1, "minibatch_size must be ≥ 1")?;
        c(
            self.minibatch_size <= self.rollout_length,
            "minibatch_size must not exceed rollout_length",
        )?;
        c(self.epochs_per_update >= 1, "epochs_per_update must be ≥ 1")?;
        c(self.rollout_length >= 1, "rollout_length must be ≥ 1")?;
        c(self.max_grad_norm > 0.0, "max_grad_norm must be > 0")?;
        Ok(())
    }
}

/// Generalized advantage estimation.
///
/// δ_t = r_t + γ·V(s_{t+1})·(1−done_t) − V(s_t), A_t = δ_t + γλ(1−done_t)·A_{t+1},
/// with V(s_T) = `bootstrap`. Returns (advantages, advantages + values).
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = rewards.len();
    if values.len() != t || dones.len() != t {
        return Err(Error::Contract(format!(
            "compute_gae: length mismatch (rewards {t}, values {}, dones {})",
            values.len(),
            dones.len()
        )));
    }
    let mut advantages = vec![0.0; t];
    let mut acc = 0.0;
    for i in (0..t).rev() {
        let mask = if dones[i] { 0.0 } else { 1.0 };
        let next_value = if i + 1 == t { bootstrap } else { values[i + 1] };
        let delta = rewards[i] + gamma * next_value * mask - values[i];
        acc = delta + gamma * lambda * mask * acc;
        advantages[i] = acc;
    }
    let returns = advantages
        .iter()
        .zip(values)
        .map(|(a, v)| a + v)
        .collect();
    Ok((advantages, returns))
}

/// One rollout's worth of transitions plus the bootstrap value for the state
/// following the final step.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Action>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub bootstrap_value: f64,
}

impl RolloutBuffer {
    fn with_capacity(n: usize) -> RolloutBuffer {
        RolloutBuffer {
            observations: Vec::with_capacity(n),
            actions: Vec::with_capacity(n),
            log_probs: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            dones: Vec::with_capacity(n),
            bootstrap_value: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Head kind plus what is needed to execute actions in the environment.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Head {
    Discrete { n: usize },
    Gaussian { low: f64, high: f64 },
}

/// Action distribution at one observation, for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionDistribution {
    Categorical(Vec<f64>),
    Gaussian { mean: f64, std: f64 },
}

#[derive(Debug, Clone)]
pub struct Policy {
    pub pi: MlpParams,
    pub vf: MlpParams,
    /// State-independent log-std for the Gaussian head; empty when discrete.
    pub log_std: Vec<f64>,
    head: Head,
}

impl Policy {
    /// Orthogonal-initialized policy: head gain 0.01 for the action net,
    /// 1.0 for the value net, log-std 0.
    pub fn new(obs_dim: usize, action_space: ActionSpace, rng: &mut ChaCha8Rng) -> Policy {
        let (head, out_dim, log_std) = match action_space {
            ActionSpace::Discrete(n) => (Head::Discrete { n }, n, vec![]),
            ActionSpace::Continuous { low, high } => {
                (Head::Gaussian { low, high }, 1, vec![0.0])
            }
        };
        Policy {
            pi: MlpParams::orthogonal_init(obs_dim, out_dim, 0.01, rng),
            vf: MlpParams::orthogonal_init(obs_dim, 1, 1.0, rng),
            log_std,
            head,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.pi.input_dim()
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        mlp_forward(&self.vf, obs).expect("observation width fixed at construction")[0]
    }

    pub fn action_distribution(&self, obs: &[f64]) -> ActionDistribution {
        let out = mlp_forward(&self.pi, obs).expect("observation width fixed at construction");
        match self.head {
            Head::Discrete { .. } => ActionDistribution::Categorical(softmax(&out)),
            Head::Gaussian { .. } => ActionDistribution::Gaussian {
                mean: out[0],
                std: self.log_std[0].exp(),
            },
        }
    }

    /// Samples an action; returns (action, log-probability, value estimate).
    /// The action is the raw sample — continuous actions are clipped to the
    /// environment bounds only by [`Policy::execute`].
    pub fn act(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> (Action, f64, f64) {
        let out = mlp_forward(&self.pi, obs).expect("observation width fixed at construction");
        let value = self.value(obs);
        match self.head {
            Head::Discrete { .. } => {
                let probs = softmax(&out);
                let u: f64 = rng.random();
                let mut cum = 0.0;
                let mut chosen = probs.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    cum += p;
                    if u < cum {
                        chosen = i;
                        break;
                    }
                }
                (Action::Discrete(chosen), probs[chosen].ln(), value)
            }
            Head::Gaussian { .. } => {
                let mean = out[0];
                let std = self.log_std[0].exp();
                let z: f64 = StandardNormal.sample(rng);
                let a = mean + std * z;
                (Action::Continuous(a), gaussian_log_prob(a, mean, std), value)
            }
        }
    }

    /// Deterministic-mode action: argmax logits / distribution mean.
    pub fn act_deterministic(&self, obs: &[f64]) -> Action {
        let out = mlp_forward(&self.pi, obs).expect("observation width fixed at construction");
        match self.head {
            Head::Discrete { .. } => {
                let mut best = 0;
                for (i, v) in out.iter().enumerate() {
                    if *v > out[best] {
                        best = i;
                    }
                }
                Action::Discrete(best)
            }
            Head::Gaussian { low, high } => Action::Continuous(out[0].clamp(low, high)),
        }
    }

    /// The action as sent to the environment (continuous actions clipped).
    pub fn execute(&self, action: Action) -> Action {
        match (action, self.head) {
            (Action::Continuous(a), Head::Gaussian { low, high }) => {
                Action::Continuous(a.clamp(low, high))
            }
            (a, _) => a,
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

fn gaussian_log_prob(a: f64, mean: f64, std: f64) -> f64 {
    let z = (a - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * LN_2PI
}

/// Adam accumulators for every trainable tensor of one policy.
#[derive(Debug, Clone)]
pub struct PolicyAdam {
    pi: AdamState,
    vf: AdamState,
    log_std: VecAdamState,
}

impl PolicyAdam {
    pub fn new(policy: &Policy) -> PolicyAdam {
        PolicyAdam {
            pi: AdamState::new(&policy.pi),
            vf: AdamState::new(&policy.vf),
            log_std: VecAdamState::new(policy.log_std.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// One PPO update: `epochs_per_update` passes of shuffled minibatches with
/// the clipped-surrogate objective, advantage normalization per minibatch,
/// global gradient-norm clipping, and Adam.
pub fn ppo_update(
    policy: &mut Policy,
    opt: &mut PolicyAdam,
    buffer: &RolloutBuffer,
    config: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    config.validate()?;
    let t = buffer.len();
    if t == 0 {
        return Err(Error::Contract("ppo_update: empty rollout buffer".into()));
    }
    let (mut advantages, returns) = compute_gae(
        &buffer.rewards,
        &buffer.values,
        &buffer.dones,
        buffer.bootstrap_value,
        config.gamma,
        config.gae_lambda,
    )?;
    if t >= 2 {
        let mean = advantages.iter().sum::<f64>() / t as f64;
        let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
            / (t - 1) as f64;
        let std = var.sqrt();
        for a in advantages.iter_mut() {
            *a = (*a - mean) / (std + ADV_EPS);
        }
    }

    let mut indices: Vec<usize> = (0..t).collect();
    let mut stats = UpdateStats {
        policy_loss: 0.0,
        value_loss: 0.0,
        entropy: 0.0,
        clip_fraction: 0.0,
    };
    let mut minibatches = 0usize;

    for _epoch in 0..config.epochs_per_update {
        indices.shuffle(rng);
        for chunk in indices.chunks(config.minibatch_size) {
            let mb = chunk.len();
            let obs_dim = policy.obs_dim();
            let mut obs = Array2::zeros((mb, obs_dim));
            for (row, &i) in chunk.iter().enumerate() {
                for (col, &v) in buffer.observations[i].iter().enumerate() {
                    obs[[row, col]] = v;
                }
            }

            let adv: Vec<f64> = chunk.iter().map(|&i| advantages[i]).collect();

            let (pi_out, pi_cache) = mlp_forward_batch(&policy.pi, obs.clone());
            let (vf_out, vf_cache) = mlp_forward_batch(&policy.vf, obs);

            let mut dlogp = vec![0.0; mb];
            let mut policy_loss = 0.0;
            let mut entropy_sum = 0.0;
            let mut clipped = 0usize;
            let mut dout_pi = Array2::zeros(pi_out.dim());
            let mut dlog_std = vec![0.0; policy.log_std.len()];

            for (row, &i) in chunk.iter().enumerate() {
                let old_logp = buffer.log_probs[i];
                let (new_logp, entropy) = match policy.head {
                    Head::Discrete { .. } => {
                        let logits: Vec<f64> = pi_out.row(row).to_vec();
                        let probs = softmax(&logits);
                        let a = match buffer.actions[i] {
                            Action::Discrete(a) => a,
                            Action::Continuous(_) => {
                                return Err(Error::Contract(
                                    "ppo_update: continuous action in a discrete buffer".into(),
                                ))
                            }
                        };
                        let h: f64 = probs
                            .iter()
                            .filter(|p| **p > 0.0)
                            .map(|p| -p * p.ln())
                            .sum();
                        (probs[a].ln(), h)
                    }
                    Head::Gaussian { .. } => {
                        let a = match buffer.actions[i] {
                            Action::Continuous(a) => a,
                            Action::Discrete(_) => {
                                return Err(Error::Contract(
                                    "ppo_update: discrete action in a continuous buffer".into(),
                                ))
                            }
                        };
                        let mean = pi_out[[row, 0]];
                        let std = policy.log_std[0].exp();
                        let h = 0.5 * (LN_2PI + 1.0) + policy.log_std[0];
                        (gaussian_log_prob(a, mean, std), h)
                    }
                };
                let ratio = (new_logp - old_logp).exp();
                let a_hat = adv[row];
                let unclipped = ratio * a_hat;
                let clipped_ratio = ratio.clamp(1.0 - config.clip_ratio, 1.0 + config.clip_ratio);
                let clip_term = clipped_ratio * a_hat;
                policy_loss += -unclipped.min(clip_term);
                if (ratio - 1.0).abs() > config.clip_ratio {
                    clipped += 1;
                }
                entropy_sum += entropy;
                // gradient flows through the unclipped branch only when it
                // attains the min
                if unclipped <= clip_term {
                    dlogp[row] = -a_hat * ratio / mb as f64;
                }
            }

            // ∂logp/∂network-output, plus the entropy bonus gradient
            for (row, &i) in chunk.iter().enumerate() {
                match policy.head {
                    Head::Discrete { .. } => {
                        let logits: Vec<f64> = pi_out.row(row).to_vec();
                        let probs = softmax(&logits);
                        let a = match buffer.actions[i] {
                            Action::Discrete(a) => a,
                            Action::Continuous(_) => unreachable!(),
                        };
                        let h: f64 = probs
                            .iter()
                            .filter(|p| **p > 0.0)
                            .map(|p| -p * p.ln())
                            .sum();
                        for j in 0..probs.len() {
                            let indicator = if j == a { 1.0 } else { 0.0 };
                            let mut g = dlogp[row] * (indicator - probs[j]);
                            if config.entropy_coef > 0.0 && probs[j] > 0.0 {
                                // loss −c·H: dH/dlogit_j = −p_j(ln p_j + H)
                                let dh = -probs[j] * (probs[j].ln() + h);
                                g += -config.entropy_coef * dh / mb as f64;
                            }
                            dout_pi[[row, j]] += g;
                        }
                    }
                    Head::Gaussian { .. } => {
                        let a = match buffer.actions[i] {
                            Action::Continuous(a) => a,
                            Action::Discrete(_) => unreachable!(),
                        };
                        let mean = pi_out[[row, 0]];
                        let std = policy.log_std[0].exp();
                        let z = (a - mean) / std;
                        dout_pi[[row, 0]] += dlogp[row] * z / std;
                        dlog_std[0] += dlogp[row] * (z * z - 1.0);
                        if config.entropy_coef > 0.0 {
                            // entropy is log_std plus a constant per sample
                            dlog_std[0] += -config.entropy_coef / mb as f64;
                        }
                    }
                }
            }

            // value head: loss = value_coef·mean((V−R)²)
            let mut dout_vf = Array2::zeros(vf_out.dim());
            let mut value_loss = 0.0;
            for (row, &i) in chunk.iter().enumerate() {
                let err = vf_out[[row, 0]] - returns[i];
                value_loss += err * err;
                dout_vf[[row, 0]] = 2.0 * config.value_coef * err / mb as f64;
            }
            value_loss /= mb as f64;
            let policy_loss = policy_loss / mb as f64;
            let entropy = entropy_sum / mb as f64;

            let total_loss = policy_loss + config.value_coef * value_loss
                - config.entropy_coef * entropy;
            if !total_loss.is_finite() {
                return Err(Error::Training(format!(
                    "ppo_update: non-finite loss (policy {policy_loss}, value {value_loss}, entropy {entropy})"
                )));
            }

            let mut pi_grads = mlp_backward(&policy.pi, &pi_cache, &dout_pi);
            let mut vf_grads = mlp_backward(&policy.vf, &vf_cache, &dout_vf);

            // global gradient-norm clip across every trainable tensor
            let sq = pi_grads.squared_norm()
                + vf_grads.squared_norm()
                + dlog_std.iter().map(|g| g * g).sum::<f64>();
            let norm = sq.sqrt();
            let coef = config.max_grad_norm / (norm + 1e-6);
            if coef < 1.0 {
                pi_grads.scale(coef);
                vf_grads.scale(coef);
                dlog_std.iter_mut().for_each(|g| *g *= coef);
            }

            adam_step(&mut policy.pi, &pi_grads, &mut opt.pi, config.learning_rate)?;
            adam_step(&mut policy.vf, &vf_grads, &mut opt.vf, config.learning_rate)?;
            if !policy.log_std.is_empty() {
                adam_step_vec(
                    &mut policy.log_std,
                    &dlog_std,
                    &mut opt.log_std,
                    config.learning_rate,
                )?;
            }

            stats.policy_loss += policy_loss;
            stats.value_loss += value_loss;
            stats.entropy += entropy;
            stats.clip_fraction += clipped as f64 / mb as f64;
            minibatches += 1;
        }
    }

    let n = minibatches as f64;
    stats.policy_loss /= n;
    stats.value_loss /= n;
    stats.entropy /= n;
    stats.clip_fraction /= n;
    Ok(stats)
}

/// A completed episode's undiscounted return, stamped with the global
/// timestep at which the episode finished.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub timestep: usize,
    pub episode_return: f64,
}

pub(crate) struct Collector {
    pub env: crate::perturb::PerturbedEnv,
    pub obs: Vec<f64>,
    pub episode_return: f64,
    pub global_step: usize,
}

impl Collector {
    pub fn new(recipe: &EnvRecipe, seed: u64) -> Result<Collector> {
        let mut env = recipe.build(seed)?;
        let obs = env.reset(Some(seed));
        Ok(Collector {
            env,
            obs,
            episode_return: 0.0,
            global_step: 0,
        })
    }

    /// Collects one rollout of `len` steps, bootstrapping truncated episodes
    /// with γ·V(terminal observation).
    pub fn collect(
        &mut self,
        policy: &Policy,
        len: usize,
        gamma: f64,
        action_rng: &mut ChaCha8Rng,
        curve: &mut Vec<CurvePoint>,
    ) -> Result<RolloutBuffer> {
        let mut buf = RolloutBuffer::with_capacity(len);
        for _ in 0..len {
            let (action, logp, value) = policy.act(&self.obs, action_rng);
            let out = self.env.step(policy.execute(action))?;
            self.global_step += 1;
            self.episode_return += out.reward;

            let done = out.terminated || out.truncated;
            let mut reward = out.reward;
            if out.truncated && !out.terminated {
                reward += gamma * policy.value(&out.observation);
            }

            buf.observations.push(std::mem::take(&mut self.obs));
            buf.actions.push(action);
            buf.log_probs.push(logp);
            buf.values.push(value);
            buf.rewards.push(reward);
            buf.dones.push(done);

            if done {
                curve.push(CurvePoint {
                    timestep: self.global_step,
                    episode_return: self.episode_return,
                });
                self.episode_return = 0.0;
                self.obs = self.env.reset(None);
            } else {
                self.obs = out.observation;
            }
        }
        buf.bootstrap_value = policy.value(&self.obs);
        Ok(buf)
    }
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trains a PPO agent on the wrapped environment. Alternates full rollouts
/// and updates until `total_timesteps` environment steps have been consumed;
/// the final rollout may overshoot the budget. Fully deterministic given the
/// seed. Returns the trained policy and the per-episode learning curve.
pub fn train(recipe: &EnvRecipe, config: &PpoConfig, seed: u64) -> Result<(Policy, Vec<CurvePoint>)> {
    config.validate()?;
    if config.total_timesteps < config.rollout_length {
        return Err(Error::Config(format!(
            "ppo config: total_timesteps {} is below rollout_length {}",
            config.total_timesteps, config.rollout_length
        )));
    }

    let mut collector = Collector::new(recipe, seed)?;
    let mut init_rng = stream_rng(seed, streams::POLICY_INIT);
    let mut action_rng = stream_rng(seed, streams::ACTION);
    let mut shuffle_rng = stream_rng(seed, streams::SHUFFLE);

    let mut policy = Policy::new(
        collector.env.observation_dim(),
        collector.env.action_space(),
        &mut init_rng,
    );
    let mut opt = PolicyAdam::new(&policy);
    let mut curve = Vec::new();

    while collector.global_step < config.total_timesteps {
        let buffer = collector.collect(
            &policy,
            config.rollout_length,
            config.gamma,
            &mut action_rng,
            &mut curve,
        )?;
        ppo_update(&mut policy, &mut opt, &buffer, config, &mut shuffle_rng)?;
        if !policy.pi.is_finite() || !policy.vf.is_finite() {
            return Err(Error::Training(
                "train: policy parameters became non-finite".into(),
            ));
        }
    }
    Ok((policy, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::make_env;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn gae_with_lambda_zero_is_one_step_td() {
        let rewards = [1.0, -0.5, 2.0, 0.3];
        let values = [0.2, 0.4, -0.1, 0.9];
        let dones = [false, false, true, false];
        let bootstrap = 0.7;
        let (adv, _) = compute_gae(&rewards, &values, &dones, bootstrap, 0.99, 0.0).unwrap();
        for i in 0..4 {
            let mask = if dones[i] { 0.0 } else { 1.0 };
            let next = if i == 3 { bootstrap } else { values[i + 1] };
            let delta = rewards[i] + 0.99 * next * mask - values[i];
            assert!((adv[i] - delta).abs() < 1e-15, "index {i}");
        }
    }

    #[test]
    fn gae_matches_hand_recursion() {
        let (adv, returns) =
            compute_gae(&[1.0, 1.0], &[0.5, 0.5], &[false, false], 0.5, 0.99, 0.95).unwrap();
        assert!((adv[0] - 1.9307975).abs() < 1e-10);
        assert!((adv[1] - 0.995).abs() < 1e-10);
        assert!((returns[0] - 2.4307975).abs() < 1e-10);
        assert!((returns[1] - 1.495).abs() < 1e-10);
    }

    #[test]
    fn gae_done_masks_propagation() {
        let rewards = [1.0, 5.0];
        let values = [0.3, 0.8];
        // episode ends at index 0: A_0 must ignore the future entirely
        let (adv, _) = compute_gae(&rewards, &values, &[true, false], 9.9, 0.99, 0.95).unwrap();
        assert!((adv[0] - (1.0 - 0.3)).abs() < 1e-15);
    }

    #[test]
    fn gae_undiscounted_equals_reward_to_go() {
        let mut r = rng(3);
        let n = 40;
        let rewards: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
        let values: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
        let dones = vec![false; n];
        let bootstrap = 1.25;
        let (adv, _) = compute_gae(&rewards, &values, &dones, bootstrap, 1.0, 1.0).unwrap();
        for t in 0..n {
            let to_go: f64 = rewards[t..].iter().sum::<f64>() + bootstrap - values[t];
            assert!((adv[t] - to_go).abs() < 1e-10, "index {t}");
        }
    }

    #[test]
    fn gae_length_mismatch_is_a_contract_violation() {
        let err = compute_gae(&[1.0, 2.0], &[0.0], &[false, false], 0.0, 0.99, 0.95);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn discrete_probabilities_sum_to_one() {
        let mut r = rng(4);
        let policy = Policy::new(4, ActionSpace::Discrete(2), &mut r);
        for trial in 0..20 {
            let obs: Vec<f64> = (0..4).map(|_| StandardNormal.sample(&mut r)).collect();
            match policy.action_distribution(&obs) {
                ActionDistribution::Categorical(p) => {
                    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10, "trial {trial}");
                    assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
                }
                _ => panic!("expected categorical"),
            }
        }
    }

    #[test]
    fn gaussian_log_prob_matches_closed_form() {
        let mut r = rng(5);
        let policy = Policy::new(3, ActionSpace::Continuous { low: -2.0, high: 2.0 }, &mut r);
        for _ in 0..50 {
            let obs: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut r)).collect();
            let (action, logp, _) = policy.act(&obs, &mut r);
            let a = match action {
                Action::Continuous(a) => a,
                _ => unreachable!(),
            };
            let (mean, std) = match policy.action_distribution(&obs) {
                ActionDistribution::Gaussian { mean, std } => (mean, std),
                _ => unreachable!(),
            };
            // density of N(mean, std²) evaluated the long way
            let density = (-((a - mean) * (a - mean)) / (2.0 * std * std)).exp()
                / (std * (2.0 * std::f64::consts::PI).sqrt());
            assert!((logp - density.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_discrete_actions_follow_the_distribution() {
        let mut r = rng(6);
        let policy = Policy::new(4, ActionSpace::Discrete(2), &mut r);
        let obs = [0.3, -0.2, 0.1, 0.05];
        let probs = match policy.action_distribution(&obs) {
            ActionDistribution::Categorical(p) => p,
            _ => unreachable!(),
        };
        let n = 20_000;
        let mut counts = [0usize; 2];
        for _ in 0..n {
            match policy.act(&obs, &mut r).0 {
                Action::Discrete(a) => counts[a] += 1,
                _ => unreachable!(),
            }
        }
        let freq = counts[1] as f64 / n as f64;
        // 4σ band
        let sigma = (probs[1] * (1.0 - probs[1]) / n as f64).sqrt();
        assert!((freq - probs[1]).abs() < 4.0 * sigma);
    }

    fn collected_buffer(
        policy: &Policy,
        recipe: &EnvRecipe,
        len: usize,
        seed: u64,
    ) -> RolloutBuffer {
        let mut collector = Collector::new(recipe, seed).unwrap();
        let mut action_rng = stream_rng(seed, streams::ACTION);
        let mut curve = Vec::new();
        collector
            .collect(policy, len, 0.99, &mut action_rng, &mut curve)
            .unwrap()
    }

    #[test]
    fn ratio_one_gives_zero_clip_fraction_and_policy_loss() {
        let mut r = rng(7);
        let recipe = EnvRecipe::bare("CartPole-v1");
        let policy_init = Policy::new(4, ActionSpace::Discrete(2), &mut r);
        let buffer = collected_buffer(&policy_init, &recipe, 128, 11);

        let mut policy = policy_init.clone();
        let mut opt = PolicyAdam::new(&policy);
        let mut config = PpoConfig::new(128);
        config.rollout_length = 128;
        config.learning_rate = 1e-300; // keep parameters effectively frozen
        let stats = ppo_update(&mut policy, &mut opt, &buffer, &config, &mut rng(8)).unwrap();
        assert_eq!(stats.clip_fraction, 0.0);
        assert!(
            stats.policy_loss.abs() < 1e-9,
            "normalized advantages are mean-zero, got {}",
            stats.policy_loss
        );
        assert!(stats.value_loss > 0.0);
        assert!(stats.entropy > 0.0 && stats.entropy <= (2.0f64).ln() + 1e-12);
    }

    #[test]
    fn zero_advantages_leave_the_policy_net_untouched() {
        let mut r = rng(9);
        let recipe = EnvRecipe::bare("CartPole-v1");
        let mut policy = Policy::new(4, ActionSpace::Discrete(2), &mut r);
        let mut buffer = collected_buffer(&policy, &recipe, 64, 13);
        // zero rewards and values make every advantage exactly zero
        buffer.rewards.iter_mut().for_each(|x| *x = 0.0);
        buffer.values.iter_mut().for_each(|x| *x = 0.0);
        buffer.dones.iter_mut().for_each(|x| *x = false);
        buffer.bootstrap_value = 0.0;

        let pi_before = policy.pi.clone();
        let vf_before = policy.vf.clone();
        let mut opt = PolicyAdam::new(&policy);
        let mut config = PpoConfig::new(64);
        config.rollout_length = 64;
        ppo_update(&mut policy, &mut opt, &buffer, &config, &mut rng(10)).unwrap();
        assert_eq!(policy.pi, pi_before);
        assert_ne!(policy.vf, vf_before);
    }

    #[test]
    fn truncation_bootstraps_the_reward() {
        // Pendulum always truncates at 200 steps; replay the stored actions
        // through a bare environment to reconstruct the terminal observation
        let recipe = EnvRecipe::bare("Pendulum-v1");
        let mut r = rng(11);
        let policy = Policy::new(3, ActionSpace::Continuous { low: -2.0, high: 2.0 }, &mut r);
        let seed = 21;
        let buffer = collected_buffer(&policy, &recipe, 230, seed);

        let done_idx = buffer.dones.iter().position(|&d| d).unwrap();
        assert_eq!(done_idx, 199);

        let mut replay = make_env("Pendulum-v1").unwrap();
        let mut obs = replay.reset(Some(seed));
        assert_eq!(obs, buffer.observations[0]);
        let mut raw_reward = 0.0;
        for i in 0..=done_idx {
            let out = replay.step(policy.execute(buffer.actions[i])).unwrap();
            if i == done_idx {
                assert!(out.truncated);
                raw_reward = out.reward;
                obs = out.observation;
            }
        }
        let want = raw_reward + 0.99 * policy.value(&obs);
        assert!((buffer.rewards[done_idx] - want).abs() < 1e-12);
        // non-terminal rewards are stored raw (compare one against replay)
        assert!(!buffer.dones[5]);
    }

    #[test]
    fn training_is_deterministic() {
        let recipe = EnvRecipe::bare("CartPole-v1");
        let mut config = PpoConfig::new(256);
        config.rollout_length = 128;
        config.minibatch_size = 32;
        let (p1, c1) = train(&recipe, &config, 42).unwrap();
        let (p2, c2) = train(&recipe, &config, 42).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(p1.pi, p2.pi);
        assert_eq!(p1.vf, p2.vf);

        let (_, c3) = train(&recipe, &config, 43).unwrap();
        assert_ne!(c1, c3);
    }

    #[test]
    fn budget_of_one_rollout_performs_one_update() {
        let recipe = EnvRecipe::bare("CartPole-v1");
        let mut config = PpoConfig::new(128);
        config.rollout_length = 128;
        config.minibatch_size = 64;
        let (policy, curve) = train(&recipe, &config, 1).unwrap();
        // one update's worth of steps: every curve timestep is within budget
        assert!(curve.iter().all(|p| p.timestep <= 128));
        assert!(policy.pi.is_finite());

        let mut too_small = config.clone();
        too_small.total_timesteps = 64;
        assert!(matches!(
            train(&recipe, &too_small, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn curve_reports_completed_episode_returns() {
        let recipe = EnvRecipe::bare("CartPole-v1");
        let mut config = PpoConfig::new(512);
        config.rollout_length = 256;
        let (_, curve) = train(&recipe, &config, 3).unwrap();
        assert!(!curve.is_empty());
        let mut last = 0;
        for p in &curve {
            // CartPole returns equal episode length: positive whole numbers
            assert!(p.episode_return >= 1.0);
            assert_eq!(p.episode_return.fract(), 0.0);
            assert!(p.timestep > last);
            last = p.timestep;
        }
    }

    #[test]
    fn clip_fraction_lies_in_unit_interval_once_training_moves() {
        let recipe = EnvRecipe::bare("CartPole-v1");
        let mut r = rng(12);
        let mut policy = Policy::new(4, ActionSpace::Discrete(2), &mut r);
        let buffer = collected_buffer(&policy, &recipe, 256, 5);
        let mut opt = PolicyAdam::new(&policy);
        let mut config = PpoConfig::new(256);
        config.rollout_length = 256;
        config.learning_rate = 0.01; // exaggerate movement so clipping fires
        let stats = ppo_update(&mut policy, &mut opt, &buffer, &config, &mut rng(13)).unwrap();
        assert!((0.0..=1.0).contains(&stats.clip_fraction));
        assert!(stats.clip_fraction > 0.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = PpoConfig::new(1000);
        config.gamma = 0.0;
        assert!(config.validate().is_err());
        let mut config = PpoConfig::new(1000);
        config.minibatch_size = 4096;
        assert!(config.validate().is_err());
        let mut config = PpoConfig::new(1000);
        config.gae_lambda = 1.5;
        assert!(config.validate().is_err());
    }
}

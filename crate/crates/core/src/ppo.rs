//! PPO: rollout collection with per-step head bookkeeping, GAE, and the
//! clipped-surrogate update.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envs::{env_reset, EnvSpec};
use crate::error::{Error, Result};
use crate::ndmath::{adam_step, clip_grad_norm, mlp, AdamConfig, AdamState, Tape, Tensor, Var};
use crate::policy::{sample_action, Policy, Variant, DEFAULT_TRUNK};

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub steps_per_iter: usize,
    pub iterations: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            lr: 3e-4,
            epochs: 10,
            minibatch: 64,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            steps_per_iter: 2000,
            iterations: 100,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Argument(msg));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!("gae_lambda {} outside [0, 1]", self.gae_lambda));
        }
        if !(self.clip >= 0.0) || !(self.lr > 0.0) || !(self.max_grad_norm > 0.0) {
            return bad(format!(
                "clip ({}) must be >= 0, lr ({}) and max_grad_norm ({}) > 0",
                self.clip, self.lr, self.max_grad_norm
            ));
        }
        if self.epochs == 0 || self.minibatch == 0 {
            return bad("epochs and minibatch must be positive".into());
        }
        if self.steps_per_iter == 0 || !self.steps_per_iter.is_multiple_of(horizon) {
            return bad(format!(
                "steps_per_iter {} must be a positive multiple of the horizon {horizon}",
                self.steps_per_iter
            ));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// State-value critic; sees `t / T` appended to the observation unless the
/// policy variant is vanilla.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    params: Vec<Tensor>,
    obs_dim: usize,
    horizon: usize,
    time_input: bool,
}

impl ValueNet {
    /// Hidden layers use the fan-in uniform draw; the output layer starts at zero.
    pub fn build(obs_dim: usize, horizon: usize, variant: Variant, widths: &[usize], seed: u64) -> Result<Self> {
        if obs_dim == 0 || horizon == 0 || widths.contains(&0) {
            return Err(Error::Argument(format!(
                "value net needs positive dims (obs {obs_dim}, horizon {horizon}, widths {widths:?})"
            )));
        }
        let time_input = variant.time_in_value();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![obs_dim + usize::from(time_input)];
        sizes.extend(widths);
        let mut params = Vec::new();
        mlp::init_layers(&sizes, &mut rng, &mut params);
        params.push(Tensor::zeros(&[*sizes.last().unwrap(), 1]));
        params.push(Tensor::zeros(&[1]));
        Ok(Self {
            params,
            obs_dim,
            horizon,
            time_input,
        })
    }

    pub fn default_for(obs_dim: usize, horizon: usize, variant: Variant, seed: u64) -> Result<Self> {
        Self::build(obs_dim, horizon, variant, &DEFAULT_TRUNK, seed)
    }

    pub fn from_params(obs_dim: usize, horizon: usize, variant: Variant, params: Vec<Tensor>) -> Result<Self> {
        let time_input = variant.time_in_value();
        let mut fan_in = obs_dim + usize::from(time_input);
        if params.len() < 2 || !params.len().is_multiple_of(2) {
            return Err(Error::Dimension(format!(
                "value net needs an even, non-zero number of tensors, got {}",
                params.len()
            )));
        }
        for (i, pair) in params.chunks(2).enumerate() {
            let (w, b) = (&pair[0], &pair[1]);
            if w.shape().len() != 2 || w.shape()[0] != fan_in || b.shape() != [w.shape()[1]] {
                return Err(Error::Dimension(format!(
                    "value layer {i}: weight {:?} / bias {:?} do not follow fan-in {fan_in}",
                    w.shape(),
                    b.shape()
                )));
            }
            fan_in = w.shape()[1];
        }
        if fan_in != 1 {
            return Err(Error::Dimension(format!("value output width {fan_in} != 1")));
        }
        Ok(Self {
            params,
            obs_dim,
            horizon,
            time_input,
        })
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn time_input(&self) -> bool {
        self.time_input
    }

    pub fn input_dim(&self) -> usize {
        self.obs_dim + usize::from(self.time_input)
    }

    pub fn input_row(&self, obs: &[f64], t: usize) -> Result<Vec<f64>> {
        if obs.len() != self.obs_dim {
            return Err(Error::Argument(format!(
                "value input has length {}, expected {}",
                obs.len(),
                self.obs_dim
            )));
        }
        if t >= self.horizon {
            return Err(Error::Argument(format!(
                "episode step {t} outside [0, {})",
                self.horizon
            )));
        }
        let mut row = obs.to_vec();
        if self.time_input {
            row.push(t as f64 / self.horizon as f64);
        }
        Ok(row)
    }

    pub fn forward(&self, obs: &[f64], t: usize) -> Result<f64> {
        let x = Tensor::new(vec![1, self.input_dim()], self.input_row(obs, t)?)?;
        let n = self.params.len();
        let h = mlp::tanh_stack(&self.params[..n - 2], &x)?;
        Ok(h.affine(&self.params[n - 2], &self.params[n - 1])?.item())
    }

    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        tape.params(&self.params)
    }

    /// Batched values `[batch, 1]` for pre-built input rows.
    pub fn forward_taped(&self, tape: &mut Tape, vars: &[Var], inputs: &Tensor) -> Result<Var> {
        let n = vars.len();
        let x = tape.constant(inputs.clone());
        let h = mlp::tanh_stack_taped(tape, &vars[..n - 2], x)?;
        tape.affine(h, vars[n - 2], vars[n - 1])
    }
}

/// Step-major record of whole episodes collected for one update.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutBuffer {
    pub horizon: usize,
    pub observations: Vec<Vec<f64>>,
    /// Unclipped sampled actions.
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub logp_old: Vec<f64>,
    pub value_old: Vec<f64>,
    pub times: Vec<usize>,
    pub heads: Vec<usize>,
    pub terminals: Vec<bool>,
    pub successes: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Undiscounted return of each stored episode.
    pub fn episode_returns(&self) -> Vec<f64> {
        self.rewards
            .chunks(self.horizon.max(1))
            .map(|c| c.iter().sum())
            .collect()
    }
}

/// Runs `n_steps / T` full episodes, drawing one reset seed per episode from
/// `env_rng` and action noise from `sample_rng`.
pub fn collect_rollouts(
    policy: &Policy,
    value: &ValueNet,
    spec: &EnvSpec,
    n_steps: usize,
    env_rng: &mut impl RngCore,
    sample_rng: &mut impl Rng,
) -> Result<RolloutBuffer> {
    let horizon = spec.horizon;
    if !n_steps.is_multiple_of(horizon) {
        return Err(Error::Argument(format!(
            "rollout length {n_steps} is not a multiple of the horizon {horizon}"
        )));
    }
    if policy.config().horizon != horizon || policy.config().obs_dim != spec.obs_dim {
        return Err(Error::Dimension(format!(
            "policy (obs {}, T {}) does not fit {} (obs {}, T {})",
            policy.config().obs_dim,
            policy.config().horizon,
            spec.name,
            spec.obs_dim,
            horizon
        )));
    }
    let mut buf = RolloutBuffer {
        horizon,
        ..RolloutBuffer::default()
    };
    for _ in 0..n_steps / horizon {
        let (mut state, mut obs) = env_reset(spec, env_rng.next_u64());
        for t in 0..horizon {
            let dist = policy.forward(&obs, t)?;
            let (action, logp) = sample_action(&dist, sample_rng);
            let v = value.forward(&obs, t)?;
            let step = state.step(&action)?;
            buf.observations.push(std::mem::replace(&mut obs, step.observation));
            buf.actions.push(action);
            buf.rewards.push(step.reward);
            buf.logp_old.push(logp);
            buf.value_old.push(v);
            buf.times.push(t);
            buf.heads.push(dist.head);
            buf.terminals.push(step.terminal);
            buf.successes.push(step.success);
        }
    }
    Ok(buf)
}

/// Fills `advantages` and `returns`. The horizon is a true terminal: no
/// bootstrap past a step flagged terminal.
pub fn compute_gae(buf: &mut RolloutBuffer, gamma: f64, lambda: f64) {
    let n = buf.len();
    buf.advantages = vec![0.0; n];
    buf.returns = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = 0.0;
    for i in (0..n).rev() {
        let live = if buf.terminals[i] { 0.0 } else { 1.0 };
        let delta = buf.rewards[i] + gamma * next_value * live - buf.value_old[i];
        let adv = delta + gamma * lambda * live * next_adv;
        buf.advantages[i] = adv;
        buf.returns[i] = adv + buf.value_old[i];
        next_adv = adv;
        next_value = buf.value_old[i];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    /// `max |ρ - 1|` over the buffer before the first gradient step.
    pub initial_max_ratio_dev: f64,
    /// Fraction of samples outside the clip window before the first step.
    pub initial_clip_fraction: f64,
}

/// Owns the networks and their optimizer state across iterations.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub policy: Policy,
    pub value: ValueNet,
    pub config: PpoConfig,
    policy_adam: AdamState,
    value_adam: AdamState,
}

struct Batch {
    policy_inputs: Tensor,
    value_inputs: Tensor,
    times: Vec<usize>,
    actions: Tensor,
    logp_old: Vec<f64>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
}

impl Trainer {
    pub fn new(policy: Policy, value: ValueNet, config: PpoConfig) -> Result<Self> {
        config.validate(policy.config().horizon)?;
        let policy_adam = AdamState::new(policy.params());
        let value_adam = AdamState::new(value.params());
        Ok(Self {
            policy,
            value,
            config,
            policy_adam,
            value_adam,
        })
    }

    fn batch(&self, buf: &RolloutBuffer, idx: &[usize], advantages: &[f64]) -> Result<Batch> {
        let mut p_rows = Vec::with_capacity(idx.len());
        let mut v_rows = Vec::with_capacity(idx.len());
        for &i in idx {
            p_rows.push(self.policy.input_row(&buf.observations[i], buf.times[i])?);
            v_rows.push(self.value.input_row(&buf.observations[i], buf.times[i])?);
        }
        let actions: Vec<&[f64]> = idx.iter().map(|&i| buf.actions[i].as_slice()).collect();
        Ok(Batch {
            policy_inputs: Tensor::from_rows(&p_rows)?,
            value_inputs: Tensor::from_rows(&v_rows)?,
            times: idx.iter().map(|&i| buf.times[i]).collect(),
            actions: Tensor::from_rows(&actions)?,
            logp_old: idx.iter().map(|&i| buf.logp_old[i]).collect(),
            advantages: idx.iter().map(|&i| advantages[i]).collect(),
            returns: idx.iter().map(|&i| buf.returns[i]).collect(),
        })
    }

    /// Fresh log-probs of the stored actions under the current policy.
    pub fn current_logprobs(&self, buf: &RolloutBuffer) -> Result<Vec<f64>> {
        let all: Vec<usize> = (0..buf.len()).collect();
        let batch = self.batch(buf, &all, &buf.returns)?;
        let mut tape = Tape::new();
        let vars = self.policy.bind(&mut tape);
        let (logp, _) = self.policy.log_prob_and_entropy_taped(
            &mut tape,
            &vars,
            &batch.policy_inputs,
            &batch.times,
            batch.actions,
        )?;
        Ok(tape.value(logp).data().to_vec())
    }

    /// One PPO update over `buf` (advantages and returns must be filled).
    pub fn update(&mut self, buf: &RolloutBuffer, rng: &mut impl Rng) -> Result<UpdateStats> {
        let n = buf.len();
        if n == 0 || buf.advantages.len() != n || buf.returns.len() != n {
            return Err(Error::Usage(
                "update needs a non-empty buffer with advantages and returns".into(),
            ));
        }
        let cfg = self.config.clone();
        let mean = buf.advantages.iter().sum::<f64>() / n as f64;
        let var = buf.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        let advantages: Vec<f64> = buf.advantages.iter().map(|a| (a - mean) / (std + 1e-8)).collect();

        let mut stats = UpdateStats::default();
        let fresh = self.current_logprobs(buf)?;
        let mut outside = 0usize;
        for (new, old) in fresh.iter().zip(&buf.logp_old) {
            let dev = ((new - old).exp() - 1.0).abs();
            stats.initial_max_ratio_dev = stats.initial_max_ratio_dev.max(dev);
            if dev > cfg.clip {
                outside += 1;
            }
        }
        stats.initial_clip_fraction = outside as f64 / n as f64;

        let mut order: Vec<usize> = (0..n).collect();
        let (mut samples, mut clipped) = (0usize, 0usize);
        for epoch in 0..cfg.epochs {
            order.shuffle(rng);
            for (mb, idx) in order.chunks(cfg.minibatch).enumerate() {
                let batch = self.batch(buf, idx, &advantages)?;
                let m = idx.len();
                let mut tape = Tape::new();
                let p_vars = self.policy.bind(&mut tape);
                let v_vars = self.value.bind(&mut tape);
                let (logp, entropy) = self.policy.log_prob_and_entropy_taped(
                    &mut tape,
                    &p_vars,
                    &batch.policy_inputs,
                    &batch.times,
                    batch.actions,
                )?;
                let surrogate = tape.clipped_surrogate(logp, &batch.logp_old, &batch.advantages, cfg.clip)?;
                let mean_entropy = tape.mean(entropy);
                let ent_term = tape.scale(mean_entropy, -cfg.entropy_coef);
                let policy_loss = tape.add(surrogate, ent_term)?;
                let values = self.value.forward_taped(&mut tape, &v_vars, &batch.value_inputs)?;
                let value_loss = tape.mean_squared_error(values, &batch.returns)?;
                let scaled_value = tape.scale(value_loss, cfg.value_coef);
                let total = tape.add(policy_loss, scaled_value)?;

                let (pl, vl, ent) = (
                    tape.value(policy_loss).item(),
                    tape.value(value_loss).item(),
                    tape.value(mean_entropy).item(),
                );
                if !tape.value(total).item().is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss at epoch {epoch}, minibatch {mb}: policy {pl}, value {vl}, entropy {ent}"
                    )));
                }
                for (&new, &old) in tape.value(logp).data().iter().zip(&batch.logp_old) {
                    let ratio = (new - old).exp();
                    if (ratio - 1.0).abs() > cfg.clip {
                        clipped += 1;
                    }
                    stats.approx_kl += (ratio - 1.0) - (new - old);
                }
                stats.policy_loss += pl * m as f64;
                stats.value_loss += vl * m as f64;
                stats.entropy += ent * m as f64;
                samples += m;

                let grads = tape.backward(total)?;
                let mut p_grads = grads.collect(&p_vars);
                let mut v_grads = grads.collect(&v_vars);
                clip_grad_norm(&mut p_grads, cfg.max_grad_norm);
                clip_grad_norm(&mut v_grads, cfg.max_grad_norm);
                let adam = cfg.adam();
                adam_step(self.policy.params_mut(), &p_grads, &mut self.policy_adam, &adam)?;
                adam_step(self.value.params_mut(), &v_grads, &mut self.value_adam, &adam)?;
            }
        }
        let s = samples as f64;
        stats.policy_loss /= s;
        stats.value_loss /= s;
        stats.entropy /= s;
        stats.approx_kl /= s;
        stats.clip_fraction = clipped as f64 / s;
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvName;
    use crate::policy::{select_head, PolicyConfig};
    use proptest::prelude::*;
    use rand::Rng;

    /// Direct double-sum definition of GAE over one episode (no bootstrap past the end).
    fn gae_brute_force(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
        let n = rewards.len();
        let v = |i: usize| if i < n { values[i] } else { 0.0 };
        (0..n)
            .map(|t| {
                let mut total = 0.0;
                for l in 0..n - t {
                    let delta = rewards[t + l] + gamma * v(t + l + 1) - values[t + l];
                    total += (gamma * lambda).powi(l as i32) * delta;
                }
                total
            })
            .collect()
    }

    fn episode_buffer(rewards: Vec<f64>, values: Vec<f64>) -> RolloutBuffer {
        let n = rewards.len();
        RolloutBuffer {
            horizon: n,
            terminals: (0..n).map(|i| i == n - 1).collect(),
            rewards,
            value_old: values,
            ..RolloutBuffer::default()
        }
    }

    #[test]
    fn gae_lambda_zero_is_td_error() {
        let mut buf = episode_buffer(vec![1.0, -0.5, 2.0], vec![0.3, 0.1, -0.2]);
        compute_gae(&mut buf, 0.9, 0.0);
        let expected = [1.0 + 0.9 * 0.1 - 0.3, -0.5 + 0.9 * -0.2 - 0.1, 2.0 + 0.2];
        for (a, e) in buf.advantages.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn gae_lambda_one_zero_values_is_reward_to_go() {
        let rewards = vec![1.0, 2.0, 3.0, 4.0];
        let mut buf = episode_buffer(rewards.clone(), vec![0.0; 4]);
        compute_gae(&mut buf, 0.5, 1.0);
        for t in 0..4 {
            let rtg: f64 = (t..4).map(|u| 0.5f64.powi((u - t) as i32) * rewards[u]).sum();
            assert!((buf.advantages[t] - rtg).abs() < 1e-15);
            assert_eq!(buf.returns[t], buf.advantages[t]);
        }
    }

    #[test]
    fn gae_does_not_leak_across_episodes() {
        let mut two = episode_buffer(vec![1.0, 1.0, 5.0, 5.0], vec![0.2, 0.4, 0.6, 0.8]);
        two.terminals = vec![false, true, false, true];
        compute_gae(&mut two, 0.99, 0.95);
        let first = gae_brute_force(&[1.0, 1.0], &[0.2, 0.4], 0.99, 0.95);
        assert!((two.advantages[0] - first[0]).abs() < 1e-12);
        assert!((two.advantages[1] - first[1]).abs() < 1e-12);
    }

    #[test]
    fn gae_matches_brute_force_on_ten_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rewards: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut buf = episode_buffer(rewards.clone(), values.clone());
        compute_gae(&mut buf, 0.99, 0.95);
        for (a, b) in buf
            .advantages
            .iter()
            .zip(gae_brute_force(&rewards, &values, 0.99, 0.95))
        {
            assert!((a - b).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn gae_recursion_equals_double_sum(
            ep in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..20),
            gamma in 0.01f64..=1.0,
            lambda in 0.0f64..=1.0,
        ) {
            let (rewards, values): (Vec<f64>, Vec<f64>) = ep.into_iter().unzip();
            let mut buf = episode_buffer(rewards.clone(), values.clone());
            compute_gae(&mut buf, gamma, lambda);
            let oracle = gae_brute_force(&rewards, &values, gamma, lambda);
            for (a, b) in buf.advantages.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }

    fn setup(name: EnvName, variant: Variant, heads: usize) -> (EnvSpec, Policy, ValueNet) {
        let spec = name.spec();
        let pc = PolicyConfig::new(variant, spec.obs_dim, spec.action_dim, heads, spec.horizon, 3);
        let policy = Policy::build(pc).unwrap();
        let value = ValueNet::default_for(spec.obs_dim, spec.horizon, variant, 4).unwrap();
        (spec, policy, value)
    }

    fn rollout(policy: &Policy, value: &ValueNet, spec: &EnvSpec, n: usize) -> RolloutBuffer {
        let mut env_rng = ChaCha8Rng::seed_from_u64(1);
        let mut sample_rng = ChaCha8Rng::seed_from_u64(2);
        collect_rollouts(policy, value, spec, n, &mut env_rng, &mut sample_rng).unwrap()
    }

    #[test]
    fn rollout_episode_structure() {
        let (spec, policy, value) = setup(EnvName::PushLite, Variant::MultiHead, 4);
        let buf = rollout(&policy, &value, &spec, 200);
        assert_eq!(buf.len(), 200);
        let terminals: Vec<usize> = (0..200).filter(|&i| buf.terminals[i]).collect();
        assert_eq!(terminals, vec![99, 199]);
        let expected: Vec<usize> = (0..4).flat_map(|h| std::iter::repeat_n(h, 25)).collect();
        assert_eq!(&buf.heads[..100], expected.as_slice());
        assert_eq!(&buf.heads[100..], expected.as_slice());
        for ep in 0..2 {
            for t in 0..100 {
                assert_eq!(buf.times[ep * 100 + t], t);
                assert_eq!(buf.heads[ep * 100 + t], select_head(t, 100, 4).unwrap());
            }
        }
        assert_eq!(buf, rollout(&policy, &value, &spec, 200));
        assert!(collect_rollouts(
            &policy,
            &value,
            &spec,
            150,
            &mut ChaCha8Rng::seed_from_u64(0),
            &mut ChaCha8Rng::seed_from_u64(0)
        )
        .is_err());
    }

    #[test]
    fn value_net_properties() {
        let v = ValueNet::default_for(6, 100, Variant::MultiHead, 1).unwrap();
        assert_eq!(v.input_dim(), 7);
        assert_eq!(v.forward(&[0.3; 6], 5).unwrap(), 0.0);
        let mut vanilla = ValueNet::default_for(6, 100, Variant::Vanilla, 1).unwrap();
        assert_eq!(vanilla.input_dim(), 6);
        let n = vanilla.params().len();
        vanilla.params_mut()[n - 2].data_mut().fill(0.3);
        let obs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        assert_ne!(vanilla.forward(&obs, 0).unwrap(), 0.0);
        assert_eq!(vanilla.forward(&obs, 0).unwrap(), vanilla.forward(&obs, 99).unwrap());
        assert!(vanilla.forward(&obs[..5], 0).is_err());
        assert!(vanilla.forward(&obs, 100).is_err());
    }

    fn trained_once(cfg: PpoConfig, heads: usize) -> (Trainer, Trainer, UpdateStats) {
        let (spec, policy, value) = setup(EnvName::PushLite, Variant::MultiHead, heads);
        let mut buf = rollout(&policy, &value, &spec, 100);
        compute_gae(&mut buf, cfg.gamma, cfg.gae_lambda);
        let before = Trainer::new(policy, value, cfg).unwrap();
        let mut after = before.clone();
        let stats = after.update(&buf, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        (before, after, stats)
    }

    #[test]
    fn ratios_start_at_one() {
        let cfg = PpoConfig {
            epochs: 2,
            ..PpoConfig::default()
        };
        let (_, _, stats) = trained_once(cfg, 4);
        assert!(stats.initial_max_ratio_dev < 1e-12);
        assert_eq!(stats.initial_clip_fraction, 0.0);
        assert!(stats.policy_loss.is_finite() && stats.value_loss > 0.0);
    }

    #[test]
    fn zero_clip_window_freezes_policy_means() {
        let cfg = PpoConfig {
            clip: 0.0,
            entropy_coef: 0.0,
            epochs: 1,
            minibatch: 100,
            ..PpoConfig::default()
        };
        let (before, after, _) = trained_once(cfg, 4);
        assert_eq!(before.policy.params(), after.policy.params());
        assert_ne!(before.value.params(), after.value.params());
    }

    #[test]
    fn single_head_buffer_updates_only_that_head() {
        let cfg = PpoConfig {
            entropy_coef: 0.0,
            epochs: 2,
            ..PpoConfig::default()
        };
        let (spec, policy, value) = setup(EnvName::PushLite, Variant::MultiHead, 4);
        let mut buf = rollout(&policy, &value, &spec, 100);
        compute_gae(&mut buf, cfg.gamma, cfg.gae_lambda);
        // keep only head-2 transitions (t in 50..75)
        let keep: Vec<usize> = (50..75).collect();
        let pick = |v: &Vec<f64>| keep.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        let sub = RolloutBuffer {
            horizon: 100,
            observations: keep.iter().map(|&i| buf.observations[i].clone()).collect(),
            actions: keep.iter().map(|&i| buf.actions[i].clone()).collect(),
            rewards: pick(&buf.rewards),
            logp_old: pick(&buf.logp_old),
            value_old: pick(&buf.value_old),
            times: keep.iter().map(|&i| buf.times[i]).collect(),
            heads: keep.iter().map(|&i| buf.heads[i]).collect(),
            terminals: vec![false; keep.len()],
            successes: vec![false; keep.len()],
            advantages: pick(&buf.advantages),
            returns: pick(&buf.returns),
        };
        let before = Trainer::new(policy, value, cfg).unwrap();
        let mut after = before.clone();
        after.update(&sub, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let n = before.policy.params().len();
        let (w0, w1) = (&before.policy.params()[n - 3], &after.policy.params()[n - 3]);
        let (s0, s1) = (&before.policy.params()[n - 1], &after.policy.params()[n - 1]);
        for h in 0..4 {
            let changed = (0..w0.rows()).any(|r| w0.row(r)[2 * h..2 * h + 2] != w1.row(r)[2 * h..2 * h + 2])
                || s0.row(h) != s1.row(h);
            assert_eq!(changed, h == 2, "head {h}");
        }
        assert_ne!(before.policy.params()[0], after.policy.params()[0]);
        assert_ne!(before.value.params(), after.value.params());
    }

    #[test]
    fn update_is_deterministic() {
        let cfg = PpoConfig {
            epochs: 2,
            ..PpoConfig::default()
        };
        let (_, a, sa) = trained_once(cfg.clone(), 2);
        let (_, b, sb) = trained_once(cfg, 2);
        assert_eq!(sa, sb);
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn config_validation() {
        let ok = PpoConfig::default();
        assert!(ok.validate(100).is_ok());
        assert!(PpoConfig {
            steps_per_iter: 150,
            ..ok.clone()
        }
        .validate(100)
        .is_err());
        assert!(PpoConfig {
            gamma: 0.0,
            ..ok.clone()
        }
        .validate(100)
        .is_err());
        assert!(PpoConfig {
            gae_lambda: 1.5,
            ..ok.clone()
        }
        .validate(100)
        .is_err());
        assert!(PpoConfig { clip: -0.1, ..ok }.validate(100).is_err());
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let cfg = PpoConfig::default();
        let (spec, policy, value) = setup(EnvName::PushLite, Variant::Vanilla, 1);
        let mut buf = rollout(&policy, &value, &spec, 100);
        compute_gae(&mut buf, cfg.gamma, cfg.gae_lambda);
        buf.returns[3] = f64::NAN;
        let mut trainer = Trainer::new(policy, value, cfg).unwrap();
        let err = trainer.update(&buf, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
    }
}

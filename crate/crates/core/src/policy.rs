//! Gaussian policies: vanilla, time-in-observation, and time-indexed
//! multi-head.
//!
//! All three share one parameter layout: a tanh trunk followed by a single
//! affine layer producing `heads * action_dim` means, and a `[heads,
//! action_dim]` table of state-independent log-stds. The vanilla and
//! time-obs variants simply have one head. A multi-head policy evaluates all
//! head means and keeps the block chosen by [`select_head`], so gradients of
//! every other head are exactly zero for that transition.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ndmath::{gaussian_entropy, gaussian_logprob, mlp, Tape, Tensor, Var};

pub const INITIAL_LOGSTD: f64 = -0.5;
pub const HEAD_INIT_SCALE: f64 = 0.01;
pub const DEFAULT_TRUNK: [usize; 2] = [64, 64];

/// Active head for 0-indexed episode step `t`: `floor(t * heads / horizon)`,
/// clamped to the last head for `t >= horizon`.
pub fn select_head(t: usize, horizon: usize, heads: usize) -> Result<usize> {
    if heads < 1 || heads > horizon {
        return Err(Error::Argument(format!(
            "head count {heads} must lie in [1, horizon={horizon}]"
        )));
    }
    let j = (t as u128 * heads as u128 / horizon as u128) as usize;
    Ok(j.min(heads - 1))
}

/// Signed front-end used by foreign callers, where negative steps are representable.
pub fn select_head_signed(t: i64, horizon: i64, heads: i64) -> Result<usize> {
    if t < 0 {
        return Err(Error::Argument(format!("episode step {t} is negative")));
    }
    if horizon < 1 || heads < 1 {
        return Err(Error::Argument(format!(
            "horizon {horizon} and head count {heads} must be positive"
        )));
    }
    select_head(t as usize, horizon as usize, heads as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Vanilla,
    TimeObs,
    MultiHead,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Vanilla, Variant::TimeObs, Variant::MultiHead];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::TimeObs => "timeobs",
            Variant::MultiHead => "multihead",
        }
    }

    /// Whether the policy trunk sees normalized time.
    pub fn time_in_policy(self) -> bool {
        self == Variant::TimeObs
    }

    /// Whether the critic sees normalized time.
    pub fn time_in_value(self) -> bool {
        self != Variant::Vanilla
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(Variant::Vanilla),
            "timeobs" | "time-obs" => Ok(Variant::TimeObs),
            "multihead" | "multi-head" => Ok(Variant::MultiHead),
            other => Err(Error::Argument(format!(
                "unknown policy variant `{other}` (expected vanilla, timeobs or multihead)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyConfig {
    pub variant: Variant,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub heads: usize,
    pub horizon: usize,
    pub trunk_widths: Vec<usize>,
    pub seed: u64,
}

impl PolicyConfig {
    /// Config with the default trunk; `heads` is forced to 1 for single-head variants.
    pub fn new(variant: Variant, obs_dim: usize, action_dim: usize, heads: usize, horizon: usize, seed: u64) -> Self {
        let heads = if variant == Variant::MultiHead { heads } else { 1 };
        Self {
            variant,
            obs_dim,
            action_dim,
            heads,
            horizon,
            trunk_widths: DEFAULT_TRUNK.to_vec(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.action_dim == 0 || self.horizon == 0 {
            return Err(Error::Argument(format!(
                "obs_dim ({}), action_dim ({}) and horizon ({}) must be positive",
                self.obs_dim, self.action_dim, self.horizon
            )));
        }
        if self.heads < 1 || self.heads > self.horizon {
            return Err(Error::Argument(format!(
                "head count {} must lie in [1, horizon={}]",
                self.heads, self.horizon
            )));
        }
        if self.variant != Variant::MultiHead && self.heads != 1 {
            return Err(Error::Argument(format!(
                "variant {} requires exactly one head, got {}",
                self.variant, self.heads
            )));
        }
        if self.trunk_widths.contains(&0) {
            return Err(Error::Argument("trunk widths must be positive".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.obs_dim + usize::from(self.variant.time_in_policy())
    }

    fn feature_dim(&self) -> usize {
        self.trunk_widths.last().copied().unwrap_or_else(|| self.input_dim())
    }

    /// Expected `(name, shape)` of every parameter tensor, in storage order.
    pub fn param_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut layout = Vec::new();
        let mut fan_in = self.input_dim();
        for (i, &w) in self.trunk_widths.iter().enumerate() {
            layout.push((format!("policy.trunk.{i}.weight"), vec![fan_in, w]));
            layout.push((format!("policy.trunk.{i}.bias"), vec![w]));
            fan_in = w;
        }
        let out = self.heads * self.action_dim;
        layout.push(("policy.heads.weight".into(), vec![fan_in, out]));
        layout.push(("policy.heads.bias".into(), vec![out]));
        layout.push(("policy.heads.logstd".into(), vec![self.heads, self.action_dim]));
        layout
    }
}

/// Distribution emitted at one step, tagged with the head that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    pub mean: Vec<f64>,
    pub logstd: Vec<f64>,
    pub head: usize,
}

impl ActionDistribution {
    pub fn entropy(&self) -> f64 {
        gaussian_entropy(&self.logstd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    config: PolicyConfig,
    params: Vec<Tensor>,
}

impl Policy {
    /// Deterministic initialization from `config.seed`.
    pub fn build(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = Vec::new();
        let mut sizes = vec![config.input_dim()];
        sizes.extend(&config.trunk_widths);
        mlp::init_layers(&sizes, &mut rng, &mut params);
        let out = config.heads * config.action_dim;
        params.push(mlp::uniform_fan_in(
            config.feature_dim(),
            out,
            HEAD_INIT_SCALE,
            &mut rng,
        ));
        params.push(Tensor::zeros(&[out]));
        params.push(Tensor::full(&[config.heads, config.action_dim], INITIAL_LOGSTD));
        Ok(Self { config, params })
    }

    /// Wraps existing tensors after checking them against the config's layout.
    pub fn from_params(config: PolicyConfig, params: Vec<Tensor>) -> Result<Self> {
        config.validate()?;
        let layout = config.param_layout();
        if layout.len() != params.len() {
            return Err(Error::Dimension(format!(
                "policy expects {} parameter tensors, got {}",
                layout.len(),
                params.len()
            )));
        }
        for ((name, shape), p) in layout.iter().zip(&params) {
            if p.shape() != shape.as_slice() {
                return Err(Error::dims(name, shape, p.shape()));
            }
            if !p.is_finite() {
                return Err(Error::Numeric(format!("{name} contains non-finite values")));
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> Vec<String> {
        self.config.param_layout().into_iter().map(|(n, _)| n).collect()
    }

    fn trunk_len(&self) -> usize {
        2 * self.config.trunk_widths.len()
    }

    /// Trunk input row: the observation, plus `t / T` for the time-obs variant.
    pub fn input_row(&self, obs: &[f64], t: usize) -> Result<Vec<f64>> {
        if obs.len() != self.config.obs_dim {
            return Err(Error::Argument(format!(
                "observation has length {}, policy expects {}",
                obs.len(),
                self.config.obs_dim
            )));
        }
        let mut row = obs.to_vec();
        if self.config.variant.time_in_policy() {
            row.push(t as f64 / self.config.horizon as f64);
        }
        Ok(row)
    }

    fn check_time(&self, t: usize) -> Result<()> {
        if t >= self.config.horizon {
            return Err(Error::Argument(format!(
                "episode step {t} outside [0, {})",
                self.config.horizon
            )));
        }
        Ok(())
    }

    pub fn head_for(&self, t: usize) -> usize {
        select_head(t, self.config.horizon, self.config.heads).expect("validated config")
    }

    pub fn forward(&self, obs: &[f64], t: usize) -> Result<ActionDistribution> {
        self.check_time(t)?;
        let input = Tensor::new(vec![1, self.config.input_dim()], self.input_row(obs, t)?)?;
        let n = self.trunk_len();
        let features = mlp::tanh_stack(&self.params[..n], &input)?;
        let all_means = features.affine(&self.params[n], &self.params[n + 1])?;
        let head = self.head_for(t);
        let d = self.config.action_dim;
        let mean = all_means.data()[head * d..(head + 1) * d].to_vec();
        let logstd = self.params[n + 2].row(head).to_vec();
        Ok(ActionDistribution { mean, logstd, head })
    }

    /// Log-density of `action` and entropy of the head active at `t`.
    pub fn log_prob_and_entropy(&self, obs: &[f64], t: usize, action: &[f64]) -> Result<(f64, f64)> {
        let dist = self.forward(obs, t)?;
        let logp = gaussian_logprob(&dist.mean, &dist.logstd, action).map_err(|e| Error::Argument(e.to_string()))?;
        Ok((logp, dist.entropy()))
    }

    /// Records the parameters as tape leaves.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        tape.params(&self.params)
    }

    /// Batched, differentiable log-probs and entropies (`[batch]` each) of
    /// `actions` at the recorded `(obs, t)` pairs. `vars` come from [`Policy::bind`].
    pub fn log_prob_and_entropy_taped(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        inputs: &Tensor,
        times: &[usize],
        actions: Tensor,
    ) -> Result<(Var, Var)> {
        if inputs.rows() != times.len() || actions.rows() != times.len() {
            return Err(Error::Argument(format!(
                "batch mismatch: {} inputs, {} times, {} actions",
                inputs.rows(),
                times.len(),
                actions.rows()
            )));
        }
        let heads = times
            .iter()
            .map(|&t| {
                self.check_time(t)?;
                Ok(self.head_for(t))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = self.trunk_len();
        let x = tape.constant(inputs.clone());
        let features = mlp::tanh_stack_taped(tape, &vars[..n], x)?;
        let all_means = tape.affine(features, vars[n], vars[n + 1])?;
        let mean = tape.gather_blocks(all_means, self.config.action_dim, &heads)?;
        let logstd = tape.gather_rows(vars[n + 2], &heads)?;
        let logp = tape.gaussian_logprob(mean, logstd, actions)?;
        let entropy = tape.gaussian_entropy(logstd)?;
        Ok((logp, entropy))
    }
}

/// Draws `mean + exp(logstd) * z`, `z ~ N(0, I)`, and its log-density.
pub fn sample_action(dist: &ActionDistribution, rng: &mut impl Rng) -> (Vec<f64>, f64) {
    let action: Vec<f64> = dist
        .mean
        .iter()
        .zip(&dist.logstd)
        .map(|(&mu, &ls)| {
            let z: f64 = rng.sample(StandardNormal);
            mu + ls.exp() * z
        })
        .collect();
    let logp = gaussian_logprob(&dist.mean, &dist.logstd, &action).expect("matching lengths");
    (action, logp)
}

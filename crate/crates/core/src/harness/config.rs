//! Run configuration and its flat `key = value` file format.
//!
//! One assignment per line, dotted keys for sections, `#` starts a comment.
//! Lists are comma separated. Any key left out falls back to the default
//! derived from `env`, `policy.variant`, `policy.heads` and `seed`.
//!
//! ```text
//! env = pick-place-lite
//! seed = 3
//! policy.variant = multihead
//! policy.heads = 8
//! ppo.iterations = 150
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::seeds::derive_seed;
use crate::envs::EnvName;
use crate::error::{Error, Result};
use crate::policy::{PolicyConfig, Variant, DEFAULT_TRUNK};
use crate::ppo::PpoConfig;

/// Default head count for multi-head runs on `env`.
pub fn default_heads(env: EnvName) -> usize {
    match env {
        EnvName::TwoPhaseProbe => 2,
        _ => 8,
    }
}

/// Default PPO settings for `env`, including its training budget.
pub fn default_ppo(env: EnvName) -> PpoConfig {
    match env {
        // 100 two-step episodes per iteration
        EnvName::TwoPhaseProbe => PpoConfig {
            steps_per_iter: 200,
            iterations: 200,
            ..PpoConfig::default()
        },
        // 600k environment steps
        _ => PpoConfig {
            iterations: 300,
            ..PpoConfig::default()
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvName,
    pub policy: PolicyConfig,
    pub value_widths: Vec<usize>,
    pub ppo: PpoConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub eval_episodes: usize,
    pub eval_interval: usize,
}

impl RunConfig {
    /// Defaults for one run; the policy seed is derived from `seed`.
    pub fn new(env: EnvName, variant: Variant, heads: usize, seed: u64) -> Self {
        let spec = env.spec();
        Self {
            env,
            policy: PolicyConfig::new(
                variant,
                spec.obs_dim,
                spec.action_dim,
                heads,
                spec.horizon,
                derive_seed(seed, "policy"),
            ),
            value_widths: DEFAULT_TRUNK.to_vec(),
            ppo: default_ppo(env),
            seed,
            out_dir: PathBuf::from("runs")
                .join(env.as_str())
                .join(variant.as_str())
                .join(format!("seed{seed}")),
            eval_episodes: 20,
            eval_interval: 10,
        }
    }

    /// Replaces the master seed and re-derives the policy seed from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.policy.seed = derive_seed(seed, "policy");
        self
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.env.spec();
        self.policy.validate()?;
        if self.policy.obs_dim != spec.obs_dim
            || self.policy.action_dim != spec.action_dim
            || self.policy.horizon != spec.horizon
        {
            return Err(Error::Dimension(format!(
                "policy dims (obs {}, action {}, T {}) do not match {} (obs {}, action {}, T {})",
                self.policy.obs_dim,
                self.policy.action_dim,
                self.policy.horizon,
                self.env,
                spec.obs_dim,
                spec.action_dim,
                spec.horizon
            )));
        }
        if self.value_widths.contains(&0) {
            return Err(Error::Argument("value widths must be positive".into()));
        }
        self.ppo.validate(spec.horizon)?;
        if self.eval_episodes == 0 || self.eval_interval == 0 {
            return Err(Error::Argument(
                "eval.episodes and eval.interval must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn emit(&self) -> String {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let p = &self.ppo;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("env", self.env.to_string());
        kv("seed", self.seed.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("eval.episodes", self.eval_episodes.to_string());
        kv("eval.interval", self.eval_interval.to_string());
        kv("policy.variant", self.policy.variant.to_string());
        kv("policy.heads", self.policy.heads.to_string());
        kv("policy.obs_dim", self.policy.obs_dim.to_string());
        kv("policy.action_dim", self.policy.action_dim.to_string());
        kv("policy.horizon", self.policy.horizon.to_string());
        kv("policy.trunk_widths", list(&self.policy.trunk_widths));
        kv("policy.seed", self.policy.seed.to_string());
        kv("value.widths", list(&self.value_widths));
        kv("ppo.gamma", format!("{:?}", p.gamma));
        kv("ppo.gae_lambda", format!("{:?}", p.gae_lambda));
        kv("ppo.clip", format!("{:?}", p.clip));
        kv("ppo.lr", format!("{:?}", p.lr));
        kv("ppo.epochs", p.epochs.to_string());
        kv("ppo.minibatch", p.minibatch.to_string());
        kv("ppo.entropy_coef", format!("{:?}", p.entropy_coef));
        kv("ppo.value_coef", format!("{:?}", p.value_coef));
        kv("ppo.max_grad_norm", format!("{:?}", p.max_grad_norm));
        kv("ppo.steps_per_iter", p.steps_per_iter.to_string());
        kv("ppo.iterations", p.iterations.to_string());
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::format(
                    format!("config line {}", lineno + 1),
                    format!("expected `key = value`, got `{raw}`"),
                )
            })?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if entries.insert(k.clone(), v).is_some() {
                return Err(Error::format(
                    format!("config line {}", lineno + 1),
                    format!("duplicate key `{k}`"),
                ));
            }
        }

        let mut take = |key: &str| entries.remove(key);
        let env: EnvName = parse_value(
            "env",
            take("env").ok_or_else(|| Error::format("config", "missing `env`"))?,
        )?;
        let variant: Variant = match take("policy.variant") {
            Some(v) => parse_value("policy.variant", v)?,
            None => Variant::MultiHead,
        };
        let heads = match take("policy.heads") {
            Some(v) => parse_value("policy.heads", v)?,
            None if variant == Variant::MultiHead => default_heads(env),
            None => 1,
        };
        let seed = match take("seed") {
            Some(v) => parse_value("seed", v)?,
            None => 0,
        };
        let mut cfg = RunConfig::new(env, variant, heads, seed);

        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = take($key) {
                    $field = parse_value($key, v)?;
                }
            };
        }
        macro_rules! set_list {
            ($key:literal, $field:expr) => {
                if let Some(v) = take($key) {
                    $field = parse_list($key, &v)?;
                }
            };
        }
        if let Some(v) = take("out_dir") {
            cfg.out_dir = PathBuf::from(v);
        }
        set!("eval.episodes", cfg.eval_episodes);
        set!("eval.interval", cfg.eval_interval);
        set!("policy.obs_dim", cfg.policy.obs_dim);
        set!("policy.action_dim", cfg.policy.action_dim);
        set!("policy.horizon", cfg.policy.horizon);
        set_list!("policy.trunk_widths", cfg.policy.trunk_widths);
        set!("policy.seed", cfg.policy.seed);
        set_list!("value.widths", cfg.value_widths);
        set!("ppo.gamma", cfg.ppo.gamma);
        set!("ppo.gae_lambda", cfg.ppo.gae_lambda);
        set!("ppo.clip", cfg.ppo.clip);
        set!("ppo.lr", cfg.ppo.lr);
        set!("ppo.epochs", cfg.ppo.epochs);
        set!("ppo.minibatch", cfg.ppo.minibatch);
        set!("ppo.entropy_coef", cfg.ppo.entropy_coef);
        set!("ppo.value_coef", cfg.ppo.value_coef);
        set!("ppo.max_grad_norm", cfg.ppo.max_grad_norm);
        set!("ppo.steps_per_iter", cfg.ppo.steps_per_iter);
        set!("ppo.iterations", cfg.ppo.iterations);

        if let Some(key) = entries.keys().next() {
            return Err(Error::format("config", format!("unknown key `{key}`")));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format { context, message } => Error::Format {
                context: format!("{} ({context})", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.emit()).map_err(|e| Error::io(path, e))
    }
}

fn parse_value<T: FromStr>(key: &str, v: String) -> Result<T> {
    v.parse()
        .map_err(|_| Error::format("config", format!("bad value `{v}` for `{key}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_value(key, x.trim().to_string())).collect()
}

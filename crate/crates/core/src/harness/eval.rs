use std::path::Path;

use super::checkpoint::load_checkpoint;
use crate::envs::{env_reset, EnvSpec};
use crate::error::{Error, Result};
use crate::policy::Policy;

/// Aggregate of deterministic (mean-action) evaluation episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mean_return: f64,
    /// Population standard deviation; 0 for a single episode.
    pub return_std: f64,
    /// Fraction of episodes in which the success predicate held at some step.
    pub success_rate: f64,
    pub episodes: usize,
    pub seeds: Vec<u64>,
}

/// Rolls out `n_episodes` with the distribution means on reset seeds
/// `base_seed..base_seed + n_episodes`.
pub fn evaluate_policy(policy: &Policy, spec: &EnvSpec, n_episodes: usize, base_seed: u64) -> Result<EvalReport> {
    if n_episodes == 0 {
        return Err(Error::Argument("evaluation needs at least one episode".into()));
    }
    check_dims(policy, spec)?;
    let seeds: Vec<u64> = (0..n_episodes as u64).map(|i| base_seed.wrapping_add(i)).collect();
    let mut returns = Vec::with_capacity(n_episodes);
    let mut successes = 0usize;
    for &seed in &seeds {
        let (mut state, mut obs) = env_reset(spec, seed);
        let (mut total, mut succeeded) = (0.0, false);
        for t in 0..spec.horizon {
            let dist = policy.forward(&obs, t)?;
            let step = state.step(&dist.mean)?;
            total += step.reward;
            succeeded |= step.success;
            obs = step.observation;
        }
        returns.push(total);
        successes += usize::from(succeeded);
    }
    let n = n_episodes as f64;
    let mean_return = returns.iter().sum::<f64>() / n;
    let var = returns
        .iter()
        .map(|r| (r - mean_return) * (r - mean_return))
        .sum::<f64>()
        / n;
    Ok(EvalReport {
        mean_return,
        return_std: var.sqrt(),
        success_rate: successes as f64 / n,
        episodes: n_episodes,
        seeds,
    })
}

pub(crate) fn check_dims(policy: &Policy, spec: &EnvSpec) -> Result<()> {
    let c = policy.config();
    if c.obs_dim != spec.obs_dim || c.action_dim != spec.action_dim || c.horizon != spec.horizon {
        return Err(Error::Dimension(format!(
            "policy (obs {}, action {}, T {}) does not fit {} (obs {}, action {}, T {})",
            c.obs_dim, c.action_dim, c.horizon, spec.name, spec.obs_dim, spec.action_dim, spec.horizon
        )));
    }
    Ok(())
}

/// Loads a checkpoint and evaluates its policy on `spec`.
pub fn evaluate(checkpoint: &Path, spec: &EnvSpec, n_episodes: usize, base_seed: u64) -> Result<EvalReport> {
    let (policy, _) = load_checkpoint(checkpoint)?;
    evaluate_policy(&policy, spec, n_episodes, base_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvName;
    use crate::policy::{PolicyConfig, Variant};

    fn fresh(env: EnvName) -> Policy {
        let spec = env.spec();
        Policy::build(PolicyConfig::new(
            Variant::MultiHead,
            spec.obs_dim,
            spec.action_dim,
            4,
            spec.horizon,
            1,
        ))
        .unwrap()
    }

    #[test]
    fn fresh_policy_rarely_succeeds_at_pushing() {
        let report = evaluate_policy(&fresh(EnvName::PushLite), &EnvName::PushLite.spec(), 50, 0).unwrap();
        assert!(report.success_rate < 0.05);
        assert_eq!(report.episodes, 50);
        assert_eq!(report.seeds, (0..50).collect::<Vec<u64>>());
    }

    #[test]
    fn single_episode_has_zero_std_and_is_repeatable() {
        let p = fresh(EnvName::PickPlaceLite);
        let spec = EnvName::PickPlaceLite.spec();
        let a = evaluate_policy(&p, &spec, 1, 7).unwrap();
        assert_eq!(a.return_std, 0.0);
        assert_eq!(a, evaluate_policy(&p, &spec, 1, 7).unwrap());
        assert!(evaluate_policy(&p, &spec, 0, 7).is_err());
        assert!(matches!(
            evaluate_policy(&p, &EnvName::PushLite.spec(), 1, 0),
            Err(Error::Dimension(_))
        ));
    }
}

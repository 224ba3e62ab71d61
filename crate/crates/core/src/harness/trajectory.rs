use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::checkpoint::load_checkpoint;
use super::eval::check_dims;
use crate::envs::{env_reset, EnvSpec, Point};
use crate::error::{Error, Result};
use crate::policy::Policy;

/// One step of a deterministic episode, written as a JSON object per line
/// with fields in declaration order.
///
/// `p`, `o`, `g` and `held` describe the state the action was chosen in;
/// `action` is the clipped command actually applied, `reward` and `success`
/// are the outcome of applying it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub head_index: usize,
    pub p: Point,
    pub o: Point,
    pub g: Point,
    pub held: bool,
    pub action: Vec<f64>,
    pub reward: f64,
    pub success: bool,
}

/// Runs one mean-action episode from reset seed `seed`.
pub fn trajectory_records(policy: &Policy, spec: &EnvSpec, seed: u64) -> Result<Vec<TrajectoryRecord>> {
    check_dims(policy, spec)?;
    let (mut state, mut obs) = env_reset(spec, seed);
    let mut records = Vec::with_capacity(spec.horizon);
    for t in 0..spec.horizon {
        let dist = policy.forward(&obs, t)?;
        let (p, o, g, held) = (state.agent, state.object, state.goal, state.held);
        let step = state.step(&dist.mean)?;
        records.push(TrajectoryRecord {
            t,
            head_index: dist.head,
            p,
            o,
            g,
            held,
            action: spec.clip_action(&dist.mean),
            reward: step.reward,
            success: step.success,
        });
        obs = step.observation;
    }
    Ok(records)
}

/// Loads a checkpoint and writes its deterministic episode to `out`.
pub fn dump_trajectory(checkpoint: &Path, spec: &EnvSpec, seed: u64, out: &Path) -> Result<Vec<TrajectoryRecord>> {
    let (policy, _) = load_checkpoint(checkpoint)?;
    let records = trajectory_records(&policy, spec, seed)?;
    let io = |e| Error::io(out, e);
    let mut w = BufWriter::new(File::create(out).map_err(io)?);
    for r in &records {
        let line = serde_json::to_string(r).map_err(|e| Error::format("trajectory", e.to_string()))?;
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(records)
}

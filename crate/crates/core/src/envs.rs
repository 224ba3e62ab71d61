//! Deterministic 2D kinematic manipulation tasks on the unit square.
//!
//! | env              | obs                      | action                  | T   |
//! |------------------|--------------------------|-------------------------|-----|
//! | push-lite        | `[p, o, g]` (6)          | `Δp ∈ [-0.05, 0.05]²`   | 100 |
//! | pick-place-lite  | `[p, o, g, held]` (7)    | `Δp`, `grip ∈ [-1, 1]`  | 100 |
//! | lid-close-lite   | `[p, o, g, held]` (7)    | `Δp`, `grip ∈ [-1, 1]`  | 100 |
//! | two-phase-probe  | `[1]` (1)                | `a ∈ [-1, 1]`           | 2   |
//!
//! Episodes always run the full horizon; success never ends an episode.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const AGENT_START: [f64; 2] = [0.1, 0.1];
pub const SPAWN_LOW: f64 = 0.3;
pub const SPAWN_HIGH: f64 = 0.7;
pub const MIN_GOAL_DISTANCE: f64 = 0.2;
pub const MAX_MOVE: f64 = 0.05;
pub const PUSH_RADIUS: f64 = 0.06;
pub const PUSH_SUCCESS_TOL: f64 = 0.05;
pub const GRASP_RADIUS: f64 = 0.05;
pub const PLACE_SUCCESS_TOL: f64 = 0.07;
pub const LID_SUCCESS_TOL: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EnvName {
    PushLite,
    PickPlaceLite,
    LidCloseLite,
    TwoPhaseProbe,
}

impl EnvName {
    pub const ALL: [EnvName; 4] = [
        EnvName::PushLite,
        EnvName::PickPlaceLite,
        EnvName::LidCloseLite,
        EnvName::TwoPhaseProbe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::PushLite => "push-lite",
            EnvName::PickPlaceLite => "pick-place-lite",
            EnvName::LidCloseLite => "lid-close-lite",
            EnvName::TwoPhaseProbe => "two-phase-probe",
        }
    }

    pub fn spec(self) -> EnvSpec {
        EnvSpec::new(self)
    }

    fn has_gripper(self) -> bool {
        matches!(self, EnvName::PickPlaceLite | EnvName::LidCloseLite)
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvName::ALL.into_iter().find(|e| e.as_str() == s).ok_or_else(|| {
            Error::Argument(format!(
                "unknown environment `{s}` (expected push-lite, pick-place-lite, lid-close-lite or two-phase-probe)"
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: EnvName,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
}

impl EnvSpec {
    pub fn new(name: EnvName) -> Self {
        let (obs_dim, low, high, horizon) = match name {
            EnvName::PushLite => (6, vec![-MAX_MOVE; 2], vec![MAX_MOVE; 2], 100),
            EnvName::PickPlaceLite | EnvName::LidCloseLite => {
                (7, vec![-MAX_MOVE, -MAX_MOVE, -1.0], vec![MAX_MOVE, MAX_MOVE, 1.0], 100)
            }
            EnvName::TwoPhaseProbe => (1, vec![-1.0], vec![1.0], 2),
        };
        Self {
            name,
            obs_dim,
            action_dim: low.len(),
            horizon,
            action_low: low,
            action_high: high,
        }
    }

    /// Clamps each coordinate into the action box.
    pub fn clip_action(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| a.clamp(lo, hi))
            .collect()
    }

    /// Per-step reward bounds `(min, max)`.
    pub fn reward_bounds(&self) -> (f64, f64) {
        let sqrt2 = std::f64::consts::SQRT_2;
        match self.name {
            EnvName::PushLite => (-1.5 * sqrt2, 5.0),
            EnvName::PickPlaceLite | EnvName::LidCloseLite => (-sqrt2, 10.5),
            EnvName::TwoPhaseProbe => (-1.0, 1.0),
        }
    }
}

/// Best achievable episode return, where it is known in closed form.
pub fn optimal_return(spec: &EnvSpec) -> Option<f64> {
    match spec.name {
        // a = +1 at t=0, a = -1 at t=1
        EnvName::TwoPhaseProbe => Some(2.0),
        _ => None,
    }
}

pub type Point = [f64; 2];

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn clamp_unit(p: Point) -> Point {
    [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub spec: EnvSpec,
    pub agent: Point,
    pub object: Point,
    pub goal: Point,
    pub held: bool,
    /// Lid-close only: the last release happened inside the seat tolerance.
    pub seated_release: bool,
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub success: bool,
}

/// Starts an episode; the layout depends only on `seed`.
pub fn env_reset(spec: &EnvSpec, seed: u64) -> (EnvState, Vec<f64>) {
    let mut state = EnvState {
        spec: spec.clone(),
        agent: [0.0; 2],
        object: [0.0; 2],
        goal: [0.0; 2],
        held: false,
        seated_release: false,
        t: 0,
    };
    if spec.name != EnvName::TwoPhaseProbe {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || {
            [
                rng.gen_range(SPAWN_LOW..=SPAWN_HIGH),
                rng.gen_range(SPAWN_LOW..=SPAWN_HIGH),
            ]
        };
        state.agent = AGENT_START;
        state.object = draw();
        state.goal = draw();
        while dist(state.object, state.goal) < MIN_GOAL_DISTANCE {
            state.goal = draw();
        }
    }
    let obs = state.observation();
    (state, obs)
}

impl EnvState {
    pub fn observation(&self) -> Vec<f64> {
        match self.spec.name {
            EnvName::TwoPhaseProbe => vec![1.0],
            name => {
                let mut obs = vec![
                    self.agent[0],
                    self.agent[1],
                    self.object[0],
                    self.object[1],
                    self.goal[0],
                    self.goal[1],
                ];
                if name.has_gripper() {
                    obs.push(f64::from(u8::from(self.held)));
                }
                obs
            }
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.t >= self.spec.horizon
    }

    /// Clips `action`, applies the env dynamics, and scores the new state.
    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.is_terminal() {
            return Err(Error::Usage(format!(
                "step called on a finished episode (t = {} = horizon)",
                self.t
            )));
        }
        if action.len() != self.spec.action_dim {
            return Err(Error::Argument(format!(
                "{} expects {} action values, got {}",
                self.spec.name,
                self.spec.action_dim,
                action.len()
            )));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numeric(format!("non-finite action {action:?}")));
        }
        let a = self.spec.clip_action(action);
        let step_t = self.t;
        let (reward, success) = match self.spec.name {
            EnvName::PushLite => self.step_push(&a),
            EnvName::PickPlaceLite | EnvName::LidCloseLite => self.step_grasp(&a),
            EnvName::TwoPhaseProbe => (if step_t == 0 { a[0] } else { -a[0] }, false),
        };
        self.t += 1;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminal: self.t == self.spec.horizon,
            success,
        })
    }

    fn move_agent(&mut self, a: &[f64]) {
        self.agent = clamp_unit([self.agent[0] + a[0], self.agent[1] + a[1]]);
    }

    fn step_push(&mut self, a: &[f64]) -> (f64, bool) {
        self.move_agent(a);
        let gap = dist(self.agent, self.object);
        if gap < PUSH_RADIUS {
            let dir = if gap > 1e-12 {
                [
                    (self.object[0] - self.agent[0]) / gap,
                    (self.object[1] - self.agent[1]) / gap,
                ]
            } else {
                let norm = a[0].hypot(a[1]);
                if norm > 0.0 {
                    [a[0] / norm, a[1] / norm]
                } else {
                    [1.0, 0.0]
                }
            };
            self.object = clamp_unit([
                self.agent[0] + PUSH_RADIUS * dir[0],
                self.agent[1] + PUSH_RADIUS * dir[1],
            ]);
        }
        let to_goal = dist(self.object, self.goal);
        let success = to_goal < PUSH_SUCCESS_TOL;
        let reward = -0.5 * dist(self.agent, self.object) - to_goal + if success { 5.0 } else { 0.0 };
        (reward, success)
    }

    fn step_grasp(&mut self, a: &[f64]) -> (f64, bool) {
        self.move_agent(a);
        let close = a[2] > 0.0;
        let lid = self.spec.name == EnvName::LidCloseLite;
        if close {
            if self.held {
                self.object = self.agent;
            } else if dist(self.agent, self.object) < GRASP_RADIUS {
                self.held = true;
                self.object = self.agent;
                self.seated_release = false;
            }
        } else if self.held {
            self.held = false;
            if lid {
                self.seated_release = dist(self.object, self.goal) < LID_SUCCESS_TOL;
            }
        }
        let to_goal = dist(self.object, self.goal);
        let success = if lid {
            !self.held && self.seated_release && to_goal < LID_SUCCESS_TOL
        } else {
            !self.held && to_goal < PLACE_SUCCESS_TOL
        };
        let held = f64::from(u8::from(self.held));
        let reward = -(1.0 - held) * dist(self.agent, self.object) - held * to_goal
            + 0.5 * held
            + if success { 10.0 } else { 0.0 };
        (reward, success)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reset_is_deterministic_and_well_separated() {
        let spec = EnvName::PushLite.spec();
        assert_eq!(env_reset(&spec, 5), env_reset(&spec, 5));
        for seed in 0..1000 {
            let (s, _) = env_reset(&spec, seed);
            assert!(dist(s.object, s.goal) >= MIN_GOAL_DISTANCE);
            assert_eq!(s.agent, AGENT_START);
            assert!(s
                .object
                .iter()
                .chain(&s.goal)
                .all(|v| (SPAWN_LOW..=SPAWN_HIGH).contains(v)));
        }
    }

    #[test]
    fn observation_layouts() {
        let (s, obs) = env_reset(&EnvName::PushLite.spec(), 3);
        assert_eq!(
            obs,
            vec![s.agent[0], s.agent[1], s.object[0], s.object[1], s.goal[0], s.goal[1]]
        );
        let (s, obs) = env_reset(&EnvName::PickPlaceLite.spec(), 3);
        assert_eq!(obs.len(), 7);
        assert_eq!(obs[6], 0.0);
        assert_eq!(&obs[2..4], &s.object);
        let (_, obs) = env_reset(&EnvName::TwoPhaseProbe.spec(), 3);
        assert_eq!(obs, vec![1.0]);
    }

    #[test]
    fn push_without_contact_leaves_object() {
        let (mut s, _) = env_reset(&EnvName::PushLite.spec(), 1);
        let before = s.object;
        for _ in 0..3 {
            s.step(&[-0.05, -0.05]).unwrap();
        }
        assert_eq!(s.object, before);
    }

    #[test]
    fn push_contact_moves_object_to_contact_radius() {
        let (mut s, _) = env_reset(&EnvName::PushLite.spec(), 1);
        s.agent = [0.5, 0.5];
        s.object = [0.58, 0.5];
        s.goal = [0.9, 0.9];
        s.step(&[0.05, 0.0]).unwrap();
        assert!((s.agent[0] - 0.55).abs() < 1e-12);
        assert!((s.object[0] - 0.61).abs() < 1e-12);
        assert!((s.object[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_action_only_advances_time() {
        for name in [EnvName::PushLite, EnvName::PickPlaceLite, EnvName::LidCloseLite] {
            let (mut s, _) = env_reset(&name.spec(), 9);
            let before = s.clone();
            let r = s.step(&vec![0.0; s.spec.action_dim]).unwrap();
            assert_eq!(s.t, 1);
            assert_eq!(
                (s.agent, s.object, s.goal, s.held),
                (before.agent, before.object, before.goal, before.held)
            );
            let shaping = match name {
                EnvName::PushLite => -0.5 * dist(s.agent, s.object) - dist(s.object, s.goal),
                _ => -dist(s.agent, s.object),
            };
            assert_eq!(r.reward, shaping);
        }
    }

    #[test]
    fn grasp_transport_release() {
        let (mut s, _) = env_reset(&EnvName::PickPlaceLite.spec(), 2);
        s.agent = [0.4, 0.4];
        s.object = [0.43, 0.42];
        s.goal = [0.6, 0.4];
        let r = s.step(&[0.0, 0.0, 1.0]).unwrap();
        assert!(s.held);
        assert_eq!(s.object, s.agent);
        assert_eq!(r.observation[6], 1.0);
        assert!((r.reward - (0.5 - dist(s.object, s.goal))).abs() < 1e-12);
        for _ in 0..4 {
            s.step(&[0.05, 0.0, 0.5]).unwrap();
            assert!(dist(s.agent, s.object) <= 1e-9);
        }
        assert!((s.agent[0] - 0.6).abs() < 1e-12);
        let r = s.step(&[0.03, 0.0, -1.0]).unwrap();
        assert!(!s.held);
        assert!(r.success);
        assert!((s.object[0] - 0.6).abs() < 1e-12, "object stays where released");
        assert!((r.reward - (10.0 - 0.03)).abs() < 1e-12);
    }

    #[test]
    fn grasp_requires_proximity() {
        let (mut s, _) = env_reset(&EnvName::PickPlaceLite.spec(), 2);
        s.agent = [0.4, 0.4];
        s.object = [0.46, 0.4];
        s.step(&[0.0, 0.0, 1.0]).unwrap();
        assert!(!s.held);
    }

    #[test]
    fn lid_needs_precise_release() {
        let (mut s, _) = env_reset(&EnvName::LidCloseLite.spec(), 4);
        s.agent = [0.5, 0.5];
        s.object = [0.5, 0.5];
        s.goal = [0.55, 0.5];
        s.step(&[0.0, 0.0, 1.0]).unwrap();
        // release 0.05 away: inside the pick-place tolerance, outside the seat tolerance
        let r = s.step(&[0.0, 0.0, -1.0]).unwrap();
        assert!(!r.success);
        s.step(&[0.0, 0.0, 1.0]).unwrap();
        assert!(s.held);
        s.step(&[0.04, 0.0, 1.0]).unwrap();
        let r = s.step(&[0.0, 0.0, -1.0]).unwrap();
        assert!(r.success);
        assert!(s.seated_release);
        let r = s.step(&[0.0, 0.0, 0.0]).unwrap();
        assert!(r.success, "success holds while the lid rests in the seat");
    }

    #[test]
    fn probe_rewards_and_optimum() {
        let spec = EnvName::TwoPhaseProbe.spec();
        assert_eq!(optimal_return(&spec), Some(2.0));
        assert_eq!(optimal_return(&EnvName::PushLite.spec()), None);
        let (mut s, _) = env_reset(&spec, 0);
        let r0 = s.step(&[3.0]).unwrap();
        let r1 = s.step(&[-1.0]).unwrap();
        assert_eq!(r0.reward + r1.reward, 2.0);
        assert!(!r0.terminal && r1.terminal);
        for c in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            let (mut s, _) = env_reset(&spec, 0);
            let ret = s.step(&[c]).unwrap().reward + s.step(&[c]).unwrap().reward;
            assert_eq!(ret, 0.0);
        }
    }

    #[test]
    fn terminal_and_usage_errors() {
        let (mut s, _) = env_reset(&EnvName::PushLite.spec(), 0);
        for i in 0..100 {
            let r = s.step(&[0.01, 0.0]).unwrap();
            assert_eq!(r.terminal, i == 99);
        }
        assert!(matches!(s.step(&[0.0, 0.0]), Err(Error::Usage(_))));
        let (mut s, _) = env_reset(&EnvName::PushLite.spec(), 0);
        assert!(matches!(s.step(&[0.0]), Err(Error::Argument(_))));
        assert!(matches!(s.step(&[f64::NAN, 0.0]), Err(Error::Numeric(_))));
    }

    #[test]
    fn names_round_trip() {
        for name in EnvName::ALL {
            assert_eq!(name.as_str().parse::<EnvName>().unwrap(), name);
        }
        assert!("push".parse::<EnvName>().is_err());
    }

    proptest! {
        #[test]
        fn containment_bounds_and_replay(
            env_idx in 0usize..3,
            seed in any::<u64>(),
            actions in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 100),
        ) {
            let name = [EnvName::PushLite, EnvName::PickPlaceLite, EnvName::LidCloseLite][env_idx];
            let spec = name.spec();
            let (lo, hi) = spec.reward_bounds();
            let run = || {
                let (mut s, _) = env_reset(&spec, seed);
                let mut rewards = Vec::new();
                let mut prev_held = false;
                for a in &actions {
                    let r = s.step(&a[..spec.action_dim]).unwrap();
                    for v in s.agent.iter().chain(&s.object).chain(&s.goal) {
                        prop_assert!((0.0..=1.0).contains(v));
                    }
                    prop_assert!(r.reward >= lo && r.reward <= hi, "reward {}", r.reward);
                    if s.held {
                        prop_assert!(dist(s.agent, s.object) <= 1e-9);
                    }
                    if prev_held && spec.action_dim == 3 && a[2] > 0.0 {
                        prop_assert!(s.held);
                    }
                    prev_held = s.held;
                    rewards.push(r.reward);
                }
                Ok(rewards)
            };
            let first = run()?;
            let second = run()?;
            prop_assert_eq!(first, second);
        }
    }
}

//! Time-indexed multi-head policies trained with PPO on small deterministic
//! 2D manipulation tasks, with vanilla and time-in-observation baselines.

pub mod envs;
pub mod error;
pub mod harness;
pub mod ndmath;
pub mod policy;
pub mod ppo;

pub use error::{Error, Result};

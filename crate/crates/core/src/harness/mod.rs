//! Experiment orchestration: configs, training runs, evaluation,
//! multi-seed comparisons, checkpoints, trajectory dumps and plots.

mod checkpoint;
mod compare;
mod config;
mod eval;
mod plot;
mod seeds;
mod train;
mod trajectory;

pub use checkpoint::{decode as decode_checkpoint, encode as encode_checkpoint, load_checkpoint, save_checkpoint};
pub use compare::{compare, compare_with, Cell, CompareOptions, ComparisonTable, Metric, RunOutcome, Verdict};
pub use config::{default_heads, default_ppo, RunConfig};
pub use eval::{evaluate, evaluate_policy, EvalReport};
pub use plot::{plot_curves, render_svg, CurveSource, Series};
pub use seeds::derive_seed;
pub use train::{
    run_training, run_training_with, MetricsRow, RunSummary, CHECKPOINT_FILE, CONFIG_FILE, CSV_COLUMNS, EVAL_SEED_BASE,
    LOG_FILE, METRICS_FILE,
};
pub use trajectory::{dump_trajectory, trajectory_records, TrajectoryRecord};

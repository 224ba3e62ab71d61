use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::save_checkpoint;
use super::config::RunConfig;
use super::eval::{evaluate_policy, EvalReport};
use super::seeds::derive_seed;
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::ppo::{collect_rollouts, compute_gae, Trainer, UpdateStats, ValueNet};

/// Reset seeds of the periodic evaluation episodes start here, so every run
/// and variant is scored on the same layouts.
pub const EVAL_SEED_BASE: u64 = 1_000_000;

pub const CSV_COLUMNS: [&str; 10] = [
    "iteration",
    "env_steps",
    "mean_return",
    "return_std",
    "success_rate",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "approx_kl",
];

pub const METRICS_FILE: &str = "metrics.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const CONFIG_FILE: &str = "config.txt";
pub const LOG_FILE: &str = "run.log";

/// One evaluation point. Row 0 is the untrained policy and carries zero losses.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub env_steps: usize,
    pub report: EvalReport,
    pub stats: UpdateStats,
}

impl MetricsRow {
    pub fn csv_line(&self) -> String {
        let s = &self.stats;
        format!(
            "{},{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            self.iteration,
            self.env_steps,
            self.report.mean_return,
            self.report.return_std,
            self.report.success_rate,
            s.policy_loss,
            s.value_loss,
            s.entropy,
            s.clip_fraction,
            s.approx_kl
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rows: Vec<MetricsRow>,
    /// Stats of every update, including iterations without an eval row.
    pub updates: Vec<UpdateStats>,
    pub final_report: EvalReport,
    pub policy: Policy,
    pub value: ValueNet,
    pub out_dir: PathBuf,
}

impl RunSummary {
    pub fn metrics_path(&self) -> PathBuf {
        self.out_dir.join(METRICS_FILE)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.out_dir.join(CHECKPOINT_FILE)
    }
}

pub fn run_training(config: &RunConfig) -> Result<RunSummary> {
    run_training_with(config, |_| {})
}

/// Trains one configuration, calling `on_row` after each evaluation.
///
/// Writes `config.txt`, `metrics.csv`, `checkpoint.ckpt` and `run.log` into
/// `config.out_dir`. Child seeds come from [`derive_seed`] with the tags
/// `"env"` (episode reset seeds), `"policy"` (initial weights; the critic
/// uses `derive_seed(policy_seed, "value")`) and `"sample"` (action noise and
/// minibatch shuffling).
pub fn run_training_with(config: &RunConfig, mut on_row: impl FnMut(&MetricsRow)) -> Result<RunSummary> {
    config.validate()?;
    let dir = &config.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    config.save(&dir.join(CONFIG_FILE))?;

    let spec = config.env.spec();
    let policy = Policy::build(config.policy.clone())?;
    let value = ValueNet::build(
        spec.obs_dim,
        spec.horizon,
        config.policy.variant,
        &config.value_widths,
        derive_seed(config.policy.seed, "value"),
    )?;
    let mut trainer = Trainer::new(policy, value, config.ppo.clone())?;
    let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "env"));
    let mut sample_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "sample"));

    let metrics_path = dir.join(METRICS_FILE);
    let file = File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut csv = BufWriter::new(file);
    let io = |e| Error::io(&metrics_path, e);
    writeln!(csv, "{}", CSV_COLUMNS.join(",")).map_err(io)?;

    let eval = |p: &Policy| evaluate_policy(p, &spec, config.eval_episodes, EVAL_SEED_BASE);
    let first = MetricsRow {
        iteration: 0,
        env_steps: 0,
        report: eval(&trainer.policy)?,
        stats: UpdateStats::default(),
    };
    writeln!(csv, "{}", first.csv_line()).map_err(io)?;
    on_row(&first);
    let mut rows = vec![first];
    let mut updates = Vec::with_capacity(config.ppo.iterations);

    let steps = config.ppo.steps_per_iter;
    for it in 1..=config.ppo.iterations {
        let outcome = (|| {
            let mut buf = collect_rollouts(
                &trainer.policy,
                &trainer.value,
                &spec,
                steps,
                &mut env_rng,
                &mut sample_rng,
            )?;
            compute_gae(&mut buf, config.ppo.gamma, config.ppo.gae_lambda);
            trainer.update(&buf, &mut sample_rng)
        })();
        let stats = match outcome {
            Ok(s) => s,
            Err(e) => {
                csv.flush().map_err(io)?;
                write_log(dir, &format!("failed at iteration {it}: {e}\n"))?;
                return Err(e);
            }
        };
        updates.push(stats);
        if it % config.eval_interval == 0 || it == config.ppo.iterations {
            let row = MetricsRow {
                iteration: it,
                env_steps: it * steps,
                report: eval(&trainer.policy)?,
                stats,
            };
            writeln!(csv, "{}", row.csv_line()).map_err(io)?;
            on_row(&row);
            rows.push(row);
        }
    }
    csv.flush().map_err(io)?;
    drop(csv);

    save_checkpoint(&trainer.policy, &trainer.value, &dir.join(CHECKPOINT_FILE))?;
    let final_report = rows.last().expect("initial row").report.clone();
    write_log(
        dir,
        &format!(
            "completed {} iterations ({} env steps): mean_return {:?}, success_rate {:?}\n",
            config.ppo.iterations,
            config.ppo.iterations * steps,
            final_report.mean_return,
            final_report.success_rate
        ),
    )?;
    Ok(RunSummary {
        rows,
        updates,
        final_report,
        policy: trainer.policy,
        value: trainer.value,
        out_dir: dir.clone(),
    })
}

fn write_log(dir: &Path, text: &str) -> Result<()> {
    let path = dir.join(LOG_FILE);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chronoskill::envs::EnvName;
use chronoskill::harness::{
    compare_with, default_heads, default_ppo, dump_trajectory, evaluate, plot_curves, run_training_with,
    CompareOptions, CurveSource, RunConfig, CONFIG_FILE, EVAL_SEED_BASE,
};
use chronoskill::policy::{PolicyConfig, Variant};
use chronoskill::{Error, Result};

#[derive(Parser)]
#[command(
    name = "chronoskill",
    version,
    about = "Train and compare time-indexed multi-head PPO policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write metrics, checkpoint and log.
    Train(TrainArgs),
    /// Evaluate a checkpoint with deterministic actions.
    Eval(EvalArgs),
    /// Run the env x variant x seed matrix and report directional verdicts.
    Compare(CompareArgs),
    /// Dump one head-labelled episode as JSON lines.
    Traj(TrajArgs),
    /// Render metrics CSVs as an SVG learning-curve figure.
    Plot(PlotArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Config file; flags given on the command line override its values.
    /// Without one, the run goes to runs/<env>/<variant>/seed<N>.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvName>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    iters: Option<usize>,
    /// Only print the final summary.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Defaults to the env in the config file next to the checkpoint.
    #[arg(long)]
    env: Option<EnvName>,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    /// First reset seed.
    #[arg(long, default_value_t = EVAL_SEED_BASE)]
    seed: u64,
}

#[derive(Args)]
struct CompareArgs {
    /// Config file whose PPO, network and eval settings apply to every run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated env names.
    #[arg(long, value_delimiter = ',', default_values_t = [EnvName::PickPlaceLite, EnvName::PushLite])]
    env: Vec<EnvName>,
    /// Comma-separated variants.
    #[arg(long, value_delimiter = ',', default_values_t = Variant::ALL)]
    variant: Vec<Variant>,
    /// Head count for multihead runs; defaults per env.
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long, default_value_t = 5)]
    seeds: usize,
    /// First master seed; runs use seed, seed+1, ...
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "runs/compare")]
    out: PathBuf,
    #[arg(long)]
    iters: Option<usize>,
}

#[derive(Args)]
struct TrajArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    env: Option<EnvName>,
    /// Reset seed of the episode.
    #[arg(long, default_value_t = EVAL_SEED_BASE)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    out: PathBuf,
    /// Metrics CSVs as `path` or `label=path`; equal labels form one series.
    #[arg(required = true)]
    csv: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::Traj(a) => traj(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chronoskill: {e}");
            ExitCode::FAILURE
        }
    }
}

fn train_config(a: &TrainArgs) -> Result<RunConfig> {
    let mut c = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let env = a.env.unwrap_or(EnvName::PushLite);
            RunConfig::new(env, a.variant.unwrap_or(Variant::MultiHead), default_heads(env), 0)
        }
    };
    let env = a.env.unwrap_or(c.env);
    let variant = a.variant.unwrap_or(c.policy.variant);
    if a.heads.is_some_and(|k| k != 1) && variant != Variant::MultiHead {
        return Err(Error::Argument(format!(
            "--heads only applies to multihead, not {variant}"
        )));
    }
    if env != c.env || variant != c.policy.variant || a.heads.is_some() {
        let unchanged = env == c.env && variant == c.policy.variant;
        let heads = a
            .heads
            .unwrap_or(if unchanged { c.policy.heads } else { default_heads(env) });
        let spec = env.spec();
        let trunk = std::mem::take(&mut c.policy.trunk_widths);
        c.policy = PolicyConfig::new(
            variant,
            spec.obs_dim,
            spec.action_dim,
            heads,
            spec.horizon,
            c.policy.seed,
        );
        c.policy.trunk_widths = trunk;
        if env != c.env {
            c.ppo = default_ppo(env);
        }
        c.env = env;
    }
    if let Some(seed) = a.seed {
        c = c.with_seed(seed);
    }
    if a.config.is_none() {
        c.out_dir = PathBuf::from("runs")
            .join(env.as_str())
            .join(variant.as_str())
            .join(format!("seed{}", c.seed));
    }
    if let Some(out) = &a.out {
        c.out_dir = out.clone();
    }
    if let Some(n) = a.iters {
        c.ppo.iterations = n;
    }
    c.validate()?;
    Ok(c)
}

fn train(a: TrainArgs) -> Result<()> {
    let config = train_config(&a)?;
    let quiet = a.quiet;
    let summary = run_training_with(&config, |row| {
        if !quiet {
            println!(
                "iter {:>5}  steps {:>9}  return {:>9.3} ± {:<8.3} success {:.2}",
                row.iteration, row.env_steps, row.report.mean_return, row.report.return_std, row.report.success_rate
            );
        }
    })?;
    let r = &summary.final_report;
    println!(
        "{} {} seed {}: return {:.3} ± {:.3}, success {:.2} -> {}",
        config.env,
        config.policy.variant,
        config.seed,
        r.mean_return,
        r.return_std,
        r.success_rate,
        summary.out_dir.display()
    );
    Ok(())
}

/// The env named on the command line, else the one recorded next to the checkpoint.
fn resolve_env(env: Option<EnvName>, checkpoint: &Path) -> Result<EnvName> {
    if let Some(env) = env {
        return Ok(env);
    }
    let sibling = checkpoint.with_file_name(CONFIG_FILE);
    if sibling.is_file() {
        return Ok(RunConfig::load(&sibling)?.env);
    }
    Err(Error::Argument(format!(
        "--env is required: no {} next to {}",
        CONFIG_FILE,
        checkpoint.display()
    )))
}

fn eval(a: EvalArgs) -> Result<()> {
    let env = resolve_env(a.env, &a.checkpoint)?;
    let r = evaluate(&a.checkpoint, &env.spec(), a.episodes, a.seed)?;
    println!(
        "{env}: {} episodes, return {:.3} ± {:.3}, success {:.3}",
        r.episodes, r.mean_return, r.return_std, r.success_rate
    );
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let mut opts = CompareOptions::new(a.env, a.variant, a.seeds, a.out);
    opts.first_seed = a.seed;
    opts.heads = a.heads;
    opts.iterations = a.iters;
    opts.base = a.config.as_deref().map(RunConfig::load).transpose()?;
    let table = compare_with(&opts, |o| match &o.result {
        Ok(r) => eprintln!(
            "done {}/{}/seed{}: return {:.3}, success {:.2}",
            o.env, o.variant, o.seed, r.mean_return, r.success_rate
        ),
        Err(e) => eprintln!("failed {}/{}/seed{}: {e}", o.env, o.variant, o.seed),
    })?;
    print!("{}", table.to_text());
    println!("tables written to {}", opts.out_dir.display());
    Ok(())
}

fn traj(a: TrajArgs) -> Result<()> {
    let env = resolve_env(a.env, &a.checkpoint)?;
    let records = dump_trajectory(&a.checkpoint, &env.spec(), a.seed, &a.out)?;
    let total: f64 = records.iter().map(|r| r.reward).sum();
    println!("{} steps, return {:.3} -> {}", records.len(), total, a.out.display());
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let sources: Vec<CurveSource> = a.csv.iter().map(|s| CurveSource::parse(s)).collect();
    plot_curves(&sources, &a.out)?;
    println!("{} curves -> {}", sources.len(), a.out.display());
    Ok(())
}

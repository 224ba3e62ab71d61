use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{default_heads, RunConfig};
use super::eval::EvalReport;
use super::train::run_training;
use crate::envs::EnvName;
use crate::error::{Error, Result};
use crate::policy::Variant;

/// The env × variant × seed matrix to run.
///
/// Every cell starts from [`RunConfig::new`]. When `base` is set, its PPO
/// settings, network widths and evaluation schedule replace the defaults in
/// every cell; `heads` and `iterations` are applied last.
#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub envs: Vec<EnvName>,
    pub variants: Vec<Variant>,
    pub seeds: usize,
    pub first_seed: u64,
    pub heads: Option<usize>,
    pub iterations: Option<usize>,
    pub base: Option<RunConfig>,
    pub out_dir: PathBuf,
}

impl CompareOptions {
    pub fn new(envs: Vec<EnvName>, variants: Vec<Variant>, seeds: usize, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            envs,
            variants,
            seeds,
            first_seed: 0,
            heads: None,
            iterations: None,
            base: None,
            out_dir: out_dir.into(),
        }
    }

    /// The config of one run, written under `out_dir/<env>/<variant>/seed<N>`.
    pub fn run_config(&self, env: EnvName, variant: Variant, seed: u64) -> RunConfig {
        let heads = self.heads.unwrap_or_else(|| default_heads(env));
        let mut c = RunConfig::new(env, variant, heads, seed);
        if let Some(b) = &self.base {
            c.ppo = b.ppo.clone();
            c.value_widths = b.value_widths.clone();
            c.policy.trunk_widths = b.policy.trunk_widths.clone();
            c.eval_episodes = b.eval_episodes;
            c.eval_interval = b.eval_interval;
        }
        if let Some(n) = self.iterations {
            c.ppo.iterations = n;
        }
        c.out_dir = self
            .out_dir
            .join(env.as_str())
            .join(variant.as_str())
            .join(format!("seed{seed}"));
        c
    }

    fn validate(&self) -> Result<()> {
        if self.envs.is_empty() || self.variants.is_empty() {
            return Err(Error::Argument("compare needs at least one env and one variant".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Argument("compare needs at least one seed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub env: EnvName,
    pub variant: Variant,
    pub seed: u64,
    /// Final evaluation, or the error message of a failed run.
    pub result: std::result::Result<EvalReport, String>,
}

/// Mean and population std over the completed seeds of one (env, variant).
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub env: EnvName,
    pub variant: Variant,
    pub runs: Vec<RunOutcome>,
    pub success_mean: f64,
    pub success_std: f64,
    pub return_mean: f64,
    pub return_std: f64,
}

impl Cell {
    fn new(env: EnvName, variant: Variant, runs: Vec<RunOutcome>) -> Self {
        let reports: Vec<&EvalReport> = runs.iter().filter_map(|r| r.result.as_ref().ok()).collect();
        let (success_mean, success_std) = mean_std(reports.iter().map(|r| r.success_rate));
        let (return_mean, return_std) = mean_std(reports.iter().map(|r| r.mean_return));
        Self {
            env,
            variant,
            runs,
            success_mean,
            success_std,
            return_mean,
            return_std,
        }
    }

    pub fn completed(&self) -> usize {
        self.runs.iter().filter(|r| r.result.is_ok()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.completed() == self.runs.len()
    }
}

fn mean_std(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let xs: Vec<f64> = xs.collect();
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    SuccessRate,
    MeanReturn,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SuccessRate => "success_rate",
            Metric::MeanReturn => "mean_return",
        }
    }

    /// Success rate decides a comparison unless the env has no success
    /// predicate, as on two-phase-probe.
    pub fn headline(env: EnvName) -> Self {
        match env {
            EnvName::TwoPhaseProbe => Metric::MeanReturn,
            _ => Metric::SuccessRate,
        }
    }
}

/// Whether mean(multihead) > mean(baseline) on one metric; `holds` is `None`
/// when either cell has failed runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub env: EnvName,
    pub baseline: Variant,
    pub metric: Metric,
    pub multihead_mean: f64,
    pub baseline_mean: f64,
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub cells: Vec<Cell>,
    pub verdicts: Vec<Verdict>,
}

impl ComparisonTable {
    pub fn from_outcomes(envs: &[EnvName], variants: &[Variant], outcomes: &[RunOutcome]) -> Self {
        let mut cells = Vec::new();
        for &env in envs {
            for &variant in variants {
                let runs = outcomes
                    .iter()
                    .filter(|o| o.env == env && o.variant == variant)
                    .cloned()
                    .collect();
                cells.push(Cell::new(env, variant, runs));
            }
        }
        let mut verdicts = Vec::new();
        for &env in envs {
            let Some(mh) = cells.iter().find(|c| c.env == env && c.variant == Variant::MultiHead) else {
                continue;
            };
            for base in cells.iter().filter(|c| c.env == env && c.variant != Variant::MultiHead) {
                for metric in [Metric::SuccessRate, Metric::MeanReturn] {
                    let pick = |c: &Cell| match metric {
                        Metric::SuccessRate => c.success_mean,
                        Metric::MeanReturn => c.return_mean,
                    };
                    let (m, b) = (pick(mh), pick(base));
                    let holds = (mh.is_complete() && base.is_complete()).then_some(m > b);
                    verdicts.push(Verdict {
                        env,
                        baseline: base.variant,
                        metric,
                        multihead_mean: m,
                        baseline_mean: b,
                        holds,
                    });
                }
            }
        }
        Self { cells, verdicts }
    }

    pub fn cell(&self, env: EnvName, variant: Variant) -> Option<&Cell> {
        self.cells.iter().find(|c| c.env == env && c.variant == variant)
    }

    pub fn verdict(&self, env: EnvName, baseline: Variant, metric: Metric) -> Option<&Verdict> {
        self.verdicts
            .iter()
            .find(|v| v.env == env && v.baseline == baseline && v.metric == metric)
    }

    pub fn cells_csv(&self) -> String {
        let mut s = String::from("env,variant,seeds,completed,success_mean,success_std,return_mean,return_std\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{:?},{:?},{:?},{:?}",
                c.env,
                c.variant,
                c.runs.len(),
                c.completed(),
                c.success_mean,
                c.success_std,
                c.return_mean,
                c.return_std
            );
        }
        s
    }

    pub fn runs_csv(&self) -> String {
        let mut s = String::from("env,variant,seed,status,mean_return,return_std,success_rate\n");
        for r in self.cells.iter().flat_map(|c| &c.runs) {
            let _ = match &r.result {
                Ok(e) => writeln!(
                    s,
                    "{},{},{},ok,{:?},{:?},{:?}",
                    r.env, r.variant, r.seed, e.mean_return, e.return_std, e.success_rate
                ),
                Err(_) => writeln!(s, "{},{},{},failed,,,", r.env, r.variant, r.seed),
            };
        }
        s
    }

    pub fn verdicts_csv(&self) -> String {
        let mut s = String::from("env,baseline,metric,headline,multihead_mean,baseline_mean,multihead_better\n");
        for v in &self.verdicts {
            let holds = v.holds.map_or("incomplete", |h| if h { "true" } else { "false" });
            let _ = writeln!(
                s,
                "{},{},{},{},{:?},{:?},{}",
                v.env,
                v.baseline,
                v.metric.as_str(),
                Metric::headline(v.env) == v.metric,
                v.multihead_mean,
                v.baseline_mean,
                holds
            );
        }
        s
    }

    /// Human-readable summary: one line per cell, then the headline verdicts
    /// and any failed runs.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16} {:<10} {:>6}  {:>17}  {:>19}",
            "env", "variant", "seeds", "success", "return"
        );
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{:<16} {:<10} {:>6}  {:>7.3} ± {:<7.3}  {:>8.3} ± {:<8.3}",
                c.env.as_str(),
                c.variant.as_str(),
                format!("{}/{}", c.completed(), c.runs.len()),
                c.success_mean,
                c.success_std,
                c.return_mean,
                c.return_std
            );
        }
        let headline: Vec<&Verdict> = self
            .verdicts
            .iter()
            .filter(|v| Metric::headline(v.env) == v.metric)
            .collect();
        if !headline.is_empty() {
            let _ = writeln!(s);
        }
        for v in headline {
            let outcome = match v.holds {
                Some(true) => "yes",
                Some(false) => "no",
                None => "incomplete",
            };
            let _ = writeln!(
                s,
                "{}: multihead > {} on {}: {} ({:.3} vs {:.3})",
                v.env,
                v.baseline,
                v.metric.as_str(),
                outcome,
                v.multihead_mean,
                v.baseline_mean
            );
        }
        for r in self.cells.iter().flat_map(|c| &c.runs) {
            if let Err(e) = &r.result {
                let _ = writeln!(s, "failed: {}/{}/seed{}: {}", r.env, r.variant, r.seed, e);
            }
        }
        s
    }

    /// Writes `comparison.csv`, `comparison_runs.csv`, `verdicts.csv` and
    /// `comparison.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("comparison.csv", self.cells_csv()),
            ("comparison_runs.csv", self.runs_csv()),
            ("verdicts.csv", self.verdicts_csv()),
            ("comparison.txt", self.to_text()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

pub fn compare(opts: &CompareOptions) -> Result<ComparisonTable> {
    compare_with(opts, |_| {})
}

/// Runs every cell of the matrix (in parallel where threads are available),
/// calling `on_run` as each run finishes, and writes the table files into
/// `opts.out_dir`. Failed runs are recorded in the table rather than
/// aborting the matrix.
pub fn compare_with(opts: &CompareOptions, on_run: impl Fn(&RunOutcome) + Sync) -> Result<ComparisonTable> {
    opts.validate()?;
    let mut jobs = Vec::new();
    for &env in &opts.envs {
        for &variant in &opts.variants {
            for i in 0..opts.seeds as u64 {
                jobs.push((env, variant, opts.first_seed + i));
            }
        }
    }
    let outcomes: Vec<RunOutcome> = jobs
        .into_par_iter()
        .map(|(env, variant, seed)| {
            let config = opts.run_config(env, variant, seed);
            let result = run_training(&config).map(|s| s.final_report).map_err(|e| e.to_string());
            let outcome = RunOutcome {
                env,
                variant,
                seed,
                result,
            };
            on_run(&outcome);
            outcome
        })
        .collect();
    let table = ComparisonTable::from_outcomes(&opts.envs, &opts.variants, &outcomes);
    table.write(&opts.out_dir)?;
    Ok(table)
}

use std::fs;
use std::path::Path;

use chronoskill::envs::EnvName;
use chronoskill::harness::{
    compare, dump_trajectory, evaluate, load_checkpoint, plot_curves, run_training, CompareOptions, CurveSource,
    Metric, RunConfig, CSV_COLUMNS, EVAL_SEED_BASE,
};
use chronoskill::policy::{select_head, Variant};
use chronoskill::Error;

fn small(env: EnvName, variant: Variant, heads: usize, seed: u64, dir: &Path) -> RunConfig {
    let mut c = RunConfig::new(env, variant, heads, seed);
    c.ppo.steps_per_iter = 200;
    c.ppo.iterations = 3;
    c.ppo.epochs = 2;
    c.eval_episodes = 3;
    c.eval_interval = 2;
    c.out_dir = dir.to_path_buf();
    c
}

#[test]
fn zero_iterations_writes_header_and_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(EnvName::PushLite, Variant::MultiHead, 8, 0, dir.path());
    c.ppo.iterations = 0;
    let summary = run_training(&c).unwrap();
    let csv = fs::read_to_string(summary.metrics_path()).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], CSV_COLUMNS.join(","));
    assert!(lines[1].starts_with("0,0,"));
    assert!(lines[1].ends_with(",0.0,0.0,0.0,0.0,0.0"));
    assert!(summary.checkpoint_path().is_file());
    assert_eq!(RunConfig::load(&dir.path().join("config.txt")).unwrap(), c);
}

#[test]
fn rows_follow_eval_interval_and_final_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_training(&small(EnvName::PickPlaceLite, Variant::TimeObs, 1, 4, dir.path())).unwrap();
    let iters: Vec<usize> = summary.rows.iter().map(|r| r.iteration).collect();
    assert_eq!(iters, vec![0, 2, 3]);
    assert_eq!(summary.rows[2].env_steps, 600);
    assert_eq!(summary.updates.len(), 3);
    assert_eq!(summary.rows[1].stats, summary.updates[1]);
    let log = fs::read_to_string(dir.path().join("run.log")).unwrap();
    assert!(log.starts_with("completed 3 iterations"));
}

#[test]
fn final_checkpoint_reproduces_final_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(EnvName::PushLite, Variant::MultiHead, 8, 2, dir.path());
    let summary = run_training(&c).unwrap();
    let report = evaluate(&summary.checkpoint_path(), &EnvName::PushLite.spec(), 3, EVAL_SEED_BASE).unwrap();
    assert_eq!(report, summary.final_report);
    let (policy, value) = load_checkpoint(&summary.checkpoint_path()).unwrap();
    assert_eq!(policy.params(), summary.policy.params());
    assert_eq!(value.params(), summary.value.params());
}

#[test]
fn unwritable_output_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let c = small(EnvName::TwoPhaseProbe, Variant::Vanilla, 1, 0, &blocker.join("run"));
    match run_training(&c) {
        Err(Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
        other => panic!("expected an i/o error, got {other:?}"),
    }
}

#[test]
fn evaluate_rejects_mismatched_spec() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(EnvName::PickPlaceLite, Variant::MultiHead, 8, 0, dir.path());
    c.ppo.iterations = 0;
    let s = run_training(&c).unwrap();
    assert!(evaluate(&s.checkpoint_path(), &EnvName::LidCloseLite.spec(), 2, 0).is_ok());
    let err = evaluate(&s.checkpoint_path(), &EnvName::PushLite.spec(), 2, 0).unwrap_err();
    assert!(matches!(err, Error::Dimension(_)), "{err}");
}

#[test]
fn trajectory_file_is_head_labelled_and_stable() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(
        EnvName::PickPlaceLite,
        Variant::MultiHead,
        4,
        1,
        &dir.path().join("run"),
    );
    c.ppo.iterations = 1;
    let s = run_training(&c).unwrap();
    let spec = EnvName::PickPlaceLite.spec();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let records = dump_trajectory(&s.checkpoint_path(), &spec, 7, &a).unwrap();
    dump_trajectory(&s.checkpoint_path(), &spec, 7, &b).unwrap();
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let lines: Vec<&str> = std::str::from_utf8(&text).unwrap().lines().collect();
    assert_eq!(lines.len(), 100);
    let heads: Vec<usize> = records.iter().map(|r| r.head_index).collect();
    let expected: Vec<usize> = (0..100).map(|t| select_head(t, 100, 4).unwrap()).collect();
    assert_eq!(heads, expected);
    assert_eq!((heads[24], heads[25], heads[99]), (0, 1, 3));
    let keys = [
        "\"t\":",
        "\"head_index\":",
        "\"p\":",
        "\"o\":",
        "\"g\":",
        "\"held\":",
        "\"action\":",
        "\"reward\":",
        "\"success\":",
    ];
    let mut at = 0;
    for key in keys {
        let pos = lines[30][at..]
            .find(key)
            .unwrap_or_else(|| panic!("{key} missing or out of order"));
        at += pos + key.len();
    }
}

#[test]
fn plots_are_deterministic_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let mut sources = Vec::new();
    for (variant, heads) in [(Variant::MultiHead, 2), (Variant::Vanilla, 1)] {
        for seed in 0..2 {
            let run = dir.path().join(variant.as_str()).join(format!("seed{seed}"));
            run_training(&small(EnvName::TwoPhaseProbe, variant, heads, seed, &run)).unwrap();
            sources.push(CurveSource::parse(run.join("metrics.csv").to_str().unwrap()));
        }
    }
    assert_eq!(sources[0].label, "multihead");
    let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
    plot_curves(&sources, &a).unwrap();
    plot_curves(&sources, &b).unwrap();
    let svg = fs::read_to_string(&a).unwrap();
    assert_eq!(svg, fs::read_to_string(&b).unwrap());
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches("<polygon").count(), 2);

    let single = dir.path().join("single.svg");
    plot_curves(&sources[..1], &single).unwrap();
    let svg = fs::read_to_string(&single).unwrap();
    assert_eq!(
        (svg.matches("<polyline").count(), svg.matches("<polygon").count()),
        (1, 0)
    );

    let none = dir.path().join("none.svg");
    assert!(plot_curves(&[], &none).is_err());
    assert!(!none.exists());

    let partial = dir.path().join("partial.csv");
    fs::write(&partial, "iteration,env_steps,mean_return\n0,0,1.0\n").unwrap();
    let err = plot_curves(&[CurveSource::parse(partial.to_str().unwrap())], &none).unwrap_err();
    let msg = err.to_string();
    assert!(
        msg.contains("missing columns: return_std, success_rate, policy_loss"),
        "{msg}"
    );
    assert!(!none.exists());
}

#[test]
fn single_cell_comparison_equals_its_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = CompareOptions::new(
        vec![EnvName::TwoPhaseProbe],
        vec![Variant::MultiHead],
        1,
        dir.path().join("cmp"),
    );
    opts.iterations = Some(2);
    let table = compare(&opts).unwrap();
    assert_eq!(table.cells.len(), 1);
    assert!(table.verdicts.is_empty());

    let mut config = opts.run_config(EnvName::TwoPhaseProbe, Variant::MultiHead, 0);
    config.out_dir = dir.path().join("alone");
    let alone = run_training(&config).unwrap();
    let cell = &table.cells[0];
    assert_eq!(cell.runs[0].result.as_ref().unwrap(), &alone.final_report);
    assert_eq!(cell.return_mean, alone.final_report.mean_return);
    assert_eq!(cell.return_std, 0.0);
    for f in [
        "comparison.csv",
        "comparison_runs.csv",
        "verdicts.csv",
        "comparison.txt",
    ] {
        assert!(dir.path().join("cmp").join(f).is_file(), "{f}");
    }
    assert!(dir
        .path()
        .join("cmp/two-phase-probe/multihead/seed0/metrics.csv")
        .is_file());
}

#[test]
fn comparison_verdicts_cover_every_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let mut opts = CompareOptions::new(vec![EnvName::TwoPhaseProbe], Variant::ALL.to_vec(), 2, dir.path());
    opts.iterations = Some(1);
    let table = compare(&opts).unwrap();
    assert_eq!(table.cells.len(), 3);
    assert!(table.cells.iter().all(|c| c.runs.len() == 2 && c.is_complete()));
    for base in [Variant::Vanilla, Variant::TimeObs] {
        let v = table.verdict(EnvName::TwoPhaseProbe, base, Metric::MeanReturn).unwrap();
        assert_eq!(v.holds, Some(v.multihead_mean > v.baseline_mean));
    }
    let csv = fs::read_to_string(dir.path().join("verdicts.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.contains("two-phase-probe,vanilla,mean_return,true,"));
}

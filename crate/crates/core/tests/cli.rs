use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use chronoskill::envs::EnvName;
use chronoskill::harness::RunConfig;
use chronoskill::policy::Variant;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chronoskill"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn chronoskill")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn train_eval_traj_plot_round() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(
        d,
        &[
            "train",
            "--env",
            "two-phase-probe",
            "--variant",
            "multihead",
            "--heads",
            "2",
            "--seed",
            "3",
            "--iters",
            "2",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let run_dir = d.join("runs/two-phase-probe/multihead/seed3");
    for f in ["metrics.csv", "checkpoint.ckpt", "config.txt", "run.log"] {
        assert!(run_dir.join(f).is_file(), "{f}");
    }
    let config = RunConfig::load(&run_dir.join("config.txt")).unwrap();
    assert_eq!(
        (config.env, config.policy.heads, config.seed, config.ppo.iterations),
        (EnvName::TwoPhaseProbe, 2, 3, 2)
    );
    assert!(stdout(&o).contains("iter     2"));

    let ckpt = run_dir.join("checkpoint.ckpt");
    let ckpt = ckpt.to_str().unwrap();
    let o = run(d, &["eval", "--checkpoint", ckpt, "--episodes", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("two-phase-probe: 4 episodes"));

    let o = run(d, &["traj", "--checkpoint", ckpt, "--out", "traj.jsonl"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(d.join("traj.jsonl")).unwrap().lines().count(), 2);

    let o = run(
        d,
        &[
            "plot",
            "--out",
            "curve.svg",
            run_dir.join("metrics.csv").to_str().unwrap(),
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(d.join("curve.svg"))
        .unwrap()
        .contains("multihead (n=1)"));
}

#[test]
fn train_from_config_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut c = RunConfig::new(EnvName::PushLite, Variant::MultiHead, 5, 1);
    c.ppo.steps_per_iter = 100;
    c.ppo.epochs = 1;
    c.eval_episodes = 2;
    c.out_dir = d.join("from-file");
    c.save(&d.join("push.cfg")).unwrap();
    let o = run(
        d,
        &["train", "--config", "push.cfg", "--iters", "1", "--seed", "9", "-q"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let saved = RunConfig::load(&d.join("from-file/config.txt")).unwrap();
    assert_eq!(
        (saved.policy.heads, saved.ppo.steps_per_iter, saved.ppo.iterations),
        (5, 100, 1)
    );
    let mut expected = c.clone().with_seed(9);
    expected.ppo.iterations = 1;
    assert_eq!(saved, expected);
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn compare_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "compare",
        "--env",
        "two-phase-probe",
        "--variant",
        "multihead,vanilla",
        "--seeds",
        "2",
        "--iters",
        "1",
        "--out",
        "cmp",
    ];
    let o = run(d, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(
        text.contains("two-phase-probe: multihead > vanilla on mean_return"),
        "{text}"
    );
    let runs = fs::read_to_string(d.join("cmp/comparison_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 5);
    assert!(d.join("cmp/two-phase-probe/vanilla/seed1/checkpoint.ckpt").is_file());
}

#[test]
fn errors_exit_nonzero_with_one_diagnostic_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases: [&[&str]; 6] = [
        &["train", "--env", "reach-lite"],
        &["train", "--variant", "vanilla", "--heads", "4", "--iters", "0"],
        &["train", "--env", "push-lite", "--heads", "101", "--iters", "0"],
        &["eval", "--checkpoint", "missing.ckpt", "--env", "push-lite"],
        &["plot", "--out", "x.svg", "missing.csv"],
        &["compare", "--seeds", "0"],
    ];
    for args in cases {
        let o = run(d, args);
        assert!(!o.status.success(), "{args:?} should fail");
        let err = stderr(&o);
        assert!(!err.trim().is_empty(), "{args:?} printed no diagnostic");
        assert!(o.status.code() != Some(0));
    }
    let o = run(d, &["eval", "--checkpoint", "missing.ckpt"]);
    assert_eq!(
        stderr(&o).trim(),
        "chronoskill: invalid argument: --env is required: no config.txt next to missing.ckpt"
    );
    let o = run(d, &["eval", "--checkpoint", "missing.ckpt", "--env", "push-lite"]);
    assert_eq!(stderr(&o).lines().count(), 1);
    assert!(stderr(&o).contains("missing.ckpt"));
    assert!(!d.join("x.svg").exists());
}

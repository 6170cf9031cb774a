use autobalance_cli::config::{Experiment, ExperimentConfig};
use autobalance_cli::{parse_config, run_balance, theta, RunOptions};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autobalance"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A shipped config rewritten to write into `out`.
fn config_file(rel: &str, dir: &Path, edit: impl FnOnce(&mut ExperimentConfig)) -> PathBuf {
    let text = std::fs::read_to_string(repo(rel)).unwrap();
    let mut cfg = ExperimentConfig::from_toml(&text).unwrap();
    cfg.output_dir = dir.join("out");
    edit(&mut cfg);
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

fn quick_warfare(c: &mut ExperimentConfig) {
    c.balance.max_iterations = 6;
    c.eval.games_per_matchup = 2;
    c.agents.budget = 8;
}

#[test]
fn shipped_configs_round_trip_and_match_golden() {
    let mut names: Vec<_> = std::fs::read_dir(repo("configs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    names.sort();
    assert!(names.len() >= 4);
    for path in names {
        let text = std::fs::read_to_string(&path).unwrap();
        let exp = parse_config(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let out = exp.config.to_toml();
        assert_eq!(ExperimentConfig::from_toml(&out).unwrap(), exp.config);
        let golden = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("tests/golden")
            .join(path.file_name().unwrap());
        if std::env::var_os("BLESS").is_some() {
            std::fs::write(&golden, &out).unwrap();
        }
        assert_eq!(
            std::fs::read_to_string(&golden).unwrap(),
            out,
            "{} drifted from its golden serialization",
            path.display()
        );
    }
}

#[test]
fn table_config_has_sixteen_dims() {
    let exp =
        parse_config(&std::fs::read_to_string(repo("configs/warfare_fair.toml")).unwrap()).unwrap();
    assert_eq!(exp.space.len(), 16);
    assert_eq!(exp.space.free_dims(), 16);
    let theta = theta::load(&repo("configs/theta/table_fair.toml"), &exp.space).unwrap();
    assert_eq!(
        theta,
        autobalance::warfare::Roster::table_fair().to_vector()
    );
}

#[test]
fn balance_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file("configs/rps_cyclic.toml", dir.path(), |_| {});
    let o = bin(
        &["balance", cfg.to_str().unwrap(), "--seed", "1"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("best loss"));
    let out = dir.path().join("out");
    for f in [
        "progression.csv",
        "best_theta.toml",
        "report.txt",
        "checkpoint.json",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let csv = std::fs::read_to_string(out.join("progression.csv")).unwrap();
    assert!(csv.starts_with("iteration,trial_id,loss,best_loss,a_R_P,a_R_S,a_P_S\n"));
    let best: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
    assert!(*best.last().unwrap() < 1e-3);
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("distance (mse)"));
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file("configs/rps_cyclic.toml", dir.path(), |c| {
        c.balance.epsilon = 0.0
    });
    let o = bin(
        &[
            "balance",
            cfg.to_str().unwrap(),
            "--max-iterations",
            "7",
            "--parallel",
            "2",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/progression.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let load = |sub: &str| {
        let text = std::fs::read_to_string(repo("configs/rps_cyclic.toml")).unwrap();
        let mut cfg = ExperimentConfig::from_toml(&text).unwrap();
        cfg.output_dir = dir.path().join(sub);
        cfg.balance.epsilon = 0.0;
        cfg.balance.max_iterations = 60;
        cfg.seed = 5;
        Experiment::new(cfg).unwrap()
    };
    let full = run_balance(&load("full"), &RunOptions::default()).unwrap();

    let part = load("part");
    let first = run_balance(
        &part,
        &RunOptions {
            resume: None,
            stop_after: Some(23),
        },
    )
    .unwrap();
    assert!(!first.finished);
    assert_eq!(first.progression.len(), 23);
    let rest = run_balance(
        &part,
        &RunOptions {
            resume: Some(first.artifacts.checkpoint.clone()),
            stop_after: None,
        },
    )
    .unwrap();
    assert!(rest.finished);
    let curve = |o: &autobalance_cli::BalanceOutcome| {
        o.progression
            .iter()
            .map(|r| r.best_loss)
            .collect::<Vec<_>>()
    };
    assert_eq!(curve(&rest), curve(&full));
    assert_eq!(
        std::fs::read(&rest.artifacts.progression).unwrap(),
        std::fs::read(&full.artifacts.progression).unwrap()
    );
}

#[test]
fn resume_extends_a_finished_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file("configs/rps_cyclic.toml", dir.path(), |c| {
        c.balance.epsilon = 0.0;
        c.balance.parallel_width = 1;
    });
    let cfg = cfg.to_str().unwrap();
    let o = bin(&["balance", cfg, "--max-iterations", "40"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let short = std::fs::read_to_string(dir.path().join("out/progression.csv")).unwrap();
    assert_eq!(short.lines().count(), 41);
    let ckpt = dir.path().join("out/checkpoint.json");
    let o = bin(
        &[
            "balance",
            cfg,
            "--max-iterations",
            "50",
            "--resume",
            ckpt.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let resumed = std::fs::read_to_string(dir.path().join("out/progression.csv")).unwrap();

    let fresh_dir = tempfile::tempdir().unwrap();
    let fresh_cfg = config_file("configs/rps_cyclic.toml", fresh_dir.path(), |c| {
        c.balance.epsilon = 0.0;
        c.balance.parallel_width = 1;
        c.balance.max_iterations = 50;
    });
    let o = bin(&["balance", fresh_cfg.to_str().unwrap()], fresh_dir.path());
    assert!(o.status.success());
    let fresh = std::fs::read_to_string(fresh_dir.path().join("out/progression.csv")).unwrap();
    assert_eq!(resumed, fresh);
    assert!(resumed.starts_with(&short));

    let o = bin(
        &[
            "balance",
            cfg,
            "--seed",
            "99",
            "--resume",
            ckpt.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("seed differs"), "{}", stderr(&o));
    let o = bin(
        &[
            "balance",
            cfg,
            "--parallel",
            "3",
            "--resume",
            ckpt.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(
        stderr(&o).contains("parallel_width differs"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(repo("configs/rps_cyclic.toml")).unwrap();
    let bad = dir.path().join("bad.toml");

    std::fs::write(&bad, text.replacen("winrate = 0.7", "winrate = 1.3", 1)).unwrap();
    let o = bin(&["balance", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("target.edge[0].winrate"),
        "{}",
        stderr(&o)
    );

    std::fs::write(&bad, text.replacen("[balance]", "[balance]\nspeed = 2", 1)).unwrap();
    let o = bin(&["balance", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line "), "{}", stderr(&o));

    let o = bin(&["balance", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_normal_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file("configs/rps_cyclic.toml", dir.path(), |_| {});
    let theta = dir.path().join("theta.toml");
    std::fs::write(
        &theta,
        "[theta]\n\"R.P\" = -0.2\n\"R.S\" = 0.2\n\"P.S\" = -0.2\n",
    )
    .unwrap();
    let csv = dir.path().join("eval.csv");
    let o = bin(
        &[
            "evaluate",
            cfg.to_str().unwrap(),
            "--theta",
            theta.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("payoff matrix"));
    let d: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("distance (mse): "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(d < 1e-12, "{text}");
    assert!(text.contains("P-S           -0.2000  -0.2000     0.0%"));
    let csv = std::fs::read_to_string(csv).unwrap();
    assert_eq!(csv.lines().count(), 4);

    std::fs::write(
        &theta,
        "[theta]\n\"R.P\" = 3\n\"R.S\" = 0.2\n\"P.S\" = -0.2\n",
    )
    .unwrap();
    let o = bin(
        &[
            "evaluate",
            cfg.to_str().unwrap(),
            "--theta",
            theta.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_warfare_reports_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file("configs/warfare_cyclic.toml", dir.path(), |c| {
        c.eval.games_per_matchup = 4;
        c.agents.kind = autobalance_cli::config::AgentKind::Random;
    });
    let theta = repo("configs/theta/table_cyclic.toml");
    let o = bin(
        &[
            "evaluate",
            cfg.to_str().unwrap(),
            "--theta",
            theta.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("win-rate matrix"));
    assert!(text.contains("95% CI"));
    for pair in ["S-T", "S-N", "T-N"] {
        assert!(text.contains(pair), "{text}");
    }
}

#[test]
fn warfare_best_theta_is_integral_and_in_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config_file("configs/warfare_desk.toml", dir.path(), quick_warfare);
    let o = bin(&["balance", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let exp = parse_config(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    let best = dir.path().join("out/best_theta.toml");
    let theta = theta::load(&best, &exp.space).unwrap();
    exp.space.check(&theta).unwrap();
    let text = std::fs::read_to_string(best).unwrap();
    assert!(!text
        .lines()
        .skip_while(|l| *l != "[theta]")
        .any(|l| l.contains('.') && l.ends_with(".0")));
    let csv = std::fs::read_to_string(dir.path().join("out/progression.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("iteration,trial_id,loss,best_loss,w_S_T,w_S_N,w_T_N\n"));
}

#[test]
fn report_aggregates_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(
        &a,
        "iteration,trial_id,loss,best_loss\n0,0,0.4,0.4\n1,1,0.2,0.2\n",
    )
    .unwrap();
    std::fs::write(&b, "iteration,trial_id,loss,best_loss\n0,0,0.6,0.6\n").unwrap();
    let o = bin(&["report", "a.csv", "b.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "iteration,runs,best_loss_min,best_loss_median,best_loss_mean,best_loss_max\n0,2,0.4,0.5,0.5,0.6\n1,1,0.2,0.2,0.2,0.2\n"
    );
    let o = bin(&["report", "a.csv", "--out", "agg.csv"], dir.path());
    assert!(o.status.success());
    assert!(dir.path().join("agg.csv").is_file());
    let o = bin(&["report", "nope.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

//! The `balance` and `evaluate` commands.

use crate::config::{Experiment, Game};
use crate::report::{Report, ReportError};
use crate::theta;
use autobalance::fsutil::write_atomic;
use autobalance::games_nf::nf_evaluation_matrix;
use autobalance::optimize::checkpoint::{self, CheckpointError};
use autobalance::optimize::{BalanceError, BalanceRun, ProgressRow};
use autobalance::{OptimizerState, ParameterVector, WinRateMatrix};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("checkpoint {}: {source}", path.display())]
    Checkpoint {
        path: PathBuf,
        source: CheckpointError,
    },
    #[error("checkpoint {} does not match the config: {what} differs", path.display())]
    Mismatch { path: PathBuf, what: &'static str },
    #[error("{context}: {source}")]
    Balance {
        context: String,
        source: BalanceError,
    },
    #[error(transparent)]
    Eval(#[from] autobalance::evalmat::EvalError),
    #[error(transparent)]
    Metagame(#[from] autobalance::metagame::MetagameError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

/// Where `balance` leaves its outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArtifacts {
    pub progression: PathBuf,
    pub best_theta: PathBuf,
    pub report: PathBuf,
    pub checkpoint: PathBuf,
}

impl RunArtifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            progression: dir.join("progression.csv"),
            best_theta: dir.join("best_theta.toml"),
            report: dir.join("report.txt"),
            checkpoint: dir.join("checkpoint.json"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Continue from this checkpoint instead of starting afresh.
    pub resume: Option<PathBuf>,
    /// Stop after this many trials have been processed in this invocation.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct BalanceOutcome {
    pub artifacts: RunArtifacts,
    pub progression: Vec<ProgressRow>,
    pub best_theta: Option<ParameterVector>,
    pub best_loss: f64,
    pub converged: bool,
    /// False when stopped early by [`RunOptions::stop_after`].
    pub finished: bool,
    pub report: Option<Report>,
}

fn write(path: &Path, contents: &str) -> Result<(), RunError> {
    write_atomic(path, contents.as_bytes()).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// The progression log: `iteration,trial_id,loss,best_loss` and one column per aux value.
/// Failed trials have `loss = inf` and empty aux fields.
pub fn progression_csv(columns: &[String], rows: &[ProgressRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = ["iteration", "trial_id", "loss", "best_loss"]
        .into_iter()
        .map(String::from)
        .chain(columns.iter().cloned());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        let aux = (0..columns.len()).map(|i| row.aux.get(i).map_or(String::new(), f64::to_string));
        let rec = [
            row.iteration.to_string(),
            row.trial_id.to_string(),
            row.loss.to_string(),
            row.best_loss.to_string(),
        ]
        .into_iter()
        .chain(aux);
        w.write_record(rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn open_run(exp: &Experiment, opts: &RunOptions) -> Result<BalanceRun, RunError> {
    let context = |source| RunError::Balance {
        context: "config".into(),
        source,
    };
    let Some(path) = &opts.resume else {
        let state = OptimizerState::new(exp.space.clone(), exp.backend.clone(), exp.config.seed)
            .map_err(|e| context(e.into()))?;
        return BalanceRun::new(
            state,
            exp.target.clone(),
            exp.config.metric,
            exp.balance.clone(),
        )
        .map_err(context);
    };
    let mut run = checkpoint::load(path).map_err(|source| RunError::Checkpoint {
        path: path.clone(),
        source,
    })?;
    let mismatch = |what| RunError::Mismatch {
        path: path.clone(),
        what,
    };
    if run.state().space() != &exp.space {
        return Err(mismatch("parameter space"));
    }
    if run.state().backend() != &exp.backend {
        return Err(mismatch("optimizer"));
    }
    if run.state().seed() != exp.config.seed {
        return Err(mismatch("seed"));
    }
    if run.target() != &exp.target {
        return Err(mismatch("target"));
    }
    if run.metric() != exp.config.metric {
        return Err(mismatch("metric"));
    }
    if run.config().parallel_width != exp.balance.parallel_width {
        return Err(mismatch("parallel_width"));
    }
    if run.config().epsilon != exp.balance.epsilon {
        return Err(mismatch("epsilon"));
    }
    run.set_max_iterations(exp.balance.max_iterations)
        .map_err(context)?;
    Ok(run)
}

/// Runs the balancing loop, streaming the progression log and checkpoint after every trial.
pub fn run_balance(exp: &Experiment, opts: &RunOptions) -> Result<BalanceOutcome, RunError> {
    let dir = exp.output_dir();
    std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let artifacts = RunArtifacts::in_dir(dir);
    let mut run = open_run(exp, opts)?;
    let evaluator = exp.evaluator();
    let columns = evaluator.columns();

    let mut processed = 0usize;
    let mut io_error = None;
    let mut stopped = false;
    let mut control = |run: &BalanceRun, row: &ProgressRow| {
        processed += 1;
        let saved = write(
            &artifacts.progression,
            &progression_csv(&columns, run.progression()),
        )
        .and_then(|()| {
            checkpoint::save(run, &artifacts.checkpoint).map_err(|source| RunError::Checkpoint {
                path: artifacts.checkpoint.clone(),
                source,
            })
        })
        .and_then(|()| {
            if row.loss.is_finite() && row.loss == row.best_loss {
                write_best(exp, run, &artifacts)
            } else {
                Ok(())
            }
        });
        if let Err(e) = saved {
            io_error = Some(e);
            return ControlFlow::Break(());
        }
        if opts.stop_after.is_some_and(|n| processed >= n) {
            stopped = true;
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    };
    run.run(evaluator, &mut control)
        .map_err(|source| RunError::Balance {
            context: format!("balancing {}", exp.config.output_dir.display()),
            source,
        })?;
    if let Some(e) = io_error {
        return Err(e);
    }

    write(
        &artifacts.progression,
        &progression_csv(&columns, run.progression()),
    )?;
    checkpoint::save(&run, &artifacts.checkpoint).map_err(|source| RunError::Checkpoint {
        path: artifacts.checkpoint.clone(),
        source,
    })?;
    write_best(exp, &run, &artifacts)?;
    let report = final_report(exp, &run)?;
    if let Some(r) = &report {
        write(&artifacts.report, &r.render())?;
    }

    let best = run.state().best();
    Ok(BalanceOutcome {
        artifacts,
        progression: run.progression().to_vec(),
        best_theta: best.map(|t| t.theta.clone()),
        best_loss: run.state().best_loss().unwrap_or(f64::INFINITY),
        converged: run.converged(),
        finished: !stopped,
        report,
    })
}

fn write_best(
    exp: &Experiment,
    run: &BalanceRun,
    artifacts: &RunArtifacts,
) -> Result<(), RunError> {
    match run.state().best() {
        Some(best) => write(
            &artifacts.best_theta,
            &theta::to_toml(&exp.space, &best.theta, Some(best.id), best.loss()),
        ),
        None => Ok(()),
    }
}

/// Report for the best trial, rebuilt from its recorded evaluation.
fn final_report(exp: &Experiment, run: &BalanceRun) -> Result<Option<Report>, RunError> {
    let (Some(best), Some(eval)) = (run.state().best(), run.best_evaluation()) else {
        return Ok(None);
    };
    let metric = exp.config.metric;
    let report = match &exp.game {
        Game::NormalForm(e) => {
            let matrix = nf_evaluation_matrix(e.spec(), &best.theta)?;
            Report::margins(&exp.target, &matrix, metric)?
        }
        Game::Warfare(_) => {
            let found = WinRateMatrix::from_upper(exp.labels().to_vec(), &eval.aux)?;
            Report::winrates(&exp.target, &found, None, metric)?
        }
    };
    Ok(Some(report))
}

/// Measures `theta` afresh and compares it with the target.
pub fn run_evaluate(exp: &Experiment, theta: &ParameterVector) -> Result<Report, RunError> {
    exp.space.check(theta)?;
    let metric = exp.config.metric;
    Ok(match &exp.game {
        Game::NormalForm(e) => {
            Report::margins(&exp.target, &nf_evaluation_matrix(e.spec(), theta)?, metric)?
        }
        Game::Warfare(e) => {
            let est = e.estimate(theta)?;
            Report::winrates(&exp.target, &est.winrates, Some(&est.matchups), metric)?
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_marks_failures() {
        let rows = [
            ProgressRow {
                iteration: 0,
                trial_id: 0,
                loss: f64::INFINITY,
                best_loss: f64::INFINITY,
                aux: vec![],
            },
            ProgressRow {
                iteration: 1,
                trial_id: 1,
                loss: 0.125,
                best_loss: 0.125,
                aux: vec![0.6, 0.5],
            },
        ];
        let cols = vec!["w_S_T".to_string(), "w_S_N".to_string()];
        assert_eq!(
            progression_csv(&cols, &rows),
            "iteration,trial_id,loss,best_loss,w_S_T,w_S_N\n0,0,inf,inf,,\n1,1,0.125,0.125,0.6,0.5\n"
        );
    }
}

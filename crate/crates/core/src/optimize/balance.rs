//! The balancing loop: ask a parameter vector, simulate, measure the distance
//! between the empirical and the target response graph, tell, repeat.
//!
//! Up to `parallel_width` evaluations run concurrently on worker threads.
//! The coordinator processes results strictly in trial-id order, so trial
//! `k + width` is always asked after exactly the trials `0..=k` have been
//! told. This keeps runs bit-reproducible regardless of thread timing.

use super::{OptimizeError, OptimizerState, TrialId, TrialStatus};
use crate::metagame::{
    graph_distance, target_to_response_graph, DistanceMetric, MetagameError, ParameterVector,
    ResponseGraph, TargetGraph,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;
use thiserror::Error;

/// What an evaluator reports for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub graph: ResponseGraph,
    /// Auxiliary per-matchup values logged next to the loss (see [`Evaluator::columns`]).
    #[serde(default)]
    pub aux: Vec<f64>,
}

impl Evaluation {
    pub fn new(graph: ResponseGraph) -> Self {
        Self {
            graph,
            aux: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("evaluation failed: {0}")]
pub struct EvaluationError(pub String);

/// Maps a parameter vector to an empirical response graph.
///
/// Implementations are called from several threads at once and must not
/// share mutable state.
pub trait Evaluator: Sync {
    fn evaluate(&self, theta: &ParameterVector) -> Result<Evaluation, EvaluationError>;

    /// Names of the values in [`Evaluation::aux`].
    fn columns(&self) -> Vec<String> {
        Vec::new()
    }
}

impl<F> Evaluator for F
where
    F: Fn(&ParameterVector) -> Result<Evaluation, EvaluationError> + Sync,
{
    fn evaluate(&self, theta: &ParameterVector) -> Result<Evaluation, EvaluationError> {
        self(theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub parallel_width: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_theta: Option<ParameterVector>,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iterations: 260,
            parallel_width: 6,
            initial_theta: None,
        }
    }
}

impl BalanceConfig {
    pub fn validate(&self) -> Result<(), BalanceError> {
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(BalanceError::InvalidConfig("epsilon must be >= 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(BalanceError::InvalidConfig(
                "max_iterations must be >= 1".into(),
            ));
        }
        if self.parallel_width == 0 {
            return Err(BalanceError::InvalidConfig(
                "parallel_width must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// One processed trial. Failed evaluations have `loss = +inf` and no aux values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressRow {
    pub iteration: usize,
    pub trial_id: TrialId,
    #[serde(with = "loss_repr")]
    pub loss: f64,
    #[serde(with = "loss_repr")]
    pub best_loss: f64,
    pub aux: Vec<f64>,
}

impl ProgressRow {
    pub fn failed(&self) -> bool {
        self.loss.is_infinite()
    }
}

/// JSON has no infinity, so `+inf` is stored as `null`.
mod loss_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        v.is_finite().then_some(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceResult {
    pub best_trial: TrialId,
    pub best_theta: ParameterVector,
    pub best_loss: f64,
    pub best_evaluation: Evaluation,
    pub progression: Vec<ProgressRow>,
    pub converged: bool,
}

#[derive(Debug, Error)]
pub enum BalanceError {
    #[error("invalid balance configuration: {0}")]
    InvalidConfig(String),
    #[error("trial {trial}: {source}")]
    Graph {
        trial: TrialId,
        #[source]
        source: MetagameError,
    },
    #[error(transparent)]
    Target(#[from] MetagameError),
    #[error(transparent)]
    Optimizer(#[from] OptimizeError),
    #[error("no trial completed successfully")]
    NoSuccessfulTrial,
}

/// Hook invoked on the coordinator thread after every processed trial.
pub trait RunControl {
    fn on_trial(&mut self, run: &BalanceRun, row: &ProgressRow) -> ControlFlow<()>;
}

impl RunControl for () {
    fn on_trial(&mut self, _: &BalanceRun, _: &ProgressRow) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

impl<F: FnMut(&BalanceRun, &ProgressRow) -> ControlFlow<()>> RunControl for F {
    fn on_trial(&mut self, run: &BalanceRun, row: &ProgressRow) -> ControlFlow<()> {
        self(run, row)
    }
}

/// A resumable balancing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceRun {
    pub(crate) state: OptimizerState,
    pub(crate) config: BalanceConfig,
    pub(crate) target: TargetGraph,
    pub(crate) metric: DistanceMetric,
    pub(crate) progression: Vec<ProgressRow>,
    pub(crate) best_evaluation: Option<Evaluation>,
    pub(crate) converged: bool,
}

impl BalanceRun {
    pub fn new(
        mut state: OptimizerState,
        target: TargetGraph,
        metric: DistanceMetric,
        config: BalanceConfig,
    ) -> Result<Self, BalanceError> {
        config.validate()?;
        if state.history().is_empty() {
            if let Some(theta) = &config.initial_theta {
                state.enqueue(theta.clone())?;
            }
        }
        target_to_response_graph(&target)?;
        Ok(Self {
            state,
            config,
            target,
            metric,
            progression: Vec::new(),
            best_evaluation: None,
            converged: false,
        })
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn config(&self) -> &BalanceConfig {
        &self.config
    }

    /// Changes the trial budget, e.g. when resuming with a larger budget.
    pub fn set_max_iterations(&mut self, n: usize) -> Result<(), BalanceError> {
        let mut cfg = self.config.clone();
        cfg.max_iterations = n;
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    pub fn target(&self) -> &TargetGraph {
        &self.target
    }

    pub fn metric(&self) -> DistanceMetric {
        self.metric
    }

    pub fn progression(&self) -> &[ProgressRow] {
        &self.progression
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn best_evaluation(&self) -> Option<&Evaluation> {
        self.best_evaluation.as_ref()
    }

    /// True when no further trials will be asked or processed.
    pub fn is_finished(&self) -> bool {
        self.state.pending_trials().next().is_none() && !self.can_ask()
    }

    fn can_ask(&self) -> bool {
        !self.converged && self.state.history().len() < self.config.max_iterations
    }

    /// Runs until convergence, the trial budget, or a `Break` from `control`.
    ///
    /// Trials pending on entry (from a checkpoint) are evaluated first. On a
    /// `Break`, trials still in flight stay pending in the state.
    pub fn run<E: Evaluator + ?Sized>(
        &mut self,
        evaluator: &E,
        control: &mut dyn RunControl,
    ) -> Result<(), BalanceError> {
        let target = target_to_response_graph(&self.target)?;
        let width = self.config.parallel_width;
        let (job_tx, job_rx) = crossbeam_channel::unbounded::<(TrialId, ParameterVector)>();
        let (res_tx, res_rx) = crossbeam_channel::unbounded();

        std::thread::scope(|scope| {
            for _ in 0..width {
                let job_rx = job_rx.clone();
                let res_tx = res_tx.clone();
                scope.spawn(move || {
                    for (id, theta) in job_rx {
                        let outcome = evaluator.evaluate(&theta);
                        if res_tx.send((id, outcome)).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(res_tx);

            let mut in_flight: BTreeSet<TrialId> = BTreeSet::new();
            for trial in self.state.pending_trials() {
                in_flight.insert(trial.id);
                job_tx
                    .send((trial.id, trial.theta.clone()))
                    .expect("workers alive");
            }
            let mut stopped = false;
            let refill = |run: &mut Self, in_flight: &mut BTreeSet<TrialId>, stopped: bool| {
                while !stopped && in_flight.len() < width && run.can_ask() {
                    let (id, theta) = run.state.ask();
                    in_flight.insert(id);
                    job_tx.send((id, theta)).expect("workers alive");
                }
            };
            refill(self, &mut in_flight, stopped);

            let mut buffered = BTreeMap::new();
            let mut result = Ok(());
            while !stopped && !in_flight.is_empty() {
                let (id, outcome) = res_rx.recv().expect("a worker holds each in-flight job");
                buffered.insert(id, outcome);
                while let Some(next) = in_flight.first().copied() {
                    let Some(outcome) = buffered.remove(&next) else {
                        break;
                    };
                    in_flight.remove(&next);
                    let row = match self.process(next, outcome, &target) {
                        Ok(row) => row,
                        Err(e) => {
                            result = Err(e);
                            stopped = true;
                            break;
                        }
                    };
                    if control.on_trial(self, &row).is_break() {
                        stopped = true;
                        break;
                    }
                    refill(self, &mut in_flight, stopped);
                }
            }
            drop(job_tx);
            result
        })
    }

    fn process(
        &mut self,
        id: TrialId,
        outcome: Result<Evaluation, EvaluationError>,
        target: &ResponseGraph,
    ) -> Result<ProgressRow, BalanceError> {
        let (loss, aux) = match outcome {
            Ok(eval) => {
                let loss = graph_distance(&eval.graph, target, self.metric)
                    .map_err(|source| BalanceError::Graph { trial: id, source })?;
                let improved = self.state.best_loss().is_none_or(|b| loss < b);
                self.state.tell(id, loss)?;
                self.converged |= loss < self.config.epsilon;
                let aux = eval.aux.clone();
                if improved {
                    self.best_evaluation = Some(eval);
                }
                (loss, aux)
            }
            Err(_) => {
                self.state.fail(id)?;
                (f64::INFINITY, Vec::new())
            }
        };
        let row = ProgressRow {
            iteration: self.progression.len(),
            trial_id: id,
            loss,
            best_loss: self.state.best_loss().unwrap_or(f64::INFINITY),
            aux,
        };
        self.progression.push(row.clone());
        Ok(row)
    }

    pub fn result(&self) -> Result<BalanceResult, BalanceError> {
        let best = self.state.best().ok_or(BalanceError::NoSuccessfulTrial)?;
        debug_assert!(matches!(best.status, TrialStatus::Complete { .. }));
        Ok(BalanceResult {
            best_trial: best.id,
            best_theta: best.theta.clone(),
            best_loss: best.loss().expect("best trial is complete"),
            best_evaluation: self
                .best_evaluation
                .clone()
                .ok_or(BalanceError::NoSuccessfulTrial)?,
            progression: self.progression.clone(),
            converged: self.converged,
        })
    }
}

/// Runs the balancing loop to completion.
pub fn balance<E: Evaluator + ?Sized>(
    state: OptimizerState,
    target: &TargetGraph,
    evaluator: &E,
    metric: DistanceMetric,
    config: &BalanceConfig,
) -> Result<BalanceResult, BalanceError> {
    let mut run = BalanceRun::new(state, target.clone(), metric, config.clone())?;
    run.run(evaluator, &mut ())?;
    run.result()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metagame::{ParameterSpace, ParameterSpec, TargetEdge};
    use crate::optimize::Backend;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn labels() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    /// Two-node game whose margin for `a` over `b` is `theta[0]`.
    fn margin_eval(theta: &ParameterVector) -> Result<Evaluation, EvaluationError> {
        let m = theta.values()[0];
        let graph = ResponseGraph::new(
            labels(),
            vec![vec![0.0, m.max(0.0)], vec![(-m).max(0.0), 0.0]],
        )
        .unwrap();
        Ok(Evaluation {
            graph,
            aux: vec![m + 0.5],
        })
    }

    fn target() -> TargetGraph {
        TargetGraph::new(
            labels(),
            vec![TargetEdge {
                from: "a".into(),
                to: "b".into(),
                winrate: 0.7,
            }],
        )
        .unwrap()
    }

    fn state(seed: u64) -> OptimizerState {
        let space =
            ParameterSpace::new(vec![ParameterSpec::real("m", -0.5, 0.5).unwrap()]).unwrap();
        OptimizerState::new(space, Backend::default(), seed).unwrap()
    }

    #[test]
    fn single_iteration() {
        let cfg = BalanceConfig {
            max_iterations: 1,
            ..BalanceConfig::default()
        };
        let res = balance(
            state(0),
            &target(),
            &margin_eval,
            DistanceMetric::MeanSquared,
            &cfg,
        )
        .unwrap();
        assert_eq!(res.progression.len(), 1);
        assert_eq!(res.best_loss, res.progression[0].loss);
        assert_eq!(res.converged, res.best_loss < cfg.epsilon);
    }

    #[test]
    fn converges_and_best_is_monotone() {
        let cfg = BalanceConfig {
            epsilon: 1e-4,
            max_iterations: 200,
            parallel_width: 3,
            initial_theta: None,
        };
        let res = balance(
            state(4),
            &target(),
            &margin_eval,
            DistanceMetric::MeanSquared,
            &cfg,
        )
        .unwrap();
        assert!(res.converged, "best {}", res.best_loss);
        assert!(res.best_loss < 1e-4);
        assert!(res
            .progression
            .windows(2)
            .all(|w| w[1].best_loss <= w[0].best_loss));
        let min = res
            .progression
            .iter()
            .map(|r| r.loss)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min, res.best_loss);
    }

    #[test]
    fn initial_theta_is_trial_zero() {
        let cfg = BalanceConfig {
            max_iterations: 3,
            initial_theta: Some(ParameterVector::new(vec![0.2])),
            ..BalanceConfig::default()
        };
        let res = balance(
            state(0),
            &target(),
            &margin_eval,
            DistanceMetric::MeanSquared,
            &cfg,
        )
        .unwrap();
        assert_eq!(res.progression[0].trial_id, 0);
        assert!(res.progression[0].loss < 1e-20);
        assert_eq!(res.best_theta.values(), &[0.2]);
        assert!(res.converged);
    }

    #[test]
    fn failures_become_sentinels() {
        let calls = AtomicUsize::new(0);
        let flaky = |theta: &ParameterVector| {
            if calls.fetch_add(1, Ordering::SeqCst) % 3 == 1 {
                Err(EvaluationError("simulated crash".into()))
            } else {
                margin_eval(theta)
            }
        };
        let cfg = BalanceConfig {
            epsilon: 0.0,
            max_iterations: 12,
            parallel_width: 1,
            initial_theta: None,
        };
        let res = balance(
            state(1),
            &target(),
            &flaky,
            DistanceMetric::MeanSquared,
            &cfg,
        )
        .unwrap();
        assert_eq!(res.progression.len(), 12);
        let failed: Vec<_> = res.progression.iter().filter(|r| r.failed()).collect();
        assert_eq!(failed.len(), 4);
        assert!(failed.iter().all(|r| r.aux.is_empty()));
        assert!(res.best_loss.is_finite());
    }

    #[test]
    fn parallel_width_runs_are_reproducible() {
        let run = |w| {
            let cfg = BalanceConfig {
                epsilon: 0.0,
                max_iterations: 40,
                parallel_width: w,
                initial_theta: None,
            };
            balance(
                state(8),
                &target(),
                &margin_eval,
                DistanceMetric::MeanAbsolute,
                &cfg,
            )
            .unwrap()
            .progression
        };
        assert_eq!(run(4), run(4));
        assert_eq!(run(1), run(1));
    }

    #[test]
    fn interrupt_and_resume_matches_uninterrupted() {
        let cfg = BalanceConfig {
            epsilon: 0.0,
            max_iterations: 30,
            parallel_width: 4,
            initial_theta: None,
        };
        let mut full =
            BalanceRun::new(state(2), target(), DistanceMetric::MeanSquared, cfg.clone()).unwrap();
        full.run(&margin_eval, &mut ()).unwrap();

        let mut part =
            BalanceRun::new(state(2), target(), DistanceMetric::MeanSquared, cfg).unwrap();
        let mut stop = |_: &BalanceRun, row: &ProgressRow| {
            if row.iteration == 11 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        };
        part.run(&margin_eval, &mut stop).unwrap();
        assert_eq!(part.progression().len(), 12);
        assert!(part.state().pending_trials().count() > 0);

        let json = serde_json::to_string(&part).unwrap();
        let mut resumed: BalanceRun = serde_json::from_str(&json).unwrap();
        resumed.run(&margin_eval, &mut ()).unwrap();
        assert_eq!(resumed.progression(), full.progression());
        assert_eq!(resumed.state(), full.state());
    }

    #[test]
    fn rejects_graph_with_wrong_labels() {
        let wrong = |_: &ParameterVector| {
            Ok(Evaluation::new(
                ResponseGraph::zeros(vec!["x".into(), "y".into()]).unwrap(),
            ))
        };
        let err = balance(
            state(0),
            &target(),
            &wrong,
            DistanceMetric::MeanSquared,
            &BalanceConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, BalanceError::Graph { trial: 0, .. }));
    }
}

//! Ask/tell black-box optimization over a [`ParameterSpace`].
//!
//! Two backends are provided: uniform random search and a univariate
//! Tree-structured Parzen Estimator. Each ask for trial `k` draws from a
//! generator seeded by `(seed, k)`, so the ask sequence depends only on the
//! seed and on which trials were complete at the time of the ask.

mod balance;
pub mod checkpoint;
pub mod tpe;

pub use balance::{
    balance, BalanceConfig, BalanceError, BalanceResult, BalanceRun, Evaluation, EvaluationError,
    Evaluator, ProgressRow, RunControl,
};
pub use tpe::{tpe_sample_dimension, tpe_split, TpeConfig};

use crate::metagame::{MetagameError, ParamKind, ParameterSpace, ParameterSpec, ParameterVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use thiserror::Error;

pub type TrialId = u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("unknown trial id {0}")]
    UnknownTrial(TrialId),
    #[error("trial {0} has already been told")]
    AlreadyTold(TrialId),
    #[error("trial {id}: loss {loss} is not finite")]
    NonFiniteLoss { id: TrialId, loss: f64 },
    #[error("trial {id}: loss {loss} is negative")]
    NegativeLoss { id: TrialId, loss: f64 },
    #[error("need at least 2 complete trials, have {0}")]
    TooFewTrials(usize),
    #[error("good and bad observation sets must both be non-empty")]
    EmptyObservations,
    #[error("parameter `{0}` is fixed and cannot be sampled")]
    FixedParameter(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Space(#[from] MetagameError),
}

pub type Result<T, E = OptimizeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum TrialStatus {
    Pending,
    Complete {
        loss: f64,
    },
    /// Evaluation failed; the trial takes no part in modeling.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: TrialId,
    pub theta: ParameterVector,
    #[serde(flatten)]
    pub status: TrialStatus,
}

impl Trial {
    pub fn loss(&self) -> Option<f64> {
        match self.status {
            TrialStatus::Complete { loss } => Some(loss),
            _ => None,
        }
    }

    pub fn is_pending(&self) -> bool {
        self.status == TrialStatus::Pending
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Backend {
    #[serde(rename = "random")]
    RandomSearch,
    Tpe(TpeConfig),
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Tpe(TpeConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    space: ParameterSpace,
    history: Vec<Trial>,
    seed: u64,
    backend: Backend,
    /// Vectors handed out by `ask` before any sampling, e.g. a designer's initial guess.
    #[serde(default)]
    queued: VecDeque<ParameterVector>,
    best: Option<(TrialId, f64)>,
}

impl OptimizerState {
    pub fn new(space: ParameterSpace, backend: Backend, seed: u64) -> Result<Self> {
        if let Backend::Tpe(cfg) = &backend {
            cfg.validate()?;
        }
        Ok(Self {
            space,
            history: Vec::new(),
            seed,
            backend,
            queued: VecDeque::new(),
            best: None,
        })
    }

    /// Queues a vector to be returned by the next `ask`.
    pub fn enqueue(&mut self, theta: ParameterVector) -> Result<()> {
        self.space.check(&theta)?;
        self.queued.push_back(theta);
        Ok(())
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn history(&self) -> &[Trial] {
        &self.history
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn trial(&self, id: TrialId) -> Option<&Trial> {
        // ids are assigned densely from 0
        self.history.get(usize::try_from(id).ok()?)
    }

    pub fn best(&self) -> Option<&Trial> {
        self.best.and_then(|(id, _)| self.trial(id))
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.best.map(|(_, l)| l)
    }

    pub fn complete_trials(&self) -> impl Iterator<Item = &Trial> {
        self.history
            .iter()
            .filter(|t| matches!(t.status, TrialStatus::Complete { .. }))
    }

    pub fn pending_trials(&self) -> impl Iterator<Item = &Trial> {
        self.history.iter().filter(|t| t.is_pending())
    }

    pub fn ask(&mut self) -> (TrialId, ParameterVector) {
        let id = self.history.len() as TrialId;
        let theta = match self.queued.pop_front() {
            Some(theta) => theta,
            None => self.sample(id),
        };
        self.history.push(Trial {
            id,
            theta: theta.clone(),
            status: TrialStatus::Pending,
        });
        (id, theta)
    }

    fn sample(&self, id: TrialId) -> ParameterVector {
        let mut rng = crate::seed::rng(self.seed, &[id]);
        if let Backend::Tpe(cfg) = &self.backend {
            let complete: Vec<Trial> = self.complete_trials().cloned().collect();
            if complete.len() >= cfg.n_startup.max(2) {
                let (good, bad) =
                    tpe_split(&complete, cfg.gamma, cfg.gamma_cap).expect("at least 2 trials");
                let values = self
                    .space
                    .specs()
                    .iter()
                    .enumerate()
                    .map(|(d, spec)| match spec.fixed {
                        Some(f) => f,
                        None => {
                            let g: Vec<f64> = good.iter().map(|t| t.theta.values()[d]).collect();
                            let b: Vec<f64> = bad.iter().map(|t| t.theta.values()[d]).collect();
                            tpe_sample_dimension(
                                &g,
                                &b,
                                spec,
                                cfg.n_candidates,
                                cfg.bandwidth_floor,
                                &mut rng,
                            )
                            .expect("non-empty sets and free spec")
                        }
                    })
                    .collect();
                return ParameterVector::new(values);
            }
        }
        ParameterVector::new(
            self.space
                .specs()
                .iter()
                .map(|spec| sample_uniform(spec, &mut rng))
                .collect(),
        )
    }

    pub fn tell(&mut self, id: TrialId, loss: f64) -> Result<()> {
        if !loss.is_finite() {
            return Err(OptimizeError::NonFiniteLoss { id, loss });
        }
        if loss < 0.0 {
            return Err(OptimizeError::NegativeLoss { id, loss });
        }
        let trial = self.pending_mut(id)?;
        trial.status = TrialStatus::Complete { loss };
        if self.best.is_none_or(|(_, best)| loss < best) {
            self.best = Some((id, loss));
        }
        Ok(())
    }

    /// Marks a pending trial as failed; it is excluded from modeling.
    pub fn fail(&mut self, id: TrialId) -> Result<()> {
        self.pending_mut(id)?.status = TrialStatus::Failed;
        Ok(())
    }

    fn pending_mut(&mut self, id: TrialId) -> Result<&mut Trial> {
        let trial = usize::try_from(id)
            .ok()
            .and_then(|i| self.history.get_mut(i))
            .ok_or(OptimizeError::UnknownTrial(id))?;
        if !trial.is_pending() {
            return Err(OptimizeError::AlreadyTold(id));
        }
        Ok(trial)
    }
}

/// Uniform draw over the spec's domain; integers are uniform over whole values.
pub fn sample_uniform<R: Rng + ?Sized>(spec: &ParameterSpec, rng: &mut R) -> f64 {
    if let Some(f) = spec.fixed {
        return f;
    }
    match spec.kind {
        ParamKind::Integer => rng.random_range(spec.min as i64..=spec.max as i64) as f64,
        ParamKind::Real if spec.min == spec.max => spec.min,
        ParamKind::Real => rng.random_range(spec.min..=spec.max),
    }
}

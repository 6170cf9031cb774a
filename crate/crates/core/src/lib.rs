//! Automated balancing of multi-player games.
//!
//! A designer declares a target response graph over meta-strategies; the
//! balancing loop searches the game's parameter space, simulating matches
//! between agents, until the empirical response graph matches the target.

pub mod agents;
pub mod evalmat;
pub mod fsutil;
pub mod games_nf;
pub mod metagame;
pub mod optimize;
pub mod seed;
pub mod warfare;

pub use metagame::{
    center_winrates, graph_distance, response_graph, target_to_response_graph, DistanceMetric,
    EvaluationMatrix, ParamKind, ParameterSpace, ParameterSpec, ParameterVector, ResponseGraph,
    TargetEdge, TargetGraph, WinRateMatrix,
};
pub use optimize::{
    balance, Backend, BalanceConfig, BalanceResult, Evaluation, EvaluationError, Evaluator,
    OptimizerState, TpeConfig, Trial, TrialStatus,
};

//! Experiment configuration files.
//!
//! A config is a TOML document. Top-level keys:
//!
//! | key          | type            | default    |
//! |--------------|-----------------|------------|
//! | `game`       | `"normal-form"` or `"warfare"` | required |
//! | `strategies` | list of labels  | required   |
//! | `output_dir` | path            | `"out"`    |
//! | `seed`       | integer         | `0`        |
//! | `metric`     | `"mse"` or `"mae"` | `"mse"` |
//!
//! Tables: `[target]` (`nodes`, plus `[[target.edge]]` entries with `from`,
//! `to`, `winrate`), `[optimizer]` (`backend = "tpe" | "random"`, optional
//! `[optimizer.tpe]`), `[balance]` (`epsilon`, `max_iterations`,
//! `parallel_width`, optional `[balance.initial_theta]` name/value table),
//! `[eval]` (`games_per_matchup`, `tick_limit`, `exploit_symmetry`),
//! `[agents]` (`kind = "mcts" | "random"`, `budget`, `uct_c`, `rollout_depth`,
//! `distance_penalty`, `damage_scale`, `win_score`) and `[[parameter]]`
//! entries (`name`, optional `slot`, `kind`, `min`, `max`, `fixed`).
//!
//! Warfare strategies are bot kinds (`torch`, `nail`, `saw` or `T`, `N`, `S`);
//! each parameter binds to the slot named by `slot`, or by `name` when `slot`
//! is absent, and all 16 slots must be bound. Normal-form parameters bind to
//! pairs written `<row>.<col>` in strategy order; with no `[[parameter]]`
//! entries every pair is searched over [-1, 1]. A `fixed` value with no
//! bounds pins the parameter; missing bounds default to the slot's range.
//! Unknown keys are rejected.

use autobalance::agents::{AgentConfig, MctsConfig, RewardWeights};
use autobalance::evalmat::{kind_labels, EvalConfig, EvalError, WarfareEvaluator};
use autobalance::games_nf::{NormalFormEvaluator, NormalFormSpec};
use autobalance::warfare::{BotKind, RosterBinding, Slot, DEFAULT_TICK_LIMIT};
use autobalance::{
    Backend, BalanceConfig, DistanceMetric, Evaluator, OptimizerState, ParamKind, ParameterSpace,
    ParameterSpec, ParameterVector, TargetEdge, TargetGraph, TpeConfig,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn invalid(field: impl Into<String>, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        message: message.to_string(),
    }
}

pub(crate) fn parse_error(text: &str, e: toml::de::Error) -> ConfigError {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(1);
    ConfigError::Parse {
        line,
        message: e.message().to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameKind {
    NormalForm,
    Warfare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameKind,
    pub strategies: Vec<String>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub metric: DistanceMetric,
    pub target: TargetSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub balance: BalanceSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub agents: AgentsSection,
    #[serde(default, rename = "parameter", skip_serializing_if = "Vec::is_empty")]
    pub parameters: Vec<ParameterEntry>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub nodes: Vec<String>,
    #[serde(default, rename = "edge", skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<TargetEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Tpe,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub backend: BackendKind,
    pub tpe: TpeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceSection {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub parallel_width: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_theta: Option<BTreeMap<String, f64>>,
}

impl Default for BalanceSection {
    fn default() -> Self {
        let d = BalanceConfig::default();
        Self {
            epsilon: d.epsilon,
            max_iterations: d.max_iterations,
            parallel_width: d.parallel_width,
            initial_theta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub games_per_matchup: u32,
    pub tick_limit: u32,
    pub exploit_symmetry: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            games_per_matchup: 50,
            tick_limit: DEFAULT_TICK_LIMIT,
            exploit_symmetry: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    #[default]
    Mcts,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentsSection {
    pub kind: AgentKind,
    pub budget: u32,
    pub uct_c: f64,
    pub rollout_depth: u32,
    pub distance_penalty: f64,
    pub damage_scale: f64,
    pub win_score: f64,
}

impl Default for AgentsSection {
    fn default() -> Self {
        let m = MctsConfig::default();
        let w = RewardWeights::default();
        Self {
            kind: AgentKind::Mcts,
            budget: m.budget,
            uct_c: m.uct_c,
            rollout_depth: m.rollout_depth,
            distance_penalty: w.distance_penalty,
            damage_scale: w.damage_scale,
            win_score: w.win_score,
        }
    }
}

impl AgentsSection {
    pub fn agent(&self) -> AgentConfig {
        match self.kind {
            AgentKind::Mcts => AgentConfig::Mcts(MctsConfig {
                budget: self.budget,
                uct_c: self.uct_c,
                rollout_depth: self.rollout_depth,
            }),
            AgentKind::Random => AgentConfig::Random,
        }
    }

    pub fn weights(&self) -> RewardWeights {
        RewardWeights {
            distance_penalty: self.distance_penalty,
            damage_scale: self.damage_scale,
            win_score: self.win_score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ParamKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<f64>,
}

impl ExperimentConfig {
    /// Parses without validating; see [`parse_config`].
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| parse_error(text, e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types always serialize")
    }
}

/// The evaluator behind a game.
#[derive(Debug, Clone)]
pub enum Game {
    NormalForm(NormalFormEvaluator),
    Warfare(WarfareEvaluator),
}

impl Game {
    pub fn evaluator(&self) -> &dyn Evaluator {
        match self {
            Game::NormalForm(e) => e,
            Game::Warfare(e) => e,
        }
    }
}

/// A validated config together with the objects it describes.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub space: ParameterSpace,
    /// Target over the game's own labels, in the game's order.
    pub target: TargetGraph,
    pub game: Game,
    pub balance: BalanceConfig,
    pub backend: Backend,
}

/// Parses and validates a config.
pub fn parse_config(text: &str) -> Result<Experiment, ConfigError> {
    Experiment::new(ExperimentConfig::from_toml(text)?)
}

pub fn load_config(path: &Path) -> Result<Experiment, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, ConfigError> {
        let labels = game_labels(&config)?;
        let target = bind_target(&config, &labels)?;
        let (space, game) = match config.game {
            GameKind::NormalForm => {
                let space = normal_form_space(&config)?;
                let spec = NormalFormSpec::with_space(labels, space.clone())
                    .map_err(|e| invalid("parameter", e))?;
                (space, Game::NormalForm(NormalFormEvaluator::new(spec)))
            }
            GameKind::Warfare => {
                let (space, slots) = warfare_space(&config)?;
                let binding =
                    RosterBinding::new(&space, slots).map_err(|e| invalid("parameter", e))?;
                let eval = EvalConfig {
                    games_per_matchup: config.eval.games_per_matchup,
                    agent: config.agents.agent(),
                    weights: config.agents.weights(),
                    tick_limit: config.eval.tick_limit,
                    base_seed: config.seed,
                    exploit_symmetry: config.eval.exploit_symmetry,
                };
                let kinds = warfare_kinds(&config)?;
                let evaluator = WarfareEvaluator::new(binding, kinds, eval).map_err(|e| {
                    let field = match e {
                        EvalError::NoGames => "eval.games_per_matchup",
                        EvalError::NoTicks => "eval.tick_limit",
                        EvalError::Agent(_) => "agents",
                        _ => "eval",
                    };
                    invalid(field, e)
                })?;
                (space, Game::Warfare(evaluator))
            }
        };

        let initial_theta = config
            .balance
            .initial_theta
            .as_ref()
            .map(|m| theta_from_map(&space, m).map_err(|e| prefix("balance.initial_theta", e)))
            .transpose()?;
        let balance = BalanceConfig {
            epsilon: config.balance.epsilon,
            max_iterations: config.balance.max_iterations,
            parallel_width: config.balance.parallel_width,
            initial_theta,
        };
        balance.validate().map_err(|e| invalid("balance", e))?;

        let backend = match config.optimizer.backend {
            BackendKind::Tpe => Backend::Tpe(config.optimizer.tpe.clone()),
            BackendKind::Random => Backend::RandomSearch,
        };
        OptimizerState::new(space.clone(), backend.clone(), config.seed)
            .map_err(|e| invalid("optimizer.tpe", e))?;

        Ok(Self {
            config,
            space,
            target,
            game,
            balance,
            backend,
        })
    }

    /// Labels of the game's strategies, as used in matrices and CSV columns.
    pub fn labels(&self) -> &[String] {
        self.target.labels()
    }

    pub fn evaluator(&self) -> &dyn Evaluator {
        self.game.evaluator()
    }

    pub fn output_dir(&self) -> &Path {
        &self.config.output_dir
    }
}

fn prefix(field: &str, e: ConfigError) -> ConfigError {
    match e {
        ConfigError::Invalid { field: f, message } => invalid(format!("{field}.{f}"), message),
        other => other,
    }
}

fn game_labels(config: &ExperimentConfig) -> Result<Vec<String>, ConfigError> {
    match config.game {
        GameKind::NormalForm => {
            if config.strategies.len() < 2 {
                return Err(invalid("strategies", "at least 2 strategies are required"));
            }
            for (i, s) in config.strategies.iter().enumerate() {
                if s.is_empty() || s.contains('.') {
                    return Err(invalid(
                        format!("strategies[{i}]"),
                        "labels must be non-empty and must not contain `.`",
                    ));
                }
                if config.strategies[..i].contains(s) {
                    return Err(invalid(
                        format!("strategies[{i}]"),
                        format!("`{s}` is listed twice"),
                    ));
                }
            }
            Ok(config.strategies.clone())
        }
        GameKind::Warfare => Ok(kind_labels(&warfare_kinds(config)?)),
    }
}

fn warfare_kinds(config: &ExperimentConfig) -> Result<Vec<BotKind>, ConfigError> {
    let mut kinds = Vec::new();
    for (i, s) in config.strategies.iter().enumerate() {
        let kind = BotKind::parse(s).ok_or_else(|| {
            invalid(
                format!("strategies[{i}]"),
                format!("`{s}` is not a bot kind (torch, nail, saw)"),
            )
        })?;
        if kinds.contains(&kind) {
            return Err(invalid(
                format!("strategies[{i}]"),
                format!("{kind} is listed twice"),
            ));
        }
        kinds.push(kind);
    }
    if kinds.len() < 2 {
        return Err(invalid("strategies", "at least 2 bot kinds are required"));
    }
    Ok(kinds)
}

/// Maps a strategy name as written in the config to the game's label.
fn resolve_label(config: &ExperimentConfig, labels: &[String], name: &str) -> Option<String> {
    let i = config
        .strategies
        .iter()
        .position(|s| s == name)
        .or_else(|| match config.game {
            GameKind::Warfare => {
                let kind = BotKind::parse(name)?;
                labels.iter().position(|l| l == kind.label())
            }
            GameKind::NormalForm => None,
        })?;
    Some(labels[i].clone())
}

fn bind_target(config: &ExperimentConfig, labels: &[String]) -> Result<TargetGraph, ConfigError> {
    let t = &config.target;
    let mut nodes = Vec::new();
    for (i, n) in t.nodes.iter().enumerate() {
        let label = resolve_label(config, labels, n).ok_or_else(|| {
            invalid(
                format!("target.nodes[{i}]"),
                format!("`{n}` is not one of the strategies"),
            )
        })?;
        if nodes.contains(&label) {
            return Err(invalid(
                format!("target.nodes[{i}]"),
                format!("`{n}` is listed twice"),
            ));
        }
        nodes.push(label);
    }
    if nodes.len() != labels.len() {
        return Err(invalid(
            "target.nodes",
            "the target must list every strategy exactly once",
        ));
    }
    let mut edges = Vec::new();
    for (i, e) in t.edges.iter().enumerate() {
        let field = |k: &str| format!("target.edge[{i}].{k}");
        if !(0.0..=1.0).contains(&e.winrate) {
            return Err(invalid(
                field("winrate"),
                format!("{} is outside [0, 1]", e.winrate),
            ));
        }
        let end = |k: &str, name: &str| {
            resolve_label(config, labels, name)
                .ok_or_else(|| invalid(field(k), format!("`{name}` is not a target node")))
        };
        edges.push(TargetEdge {
            from: end("from", &e.from)?,
            to: end("to", &e.to)?,
            winrate: e.winrate,
        });
    }
    TargetGraph::new(labels.to_vec(), edges).map_err(|e| invalid("target", e))
}

fn build_spec(
    field: &str,
    entry: &ParameterEntry,
    kind: ParamKind,
    range: (f64, f64),
) -> Result<ParameterSpec, ConfigError> {
    let min = entry.min.unwrap_or(range.0);
    let max = entry.max.unwrap_or(range.1);
    let spec =
        ParameterSpec::new(entry.name.clone(), kind, min, max).map_err(|e| invalid(field, e))?;
    match entry.fixed {
        Some(v) => spec
            .with_fixed(v)
            .map_err(|e| invalid(format!("{field}.fixed"), e)),
        None => Ok(spec),
    }
}

fn normal_form_space(config: &ExperimentConfig) -> Result<ParameterSpace, ConfigError> {
    let labels = &config.strategies;
    if config.parameters.is_empty() {
        return NormalFormSpec::new(labels.clone())
            .map(|s| s.space().clone())
            .map_err(|e| invalid("parameter", e));
    }
    let k = labels.len();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect();
    let mut specs: Vec<Option<ParameterSpec>> = vec![None; pairs.len()];
    for (n, entry) in config.parameters.iter().enumerate() {
        let field = format!("parameter[{n}]");
        let slot = entry.slot.as_deref().unwrap_or(&entry.name);
        let pos = slot.split_once('.').and_then(|(a, b)| {
            let (i, j) = (
                labels.iter().position(|l| l == a)?,
                labels.iter().position(|l| l == b)?,
            );
            pairs.iter().position(|&p| p == (i, j))
        });
        let pos = pos.ok_or_else(|| {
            invalid(
                format!("{field}.slot"),
                format!("`{slot}` is not a pair `<row>.<col>` with row listed before col"),
            )
        })?;
        if specs[pos].is_some() {
            return Err(invalid(
                format!("{field}.slot"),
                format!("pair `{slot}` is bound twice"),
            ));
        }
        let kind = entry.kind.unwrap_or(ParamKind::Real);
        specs[pos] = Some(build_spec(&field, entry, kind, (-1.0, 1.0))?);
    }
    let specs = specs
        .into_iter()
        .zip(&pairs)
        .map(|(s, &(i, j))| {
            s.ok_or_else(|| {
                invalid(
                    "parameter",
                    format!("pair `{}.{}` is not bound", labels[i], labels[j]),
                )
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    ParameterSpace::new(specs).map_err(|e| invalid("parameter", e))
}

fn warfare_space(config: &ExperimentConfig) -> Result<(ParameterSpace, Vec<Slot>), ConfigError> {
    let mut specs = Vec::new();
    let mut slots = Vec::new();
    for (n, entry) in config.parameters.iter().enumerate() {
        let field = format!("parameter[{n}]");
        let name = entry.slot.as_deref().unwrap_or(&entry.name);
        let slot: Slot = name
            .parse()
            .map_err(|e| invalid(format!("{field}.slot"), e))?;
        let (lo, hi) = slot.field.range();
        let kind = entry.kind.unwrap_or(ParamKind::Integer);
        specs.push(build_spec(&field, entry, kind, (lo as f64, hi as f64))?);
        slots.push(slot);
    }
    let space = ParameterSpace::new(specs).map_err(|e| invalid("parameter", e))?;
    Ok((space, slots))
}

/// Builds a vector from name/value pairs. Fixed parameters may be omitted.
pub fn theta_from_map(
    space: &ParameterSpace,
    values: &BTreeMap<String, f64>,
) -> Result<ParameterVector, ConfigError> {
    if let Some(unknown) = values.keys().find(|k| space.index_of(k).is_none()) {
        return Err(invalid(unknown.clone(), "no such parameter"));
    }
    let theta = space
        .specs()
        .iter()
        .map(|s| match (values.get(&s.name), s.fixed) {
            (Some(&v), _) => Ok(v),
            (None, Some(f)) => Ok(f),
            (None, None) => Err(invalid(s.name.clone(), "missing value")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let theta = ParameterVector::new(theta);
    space.check(&theta).map_err(|e| invalid("theta", e))?;
    Ok(theta)
}

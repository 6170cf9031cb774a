//! Empirical win-rate matrices from simulated Workshop Warfare matches.
//!
//! Game `g` of matchup `(i, j)` is seeded with `seed::derive(base_seed, [i * n + j, g])`,
//! and kind `i` is player 1 in even-numbered games.

use crate::agents::{act, AgentConfig, AgentError, RewardWeights};
use crate::metagame::{
    center_winrates, response_graph, EvaluationMatrix, MetagameError, ParameterVector,
    WinRateMatrix,
};
use crate::optimize::{Evaluation, EvaluationError, Evaluator};
use crate::seed;
use crate::warfare::replay::Replay;
use crate::warfare::{
    BindingError, BotConfig, BotKind, EngineError, GameState, Outcome, Player, Roster,
    RosterBinding, DEFAULT_TICK_LIMIT,
};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("games_per_matchup must be at least 1")]
    NoGames,
    #[error("tick_limit must be at least 1")]
    NoTicks,
    #[error("an evaluation matrix needs at least 2 kinds, got {0}")]
    TooFewKinds(usize),
    #[error("kind {0} is listed twice")]
    DuplicateKind(BotKind),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Binding(#[from] BindingError),
    #[error(transparent)]
    Metagame(#[from] MetagameError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub games_per_matchup: u32,
    pub agent: AgentConfig,
    pub weights: RewardWeights,
    pub tick_limit: u32,
    pub base_seed: u64,
    /// Simulate only `i < j` and fill the rest by complement.
    pub exploit_symmetry: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            games_per_matchup: 50,
            agent: AgentConfig::default(),
            weights: RewardWeights::default(),
            tick_limit: DEFAULT_TICK_LIMIT,
            base_seed: 0,
            exploit_symmetry: true,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.games_per_matchup == 0 {
            return Err(EvalError::NoGames);
        }
        if self.tick_limit == 0 {
            return Err(EvalError::NoTicks);
        }
        self.agent.validate()?;
        self.weights.validate()?;
        Ok(())
    }
}

/// Result of one game from the point of view of the `(i, j)` matchup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchResult {
    IWin,
    JWin,
    Draw,
}

/// Plays one episode to the end with `cfg.agent` in both seats, optionally recording every tick.
pub fn play_match(
    p1: BotConfig,
    p2: BotConfig,
    cfg: &EvalConfig,
    match_seed: u64,
    replay: Option<&mut Replay>,
) -> Result<Outcome, EvalError> {
    play_match_with([&cfg.agent, &cfg.agent], p1, p2, cfg, match_seed, replay)
}

/// As [`play_match`] with a separate agent per seat.
pub fn play_match_with(
    agents: [&AgentConfig; 2],
    p1: BotConfig,
    p2: BotConfig,
    cfg: &EvalConfig,
    match_seed: u64,
    mut replay: Option<&mut Replay>,
) -> Result<Outcome, EvalError> {
    let mut state = GameState::with_tick_limit(p1, p2, match_seed, cfg.tick_limit)?;
    let mut rngs = [seed::rng(match_seed, &[1]), seed::rng(match_seed, &[2])];
    while !state.is_terminal() {
        let mut actions = [None; 2];
        for p in Player::BOTH {
            if state.is_awake(p) {
                actions[p.index()] = Some(act(
                    agents[p.index()],
                    &state,
                    p,
                    &cfg.weights,
                    &mut rngs[p.index()],
                )?);
            }
        }
        state.advance(actions)?;
        if let Some(r) = replay.as_deref_mut() {
            r.push(actions, &state);
        }
    }
    Ok(state.outcome.expect("loop ends on a terminal state"))
}

/// One game between kinds `i` and `j`; `i_first` puts kind `i` in the player-1 seat.
pub fn run_match(
    roster: &Roster,
    kind_i: BotKind,
    kind_j: BotKind,
    cfg: &EvalConfig,
    match_seed: u64,
    i_first: bool,
) -> Result<MatchResult, EvalError> {
    let (a, b) = (*roster.get(kind_i), *roster.get(kind_j));
    let (p1, p2) = if i_first { (a, b) } else { (b, a) };
    let i_seat = if i_first { Player::One } else { Player::Two };
    Ok(match play_match(p1, p2, cfg, match_seed, None)?.winner() {
        None => MatchResult::Draw,
        Some(p) if p == i_seat => MatchResult::IWin,
        Some(_) => MatchResult::JWin,
    })
}

/// Tallies of one matchup, from kind `i`'s side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchupStats {
    pub wins: u32,
    pub losses: u32,
    pub draws: u32,
}

impl MatchupStats {
    pub fn games(&self) -> u32 {
        self.wins + self.losses + self.draws
    }

    fn record(&mut self, r: MatchResult) {
        match r {
            MatchResult::IWin => self.wins += 1,
            MatchResult::JWin => self.losses += 1,
            MatchResult::Draw => self.draws += 1,
        }
    }

    /// Wins plus half the draws, over games played.
    pub fn winrate(&self) -> f64 {
        (f64::from(self.wins) + 0.5 * f64::from(self.draws)) / f64::from(self.games())
    }

    /// 95% Wilson score interval for the win rate.
    pub fn ci95(&self) -> (f64, f64) {
        wilson(
            self.winrate(),
            f64::from(self.games()),
            1.959_963_984_540_054,
        )
    }

    pub fn swapped(&self) -> Self {
        Self {
            wins: self.losses,
            losses: self.wins,
            draws: self.draws,
        }
    }
}

fn wilson(p: f64, n: f64, z: f64) -> (f64, f64) {
    let z2 = z * z;
    let centre = p + z2 / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let denom = 1.0 + z2 / n;
    (
        ((centre - half) / denom).max(0.0),
        ((centre + half) / denom).min(1.0),
    )
}

fn game_seed(cfg: &EvalConfig, matchup: u64, game: u32) -> u64 {
    seed::derive(cfg.base_seed, &[matchup, u64::from(game)])
}

/// Plays `games_per_matchup` games of `(i, j)` in parallel; `matchup` selects the seed stream.
pub fn estimate_matchup(
    roster: &Roster,
    kind_i: BotKind,
    kind_j: BotKind,
    cfg: &EvalConfig,
    matchup: u64,
) -> Result<MatchupStats, EvalError> {
    cfg.validate()?;
    let results = (0..cfg.games_per_matchup)
        .into_par_iter()
        .map(|g| {
            run_match(
                roster,
                kind_i,
                kind_j,
                cfg,
                game_seed(cfg, matchup, g),
                g % 2 == 0,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut stats = MatchupStats::default();
    results.into_iter().for_each(|r| stats.record(r));
    Ok(stats)
}

pub fn estimate_winrate(
    roster: &Roster,
    kind_i: BotKind,
    kind_j: BotKind,
    cfg: &EvalConfig,
    matchup: u64,
) -> Result<f64, EvalError> {
    Ok(estimate_matchup(roster, kind_i, kind_j, cfg, matchup)?.winrate())
}

/// Win rates and their centered evaluation matrix, with per-pair tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixEstimate {
    pub winrates: WinRateMatrix,
    pub evaluation: EvaluationMatrix,
    /// Upper-triangle tallies `(i, j, stats)` from kind `i`'s side.
    pub matchups: Vec<(usize, usize, MatchupStats)>,
}

pub fn kind_labels(kinds: &[BotKind]) -> Vec<String> {
    kinds.iter().map(|k| k.label().to_string()).collect()
}

/// Simulates every matchup among `kinds`. All games run concurrently and are
/// reduced in index order, so the output does not depend on scheduling.
pub fn build_evaluation_matrix(
    roster: &Roster,
    kinds: &[BotKind],
    cfg: &EvalConfig,
) -> Result<MatrixEstimate, EvalError> {
    cfg.validate()?;
    let n = kinds.len();
    if n < 2 {
        return Err(EvalError::TooFewKinds(n));
    }
    for (a, k) in kinds.iter().enumerate() {
        if kinds[..a].contains(k) {
            return Err(EvalError::DuplicateKind(*k));
        }
    }
    roster.validate()?;

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j));
            if !cfg.exploit_symmetry {
                pairs.push((j, i));
            }
        }
    }
    let jobs: Vec<(usize, u32)> = (0..pairs.len())
        .flat_map(|p| (0..cfg.games_per_matchup).map(move |g| (p, g)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(p, g)| {
            let (i, j) = pairs[p];
            let seed = game_seed(cfg, (i * n + j) as u64, g);
            run_match(roster, kinds[i], kinds[j], cfg, seed, g % 2 == 0)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut stats = vec![MatchupStats::default(); pairs.len()];
    for (&(p, _), r) in jobs.iter().zip(results) {
        stats[p].record(r);
    }

    let mut rows = vec![vec![0.5; n]; n];
    let mut matchups = Vec::new();
    for (p, &(i, j)) in pairs.iter().enumerate() {
        if i > j {
            continue;
        }
        let mut s = stats[p];
        let w = if cfg.exploit_symmetry {
            s.winrate()
        } else {
            // Average both directions so the complement rule holds exactly.
            let back = stats[p + 1].swapped();
            let w = 0.5 * (s.winrate() + back.winrate());
            s.wins += back.wins;
            s.losses += back.losses;
            s.draws += back.draws;
            w
        };
        rows[i][j] = w;
        rows[j][i] = 1.0 - w;
        matchups.push((i, j, s));
    }
    let winrates = WinRateMatrix::new(kind_labels(kinds), rows)?;
    let evaluation = center_winrates(&winrates)?;
    Ok(MatrixEstimate {
        winrates,
        evaluation,
        matchups,
    })
}

/// Evaluator that binds a parameter vector to a roster and simulates the matrix.
#[derive(Debug, Clone)]
pub struct WarfareEvaluator {
    binding: RosterBinding,
    kinds: Vec<BotKind>,
    cfg: EvalConfig,
}

impl WarfareEvaluator {
    pub fn new(
        binding: RosterBinding,
        kinds: Vec<BotKind>,
        cfg: EvalConfig,
    ) -> Result<Self, EvalError> {
        cfg.validate()?;
        if kinds.len() < 2 {
            return Err(EvalError::TooFewKinds(kinds.len()));
        }
        Ok(Self {
            binding,
            kinds,
            cfg,
        })
    }

    pub fn estimate(&self, theta: &ParameterVector) -> Result<MatrixEstimate, EvalError> {
        let roster = self.binding.bind(theta)?;
        build_evaluation_matrix(&roster, &self.kinds, &self.cfg)
    }

    pub fn kinds(&self) -> &[BotKind] {
        &self.kinds
    }

    pub fn config(&self) -> &EvalConfig {
        &self.cfg
    }
}

impl Evaluator for WarfareEvaluator {
    fn evaluate(&self, theta: &ParameterVector) -> Result<Evaluation, EvaluationError> {
        let est = self
            .estimate(theta)
            .map_err(|e| EvaluationError(e.to_string()))?;
        Ok(Evaluation {
            graph: response_graph(&est.evaluation),
            aux: est
                .winrates
                .upper()
                .into_iter()
                .map(|(_, _, w)| w)
                .collect(),
        })
    }

    fn columns(&self) -> Vec<String> {
        let l = kind_labels(&self.kinds);
        let n = l.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| format!("w_{}_{}", l[i], l[j]))
            .collect()
    }
}

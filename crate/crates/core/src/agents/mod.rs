//! Game-playing agents: MCTS with a tiered reward, plus random and scripted baselines.

mod mcts;

pub use mcts::{mcts_act, MctsConfig, SearchTree};

use crate::warfare::{Action, EngineError, GameState, Outcome, Player};
use rand::seq::IteratorRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("the game is over")]
    Terminal,
    #[error("{0} is sleeping")]
    Sleeping(Player),
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("scripted agents only play normal-form games")]
    ScriptedInWarfare,
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentConfig {
    Mcts(MctsConfig),
    Random,
    /// Always plays the strategy with this index (normal-form games only).
    Scripted(usize),
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig::Mcts(MctsConfig::default())
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        match self {
            AgentConfig::Mcts(cfg) => cfg.validate(),
            _ => Ok(()),
        }
    }
}

/// Reward tiers: moving apart costs a little, damage matters more, winning dominates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    /// Penalty per cell by which the bots' Manhattan distance grows.
    pub distance_penalty: f64,
    /// Reward per health point dealt, and penalty per point taken.
    pub damage_scale: f64,
    pub win_score: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            distance_penalty: 1.0,
            damage_scale: 10.0,
            win_score: 1000.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::InvalidConfig(m.to_string()));
        if !(0.0..=10.0).contains(&self.distance_penalty) {
            return bad("distance_penalty must lie in [0, 10]");
        }
        if !(10.0..=99.0).contains(&self.damage_scale) {
            return bad("damage_scale must lie in [10, 99]");
        }
        if self.win_score != 1000.0 {
            return bad("win_score must be 1000");
        }
        Ok(())
    }

    /// Reward for `player` of a single transition `prev -> next`.
    pub fn step_reward(&self, prev: &GameState, next: &GameState, player: Player) -> f64 {
        self.step_rewards(&Snapshot::of(prev), &Snapshot::of(next))[player.index()]
    }

    pub(crate) fn step_rewards(&self, prev: &Snapshot, next: &Snapshot) -> [f64; 2] {
        let spread = next.distance as f64 - prev.distance as f64;
        let distance = -self.distance_penalty * spread.max(0.0);
        let lost = [
            (prev.health[0] - next.health[0]) as f64,
            (prev.health[1] - next.health[1]) as f64,
        ];
        let terminal = match (prev.outcome, next.outcome.and_then(|o| o.winner())) {
            (None, Some(Player::One)) => [self.win_score, -self.win_score],
            (None, Some(Player::Two)) => [-self.win_score, self.win_score],
            _ => [0.0, 0.0],
        };
        [
            distance + self.damage_scale * (lost[1] - lost[0]) + terminal[0],
            distance + self.damage_scale * (lost[0] - lost[1]) + terminal[1],
        ]
    }
}

/// The parts of a state the reward depends on.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Snapshot {
    distance: u32,
    health: [i32; 2],
    outcome: Option<Outcome>,
}

impl Snapshot {
    pub(crate) fn of(s: &GameState) -> Self {
        Self {
            distance: s.distance(),
            health: [s.bots[0].health, s.bots[1].health],
            outcome: s.outcome,
        }
    }
}

/// Total reward for `player` along a trajectory of successive states.
pub fn rollout_reward(
    trajectory: &[GameState],
    player: Player,
    weights: &RewardWeights,
) -> Result<f64, AgentError> {
    if trajectory.is_empty() {
        return Err(AgentError::EmptyTrajectory);
    }
    Ok(trajectory
        .windows(2)
        .map(|w| weights.step_reward(&w[0], &w[1], player))
        .sum())
}

fn check_can_act(state: &GameState, player: Player) -> Result<(), AgentError> {
    if state.is_terminal() {
        return Err(AgentError::Terminal);
    }
    if !state.bot(player).awake() {
        return Err(AgentError::Sleeping(player));
    }
    Ok(())
}

/// Uniform choice among the legal actions.
pub fn random_act<R: Rng + ?Sized>(
    state: &GameState,
    player: Player,
    rng: &mut R,
) -> Result<Action, AgentError> {
    check_can_act(state, player)?;
    Ok(state
        .legal_actions(player)?
        .iter()
        .choose(rng)
        .expect("awake bots always have legal actions"))
}

/// Chooses an action for an awake player of a Workshop Warfare match.
pub fn act<R: Rng + ?Sized>(
    agent: &AgentConfig,
    state: &GameState,
    player: Player,
    weights: &RewardWeights,
    rng: &mut R,
) -> Result<Action, AgentError> {
    match agent {
        AgentConfig::Mcts(cfg) => mcts_act(state, player, cfg, weights, rng),
        AgentConfig::Random => random_act(state, player, rng),
        AgentConfig::Scripted(_) => Err(AgentError::ScriptedInWarfare),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warfare::Roster;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fresh() -> GameState {
        let r = Roster::table_fair();
        GameState::new(r.torch, r.nail, 0).unwrap()
    }

    #[test]
    fn quiet_trajectory_scores_zero() {
        let s0 = fresh();
        let s1 = s0.step(Some(Action::S), Some(Action::S)).unwrap();
        let w = RewardWeights::default();
        assert_eq!(
            rollout_reward(&[s0.clone(), s1], Player::One, &w).unwrap(),
            0.0
        );
        assert_eq!(rollout_reward(&[s0], Player::Two, &w).unwrap(), 0.0);
        assert_eq!(
            rollout_reward(&[], Player::One, &w),
            Err(AgentError::EmptyTrajectory)
        );
    }

    #[test]
    fn damage_and_win_terms() {
        let w = RewardWeights::default();
        let s0 = fresh();
        let mut s1 = s0.clone();
        s1.bots[1].health -= 3;
        assert_eq!(w.step_reward(&s0, &s1, Player::One), 30.0);
        assert_eq!(w.step_reward(&s0, &s1, Player::Two), -30.0);

        let mut dead = s0.clone();
        dead.bots[1].health = -1;
        dead.outcome = Some(crate::warfare::Outcome::P1Win);
        assert_eq!(w.step_reward(&s0, &dead, Player::One), 1000.0 + 50.0);
        assert_eq!(w.step_reward(&s0, &dead, Player::Two), -1000.0 - 50.0);
    }

    #[test]
    fn moving_apart_is_penalized_for_both() {
        let r = Roster::table_fair();
        let s0 = GameState::new(r.nail, r.saw, 0).unwrap();
        // Nail steps toward the saw: distance shrinks, no penalty.
        let s1 = s0.step(Some(Action::R), Some(Action::S)).unwrap();
        let w = RewardWeights::default();
        assert_eq!(w.step_reward(&s0, &s1, Player::One), 0.0);
        // Let the nail wake up, then step back.
        let s2 = s1.step(None, Some(Action::S)).unwrap();
        let s3 = s2.step(Some(Action::L), Some(Action::S)).unwrap();
        assert_eq!(w.step_reward(&s2, &s3, Player::One), -1.0);
        assert_eq!(w.step_reward(&s2, &s3, Player::Two), -1.0);
    }

    #[test]
    fn random_agent_respects_cooldown_and_seed() {
        let mut cooling = fresh();
        cooling.bots[0].cooldown = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            assert_ne!(
                random_act(&cooling, Player::One, &mut rng).unwrap(),
                Action::A
            );
        }
        let seq = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| random_act(&cooling, Player::Two, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(seq(3), seq(3));
    }

    #[test]
    fn random_agent_is_uniform() {
        let s = fresh();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut counts = [0usize; 6];
        for _ in 0..6000 {
            counts[random_act(&s, Player::One, &mut rng).unwrap().index()] += 1;
        }
        for c in counts {
            assert!((900..=1100).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn agents_refuse_sleeping_or_finished_games() {
        let s = fresh().step(Some(Action::U), Some(Action::U)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            random_act(&s, Player::One, &mut rng),
            Err(AgentError::Sleeping(Player::One))
        );
        let mut over = fresh();
        over.outcome = Some(crate::warfare::Outcome::Draw);
        assert_eq!(
            random_act(&over, Player::One, &mut rng),
            Err(AgentError::Terminal)
        );
        assert_eq!(
            act(
                &AgentConfig::Scripted(0),
                &fresh(),
                Player::One,
                &RewardWeights::default(),
                &mut rng
            ),
            Err(AgentError::ScriptedInWarfare)
        );
    }

    #[test]
    fn reward_weight_tiers() {
        assert!(RewardWeights::default().validate().is_ok());
        let w = RewardWeights {
            damage_scale: 5.0,
            ..RewardWeights::default()
        };
        assert!(w.validate().is_err());
    }
}

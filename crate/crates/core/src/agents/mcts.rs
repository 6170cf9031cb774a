//! Decoupled-UCB Monte Carlo tree search for simultaneous moves.
//!
//! Each node keeps independent arm statistics per awake player; a child is
//! keyed by the joint choice. Ticks where both bots sleep are skipped on
//! expansion, with their rewards folded into the edge.

use super::{check_can_act, AgentError, RewardWeights, Snapshot};
use crate::warfare::{Action, GameState, Player};
use rand::seq::IndexedRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MctsConfig {
    /// Search iterations per decision.
    pub budget: u32,
    pub uct_c: f64,
    /// Ticks simulated by each random rollout.
    pub rollout_depth: u32,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            budget: 625,
            uct_c: std::f64::consts::SQRT_2,
            rollout_depth: 40,
        }
    }
}

impl MctsConfig {
    pub fn with_budget(budget: u32) -> Self {
        Self {
            budget,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.budget == 0 {
            return Err(AgentError::InvalidConfig(
                "budget must be at least 1".into(),
            ));
        }
        if !self.uct_c.is_finite() || self.uct_c < 0.0 {
            return Err(AgentError::InvalidConfig(
                "uct_c must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub action: Action,
    pub visits: u32,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Child {
    /// Arm index chosen by each player, `None` for a sleeping player.
    pub arms: [Option<u8>; 2],
    pub node: usize,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub state: GameState,
    pub visits: u32,
    /// Iterations that ended here with a rollout or a terminal evaluation.
    pub evaluations: u32,
    pub arms: [Vec<Arm>; 2],
    pub children: Vec<Child>,
    /// Reward collected on the way from the parent to this node.
    pub edge: [f64; 2],
}

impl Node {
    fn new(state: GameState, edge: [f64; 2]) -> Self {
        let arms = std::array::from_fn(|i| match state.legal_actions(Player::BOTH[i]) {
            Ok(set) => set
                .iter()
                .map(|action| Arm {
                    action,
                    visits: 0,
                    total: 0.0,
                })
                .collect(),
            Err(_) => Vec::new(),
        });
        Self {
            state,
            visits: 0,
            evaluations: 0,
            arms,
            children: Vec::new(),
            edge,
        }
    }

    fn child(&self, arms: [Option<u8>; 2]) -> Option<usize> {
        self.children
            .iter()
            .find(|c| c.arms == arms)
            .map(|c| c.node)
    }
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<Node>,
    /// Smallest and largest backed-up return per player, for normalizing Q.
    bounds: [(f64, f64); 2],
}

impl SearchTree {
    pub fn search<R: Rng + ?Sized>(
        root: &GameState,
        cfg: &MctsConfig,
        weights: &RewardWeights,
        rng: &mut R,
    ) -> Result<Self, AgentError> {
        cfg.validate()?;
        if root.is_terminal() {
            return Err(AgentError::Terminal);
        }
        let mut tree = Self {
            nodes: vec![Node::new(root.clone(), [0.0; 2])],
            bounds: [(f64::INFINITY, f64::NEG_INFINITY); 2],
        };
        let mut path = Vec::new();
        let mut choices = Vec::new();
        for _ in 0..cfg.budget {
            tree.iterate(cfg, weights, rng, &mut path, &mut choices)?;
        }
        Ok(tree)
    }

    fn iterate<R: Rng + ?Sized>(
        &mut self,
        cfg: &MctsConfig,
        weights: &RewardWeights,
        rng: &mut R,
        path: &mut Vec<usize>,
        choices: &mut Vec<[Option<u8>; 2]>,
    ) -> Result<(), AgentError> {
        path.clear();
        choices.clear();
        let mut at = 0;
        path.push(at);
        let leaf_value = loop {
            if self.nodes[at].state.is_terminal() {
                break [0.0; 2];
            }
            let key = self.select(at, cfg.uct_c, rng);
            choices.push(key);
            if let Some(next) = self.nodes[at].child(key) {
                at = next;
                path.push(at);
                continue;
            }
            let child = self.expand(at, key, weights)?;
            path.push(child);
            break rollout(&self.nodes[child].state, cfg.rollout_depth, weights, rng)?;
        };

        let mut ret = leaf_value;
        self.nodes[*path.last().unwrap()].evaluations += 1;
        for k in (0..path.len()).rev() {
            self.nodes[path[k]].visits += 1;
            if k == 0 {
                break;
            }
            let edge = self.nodes[path[k]].edge;
            ret[0] += edge[0];
            ret[1] += edge[1];
            let parent = &mut self.nodes[path[k - 1]];
            for p in 0..2 {
                if let Some(i) = choices[k - 1][p] {
                    let arm = &mut parent.arms[p][i as usize];
                    arm.visits += 1;
                    arm.total += ret[p];
                    let (lo, hi) = &mut self.bounds[p];
                    *lo = lo.min(ret[p]);
                    *hi = hi.max(ret[p]);
                }
            }
        }
        Ok(())
    }

    fn select<R: Rng + ?Sized>(&self, at: usize, c: f64, rng: &mut R) -> [Option<u8>; 2] {
        let node = &self.nodes[at];
        std::array::from_fn(|p| {
            let arms = &node.arms[p];
            if arms.is_empty() {
                return None;
            }
            let untried: Vec<u8> = (0..arms.len() as u8)
                .filter(|&i| arms[i as usize].visits == 0)
                .collect();
            if let Some(&i) = untried.choose(rng) {
                return Some(i);
            }
            let (lo, hi) = self.bounds[p];
            let log_n = f64::from(node.visits.max(1)).ln();
            let score = |a: &Arm| {
                let q = a.total / f64::from(a.visits);
                let q = if hi > lo { (q - lo) / (hi - lo) } else { 0.5 };
                q + c * (log_n / f64::from(a.visits)).sqrt()
            };
            let mut best = 0;
            for i in 1..arms.len() {
                if score(&arms[i]) > score(&arms[best]) {
                    best = i;
                }
            }
            Some(best as u8)
        })
    }

    fn expand(
        &mut self,
        at: usize,
        key: [Option<u8>; 2],
        weights: &RewardWeights,
    ) -> Result<usize, AgentError> {
        let parent = &self.nodes[at];
        let actions: [Option<Action>; 2] =
            std::array::from_fn(|p| key[p].map(|i| parent.arms[p][i as usize].action));
        let mut state = parent.state.clone();
        let mut edge = [0.0; 2];
        let mut before = Snapshot::of(&state);
        state.advance(actions)?;
        loop {
            let after = Snapshot::of(&state);
            let r = weights.step_rewards(&before, &after);
            edge[0] += r[0];
            edge[1] += r[1];
            before = after;
            if state.is_terminal() || state.bots.iter().any(|b| b.awake()) {
                break;
            }
            state.advance([None, None])?;
        }
        let id = self.nodes.len();
        self.nodes.push(Node::new(state, edge));
        self.nodes[at].children.push(Child {
            arms: key,
            node: id,
        });
        Ok(id)
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Root visit count of each of `player`'s actions.
    pub fn root_visits(&self, player: Player) -> Vec<(Action, u32)> {
        self.root().arms[player.index()]
            .iter()
            .map(|a| (a.action, a.visits))
            .collect()
    }

    /// The most visited root action of `player`, ties broken at random.
    pub fn best_action<R: Rng + ?Sized>(&self, player: Player, rng: &mut R) -> Option<Action> {
        let arms = &self.root().arms[player.index()];
        let most = arms.iter().map(|a| a.visits).max()?;
        let top: Vec<Action> = arms
            .iter()
            .filter(|a| a.visits == most)
            .map(|a| a.action)
            .collect();
        top.choose(rng).copied()
    }
}

/// Random playout of up to `depth` ticks; returns the reward collected by each player.
fn rollout<R: Rng + ?Sized>(
    start: &GameState,
    depth: u32,
    weights: &RewardWeights,
    rng: &mut R,
) -> Result<[f64; 2], AgentError> {
    let mut total = [0.0; 2];
    if start.is_terminal() || depth == 0 {
        return Ok(total);
    }
    let mut state = start.clone();
    let mut before = Snapshot::of(&state);
    let mut buf = [Action::S; 6];
    for _ in 0..depth {
        let actions: [Option<Action>; 2] = std::array::from_fn(|p| {
            let set = state.legal_actions(Player::BOTH[p]).ok()?;
            let mut n = 0;
            for a in set.iter() {
                buf[n] = a;
                n += 1;
            }
            (n > 0).then(|| buf[rng.random_range(0..n)])
        });
        state.advance(actions)?;
        let after = Snapshot::of(&state);
        let r = weights.step_rewards(&before, &after);
        total[0] += r[0];
        total[1] += r[1];
        before = after;
        if state.is_terminal() {
            break;
        }
    }
    Ok(total)
}

/// Runs a search from `state` and returns `player`'s most visited root action.
pub fn mcts_act<R: Rng + ?Sized>(
    state: &GameState,
    player: Player,
    cfg: &MctsConfig,
    weights: &RewardWeights,
    rng: &mut R,
) -> Result<Action, AgentError> {
    check_can_act(state, player)?;
    let tree = SearchTree::search(state, cfg, weights, rng)?;
    Ok(tree
        .best_action(player, rng)
        .expect("an awake player has root arms"))
}

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const GRID_SIZE: i8 = 5;
pub const DEFAULT_TICK_LIMIT: u32 = 500;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("{kind} bot: {field} = {value} is outside {min}..={max}")]
    InvalidConfig {
        kind: BotKind,
        field: &'static str,
        value: u32,
        min: u32,
        max: u32,
    },
    #[error("the game is over")]
    Terminal,
    #[error("{0} is sleeping and cannot act")]
    ActionWhileSleeping(Player),
    #[error("{0} is awake and must be given an action")]
    MissingAction(Player),
    #[error("{0} used its special action during cooldown")]
    ActionOnCooldown(Player),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BotKind {
    Torch,
    Nail,
    Saw,
}

impl BotKind {
    pub const ALL: [BotKind; 3] = [BotKind::Torch, BotKind::Nail, BotKind::Saw];

    /// One-letter node label used in response graphs.
    pub fn label(self) -> &'static str {
        match self {
            BotKind::Torch => "T",
            BotKind::Nail => "N",
            BotKind::Saw => "S",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BotKind::Torch => "torch",
            BotKind::Nail => "nail",
            BotKind::Saw => "saw",
        }
    }

    /// Accepts `T`, `torch`, `Torch`, and so on.
    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|k| s == k.label() || s.eq_ignore_ascii_case(k.name()))
    }
}

impl fmt::Display for BotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tunable constants of one bot. Fields that do not apply to `kind` are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BotConfig {
    pub kind: BotKind,
    pub health: u32,
    pub cooldown: u32,
    pub damage: u32,
    pub ticks_between_moves: u32,
    pub torch_duration: u32,
    pub torch_range: u32,
    pub damage_change: u32,
    pub ability_duration: u32,
}

impl BotConfig {
    pub fn torch(
        health: u32,
        cooldown: u32,
        damage: u32,
        ticks_between_moves: u32,
        torch_duration: u32,
        torch_range: u32,
    ) -> Self {
        Self {
            kind: BotKind::Torch,
            health,
            cooldown,
            damage,
            ticks_between_moves,
            torch_duration,
            torch_range,
            damage_change: 0,
            ability_duration: 0,
        }
    }

    pub fn nail(health: u32, cooldown: u32, damage: u32, ticks_between_moves: u32) -> Self {
        Self {
            kind: BotKind::Nail,
            health,
            cooldown,
            damage,
            ticks_between_moves,
            torch_duration: 0,
            torch_range: 0,
            damage_change: 0,
            ability_duration: 0,
        }
    }

    pub fn saw(
        health: u32,
        cooldown: u32,
        damage: u32,
        damage_change: u32,
        ability_duration: u32,
        ticks_between_moves: u32,
    ) -> Self {
        Self {
            kind: BotKind::Saw,
            health,
            cooldown,
            damage,
            ticks_between_moves,
            torch_duration: 0,
            torch_range: 0,
            damage_change,
            ability_duration,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        for field in super::Field::for_kind(self.kind) {
            let value = field.get(self);
            let (min, max) = field.range();
            if !(min..=max).contains(&value) {
                return Err(EngineError::InvalidConfig {
                    kind: self.kind,
                    field: field.name(),
                    value,
                    min,
                    max,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    S,
    U,
    D,
    L,
    R,
    A,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::S,
        Action::U,
        Action::D,
        Action::L,
        Action::R,
        Action::A,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_char(self) -> char {
        match self {
            Action::S => 'S',
            Action::U => 'U',
            Action::D => 'D',
            Action::L => 'L',
            Action::R => 'R',
            Action::A => 'A',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_char() == c)
    }

    fn direction(self) -> Option<Direction> {
        match self {
            Action::U => Some(Direction::Up),
            Action::D => Some(Direction::Down),
            Action::L => Some(Direction::Left),
            Action::R => Some(Direction::Right),
            Action::S | Action::A => None,
        }
    }
}

/// Legal actions for one bot. Empty means the bot is sleeping and is not consulted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const SLEEPING: ActionSet = ActionSet(0);

    pub fn contains(self, a: Action) -> bool {
        self.0 & (1 << a.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |&a| self.contains(a))
    }

    fn insert(&mut self, a: Action) {
        self.0 |= 1 << a.index();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::One => f.write_str("player 1"),
            Player::Two => f.write_str("player 2"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Up,
        Direction::Down,
        Direction::Left,
        Direction::Right,
    ];

    /// Up decreases `y`; the grid origin is the top-left corner.
    pub fn delta(self) -> (i8, i8) {
        match self {
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Direction::Up => 'U',
            Direction::Down => 'D',
            Direction::Left => 'L',
            Direction::Right => 'R',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub x: i8,
    pub y: i8,
}

impl Pos {
    pub const fn new(x: i8, y: i8) -> Self {
        Self { x, y }
    }

    pub fn in_grid(self) -> bool {
        (0..GRID_SIZE).contains(&self.x) && (0..GRID_SIZE).contains(&self.y)
    }

    pub fn offset(self, dir: Direction) -> Pos {
        let (dx, dy) = dir.delta();
        Pos::new(self.x + dx, self.y + dy)
    }

    pub fn manhattan(self, other: Pos) -> u32 {
        ((self.x - other.x).unsigned_abs() + (self.y - other.y).unsigned_abs()) as u32
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Nail {
    pub pos: Pos,
    pub dir: Direction,
    pub owner: Player,
    pub damage: u32,
    pub spawned_at: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BotState {
    pub config: BotConfig,
    pub pos: Pos,
    pub health: i32,
    /// Ticks until the bot may act again; 0 means awake.
    pub sleep: u32,
    pub cooldown: u32,
    /// Remaining ticks of the torch flame or the saw damage buff.
    pub effect: u32,
    /// Where the current torch flame was lit.
    pub flame_origin: Pos,
}

impl BotState {
    fn new(config: BotConfig, pos: Pos) -> Self {
        Self {
            config,
            pos,
            health: config.health as i32,
            sleep: 0,
            cooldown: 0,
            effect: 0,
            flame_origin: pos,
        }
    }

    pub fn awake(&self) -> bool {
        self.sleep == 0
    }

    pub fn alive(&self) -> bool {
        self.health > 0
    }

    /// Damage currently dealt by flames, nails or spikes.
    pub fn current_damage(&self) -> u32 {
        match self.config.kind {
            BotKind::Saw if self.effect > 0 => self.config.damage + self.config.damage_change,
            _ => self.config.damage,
        }
    }

    pub fn flame_covers(&self, cell: Pos) -> bool {
        if self.config.kind != BotKind::Torch || self.effect == 0 {
            return false;
        }
        let o = self.flame_origin;
        let d = o.manhattan(cell);
        (o.x == cell.x || o.y == cell.y) && d >= 1 && d <= self.config.torch_range
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    P1Win,
    P2Win,
    Draw,
}

impl Outcome {
    pub fn winner(self) -> Option<Player> {
        match self {
            Outcome::P1Win => Some(Player::One),
            Outcome::P2Win => Some(Player::Two),
            Outcome::Draw => None,
        }
    }
}

/// Complete state of a Workshop Warfare match. Cloning yields an
/// independent forward model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameState {
    pub tick: u32,
    pub tick_limit: u32,
    pub bots: [BotState; 2],
    pub nails: Vec<Nail>,
    /// Not consumed by the engine, which is deterministic.
    pub seed: u64,
    pub outcome: Option<Outcome>,
}

pub const START_POSITIONS: [Pos; 2] = [Pos::new(0, 0), Pos::new(GRID_SIZE - 1, GRID_SIZE - 1)];

impl GameState {
    pub fn new(p1: BotConfig, p2: BotConfig, seed: u64) -> Result<Self, EngineError> {
        Self::with_tick_limit(p1, p2, seed, DEFAULT_TICK_LIMIT)
    }

    pub fn with_tick_limit(
        p1: BotConfig,
        p2: BotConfig,
        seed: u64,
        tick_limit: u32,
    ) -> Result<Self, EngineError> {
        p1.validate()?;
        p2.validate()?;
        Ok(Self {
            tick: 0,
            tick_limit: tick_limit.max(1),
            bots: [
                BotState::new(p1, START_POSITIONS[0]),
                BotState::new(p2, START_POSITIONS[1]),
            ],
            nails: Vec::new(),
            seed,
            outcome: None,
        })
    }

    pub fn bot(&self, p: Player) -> &BotState {
        &self.bots[p.index()]
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.outcome
    }

    pub fn is_terminal(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn distance(&self) -> u32 {
        self.bots[0].pos.manhattan(self.bots[1].pos)
    }

    pub fn is_awake(&self, p: Player) -> bool {
        !self.is_terminal() && self.bot(p).awake()
    }

    pub fn legal_actions(&self, p: Player) -> Result<ActionSet, EngineError> {
        if self.is_terminal() {
            return Err(EngineError::Terminal);
        }
        let bot = self.bot(p);
        if !bot.awake() {
            return Ok(ActionSet::SLEEPING);
        }
        let mut set = ActionSet::default();
        for a in Action::ALL {
            if a != Action::A || bot.cooldown == 0 {
                set.insert(a);
            }
        }
        Ok(set)
    }

    pub fn step(&self, a1: Option<Action>, a2: Option<Action>) -> Result<GameState, EngineError> {
        let mut next = self.clone();
        next.advance([a1, a2])?;
        Ok(next)
    }

    /// Advances one tick in place. Exactly the awake bots must be given actions.
    ///
    /// Resolution order within a tick:
    /// 1. simultaneous movement (moves off-grid, into the other bot's cell or
    ///    into the cell the other bot is entering become standing still);
    /// 2. special actions, which start the cooldown;
    /// 3. nails already in flight advance one cell, new nails appear on the
    ///    cells adjacent to the shooter, and nails on the opponent's cell hit;
    /// 4. torch flame damage, then saw contact damage (once per tick each);
    /// 5. acting bots fall asleep for `ticks_between_moves` (standing still is free);
    /// 6. the outcome is decided, the tick advances and every timer counts down.
    pub fn advance(&mut self, actions: [Option<Action>; 2]) -> Result<(), EngineError> {
        if self.is_terminal() {
            return Err(EngineError::Terminal);
        }
        for p in Player::BOTH {
            let bot = &self.bots[p.index()];
            match (bot.awake(), actions[p.index()]) {
                (true, None) => return Err(EngineError::MissingAction(p)),
                (false, Some(_)) => return Err(EngineError::ActionWhileSleeping(p)),
                (true, Some(Action::A)) if bot.cooldown > 0 => {
                    return Err(EngineError::ActionOnCooldown(p))
                }
                _ => {}
            }
        }

        // Movement.
        let targets: [Option<Pos>; 2] = std::array::from_fn(|i| {
            let dir = actions[i].and_then(Action::direction)?;
            let to = self.bots[i].pos.offset(dir);
            (to.in_grid() && to != self.bots[1 - i].pos).then_some(to)
        });
        let collide = matches!(targets, [Some(a), Some(b)] if a == b);
        if !collide {
            for (bot, target) in self.bots.iter_mut().zip(targets) {
                if let Some(to) = target {
                    bot.pos = to;
                }
            }
        }

        // Special actions.
        let mut spawned: Vec<Nail> = Vec::new();
        for p in Player::BOTH {
            if actions[p.index()] != Some(Action::A) {
                continue;
            }
            let tick = self.tick;
            let bot = &mut self.bots[p.index()];
            match bot.config.kind {
                BotKind::Torch => {
                    bot.effect = bot.config.torch_duration;
                    bot.flame_origin = bot.pos;
                }
                BotKind::Nail => {
                    spawned.extend(Direction::ALL.into_iter().filter_map(|dir| {
                        let pos = bot.pos.offset(dir);
                        pos.in_grid().then_some(Nail {
                            pos,
                            dir,
                            owner: p,
                            damage: bot.config.damage,
                            spawned_at: tick,
                        })
                    }));
                }
                BotKind::Saw => bot.effect = bot.config.ability_duration,
            }
            bot.cooldown = bot.config.cooldown;
        }

        // Projectiles.
        for nail in &mut self.nails {
            nail.pos = nail.pos.offset(nail.dir);
        }
        self.nails.retain(|n| n.pos.in_grid());
        self.nails.append(&mut spawned);
        let mut damage = [0u32; 2];
        let bots = &self.bots;
        self.nails.retain(|n| {
            let target = n.owner.other();
            if n.pos == bots[target.index()].pos {
                damage[target.index()] += n.damage;
                false
            } else {
                true
            }
        });

        // Flames and spikes.
        for p in Player::BOTH {
            let (me, them) = (&self.bots[p.index()], &self.bots[p.other().index()]);
            if me.flame_covers(them.pos) {
                damage[p.other().index()] += me.config.damage;
            }
            if me.config.kind == BotKind::Saw && me.pos.manhattan(them.pos) == 1 {
                damage[p.other().index()] += me.current_damage();
            }
        }
        for (bot, d) in self.bots.iter_mut().zip(damage) {
            bot.health -= d as i32;
        }

        for (bot, action) in self.bots.iter_mut().zip(actions) {
            match action {
                Some(Action::S) => bot.sleep = 0,
                Some(_) => bot.sleep = bot.config.ticks_between_moves,
                None => {}
            }
        }

        self.outcome = match (self.bots[0].alive(), self.bots[1].alive()) {
            (true, true) => None,
            (true, false) => Some(Outcome::P1Win),
            (false, true) => Some(Outcome::P2Win),
            (false, false) => Some(Outcome::Draw),
        };
        self.tick += 1;
        for bot in &mut self.bots {
            bot.sleep = bot.sleep.saturating_sub(1);
            bot.cooldown = bot.cooldown.saturating_sub(1);
            bot.effect = bot.effect.saturating_sub(1);
        }
        if self.outcome.is_none() && self.tick >= self.tick_limit {
            self.outcome = Some(Outcome::Draw);
        }
        Ok(())
    }
}

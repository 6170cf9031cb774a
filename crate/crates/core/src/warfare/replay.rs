//! Line-oriented match replays, one line per tick:
//!
//! ```text
//! tick;p1_action;p2_action;p1_hp;p2_hp;positions;nails
//! 0;R;-;4;6;1,0|4,4;
//! 1;A;L;4;6;1,0|3,4;1,1,D,1|0,0,L,1|2,0,R,1
//! ```
//!
//! `tick` is the tick at which the actions were taken, `-` marks a sleeping
//! bot, and health, positions and nails describe the state after the tick.
//! Positions are `x,y|x,y`; nails are `x,y,dir,owner` joined by `|`.

use super::{Action, Direction, GameState, Player, Pos};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("replay line {line}: {reason}")]
pub struct ReplayParseError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NailRecord {
    pub pos: Pos,
    pub dir: Direction,
    pub owner: Player,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayLine {
    pub tick: u32,
    pub actions: [Option<Action>; 2],
    pub health: [i32; 2],
    pub positions: [Pos; 2],
    pub nails: Vec<NailRecord>,
}

impl ReplayLine {
    /// Describes the transition taken at `after.tick - 1` with `actions`.
    pub fn record(actions: [Option<Action>; 2], after: &GameState) -> Self {
        Self {
            tick: after.tick.saturating_sub(1),
            actions,
            health: [after.bots[0].health, after.bots[1].health],
            positions: [after.bots[0].pos, after.bots[1].pos],
            nails: after
                .nails
                .iter()
                .map(|n| NailRecord {
                    pos: n.pos,
                    dir: n.dir,
                    owner: n.owner,
                })
                .collect(),
        }
    }
}

impl fmt::Display for ReplayLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let act = |a: Option<Action>| a.map_or('-', Action::as_char);
        write!(
            f,
            "{};{};{};{};{};{}|{};",
            self.tick,
            act(self.actions[0]),
            act(self.actions[1]),
            self.health[0],
            self.health[1],
            self.positions[0],
            self.positions[1],
        )?;
        for (i, n) in self.nails.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{},{},{}", n.pos, n.dir.as_char(), n.owner.index() + 1)?;
        }
        Ok(())
    }
}

fn parse_pos(s: &str) -> Option<Pos> {
    let (x, y) = s.split_once(',')?;
    Some(Pos::new(x.parse().ok()?, y.parse().ok()?))
}

fn parse_action(s: &str) -> Option<Option<Action>> {
    match s {
        "-" => Some(None),
        _ => {
            let mut chars = s.chars();
            let c = chars.next()?;
            chars
                .next()
                .is_none()
                .then(|| Action::from_char(c))?
                .map(Some)
        }
    }
}

fn parse_nail(s: &str) -> Option<NailRecord> {
    let parts: Vec<&str> = s.split(',').collect();
    let [x, y, d, o] = parts.as_slice() else {
        return None;
    };
    let dir = Direction::ALL
        .into_iter()
        .find(|dir| d.len() == 1 && d.starts_with(dir.as_char()))?;
    let owner = match *o {
        "1" => Player::One,
        "2" => Player::Two,
        _ => return None,
    };
    Some(NailRecord {
        pos: Pos::new(x.parse().ok()?, y.parse().ok()?),
        dir,
        owner,
    })
}

impl FromStr for ReplayLine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fields: Vec<&str> = s.split(';').collect();
        let [tick, a1, a2, h1, h2, pos, nails] = fields.as_slice() else {
            return Err(format!("expected 7 fields, found {}", fields.len()));
        };
        let bad = |what: &str| format!("malformed {what}");
        let (p1, p2) = pos.split_once('|').ok_or_else(|| bad("positions"))?;
        Ok(Self {
            tick: tick.parse().map_err(|_| bad("tick"))?,
            actions: [
                parse_action(a1).ok_or_else(|| bad("p1 action"))?,
                parse_action(a2).ok_or_else(|| bad("p2 action"))?,
            ],
            health: [
                h1.parse().map_err(|_| bad("p1 health"))?,
                h2.parse().map_err(|_| bad("p2 health"))?,
            ],
            positions: [
                parse_pos(p1).ok_or_else(|| bad("positions"))?,
                parse_pos(p2).ok_or_else(|| bad("positions"))?,
            ],
            nails: if nails.is_empty() {
                Vec::new()
            } else {
                nails
                    .split('|')
                    .map(|n| parse_nail(n).ok_or_else(|| bad("nail")))
                    .collect::<Result<_, _>>()?
            },
        })
    }
}

/// Accumulates replay lines for one match.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Replay {
    pub lines: Vec<ReplayLine>,
}

impl Replay {
    pub fn push(&mut self, actions: [Option<Action>; 2], after: &GameState) {
        self.lines.push(ReplayLine::record(actions, after));
    }

    pub fn parse(text: &str) -> Result<Self, ReplayParseError> {
        let lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.trim().parse().map_err(|reason| ReplayParseError {
                    line: i + 1,
                    reason,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { lines })
    }
}

impl fmt::Display for Replay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.lines.iter().try_for_each(|l| writeln!(f, "{l}"))
    }
}

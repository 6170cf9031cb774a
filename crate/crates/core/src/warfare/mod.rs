//! Workshop Warfare: a deterministic 5x5, tick-based, simultaneous-action
//! robot duel, and the mapping from parameter vectors to bot configurations.

mod engine;
pub mod replay;

pub use engine::*;

use crate::metagame::{MetagameError, ParameterSpace, ParameterSpec, ParameterVector};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// A tunable field of [`BotConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Health,
    Cooldown,
    Damage,
    TicksBetweenMoves,
    TorchDuration,
    TorchRange,
    DamageChange,
    AbilityDuration,
}

impl Field {
    pub const ALL: [Field; 8] = [
        Field::Health,
        Field::Cooldown,
        Field::Damage,
        Field::TicksBetweenMoves,
        Field::TorchDuration,
        Field::TorchRange,
        Field::DamageChange,
        Field::AbilityDuration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Health => "health",
            Field::Cooldown => "cooldown",
            Field::Damage => "damage",
            Field::TicksBetweenMoves => "ticks_between_moves",
            Field::TorchDuration => "torch_duration",
            Field::TorchRange => "torch_range",
            Field::DamageChange => "damage_change",
            Field::AbilityDuration => "ability_duration",
        }
    }

    /// Allowed values, inclusive.
    pub fn range(self) -> (u32, u32) {
        match self {
            Field::Health | Field::Damage | Field::DamageChange => (1, 10),
            Field::TorchRange => (1, 4),
            Field::Cooldown
            | Field::TicksBetweenMoves
            | Field::TorchDuration
            | Field::AbilityDuration => (1, 6),
        }
    }

    /// Fields of a bot kind, in parameter-table order.
    pub fn for_kind(kind: BotKind) -> &'static [Field] {
        match kind {
            BotKind::Torch => &[
                Field::Health,
                Field::Cooldown,
                Field::Damage,
                Field::TicksBetweenMoves,
                Field::TorchDuration,
                Field::TorchRange,
            ],
            BotKind::Nail => &[
                Field::Health,
                Field::Cooldown,
                Field::Damage,
                Field::TicksBetweenMoves,
            ],
            BotKind::Saw => &[
                Field::Health,
                Field::Cooldown,
                Field::Damage,
                Field::DamageChange,
                Field::AbilityDuration,
                Field::TicksBetweenMoves,
            ],
        }
    }

    pub fn get(self, c: &BotConfig) -> u32 {
        match self {
            Field::Health => c.health,
            Field::Cooldown => c.cooldown,
            Field::Damage => c.damage,
            Field::TicksBetweenMoves => c.ticks_between_moves,
            Field::TorchDuration => c.torch_duration,
            Field::TorchRange => c.torch_range,
            Field::DamageChange => c.damage_change,
            Field::AbilityDuration => c.ability_duration,
        }
    }

    fn set(self, c: &mut BotConfig, v: u32) {
        let slot = match self {
            Field::Health => &mut c.health,
            Field::Cooldown => &mut c.cooldown,
            Field::Damage => &mut c.damage,
            Field::TicksBetweenMoves => &mut c.ticks_between_moves,
            Field::TorchDuration => &mut c.torch_duration,
            Field::TorchRange => &mut c.torch_range,
            Field::DamageChange => &mut c.damage_change,
            Field::AbilityDuration => &mut c.ability_duration,
        };
        *slot = v;
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BindingError {
    #[error("unknown slot `{0}` (expected `<bot>.<field>`, e.g. `torch.health`)")]
    UnknownSlot(String),
    #[error("slot `{0}` is bound more than once")]
    DuplicateSlot(Slot),
    #[error("slot `{0}` is not bound")]
    UnboundSlot(Slot),
    #[error("{count} slots given for a space of {dims} parameters")]
    Arity { count: usize, dims: usize },
    #[error("value {value} for `{slot}` is not a whole number in {min}..={max}")]
    Value {
        slot: Slot,
        value: f64,
        min: u32,
        max: u32,
    },
    #[error(transparent)]
    Space(#[from] MetagameError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A bot-config field addressed as `<bot>.<field>`, e.g. `saw.damage_change`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub kind: BotKind,
    pub field: Field,
}

impl Slot {
    /// All 16 slots in parameter-table order (Torch, Nail, Saw).
    pub fn all() -> Vec<Slot> {
        BotKind::ALL
            .into_iter()
            .flat_map(|kind| {
                Field::for_kind(kind)
                    .iter()
                    .map(move |&field| Slot { kind, field })
            })
            .collect()
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.kind.name(), self.field.name())
    }
}

impl FromStr for Slot {
    type Err = BindingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || BindingError::UnknownSlot(s.to_string());
        let (bot, field) = s.split_once('.').ok_or_else(unknown)?;
        let kind = BotKind::parse(bot).ok_or_else(unknown)?;
        let field = Field::for_kind(kind)
            .iter()
            .copied()
            .find(|f| f.name() == field)
            .ok_or_else(unknown)?;
        Ok(Slot { kind, field })
    }
}

/// One configuration per bot kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Roster {
    pub torch: BotConfig,
    pub nail: BotConfig,
    pub saw: BotConfig,
}

impl Roster {
    /// Parameters found for the fair (all 50%) target.
    pub fn table_fair() -> Self {
        Self {
            torch: BotConfig::torch(9, 3, 3, 6, 3, 4),
            nail: BotConfig::nail(4, 1, 7, 2),
            saw: BotConfig::saw(6, 3, 2, 7, 6, 4),
        }
    }

    /// Parameters found for the cyclic (70% dominance) target.
    pub fn table_cyclic() -> Self {
        Self {
            torch: BotConfig::torch(7, 5, 3, 4, 2, 3),
            nail: BotConfig::nail(3, 1, 9, 2),
            saw: BotConfig::saw(4, 3, 6, 6, 3, 5),
        }
    }

    pub fn get(&self, kind: BotKind) -> &BotConfig {
        match kind {
            BotKind::Torch => &self.torch,
            BotKind::Nail => &self.nail,
            BotKind::Saw => &self.saw,
        }
    }

    fn get_mut(&mut self, kind: BotKind) -> &mut BotConfig {
        match kind {
            BotKind::Torch => &mut self.torch,
            BotKind::Nail => &mut self.nail,
            BotKind::Saw => &mut self.saw,
        }
    }

    pub fn value(&self, slot: Slot) -> u32 {
        slot.field.get(self.get(slot.kind))
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        BotKind::ALL
            .iter()
            .try_for_each(|&k| self.get(k).validate())
    }

    /// The roster as a parameter vector in [`Slot::all`] order.
    pub fn to_vector(&self) -> ParameterVector {
        ParameterVector::new(
            Slot::all()
                .into_iter()
                .map(|s| self.value(s) as f64)
                .collect(),
        )
    }
}

/// The full 16-parameter search space with the table's bounds, named by slot.
pub fn table_space() -> ParameterSpace {
    ParameterSpace::new(
        Slot::all()
            .into_iter()
            .map(|slot| {
                let (min, max) = slot.field.range();
                ParameterSpec::integer(slot.to_string(), min as i64, max as i64)
                    .expect("static bounds are valid")
            })
            .collect(),
    )
    .expect("slot names are unique")
}

/// Maps each parameter of a space to one roster slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RosterBinding {
    slots: Vec<Slot>,
}

impl RosterBinding {
    /// `slots[i]` receives parameter `i` of `space`. Every slot must be bound exactly once.
    pub fn new(space: &ParameterSpace, slots: Vec<Slot>) -> Result<Self, BindingError> {
        if slots.len() != space.len() {
            return Err(BindingError::Arity {
                count: slots.len(),
                dims: space.len(),
            });
        }
        let mut seen = std::collections::BTreeSet::new();
        for &s in &slots {
            if !seen.insert(s) {
                return Err(BindingError::DuplicateSlot(s));
            }
        }
        if let Some(missing) = Slot::all().into_iter().find(|s| !seen.contains(s)) {
            return Err(BindingError::UnboundSlot(missing));
        }
        for (spec, &slot) in space.specs().iter().zip(&slots) {
            let (min, max) = slot.field.range();
            if spec.min < min as f64 || spec.max > max as f64 {
                return Err(BindingError::Value {
                    slot,
                    value: if spec.min < min as f64 {
                        spec.min
                    } else {
                        spec.max
                    },
                    min,
                    max,
                });
            }
        }
        Ok(Self { slots })
    }

    /// Binding by parameter name, for spaces named like [`table_space`].
    pub fn by_name(space: &ParameterSpace) -> Result<Self, BindingError> {
        let slots = space
            .specs()
            .iter()
            .map(|s| s.name.parse())
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(space, slots)
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn bind(&self, theta: &ParameterVector) -> Result<Roster, BindingError> {
        if theta.len() != self.slots.len() {
            return Err(BindingError::Arity {
                count: self.slots.len(),
                dims: theta.len(),
            });
        }
        let mut roster = Roster::table_fair();
        for (&slot, &value) in self.slots.iter().zip(theta.values()) {
            let (min, max) = slot.field.range();
            if value.fract() != 0.0 || value < min as f64 || value > max as f64 {
                return Err(BindingError::Value {
                    slot,
                    value,
                    min,
                    max,
                });
            }
            slot.field.set(roster.get_mut(slot.kind), value as u32);
        }
        roster.validate()?;
        Ok(roster)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_slots_round_trip_names() {
        let all = Slot::all();
        assert_eq!(all.len(), 16);
        for s in &all {
            assert_eq!(s.to_string().parse::<Slot>().unwrap(), *s);
        }
        assert!("torch.damage_change".parse::<Slot>().is_err());
        assert!("robot.health".parse::<Slot>().is_err());
        assert!("T.health".parse::<Slot>().is_ok());
    }

    #[test]
    fn table_space_binds_table_rosters() {
        let space = table_space();
        assert_eq!(space.free_dims(), 16);
        let binding = RosterBinding::by_name(&space).unwrap();
        for roster in [Roster::table_fair(), Roster::table_cyclic()] {
            let theta = roster.to_vector();
            space.check(&theta).unwrap();
            assert_eq!(binding.bind(&theta).unwrap(), roster);
        }
    }

    #[test]
    fn binding_requires_full_coverage() {
        let space = table_space();
        let mut slots = Slot::all();
        slots[1] = slots[0];
        assert!(matches!(
            RosterBinding::new(&space, slots),
            Err(BindingError::DuplicateSlot(_))
        ));
        assert!(matches!(
            RosterBinding::new(&space, Slot::all()[..15].to_vec()),
            Err(BindingError::Arity { .. })
        ));
    }

    #[test]
    fn out_of_range_health_rejected() {
        let mut torch = Roster::table_fair().torch;
        torch.health = 11;
        assert!(matches!(
            GameState::new(torch, Roster::table_fair().nail, 0),
            Err(EngineError::InvalidConfig {
                field: "health",
                value: 11,
                ..
            })
        ));
    }
}

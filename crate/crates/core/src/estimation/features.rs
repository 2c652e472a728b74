//! Declarative feature rules mapping a finished trace to variable values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::Variable;
use crate::error::{Error, Result};
use crate::gridworld::{landmarks, midline, Action, EnvId, Item, Outcome, Pos, Quadrant, TileKind, WorldState, PICK_UP_ROOM};
use crate::sim::Trace;

/// Value recorded when a feature is not defined for a trace, such as a
/// terminal side for an episode that timed out.
pub const UNDEFINED: &str = "?";

/// How a feature is computed from a trace. Sides are `l`/`r` relative to
/// the environment's midline.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureRule {
    /// Side of the tile where the episode ended on a pill or terminal.
    TerminalSide,
    /// Ground kind of the first step: `g` or `s`.
    FloorKind,
    /// Kind of the floor-memory cue tile at the first step: `g` or `s`.
    CueKind,
    /// Side of an entity at a given step.
    SideAt {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entity: Option<String>,
        step: u32,
    },
    /// Side of the pill at the first step.
    PillSide,
    /// Pick-up quadrant of the pill at the first step: `n`, `e`, `w`, `s`.
    PillQuadrant,
    /// Whether the entity holds the item when the trace ends: `y` or `n`.
    PickedUp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entity: Option<String>,
        item: Item,
    },
    /// `1` if a pill was collected, else `0`.
    RewardCollected,
    /// Color of the collected pill: `re` or `gr`.
    CollectedColor,
    /// Direction of an entity's action at a step: `l` or `r`.
    MoveDirection { entity: String, step: u32 },
    /// Side of the open gate in the gated room.
    OpenGate,
    /// Key-door door at the first step: `o` or `c`.
    DoorState,
    /// Raw value of a named random draw of the initial world.
    InitDraw { name: String },
    /// Value of a tag attached to the subject.
    Tag { key: String },
}

/// A named variable together with the rule that extracts it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    pub variable: Variable,
    pub rule: FeatureRule,
}

impl FeatureExtractor {
    pub fn new(name: &str, domain: &[&str], rule: FeatureRule) -> Self {
        FeatureExtractor { variable: Variable::new(name, domain), rule }
    }

    /// Extracts the value, checking it against the domain. Undefined
    /// features come back as [`UNDEFINED`].
    pub fn extract(&self, trace: &Trace, tags: &BTreeMap<String, String>) -> Result<String> {
        let value = evaluate(&self.rule, trace, tags).unwrap_or_else(|| UNDEFINED.to_string());
        if value != UNDEFINED && !self.variable.domain.contains(&value) {
            return Err(Error::OutOfDomain { feature: self.variable.name.clone(), value });
        }
        Ok(value)
    }
}

fn side(env: EnvId, p: Pos) -> Option<String> {
    let mid = midline(env);
    match p.col.cmp(&mid) {
        std::cmp::Ordering::Less => Some("l".into()),
        std::cmp::Ordering::Greater => Some("r".into()),
        std::cmp::Ordering::Equal => None,
    }
}

fn first_entity(world: &WorldState, entity: &Option<String>) -> Option<String> {
    entity.clone().or_else(|| world.entities.keys().next().cloned())
}

fn ground_code(t: TileKind) -> Option<String> {
    match t {
        TileKind::Grass => Some("g".into()),
        TileKind::Sand => Some("s".into()),
        _ => None,
    }
}

fn evaluate(rule: &FeatureRule, trace: &Trace, tags: &BTreeMap<String, String>) -> Option<String> {
    let first = &trace.steps.first()?.world;
    let last = &trace.steps.last()?.world;
    let env = first.env;
    match rule {
        FeatureRule::TerminalSide => match last.outcome.as_ref()? {
            Outcome::Reward { at, .. } | Outcome::Terminal { at, .. } => side(env, *at),
            Outcome::Timeout => None,
        },
        FeatureRule::FloorKind => ground_code(first.ground),
        FeatureRule::CueKind => ground_code(first.grid.get(landmarks(env).get("cue").copied()?)),
        FeatureRule::SideAt { entity, step } => {
            let world = &trace.step(*step).ok()?.world;
            side(env, *world.entities.get(&first_entity(world, entity)?)?)
        }
        FeatureRule::PillSide => side(env, first.grid.positions().find(|p| first.grid.get(*p).is_pill())?),
        FeatureRule::PillQuadrant => {
            let p = first.grid.positions().find(|p| first.grid.get(*p).is_pill())?;
            Quadrant::of(PICK_UP_ROOM, p.row - 1, p.col - 1).map(|q| q.symbol().to_string())
        }
        FeatureRule::PickedUp { entity, item } => {
            let id = first_entity(last, entity)?;
            Some(if last.holds(&id, *item) { "y" } else { "n" }.into())
        }
        FeatureRule::RewardCollected => {
            Some(if matches!(last.outcome, Some(Outcome::Reward { .. })) { "1" } else { "0" }.into())
        }
        FeatureRule::CollectedColor => match last.outcome.as_ref()? {
            Outcome::Reward { pill: TileKind::PillRed, .. } => Some("re".into()),
            Outcome::Reward { pill: TileKind::PillGreen, .. } => Some("gr".into()),
            _ => None,
        },
        FeatureRule::MoveDirection { entity, step } => match trace.step(*step).ok()?.agents.get(entity)?.action? {
            Action::Left => Some("l".into()),
            Action::Right => Some("r".into()),
            _ => None,
        },
        FeatureRule::OpenGate => {
            let gate = first.grid.find(TileKind::GateOpen);
            match gate.as_slice() {
                [p] => side(env, *p),
                _ => None,
            }
        }
        FeatureRule::DoorState => match first.grid.get(landmarks(env).get("door").copied()?) {
            TileKind::GateOpen => Some("o".into()),
            TileKind::GateClosed => Some("c".into()),
            _ => None,
        },
        FeatureRule::InitDraw { name } => first.draws.get(name).cloned(),
        FeatureRule::Tag { key } => tags.get(key).cloned(),
    }
}

//! Seed-parameterized gridworld engine: the environment half of the
//! perception-action loop.

mod edit;
pub mod layouts;
mod tile;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Seed;

pub use edit::apply_edit;
pub use layouts::{landmarks, midline, southern_anchor, Quadrant, AGENT, BLUE, PICK_UP_ROOM, RED};
pub use tile::{Grid, Pos, TileKind};

/// Identifier of one of the registered environments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvId {
    GrassSand,
    FloorMemory,
    PickUp,
    GatedRoom,
    Mimic,
    KeyDoor,
}

impl EnvId {
    pub const ALL: [EnvId; 6] = [
        EnvId::GrassSand,
        EnvId::FloorMemory,
        EnvId::PickUp,
        EnvId::GatedRoom,
        EnvId::Mimic,
        EnvId::KeyDoor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::GrassSand => "grass-sand",
            EnvId::FloorMemory => "floor-memory",
            EnvId::PickUp => "pick-up",
            EnvId::GatedRoom => "gated-room",
            EnvId::Mimic => "mimic",
            EnvId::KeyDoor => "key-door",
        }
    }

    /// Visibility radius declared by the environment; `None` means the
    /// whole grid is visible.
    pub fn default_radius(self) -> Option<u32> {
        match self {
            EnvId::FloorMemory => Some(1),
            _ => None,
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::UnknownEnv(s.to_string()))
    }
}

/// Environment selection plus overridable parameters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvSpec {
    pub id: EnvId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visibility_radius: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_budget: Option<u32>,
}

impl EnvSpec {
    pub fn new(id: EnvId) -> Self {
        EnvSpec { id, visibility_radius: None, step_budget: None }
    }

    pub fn parse(id: &str) -> Result<Self> {
        Ok(EnvSpec::new(id.parse()?))
    }

    fn resolved_radius(&self, grid: &Grid) -> u32 {
        self.visibility_radius
            .or(self.id.default_radius())
            .unwrap_or_else(|| grid.height().max(grid.width()) as u32)
    }
}

/// The five moves available to every entity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    NoOp,
}

impl Action {
    pub const ALL: [Action; 5] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::NoOp];
    pub const MOVES: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::NoOp => (0, 0),
        }
    }

    pub fn opposite(self) -> Action {
        match self {
            Action::Up => Action::Down,
            Action::Down => Action::Up,
            Action::Left => Action::Right,
            Action::Right => Action::Left,
            Action::NoOp => Action::NoOp,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::NoOp => "no-op",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown action `{s}`")))
    }
}

/// Items an entity can carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Item {
    Key,
}

/// How an episode ended.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    Reward { entity: String, pill: TileKind, at: Pos },
    Terminal { entity: String, at: Pos },
    Timeout,
}

/// Complete environment state. Serializes to canonical JSON and back
/// without loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub env: EnvId,
    pub grid: Grid,
    /// Tile left behind when an object is picked up.
    pub ground: TileKind,
    pub entities: BTreeMap<String, Pos>,
    pub inventory: BTreeMap<String, BTreeSet<Item>>,
    /// Reward each entity received on the last transition.
    pub rewards: BTreeMap<String, f64>,
    pub step_count: u32,
    pub step_budget: u32,
    pub radius: u32,
    pub terminated: bool,
    pub outcome: Option<Outcome>,
    /// Named outcomes of the random initialization.
    pub draws: BTreeMap<String, String>,
}

impl WorldState {
    pub fn position(&self, entity: &str) -> Result<Pos> {
        self.entities
            .get(entity)
            .copied()
            .ok_or_else(|| Error::UnknownEntity(entity.to_string()))
    }

    pub fn holds(&self, entity: &str, item: Item) -> bool {
        self.inventory.get(entity).is_some_and(|s| s.contains(&item))
    }

    /// Checks the structural invariants: rectangular grid, entities on
    /// standable in-bounds tiles.
    pub fn validate(&self) -> Result<()> {
        if !self.grid.is_rectangular() {
            return Err(Error::IllegalIntervention("grid is not rectangular".into()));
        }
        for (id, p) in &self.entities {
            if !self.grid.contains(*p) || !self.grid.get(*p).is_standable() {
                return Err(Error::IllegalIntervention(format!(
                    "entity `{id}` at {p} is not on a walkable tile"
                )));
            }
        }
        Ok(())
    }
}

/// What one entity perceives after a transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub entity: String,
    pub radius: u32,
    /// Egocentric crop of side `2 * radius + 1`, centered on the entity.
    pub window: Vec<Vec<TileKind>>,
    /// Offsets of other visible entities relative to this one.
    pub others: BTreeMap<String, (i32, i32)>,
    pub inventory: BTreeSet<Item>,
    pub reward: f64,
    pub terminal: bool,
    /// Actions already committed by other entities in the current step.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub peer_actions: BTreeMap<String, Action>,
}

impl Observation {
    pub fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    /// Tile at offset `(dr, dc)` from the entity.
    pub fn at(&self, dr: i32, dc: i32) -> TileKind {
        let r = self.radius as i32;
        if dr.abs() > r || dc.abs() > r {
            return TileKind::OutOfBounds;
        }
        self.window[(dr + r) as usize][(dc + r) as usize]
    }

    pub fn here(&self) -> TileKind {
        self.at(0, 0)
    }

    /// Recovers the entity's absolute position from the out-of-bounds
    /// padding. Only possible when the window reaches the grid's top-left
    /// corner.
    pub fn locate(&self) -> Option<Pos> {
        let r = self.radius as i32;
        let side = self.side() as i32;
        for wr in 0..side {
            for wc in 0..side {
                let t = self.window[wr as usize][wc as usize];
                if t == TileKind::OutOfBounds {
                    continue;
                }
                let top = wr == 0 || self.window[wr as usize - 1][wc as usize] == TileKind::OutOfBounds;
                let left = wc == 0 || self.window[wr as usize][wc as usize - 1] == TileKind::OutOfBounds;
                if top && left && wr > 0 && wc > 0 {
                    return Some(Pos::new(r - wr, r - wc));
                }
                return None;
            }
        }
        None
    }

    /// Reconstructs the visible part of the grid in absolute coordinates,
    /// when the window covers the whole grid.
    pub fn map(&self) -> Option<(Pos, Grid)> {
        let me = self.locate()?;
        let r = self.radius as i32;
        let mut rows = Vec::new();
        for wr in 0..self.side() as i32 {
            let row: Vec<TileKind> = (0..self.side() as i32)
                .map(|wc| self.window[wr as usize][wc as usize])
                .filter(|t| *t != TileKind::OutOfBounds)
                .collect();
            let abs_row = me.row + wr - r;
            if abs_row >= 0 && !row.is_empty() {
                rows.push(row);
            }
        }
        let grid = Grid::from_rows(rows);
        grid.is_rectangular().then_some((me, grid))
    }
}

/// Draws the initial world of `spec` from `seed`.
pub fn env_init(spec: &EnvSpec, seed: &Seed) -> Result<WorldState> {
    let mut rng = seed.rng();
    let probe = layouts::base_grid(spec.id, TileKind::Floor);
    let radius = spec.resolved_radius(&probe);
    let budget = spec.step_budget.unwrap_or(4 * probe.area());
    Ok(layouts::initial_world(spec.id, &mut rng, radius, budget))
}

/// Single-entity transition. Environments with several entities move the
/// others with no-op.
pub fn env_step(world: &WorldState, action: Action, seed: &Seed) -> Result<(WorldState, Observation)> {
    let entity = world
        .entities
        .keys()
        .next()
        .cloned()
        .ok_or_else(|| Error::UnknownEntity("<none>".into()))?;
    let actions = BTreeMap::from([(entity.clone(), action)]);
    let next = step_joint(world, &actions, seed)?;
    let obs = observe(&next, &entity)?;
    Ok((next, obs))
}

/// Moves every entity by its action. Moves are resolved independently in
/// entity-id order; entities may share a tile. Entities missing from
/// `actions` stay put.
pub fn step_joint(world: &WorldState, actions: &BTreeMap<String, Action>, _seed: &Seed) -> Result<WorldState> {
    if world.terminated {
        return Err(Error::EpisodeOver);
    }
    let mut next = world.clone();
    next.rewards = world.entities.keys().map(|k| (k.clone(), 0.0)).collect();
    for (id, action) in actions {
        let from = world.position(id)?;
        let (dr, dc) = action.delta();
        let to = from.offset(dr, dc);
        let tile = next.grid.get(to);
        let passable = match tile {
            TileKind::Wall | TileKind::OutOfBounds => false,
            TileKind::GateClosed => {
                if world.env == EnvId::KeyDoor && next.holds(id, Item::Key) {
                    next.grid.set(to, TileKind::GateOpen);
                    true
                } else {
                    false
                }
            }
            _ => true,
        };
        if !passable {
            continue;
        }
        next.entities.insert(id.clone(), to);
        match tile {
            TileKind::Key => {
                next.inventory.entry(id.clone()).or_default().insert(Item::Key);
                next.grid.set(to, next.ground);
            }
            t if t.is_pill() => {
                next.grid.set(to, next.ground);
                next.rewards.insert(id.clone(), 1.0);
                if !next.terminated {
                    next.terminated = true;
                    next.outcome = Some(Outcome::Reward { entity: id.clone(), pill: t, at: to });
                }
            }
            TileKind::Terminal if !next.terminated => {
                next.terminated = true;
                next.outcome = Some(Outcome::Terminal { entity: id.clone(), at: to });
            }
            _ => {}
        }
    }
    next.step_count += 1;
    if !next.terminated && next.step_count >= next.step_budget {
        next.terminated = true;
        next.outcome = Some(Outcome::Timeout);
    }
    Ok(next)
}

/// Egocentric view of `entity`.
pub fn observe(world: &WorldState, entity: &str) -> Result<Observation> {
    let me = world.position(entity)?;
    let r = world.radius as i32;
    let window = (-r..=r)
        .map(|dr| (-r..=r).map(|dc| world.grid.get(me.offset(dr, dc))).collect())
        .collect();
    let others = world
        .entities
        .iter()
        .filter(|(id, _)| id.as_str() != entity)
        .map(|(id, p)| (id.clone(), (p.row - me.row, p.col - me.col)))
        .filter(|(_, (dr, dc))| dr.abs() <= r && dc.abs() <= r)
        .collect();
    Ok(Observation {
        entity: entity.to_string(),
        radius: world.radius,
        window,
        others,
        inventory: world.inventory.get(entity).cloned().unwrap_or_default(),
        reward: world.rewards.get(entity).copied().unwrap_or(0.0),
        terminal: world.terminated,
        peer_actions: BTreeMap::new(),
    })
}

/// Breadth-first shortest path over walkable tiles. Returns the first
/// action of a shortest path from `from` to any cell satisfying `goal`,
/// expanding neighbors in the order up, down, left, right. `passable`
/// decides which tiles may be entered.
pub fn first_step_towards(
    grid: &Grid,
    from: Pos,
    goal: impl Fn(Pos) -> bool,
    passable: impl Fn(Pos, TileKind) -> bool,
) -> Option<(Action, usize)> {
    use std::collections::VecDeque;
    if goal(from) {
        return Some((Action::NoOp, 0));
    }
    let mut first: BTreeMap<Pos, (Action, usize)> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = BTreeSet::from([from]);
    while let Some(p) = queue.pop_front() {
        for a in Action::MOVES {
            let (dr, dc) = a.delta();
            let q = p.offset(dr, dc);
            if seen.contains(&q) || !passable(q, grid.get(q)) {
                continue;
            }
            seen.insert(q);
            let (fa, d) = match first.get(&p) {
                Some(&(fa, d)) => (fa, d + 1),
                None => (a, 1),
            };
            if goal(q) {
                return Some((fa, d));
            }
            first.insert(q, (fa, d));
            queue.push_back(q);
        }
    }
    None
}

/// Shortest-path distance between two cells over tiles accepted by `passable`.
pub fn distance(grid: &Grid, from: Pos, to: Pos, passable: impl Fn(Pos, TileKind) -> bool) -> Option<usize> {
    first_step_towards(grid, from, |p| p == to, passable).map(|(_, d)| d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(id: EnvId) -> EnvSpec {
        EnvSpec::new(id)
    }

    #[test]
    fn init_is_deterministic() {
        for env in EnvId::ALL {
            for s in 0..20 {
                let a = env_init(&spec(env), &Seed::new(s)).unwrap();
                let b = env_init(&spec(env), &Seed::new(s)).unwrap();
                assert_eq!(a, b);
                a.validate().unwrap();
            }
        }
    }

    #[test]
    fn grass_sand_floor_and_pill_side_agree() {
        for s in 0..200 {
            let w = env_init(&spec(EnvId::GrassSand), &Seed::new(s)).unwrap();
            let pill = w.grid.find(TileKind::PillPlain)[0];
            let left = pill.col < midline(EnvId::GrassSand);
            assert_eq!(left, w.ground == TileKind::Grass);
        }
    }

    #[test]
    fn gated_room_opens_exactly_one_gate() {
        for s in 0..100 {
            let w = env_init(&spec(EnvId::GatedRoom), &Seed::new(s)).unwrap();
            assert_eq!(w.grid.find(TileKind::GateOpen).len(), 1);
            assert_eq!(w.grid.find(TileKind::GateClosed).len(), 1);
        }
    }

    #[test]
    fn blocked_move_is_identity() {
        let w = env_init(&spec(EnvId::GrassSand), &Seed::new(0)).unwrap();
        let (next, obs) = env_step(&w, Action::Down, &Seed::new(0)).unwrap();
        assert_eq!(next.entities, w.entities);
        assert_eq!(obs.reward, 0.0);
        assert_eq!(next.step_count, 1);
    }

    #[test]
    fn pick_up_reward_terminates() {
        let mut w = env_init(&spec(EnvId::PickUp), &Seed::new(3)).unwrap();
        let pill = w.grid.find(TileKind::PillPlain)[0];
        w.entities.insert(AGENT.into(), pill.offset(0, -1));
        let (next, obs) = env_step(&w, Action::Right, &Seed::new(0)).unwrap();
        assert_eq!(obs.reward, 1.0);
        assert!(next.terminated);
        assert!(matches!(env_step(&next, Action::Up, &Seed::new(0)), Err(Error::EpisodeOver)));
    }

    #[test]
    fn key_opens_closed_door() {
        let seed = (0..).map(Seed::new).find(|s| {
            env_init(&spec(EnvId::KeyDoor), s).unwrap().draws["door"] == "c"
        });
        let mut w = env_init(&spec(EnvId::KeyDoor), &seed.unwrap()).unwrap();
        let door = landmarks(EnvId::KeyDoor)["door"];
        w.entities.insert(AGENT.into(), door.offset(0, -1));
        let (blocked, _) = env_step(&w, Action::Right, &Seed::new(0)).unwrap();
        assert_eq!(blocked.entities[AGENT], door.offset(0, -1));
        w.inventory.get_mut(AGENT).unwrap().insert(Item::Key);
        let (passed, _) = env_step(&w, Action::Right, &Seed::new(0)).unwrap();
        assert_eq!(passed.entities[AGENT], door);
        assert_eq!(passed.grid.get(door), TileKind::GateOpen);
    }

    #[test]
    fn timeout_within_budget() {
        let mut w = env_init(&spec(EnvId::PickUp), &Seed::new(1)).unwrap();
        let budget = w.step_budget;
        assert_eq!(budget, 4 * 49);
        let mut steps = 0;
        while !w.terminated {
            w = env_step(&w, Action::NoOp, &Seed::new(0)).unwrap().0;
            steps += 1;
        }
        assert_eq!(steps, budget);
        assert_eq!(w.outcome, Some(Outcome::Timeout));
    }

    #[test]
    fn corner_window_is_padded() {
        let mut w = env_init(&spec(EnvId::FloorMemory), &Seed::new(0)).unwrap();
        w.entities.insert(AGENT.into(), Pos::new(0, 0));
        let obs = observe(&w, AGENT).unwrap();
        assert_eq!(obs.side(), 3);
        assert_eq!(obs.at(-1, -1), TileKind::OutOfBounds);
        assert_eq!(obs.at(1, 0), TileKind::Wall);
    }

    #[test]
    fn cue_visible_from_start() {
        let w = env_init(&spec(EnvId::FloorMemory), &Seed::new(0)).unwrap();
        let obs = observe(&w, AGENT).unwrap();
        assert!(matches!(obs.here(), TileKind::Grass | TileKind::Sand));
    }

    #[test]
    fn full_window_covers_grid_and_localizes() {
        for env in [EnvId::GrassSand, EnvId::PickUp, EnvId::GatedRoom, EnvId::KeyDoor] {
            let w = env_init(&spec(env), &Seed::new(5)).unwrap();
            let id = w.entities.keys().next().unwrap().clone();
            let obs = observe(&w, &id).unwrap();
            let (me, grid) = obs.map().unwrap();
            assert_eq!(me, w.entities[&id]);
            assert_eq!(grid, w.grid);
        }
    }

    #[test]
    fn world_round_trips_through_json() {
        let w = env_init(&spec(EnvId::KeyDoor), &Seed::new(9)).unwrap();
        let text = crate::json::to_canonical_json(&w).unwrap();
        let back: WorldState = serde_json::from_str(&text).unwrap();
        assert_eq!(back, w);
        assert_eq!(crate::json::to_canonical_json(&back).unwrap(), text);
    }
}

//! Intervention regimes: templates resolved against each rollout's world.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::engine::Assignment;
use crate::error::{Error, Result};
use crate::gridworld::{landmarks, midline, Item, Pos, Quadrant, TileKind, WorldState, PICK_UP_ROOM};
use crate::seed::Seed;
use crate::sim::InterventionSpec;

/// Key of the regime without interventions.
pub const OBSERVATIONAL: &str = "obs";

/// A world edit whose concrete paths depend on the world it is applied to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "edit", rename_all = "kebab-case")]
pub enum EditTemplate {
    /// A fixed world-edit path and value.
    Literal { path: String, value: Value },
    /// Puts the pill at the end of the given side and a terminal at the
    /// other end.
    PlacePill { side: String },
    /// Moves the pill to a uniformly drawn free cell of a pick-up quadrant.
    PillToQuadrant { quadrant: Quadrant },
    /// Mirrors an entity across the midline if it is not on `side`.
    EntityToSide {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entity: Option<String>,
        side: String,
    },
    /// Repaints every ground tile with the given kind.
    SetFloor { tile: TileKind },
    /// Sets the tile at a named landmark.
    SetLandmark { landmark: String, tile: TileKind },
    /// Hands an item to an entity and removes it from the floor.
    GiveItem {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entity: Option<String>,
        item: Item,
    },
    /// Removes an item from the floor and from every inventory.
    RemoveItem { item: Item },
}

/// One experimental condition: edits applied at `time`, and the variable
/// values those edits enforce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeTemplate {
    pub key: String,
    #[serde(default)]
    pub enforce: Assignment,
    #[serde(default = "first_step")]
    pub time: u32,
    #[serde(default)]
    pub edits: Vec<EditTemplate>,
}

fn first_step() -> u32 {
    1
}

impl RegimeTemplate {
    pub fn observational() -> Self {
        RegimeTemplate { key: OBSERVATIONAL.into(), enforce: Assignment::new(), time: 1, edits: Vec::new() }
    }

    pub fn new(key: &str, enforce: &[(&str, &str)], time: u32, edits: Vec<EditTemplate>) -> Self {
        RegimeTemplate {
            key: key.into(),
            enforce: enforce.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            time,
            edits,
        }
    }

    /// Concrete interventions for a world reached at `self.time`.
    pub fn resolve(&self, world: &WorldState, seed: &Seed) -> Result<Vec<InterventionSpec>> {
        let mut rng = seed.derive_named(&self.key).rng();
        let mut out = Vec::new();
        for edit in &self.edits {
            for (path, value) in resolve_edit(edit, world, &mut rng)? {
                out.push(InterventionSpec::world_edit(self.time, path, value));
            }
        }
        Ok(out)
    }
}

fn tile_path(p: Pos) -> String {
    format!("tiles.{}.{}", p.row, p.col)
}

fn landmark(world: &WorldState, name: &str) -> Result<Pos> {
    landmarks(world.env)
        .get(name)
        .copied()
        .ok_or_else(|| Error::Config(format!("`{}` has no landmark `{name}`", world.env)))
}

fn entity_of(world: &WorldState, entity: &Option<String>) -> Result<String> {
    entity
        .clone()
        .or_else(|| world.entities.keys().next().cloned())
        .ok_or_else(|| Error::UnknownEntity("<none>".into()))
}

fn item_tile(item: Item) -> TileKind {
    match item {
        Item::Key => TileKind::Key,
    }
}

fn resolve_edit(edit: &EditTemplate, world: &WorldState, rng: &mut impl Rng) -> Result<Vec<(String, Value)>> {
    let ground = json!(world.ground.name());
    Ok(match edit {
        EditTemplate::Literal { path, value } => vec![(path.clone(), value.clone())],
        EditTemplate::PlacePill { side } => {
            let (pill_end, other_end) = match side.as_str() {
                "l" => ("end-left", "end-right"),
                "r" => ("end-right", "end-left"),
                _ => return Err(Error::Config(format!("unknown side `{side}`"))),
            };
            vec![
                (tile_path(landmark(world, pill_end)?), json!(TileKind::PillPlain.name())),
                (tile_path(landmark(world, other_end)?), json!(TileKind::Terminal.name())),
            ]
        }
        EditTemplate::PillToQuadrant { quadrant } => {
            let origin = landmark(world, "room-origin")?;
            let occupied: Vec<Pos> = world.entities.values().copied().collect();
            let cells: Vec<Pos> = quadrant
                .cells(PICK_UP_ROOM)
                .into_iter()
                .map(|(r, c)| origin.offset(r, c))
                .filter(|p| !occupied.contains(p))
                .collect();
            if cells.is_empty() {
                return Err(Error::Config("no free cell in the quadrant".into()));
            }
            let target = cells[rng.gen_range(0..cells.len())];
            let mut edits: Vec<(String, Value)> = world
                .grid
                .positions()
                .filter(|p| world.grid.get(*p).is_pill() && *p != target)
                .map(|p| (tile_path(p), ground.clone()))
                .collect();
            edits.push((tile_path(target), json!(TileKind::PillPlain.name())));
            edits
        }
        EditTemplate::EntityToSide { entity, side } => {
            let id = entity_of(world, entity)?;
            let p = world.position(&id)?;
            let mid = midline(world.env);
            let col = match side.as_str() {
                "l" if p.col > mid => 2 * mid - p.col,
                "l" if p.col == mid => mid - 1,
                "r" if p.col < mid => 2 * mid - p.col,
                "r" if p.col == mid => mid + 1,
                "l" | "r" => p.col,
                _ => return Err(Error::Config(format!("unknown side `{side}`"))),
            };
            vec![(format!("entities.{id}"), json!([p.row, col]))]
        }
        EditTemplate::SetFloor { tile } => {
            if !tile.is_ground() {
                return Err(Error::Config(format!("`{tile}` is not a ground kind")));
            }
            let mut edits: Vec<(String, Value)> = world
                .grid
                .positions()
                .filter(|p| world.grid.get(*p) == world.ground)
                .map(|p| (tile_path(p), json!(tile.name())))
                .collect();
            edits.push(("ground".into(), json!(tile.name())));
            edits
        }
        EditTemplate::SetLandmark { landmark: name, tile } => {
            vec![(tile_path(landmark(world, name)?), json!(tile.name()))]
        }
        EditTemplate::GiveItem { entity, item } => {
            let id = entity_of(world, entity)?;
            let mut held = world.inventory.get(&id).cloned().unwrap_or_default();
            held.insert(*item);
            let mut edits: Vec<(String, Value)> =
                world.grid.find(item_tile(*item)).into_iter().map(|p| (tile_path(p), ground.clone())).collect();
            edits.push((format!("inventory.{id}"), serde_json::to_value(held)?));
            edits
        }
        EditTemplate::RemoveItem { item } => {
            let mut edits: Vec<(String, Value)> =
                world.grid.find(item_tile(*item)).into_iter().map(|p| (tile_path(p), ground.clone())).collect();
            for (id, held) in &world.inventory {
                if held.contains(item) {
                    let mut rest = held.clone();
                    rest.remove(item);
                    edits.push((format!("inventory.{id}"), serde_json::to_value(rest)?));
                }
            }
            edits
        }
    })
}

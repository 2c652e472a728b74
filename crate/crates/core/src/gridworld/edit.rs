//! Declarative world edits addressed by dotted paths.
//!
//! Editable paths:
//! - `entities.<id>`: position `{"row": r, "col": c}` or `[r, c]`
//! - `tiles.<row>.<col>`: tile kind by name (`"gate:open"`) or code
//! - `swap.<row>.<col>`: swap that tile with the one at `[r2, c2]`
//! - `inventory.<id>`: list of held items
//! - `ground`: tile left behind by picked-up objects

use serde_json::Value;

use super::{Pos, TileKind, WorldState};
use crate::error::{Error, Result};

fn illegal(msg: impl Into<String>) -> Error {
    Error::IllegalIntervention(msg.into())
}

fn parse_pos(value: &Value) -> Result<Pos> {
    if let Some([r, c]) = value.as_array().map(Vec::as_slice) {
        let r = r.as_i64().ok_or_else(|| illegal("position row must be an integer"))?;
        let c = c.as_i64().ok_or_else(|| illegal("position col must be an integer"))?;
        return Ok(Pos::new(r as i32, c as i32));
    }
    serde_json::from_value(value.clone()).map_err(|_| illegal(format!("expected a position, got {value}")))
}

fn parse_tile(value: &Value) -> Result<TileKind> {
    let tile = match value {
        Value::String(s) => TileKind::from_name(s),
        Value::Number(n) => n.as_u64().and_then(|c| u8::try_from(c).ok()).and_then(TileKind::from_code),
        _ => None,
    };
    tile.ok_or_else(|| illegal(format!("unknown tile kind {value}")))
}

fn index(part: Option<&str>, what: &str) -> Result<i32> {
    part.and_then(|p| p.parse().ok()).ok_or_else(|| illegal(format!("path needs a numeric {what}")))
}

/// Applies one edit and returns the edited world. The result must still
/// satisfy the world invariants.
pub fn apply_edit(world: &WorldState, path: &str, value: &Value) -> Result<WorldState> {
    if world.terminated {
        return Err(illegal("cannot edit a terminated world"));
    }
    let mut next = world.clone();
    let mut parts = path.split('.');
    match parts.next() {
        Some("entities") => {
            let id = parts.next().ok_or_else(|| illegal("path needs an entity id"))?;
            if !next.entities.contains_key(id) {
                return Err(illegal(format!("unknown entity `{id}`")));
            }
            next.entities.insert(id.to_string(), parse_pos(value)?);
        }
        Some("tiles") => {
            let p = Pos::new(index(parts.next(), "row")?, index(parts.next(), "col")?);
            if !next.grid.contains(p) {
                return Err(illegal(format!("tile {p} is outside the grid")));
            }
            let tile = parse_tile(value)?;
            if tile == TileKind::OutOfBounds {
                return Err(illegal("out-of-bounds is not a placeable tile"));
            }
            next.grid.set(p, tile);
        }
        Some("swap") => {
            let a = Pos::new(index(parts.next(), "row")?, index(parts.next(), "col")?);
            let b = parse_pos(value)?;
            if !next.grid.contains(a) || !next.grid.contains(b) {
                return Err(illegal("swap endpoints must lie inside the grid"));
            }
            let (ta, tb) = (next.grid.get(a), next.grid.get(b));
            next.grid.set(a, tb);
            next.grid.set(b, ta);
        }
        Some("inventory") => {
            let id = parts.next().ok_or_else(|| illegal("path needs an entity id"))?;
            if !next.entities.contains_key(id) {
                return Err(illegal(format!("unknown entity `{id}`")));
            }
            let items = serde_json::from_value(value.clone()).map_err(|e| illegal(format!("bad inventory: {e}")))?;
            next.inventory.insert(id.to_string(), items);
        }
        Some("ground") => {
            let tile = parse_tile(value)?;
            if !tile.is_ground() {
                return Err(illegal(format!("`{tile}` is not a ground kind")));
            }
            next.ground = tile;
        }
        _ => return Err(illegal(format!("`{path}` is not an editable path"))),
    }
    if parts.next().is_some() {
        return Err(illegal(format!("`{path}` has trailing components")));
    }
    next.validate()?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridworld::{env_init, EnvId, EnvSpec, Item, AGENT};
    use crate::seed::Seed;
    use serde_json::json;

    fn world() -> WorldState {
        env_init(&EnvSpec::new(EnvId::KeyDoor), &Seed::new(1)).unwrap()
    }

    #[test]
    fn moves_entity() {
        let w = apply_edit(&world(), "entities.agent", &json!([2, 2])).unwrap();
        assert_eq!(w.entities[AGENT], Pos::new(2, 2));
        let w = apply_edit(&w, "entities.agent", &json!({"row": 1, "col": 3})).unwrap();
        assert_eq!(w.entities[AGENT], Pos::new(1, 3));
    }

    #[test]
    fn rejects_entity_in_wall() {
        assert!(matches!(
            apply_edit(&world(), "entities.agent", &json!([0, 0])),
            Err(Error::IllegalIntervention(_))
        ));
    }

    #[test]
    fn sets_tiles_and_inventory() {
        let w = apply_edit(&world(), "tiles.3.6", &json!("gate:open")).unwrap();
        assert_eq!(w.grid.get(Pos::new(3, 6)), TileKind::GateOpen);
        let w = apply_edit(&w, "inventory.agent", &json!(["key"])).unwrap();
        assert!(w.holds(AGENT, Item::Key));
    }

    #[test]
    fn rejects_unknown_paths() {
        for path in ["step_count", "tiles.1", "entities.ghost", "tiles.1.1.1"] {
            assert!(apply_edit(&world(), path, &json!("floor")).is_err(), "{path}");
        }
    }

    #[test]
    fn writing_present_value_is_identity() {
        let w = world();
        let p = w.entities[AGENT];
        assert_eq!(apply_edit(&w, "entities.agent", &json!([p.row, p.col])).unwrap(), w);
    }
}

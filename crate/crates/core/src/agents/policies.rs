use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{AgentId, MemoryState, NoiseParams};
use crate::error::{Error, Result};
use crate::gridworld::{first_step_towards, layouts, Action, Grid, Item, Observation, Pos, Quadrant, TileKind};

pub(crate) const CUE_SLOT: &str = "cue";
pub(crate) const VISITED_SLOT: &str = "visited";

/// Chebyshev radius around visited southern cells inside which pick-up/B
/// notices the reward.
pub const PICK_UP_B_NOTICE_RADIUS: i32 = 1;

pub(crate) fn decide(
    id: AgentId,
    noise: &NoiseParams,
    memory: &MemoryState,
    obs: &Observation,
    rng: &mut ChaCha8Rng,
) -> Result<(MemoryState, Action)> {
    let mut memory = memory.clone();
    let action = match id {
        AgentId::GrassSandA => grass_sand_floor(obs)?,
        AgentId::GrassSandB => {
            let (me, grid) = full_view(obs)?;
            seek(&grid, me, |t| t.is_pill(), |t| t.is_standable() && t != TileKind::Terminal).unwrap_or(Action::Up)
        }
        AgentId::FloorMemoryA => floor_memory_internal(&mut memory, obs, rng)?,
        AgentId::FloorMemoryB => floor_memory_wall(obs, rng)?,
        AgentId::PickUpA => {
            let (me, grid) = full_view(obs)?;
            seek(&grid, me, |t| t.is_pill(), TileKind::is_standable).unwrap_or(Action::NoOp)
        }
        AgentId::PickUpB => pick_up_south(&mut memory, obs, rng)?,
        AgentId::RedLover => color_lover(obs, TileKind::PillRed)?,
        AgentId::GreenLover => color_lover(obs, TileKind::PillGreen)?,
        AgentId::MimicLeader => {
            if rng.gen_bool(0.5) {
                Action::Left
            } else {
                Action::Right
            }
        }
        AgentId::MimicImitator => {
            let peer = obs
                .peer_actions
                .values()
                .next()
                .copied()
                .ok_or_else(|| Error::ObservationShape("imitator needs the peer's committed action".into()))?;
            memory.phase += 1;
            if rng.gen_bool(noise.match_rate.clamp(0.0, 1.0)) {
                peer
            } else {
                peer.opposite()
            }
        }
        AgentId::KeyDoorA => key_door(obs, false)?,
        AgentId::KeyDoorB => key_door(obs, true)?,
    };
    Ok((memory, action))
}

fn full_view(obs: &Observation) -> Result<(Pos, Grid)> {
    obs.map()
        .ok_or_else(|| Error::ObservationShape(format!("agent needs a full view, got radius {}", obs.radius)))
}

fn local_view(obs: &Observation) -> Result<()> {
    if obs.radius == 0 || obs.window.len() != obs.side() || obs.window.iter().any(|r| r.len() != obs.side()) {
        return Err(Error::ObservationShape(format!("expected a square window of radius >= 1, got {}", obs.radius)));
    }
    Ok(())
}

fn seek(grid: &Grid, me: Pos, goal: impl Fn(TileKind) -> bool, passable: impl Fn(TileKind) -> bool) -> Option<Action> {
    first_step_towards(grid, me, |p| goal(grid.get(p)), |_, t| passable(t)).map(|(a, _)| a)
}

fn coin(rng: &mut ChaCha8Rng) -> Action {
    if rng.gen_bool(0.5) {
        Action::Left
    } else {
        Action::Right
    }
}

/// Walk up the stem, then turn by floor kind: left on grass, right on sand.
fn grass_sand_floor(obs: &Observation) -> Result<Action> {
    local_view(obs)?;
    if obs.at(-1, 0).is_standable() {
        return Ok(Action::Up);
    }
    Ok(match obs.here() {
        TileKind::Grass => Action::Left,
        TileKind::Sand => Action::Right,
        _ => Action::NoOp,
    })
}

fn cue_turn(tile: TileKind) -> Option<Action> {
    match tile {
        TileKind::Grass => Some(Action::Left),
        TileKind::Sand => Some(Action::Right),
        _ => None,
    }
}

/// Remembers the cue, moves to the matching wall, walks forward and turns
/// by the remembered cue.
fn floor_memory_internal(memory: &mut MemoryState, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action> {
    local_view(obs)?;
    let here = obs.here();
    if cue_turn(here).is_some() && memory.slots.get(CUE_SLOT).is_none_or(|v| v == "none") {
        let name = if here == TileKind::Grass { "grass" } else { "sand" };
        memory.slots.insert(CUE_SLOT.to_string(), name.to_string());
    }
    let remembered = match memory.slots.get(CUE_SLOT).map(String::as_str) {
        Some("grass") => Some(Action::Left),
        Some("sand") => Some(Action::Right),
        _ => None,
    };
    if cue_turn(here).is_some() {
        return Ok(remembered.unwrap_or_else(|| coin(rng)));
    }
    if obs.at(-1, 0).is_standable() {
        return Ok(Action::Up);
    }
    Ok(remembered.unwrap_or_else(|| coin(rng)))
}

/// Moves to the wall the cue points at, walks forward along it and turns
/// toward whichever side wall ends just below.
fn floor_memory_wall(obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action> {
    local_view(obs)?;
    if let Some(a) = cue_turn(obs.here()) {
        return Ok(a);
    }
    if obs.at(-1, 0).is_standable() {
        return Ok(Action::Up);
    }
    let wall_left = !obs.at(1, -1).is_standable();
    let wall_right = !obs.at(1, 1).is_standable();
    Ok(match (wall_left, wall_right) {
        (true, false) => Action::Left,
        (false, true) => Action::Right,
        _ => coin(rng),
    })
}

fn encode_cells(cells: &BTreeSet<Pos>) -> String {
    cells.iter().map(|p| format!("{},{}", p.row, p.col)).collect::<Vec<_>>().join(";")
}

fn decode_cells(text: &str) -> BTreeSet<Pos> {
    text.split(';')
        .filter_map(|cell| {
            let (r, c) = cell.split_once(',')?;
            Some(Pos::new(r.parse().ok()?, c.parse().ok()?))
        })
        .collect()
}

/// Heads for the middle of the southern quadrant, then searches it; only
/// notices the reward close to southern cells it has visited.
fn pick_up_south(memory: &mut MemoryState, obs: &Observation, rng: &mut ChaCha8Rng) -> Result<Action> {
    let (me, grid) = full_view(obs)?;
    let origin = Pos::new(1, 1);
    let size = grid.width() - 2;
    let south = |p: Pos| {
        let (r, c) = (p.row - origin.row, p.col - origin.col);
        (0..size).contains(&r) && (0..size).contains(&c) && Quadrant::of(size, r, c) == Some(Quadrant::S)
    };
    let (ar, ac) = layouts::southern_anchor(size);
    let anchor = origin.offset(ar, ac);

    let mut visited = memory.slots.get(VISITED_SLOT).map(|s| decode_cells(s)).unwrap_or_default();
    if south(me) {
        visited.insert(me);
        memory.slots.insert(VISITED_SLOT.to_string(), encode_cells(&visited));
    }
    if me == anchor {
        memory.phase = 1;
    }

    let pill = grid.positions().find(|p| grid.get(*p).is_pill());
    if let Some(pill) = pill {
        if visited.iter().any(|v| v.chebyshev(pill) <= PICK_UP_B_NOTICE_RADIUS) {
            if let Some(a) = seek(&grid, me, |t| t.is_pill(), TileKind::is_standable) {
                return Ok(a);
            }
        }
    }
    if memory.phase == 0 {
        return Ok(if me.row != anchor.row {
            if me.row < anchor.row {
                Action::Down
            } else {
                Action::Up
            }
        } else if me.col < anchor.col {
            Action::Right
        } else if me.col > anchor.col {
            Action::Left
        } else {
            Action::NoOp
        });
    }
    let options: Vec<Action> = Action::MOVES
        .into_iter()
        .filter(|a| {
            let (dr, dc) = a.delta();
            south(me.offset(dr, dc))
        })
        .collect();
    if options.is_empty() {
        return Ok(seek(&grid, me, |_| false, TileKind::is_standable).unwrap_or(Action::NoOp));
    }
    Ok(options[rng.gen_range(0..options.len())])
}

fn color_lover(obs: &Observation, color: TileKind) -> Result<Action> {
    let (me, grid) = full_view(obs)?;
    Ok(seek(&grid, me, |t| t == color, |t| t.is_standable() && (!t.is_pill() || t == color)).unwrap_or(Action::NoOp))
}

/// Key-door policies. The key-first agent always fetches a visible key;
/// the other fetches it only when the door is closed or when the key lies
/// on a shortest path to the reward.
fn key_door(obs: &Observation, key_first: bool) -> Result<Action> {
    let (me, grid) = full_view(obs)?;
    let holds = obs.inventory.contains(&Item::Key);
    let door_closed = !grid.find(TileKind::GateClosed).is_empty();
    let key = grid.find(TileKind::Key).first().copied();
    let passable = |_: Pos, t: TileKind| t.is_standable() || (holds && t == TileKind::GateClosed);
    let to_key = || first_step_towards(&grid, me, |p| Some(p) == key, passable).map(|(a, _)| a);
    let to_pill = || first_step_towards(&grid, me, |p| grid.get(p).is_pill(), passable);

    if let (false, Some(k)) = (holds, key) {
        let fetch = if key_first || door_closed {
            true
        } else {
            let via = first_step_towards(&grid, me, |p| p == k, passable).map(|(_, d)| d).and_then(|d| {
                first_step_towards(&grid, k, |p| grid.get(p).is_pill(), passable).map(|(_, d2)| d + d2)
            });
            let direct = to_pill().map(|(_, d)| d);
            via.is_some() && via == direct
        };
        if fetch {
            return Ok(to_key().unwrap_or(Action::NoOp));
        }
    }
    Ok(to_pill().map(|(a, _)| a).unwrap_or(Action::NoOp))
}

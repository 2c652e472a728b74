//! The six registered environments: fixed layouts and their random
//! initial configurations.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvId, Grid, Pos, TileKind, WorldState};

/// Entity id used by every single-agent environment.
pub const AGENT: &str = "agent";
/// Entity ids of the mimic corridor.
pub const BLUE: &str = "blue";
pub const RED: &str = "red";

// '#' wall, '.' ground, 'T' terminal, 'G' closed gate.
const GRASS_SAND: [&str; 7] = [
    "#########",
    "#T.....T#",
    "####.####",
    "####.####",
    "####.####",
    "####.####",
    "#########",
];

const FLOOR_MEMORY: [&str; 9] = [
    "#########",
    "#T.....T#",
    "###...###",
    "###...###",
    "###...###",
    "###...###",
    "###...###",
    "###...###",
    "#########",
];

const PICK_UP: [&str; 7] = [
    "#######",
    "#.....#",
    "#.....#",
    "#.....#",
    "#.....#",
    "#.....#",
    "#######",
];

const GATED_ROOM: [&str; 7] = [
    "#########",
    "#...#...#",
    "#...#...#",
    "#...#...#",
    "##G###G##",
    "#.......#",
    "#########",
];

const MIMIC: [&str; 3] = ["#########", "#.......#", "#########"];

const KEY_DOOR: [&str; 7] = [
    "##########",
    "#.....####",
    "#.....####",
    "#.....G..#",
    "#.....####",
    "#.....####",
    "##########",
];

/// Side length of the pick-up room interior.
pub const PICK_UP_ROOM: i32 = 5;

fn template(env: EnvId) -> &'static [&'static str] {
    match env {
        EnvId::GrassSand => &GRASS_SAND,
        EnvId::FloorMemory => &FLOOR_MEMORY,
        EnvId::PickUp => &PICK_UP,
        EnvId::GatedRoom => &GATED_ROOM,
        EnvId::Mimic => &MIMIC,
        EnvId::KeyDoor => &KEY_DOOR,
    }
}

pub(crate) fn base_grid(env: EnvId, ground: TileKind) -> Grid {
    let rows = template(env)
        .iter()
        .map(|line| {
            line.chars()
                .map(|ch| match ch {
                    '#' => TileKind::Wall,
                    'T' => TileKind::Terminal,
                    'G' => TileKind::GateClosed,
                    _ => ground,
                })
                .collect()
        })
        .collect();
    Grid::from_rows(rows)
}

/// Named positions of an environment's fixed layout.
pub fn landmarks(env: EnvId) -> BTreeMap<&'static str, Pos> {
    let pairs: &[(&str, Pos)] = match env {
        EnvId::GrassSand => &[
            ("start", Pos::new(5, 4)),
            ("junction", Pos::new(1, 4)),
            ("end-left", Pos::new(1, 1)),
            ("end-right", Pos::new(1, 7)),
        ],
        EnvId::FloorMemory => &[
            ("start", Pos::new(7, 4)),
            ("cue", Pos::new(7, 4)),
            ("wall-left", Pos::new(2, 3)),
            ("wall-right", Pos::new(2, 5)),
            ("end-left", Pos::new(1, 1)),
            ("end-right", Pos::new(1, 7)),
        ],
        EnvId::PickUp => &[("room-origin", Pos::new(1, 1)), ("center", Pos::new(3, 3))],
        EnvId::GatedRoom => &[
            ("start", Pos::new(5, 4)),
            ("gate-left", Pos::new(4, 2)),
            ("gate-right", Pos::new(4, 6)),
        ],
        EnvId::Mimic => &[("blue-start", Pos::new(1, 3)), ("red-start", Pos::new(1, 5))],
        EnvId::KeyDoor => &[
            ("door", Pos::new(3, 6)),
            ("reward", Pos::new(3, 8)),
            ("room-origin", Pos::new(1, 1)),
        ],
    };
    pairs.iter().copied().collect()
}

/// Column splitting the layout into a left and a right half, for the
/// environments where "side" is meaningful.
pub fn midline(env: EnvId) -> i32 {
    match env {
        EnvId::GrassSand | EnvId::FloorMemory | EnvId::GatedRoom | EnvId::Mimic => 4,
        EnvId::PickUp => 3,
        EnvId::KeyDoor => 3,
    }
}

/// Quadrants of the pick-up room, cut along its diagonals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrant {
    N,
    S,
    E,
    W,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::N, Quadrant::E, Quadrant::W, Quadrant::S];

    pub fn symbol(self) -> &'static str {
        match self {
            Quadrant::N => "n",
            Quadrant::S => "s",
            Quadrant::E => "e",
            Quadrant::W => "w",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Quadrant> {
        Self::ALL.into_iter().find(|q| q.symbol() == s)
    }

    /// Quadrant of an interior cell `(row, col)` of a square room of side
    /// `size` (odd). The center cell belongs to none. Diagonal cells go to
    /// the quadrant counter-clockwise of them: NE to e, SE to s, SW to w,
    /// NW to n.
    pub fn of(size: i32, row: i32, col: i32) -> Option<Quadrant> {
        let c = size / 2;
        let (dr, dc) = (row - c, col - c);
        if dr == 0 && dc == 0 {
            return None;
        }
        Some(if dr.abs() > dc.abs() {
            if dr < 0 {
                Quadrant::N
            } else {
                Quadrant::S
            }
        } else if dc.abs() > dr.abs() {
            if dc > 0 {
                Quadrant::E
            } else {
                Quadrant::W
            }
        } else {
            match (dr < 0, dc > 0) {
                (true, true) => Quadrant::E,
                (false, true) => Quadrant::S,
                (false, false) => Quadrant::W,
                (true, false) => Quadrant::N,
            }
        })
    }

    /// Interior cells (room coordinates) of this quadrant.
    pub fn cells(self, size: i32) -> Vec<(i32, i32)> {
        (0..size)
            .flat_map(|r| (0..size).map(move |c| (r, c)))
            .filter(|&(r, c)| Quadrant::of(size, r, c) == Some(self))
            .collect()
    }
}

/// Cell of the southern quadrant closest to its centroid; ties go to the
/// column nearest the room's vertical midline.
pub fn southern_anchor(size: i32) -> (i32, i32) {
    let cells = Quadrant::S.cells(size);
    let n = cells.len() as f64;
    let mr = cells.iter().map(|c| c.0 as f64).sum::<f64>() / n;
    let mc = cells.iter().map(|c| c.1 as f64).sum::<f64>() / n;
    let mid = size / 2;
    *cells
        .iter()
        .min_by(|a, b| {
            let da = (a.0 as f64 - mr).powi(2) + (a.1 as f64 - mc).powi(2);
            let db = (b.0 as f64 - mr).powi(2) + (b.1 as f64 - mc).powi(2);
            da.partial_cmp(&db).unwrap().then(((a.1 - mid).abs()).cmp(&(b.1 - mid).abs()))
        })
        .expect("non-empty quadrant")
}

fn pick<T: Copy>(rng: &mut impl Rng, xs: &[T]) -> T {
    xs[rng.gen_range(0..xs.len())]
}

pub(crate) fn initial_world(env: EnvId, rng: &mut impl Rng, radius: u32, step_budget: u32) -> WorldState {
    let mut draws = BTreeMap::new();
    let mut entities = BTreeMap::new();
    let mut inventory = BTreeMap::new();
    let ground;
    let mut grid;
    match env {
        EnvId::GrassSand => {
            // Latent coin: (grass, pill left) or (sand, pill right).
            let grass_left = rng.gen_bool(0.5);
            ground = if grass_left { TileKind::Grass } else { TileKind::Sand };
            grid = base_grid(env, ground);
            let lm = landmarks(env);
            let end = if grass_left { lm["end-left"] } else { lm["end-right"] };
            grid.set(end, TileKind::PillPlain);
            draws.insert("config".to_string(), if grass_left { "gl" } else { "sr" }.to_string());
            entities.insert(AGENT.to_string(), lm["start"]);
        }
        EnvId::FloorMemory => {
            let grass = rng.gen_bool(0.5);
            ground = TileKind::Floor;
            grid = base_grid(env, ground);
            let lm = landmarks(env);
            grid.set(lm["cue"], if grass { TileKind::Grass } else { TileKind::Sand });
            grid.set(if grass { lm["end-left"] } else { lm["end-right"] }, TileKind::PillPlain);
            draws.insert("cue".to_string(), if grass { "g" } else { "s" }.to_string());
            entities.insert(AGENT.to_string(), lm["start"]);
        }
        EnvId::PickUp => {
            ground = TileKind::Floor;
            grid = base_grid(env, ground);
            let origin = landmarks(env)["room-origin"];
            let south = Quadrant::S.cells(PICK_UP_ROOM);
            let (pr, pc) = pick(rng, &south);
            let pill = origin.offset(pr, pc);
            grid.set(pill, TileKind::PillPlain);
            let free: Vec<Pos> = (0..PICK_UP_ROOM)
                .flat_map(|r| (0..PICK_UP_ROOM).map(move |c| origin.offset(r, c)))
                .filter(|p| *p != pill)
                .collect();
            entities.insert(AGENT.to_string(), pick(rng, &free));
        }
        EnvId::GatedRoom => {
            ground = TileKind::Floor;
            grid = base_grid(env, ground);
            let lm = landmarks(env);
            let left = rng.gen_bool(0.5);
            grid.set(if left { lm["gate-left"] } else { lm["gate-right"] }, TileKind::GateOpen);
            for (r, c, t) in [
                (1, 1, TileKind::PillRed),
                (1, 3, TileKind::PillGreen),
                (1, 5, TileKind::PillRed),
                (1, 7, TileKind::PillGreen),
            ] {
                grid.set(Pos::new(r, c), t);
            }
            draws.insert("open-gate".to_string(), if left { "l" } else { "r" }.to_string());
            entities.insert(AGENT.to_string(), lm["start"]);
        }
        EnvId::Mimic => {
            ground = TileKind::Floor;
            grid = base_grid(env, ground);
            let lm = landmarks(env);
            entities.insert(BLUE.to_string(), lm["blue-start"]);
            entities.insert(RED.to_string(), lm["red-start"]);
        }
        EnvId::KeyDoor => {
            ground = TileKind::Floor;
            grid = base_grid(env, ground);
            let lm = landmarks(env);
            let open = rng.gen_bool(0.5);
            grid.set(lm["door"], if open { TileKind::GateOpen } else { TileKind::GateClosed });
            grid.set(lm["reward"], TileKind::PillPlain);
            // Key on the door's row, west of the doorway cell.
            let door = lm["door"];
            let key = Pos::new(door.row, rng.gen_range(1..=4));
            grid.set(key, TileKind::Key);
            let origin = lm["room-origin"];
            let free: Vec<Pos> = (0..5)
                .flat_map(|r| (0..5).map(move |c| origin.offset(r, c)))
                .filter(|p| *p != key)
                .collect();
            entities.insert(AGENT.to_string(), pick(rng, &free));
            draws.insert("door".to_string(), if open { "o" } else { "c" }.to_string());
        }
    }
    for id in entities.keys() {
        inventory.insert(id.clone(), Default::default());
    }
    WorldState {
        env,
        grid,
        ground,
        entities,
        inventory,
        rewards: BTreeMap::new(),
        step_count: 0,
        step_budget,
        radius,
        terminated: false,
        outcome: None,
        draws,
    }
}

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Contents of one grid cell. Serialized as its integer code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TileKind {
    Wall,
    Floor,
    Grass,
    Sand,
    GateOpen,
    GateClosed,
    Key,
    PillRed,
    PillGreen,
    PillPlain,
    Terminal,
    OutOfBounds,
}

impl TileKind {
    pub const ALL: [TileKind; 12] = [
        TileKind::Wall,
        TileKind::Floor,
        TileKind::Grass,
        TileKind::Sand,
        TileKind::GateOpen,
        TileKind::GateClosed,
        TileKind::Key,
        TileKind::PillRed,
        TileKind::PillGreen,
        TileKind::PillPlain,
        TileKind::Terminal,
        TileKind::OutOfBounds,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<TileKind> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TileKind::Wall => "wall",
            TileKind::Floor => "floor",
            TileKind::Grass => "floor:grass",
            TileKind::Sand => "floor:sand",
            TileKind::GateOpen => "gate:open",
            TileKind::GateClosed => "gate:closed",
            TileKind::Key => "key",
            TileKind::PillRed => "pill:red",
            TileKind::PillGreen => "pill:green",
            TileKind::PillPlain => "pill:plain",
            TileKind::Terminal => "terminal",
            TileKind::OutOfBounds => "out-of-bounds",
        }
    }

    pub fn from_name(name: &str) -> Option<TileKind> {
        Self::ALL.iter().copied().find(|t| t.name() == name)
    }

    pub fn is_pill(self) -> bool {
        matches!(self, TileKind::PillRed | TileKind::PillGreen | TileKind::PillPlain)
    }

    pub fn is_ground(self) -> bool {
        matches!(self, TileKind::Floor | TileKind::Grass | TileKind::Sand)
    }

    /// Tiles an entity may stand on.
    pub fn is_standable(self) -> bool {
        !matches!(self, TileKind::Wall | TileKind::GateClosed | TileKind::OutOfBounds)
    }
}

impl fmt::Display for TileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for TileKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for TileKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let code = u8::deserialize(d)?;
        TileKind::from_code(code).ok_or_else(|| D::Error::custom(format!("unknown tile code {code}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: i32,
    pub col: i32,
}

impl Pos {
    pub const fn new(row: i32, col: i32) -> Pos {
        Pos { row, col }
    }

    pub fn offset(self, dr: i32, dc: i32) -> Pos {
        Pos::new(self.row + dr, self.col + dc)
    }

    pub fn chebyshev(self, other: Pos) -> i32 {
        (self.row - other.row).abs().max((self.col - other.col).abs())
    }

    pub fn manhattan(self, other: Pos) -> i32 {
        (self.row - other.row).abs() + (self.col - other.col).abs()
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Row-major tile array.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid {
    rows: Vec<Vec<TileKind>>,
}

impl Grid {
    pub fn from_rows(rows: Vec<Vec<TileKind>>) -> Grid {
        Grid { rows }
    }

    pub fn height(&self) -> i32 {
        self.rows.len() as i32
    }

    pub fn width(&self) -> i32 {
        self.rows.first().map_or(0, |r| r.len() as i32)
    }

    pub fn area(&self) -> u32 {
        (self.height() * self.width()) as u32
    }

    pub fn contains(&self, p: Pos) -> bool {
        p.row >= 0 && p.col >= 0 && p.row < self.height() && p.col < self.width()
    }

    pub fn get(&self, p: Pos) -> TileKind {
        if self.contains(p) {
            self.rows[p.row as usize][p.col as usize]
        } else {
            TileKind::OutOfBounds
        }
    }

    pub fn set(&mut self, p: Pos, t: TileKind) {
        if self.contains(p) {
            self.rows[p.row as usize][p.col as usize] = t;
        }
    }

    pub fn rows(&self) -> &[Vec<TileKind>] {
        &self.rows
    }

    pub fn positions(&self) -> impl Iterator<Item = Pos> + '_ {
        let w = self.width();
        (0..self.height()).flat_map(move |r| (0..w).map(move |c| Pos::new(r, c)))
    }

    pub fn find(&self, kind: TileKind) -> Vec<Pos> {
        self.positions().filter(|p| self.get(*p) == kind).collect()
    }

    /// Rectangular grid where every row has the same width.
    pub fn is_rectangular(&self) -> bool {
        let w = self.width() as usize;
        self.rows.iter().all(|r| r.len() == w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for t in TileKind::ALL {
            assert_eq!(TileKind::from_code(t.code()), Some(t));
            assert_eq!(TileKind::from_name(t.name()), Some(t));
        }
        assert_eq!(TileKind::from_code(12), None);
        assert_eq!(serde_json::to_string(&TileKind::Sand).unwrap(), "3");
    }

    #[test]
    fn outside_reads_as_out_of_bounds() {
        let g = Grid::from_rows(vec![vec![TileKind::Floor]]);
        assert_eq!(g.get(Pos::new(0, 0)), TileKind::Floor);
        assert_eq!(g.get(Pos::new(-1, 0)), TileKind::OutOfBounds);
        assert_eq!(g.get(Pos::new(0, 1)), TileKind::OutOfBounds);
    }
}

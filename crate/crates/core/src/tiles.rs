//! Unified tile alphabet shared by every game in the corpus.
//!
//! The catalog is data-driven: per-game raw character mappings, the
//! affordance set of each unified tile, its game origin and a display color
//! all come from a JSON document. The built-in default is the two-game
//! Lode Runner / Legend of Zelda alphabet of 15 tiles.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tile character used for blank padding and empty space.
pub const BLANK: u8 = b'.';

/// Number of opaque affordance bits carried by embedding tables.
pub const AFFORDANCE_BITS: usize = 13;

const DEFAULT_CATALOG: &str = include_str!("../data/default_tiles.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Affordance {
    Solid,
    Ground,
    Block,
    Diggable,
    Passable,
    Empty,
    Climable,
    Rope,
    Ladder,
    Pickupable,
    Gold,
    Damaging,
    Enemy,
    Spawn,
    Hazard,
    Element,
    Openable,
    Climbable,
    Wall,
}

impl Affordance {
    /// Position in the fixed 13-bit affordance vector. Several labels share a
    /// bit (rope/ladder are both climbable, wall is solid, gold is pickupable).
    pub fn bit(self) -> usize {
        match self {
            Affordance::Solid | Affordance::Wall => 0,
            Affordance::Ground => 1,
            Affordance::Block => 2,
            Affordance::Diggable => 3,
            Affordance::Passable => 4,
            Affordance::Empty => 5,
            Affordance::Climable | Affordance::Climbable | Affordance::Rope | Affordance::Ladder => 6,
            Affordance::Pickupable | Affordance::Gold => 7,
            Affordance::Damaging => 8,
            Affordance::Enemy => 9,
            Affordance::Spawn | Affordance::Hazard => 10,
            Affordance::Element => 11,
            Affordance::Openable => 12,
        }
    }
}

/// Which game(s) a unified tile comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    #[serde(rename = "LR")]
    LrExclusive,
    #[serde(rename = "LOZ")]
    LozExclusive,
    #[serde(rename = "shared")]
    Shared,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnifiedTile {
    pub ch: u8,
    pub affordances: BTreeSet<Affordance>,
    pub origin: Origin,
    /// Flat display color used by renders.
    pub color: [u8; 3],
}

impl UnifiedTile {
    pub fn has(&self, affordance: Affordance) -> bool {
        self.affordances.contains(&affordance)
    }

    pub fn affordance_bits(&self) -> [u8; AFFORDANCE_BITS] {
        let mut bits = [0u8; AFFORDANCE_BITS];
        for a in &self.affordances {
            bits[a.bit()] = 1;
        }
        bits
    }
}

/// On-disk schema of the mapping/origin configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogFile {
    pub games: BTreeMap<String, BTreeMap<String, String>>,
    pub affordances: BTreeMap<String, Vec<Affordance>>,
    pub origins: BTreeMap<String, Origin>,
    #[serde(default)]
    pub colors: BTreeMap<String, [u8; 3]>,
}

#[derive(Debug, Clone)]
pub struct TileCatalog {
    games: BTreeMap<String, BTreeMap<u8, u8>>,
    tiles: BTreeMap<u8, UnifiedTile>,
}

fn single_byte(s: &str, what: &str) -> Result<u8> {
    match s.as_bytes() {
        [b] if b.is_ascii_graphic() => Ok(*b),
        _ => Err(Error::Schema(format!(
            "{what} {s:?} must be a single printable ASCII character"
        ))),
    }
}

impl Default for TileCatalog {
    fn default() -> Self {
        Self::from_json_str(DEFAULT_CATALOG).expect("built-in tile catalog is valid")
    }
}

impl TileCatalog {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: CatalogFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json_str(&text)
    }

    pub fn from_file(file: CatalogFile) -> Result<Self> {
        let mut colors = BTreeMap::new();
        for (key, rgb) in &file.colors {
            colors.insert(single_byte(key, "color tile")?, *rgb);
        }
        let mut tiles = BTreeMap::new();
        for (key, affordances) in &file.affordances {
            let ch = single_byte(key, "tile")?;
            let origin = *file
                .origins
                .get(key)
                .ok_or_else(|| Error::Schema(format!("tile {key:?} has no origin")))?;
            tiles.insert(
                ch,
                UnifiedTile {
                    ch,
                    affordances: affordances.iter().copied().collect(),
                    origin,
                    color: colors.get(&ch).copied().unwrap_or_else(|| fallback_color(ch)),
                },
            );
        }
        for key in file.origins.keys() {
            let ch = single_byte(key, "origin tile")?;
            if !tiles.contains_key(&ch) {
                return Err(Error::Schema(format!("origin given for unknown tile {key:?}")));
            }
        }

        let mut games = BTreeMap::new();
        for (game, mapping) in &file.games {
            let mut m = BTreeMap::new();
            for (raw, unified) in mapping {
                let raw = single_byte(raw, "raw tile")?;
                let unified = single_byte(unified, "unified tile")?;
                if !tiles.contains_key(&unified) {
                    return Err(Error::Schema(format!(
                        "game {game} maps {:?} to unknown tile {:?}",
                        raw as char, unified as char
                    )));
                }
                m.insert(raw, unified);
            }
            games.insert(game.clone(), m);
        }

        Ok(Self { games, tiles })
    }

    pub fn games(&self) -> impl Iterator<Item = &str> {
        self.games.keys().map(String::as_str)
    }

    pub fn has_game(&self, game: &str) -> bool {
        self.games.contains_key(game)
    }

    /// Maps a raw per-game character to its unified tile.
    pub fn unify_tile(&self, game: &str, raw: u8) -> Result<&UnifiedTile> {
        let mapping = self
            .games
            .get(game)
            .ok_or_else(|| Error::UnknownGame(game.to_string()))?;
        mapping
            .get(&raw)
            .and_then(|u| self.tiles.get(u))
            .ok_or(Error::UnknownTile {
                ch: raw as char,
                line: 0,
                col: 0,
            })
    }

    pub fn tile(&self, ch: u8) -> Option<&UnifiedTile> {
        self.tiles.get(&ch)
    }

    pub fn contains(&self, ch: u8) -> bool {
        self.tiles.contains_key(&ch)
    }

    /// All unified tiles in byte order.
    pub fn tiles(&self) -> impl Iterator<Item = &UnifiedTile> {
        self.tiles.values()
    }

    pub fn alphabet(&self) -> Vec<u8> {
        self.tiles.keys().copied().collect()
    }

    pub fn origin(&self, ch: u8) -> Option<Origin> {
        self.tiles.get(&ch).map(|t| t.origin)
    }

    pub fn color(&self, ch: u8) -> [u8; 3] {
        self.tiles.get(&ch).map_or_else(|| fallback_color(ch), |t| t.color)
    }
}

fn fallback_color(ch: u8) -> [u8; 3] {
    let h = (ch as u32).wrapping_mul(2_654_435_761);
    [(h >> 24) as u8, (h >> 16) as u8, (h >> 8) as u8]
}

//! Segment categorization and game-specific search agents.

mod search;
mod worlds;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use search::{astar, explore, Move, Outcome, Pos, SearchBudget, World};
pub use worlds::{GravityWorld, GridWorld};

use crate::corpus::{Segment, SEGMENT_SIZE};
use crate::error::{Error, Result};
use crate::tiles::{Origin, TileCatalog};

fn set(s: &[u8]) -> BTreeSet<u8> {
    s.iter().copied().collect()
}

/// Movement rules of an agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRules {
    pub game: String,
    #[serde(with = "crate::charset")]
    pub passable: BTreeSet<u8>,
    #[serde(with = "crate::charset")]
    pub solid: BTreeSet<u8>,
    /// Tiles climbed vertically.
    #[serde(with = "crate::charset")]
    pub climb: BTreeSet<u8>,
    /// Tiles traversed hand over hand.
    #[serde(with = "crate::charset")]
    pub rope: BTreeSet<u8>,
    #[serde(with = "crate::charset")]
    pub diggable: BTreeSet<u8>,
    /// Non-solid tiles the agent still cannot enter.
    #[serde(with = "crate::charset")]
    pub blocked: BTreeSet<u8>,
    #[serde(with = "crate::charset")]
    pub gold: BTreeSet<u8>,
    pub gravity: bool,
}

impl AgentRules {
    pub fn lode_runner() -> Self {
        Self {
            game: "LR".into(),
            passable: set(b".-#GEPS"),
            solid: set(b"BbFODWMI"),
            climb: set(b"#"),
            rope: set(b"-"),
            diggable: set(b"b"),
            blocked: BTreeSet::new(),
            gold: set(b"G"),
            gravity: true,
        }
    }

    pub fn zelda() -> Self {
        Self {
            game: "LOZ".into(),
            passable: set(b".-#GEDSF"),
            solid: set(b"BbIOWM"),
            climb: BTreeSet::new(),
            rope: BTreeSet::new(),
            diggable: BTreeSet::new(),
            blocked: set(b"P"),
            gold: BTreeSet::new(),
            gravity: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(ch) = self.passable.intersection(&self.solid).next() {
            return Err(Error::Schema(format!(
                "tile {:?} is both passable and solid",
                *ch as char
            )));
        }
        Ok(())
    }

    pub fn walkable(&self, tile: u8) -> bool {
        self.passable.contains(&tile) && !self.blocked.contains(&tile)
    }

    fn searcher<'a>(&'a self, segment: &'a Segment) -> Searcher<'a> {
        if self.gravity {
            Searcher::Gravity(GravityWorld { segment, rules: self })
        } else {
            Searcher::Grid(GridWorld { segment, rules: self })
        }
    }
}

enum Searcher<'a> {
    Gravity(GravityWorld<'a>),
    Grid(GridWorld<'a>),
}

impl Searcher<'_> {
    fn astar(&self, start: Pos, goal: Pos, budget: &mut SearchBudget) -> Outcome {
        match self {
            Searcher::Gravity(w) => astar(w, start, goal, budget),
            Searcher::Grid(w) => astar(w, start, goal, budget),
        }
    }

    fn explore(&self, start: Pos) -> (BTreeSet<Pos>, BTreeSet<Pos>) {
        match self {
            Searcher::Gravity(w) => explore(w, start),
            Searcher::Grid(w) => explore(w, start),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "LR-like")]
    LrLike,
    #[serde(rename = "LOZ-like")]
    LozLike,
}

/// Majority of game-exclusive tiles; shared tiles are ignored and ties go
/// to the platformer.
pub fn categorize_segment(segment: &Segment, catalog: &TileCatalog) -> Category {
    let (mut lr, mut loz) = (0usize, 0usize);
    for ch in segment.cells() {
        match catalog.origin(ch) {
            Some(Origin::LrExclusive) => lr += 1,
            Some(Origin::LozExclusive) => loz += 1,
            _ => {}
        }
    }
    if loz > lr {
        Category::LozLike
    } else {
        Category::LrLike
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Playable,
    Unplayable,
    Unknown,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Playable
        } else {
            Verdict::Unplayable
        }
    }

    pub fn is_playable(self) -> bool {
        self == Verdict::Playable
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reachability {
    /// Resting positions.
    pub reachable: BTreeSet<Pos>,
    /// Every cell entered, including cells fallen through.
    pub visited: BTreeSet<Pos>,
    pub gold: BTreeSet<Pos>,
}

/// Exhaustive platformer search from `start` under the default rules.
pub fn lr_reachability(segment: &Segment, start: Pos) -> Result<Reachability> {
    reachability(segment, start, &AgentRules::lode_runner())
}

pub fn reachability(segment: &Segment, start: Pos, rules: &AgentRules) -> Result<Reachability> {
    if start.0 >= SEGMENT_SIZE || start.1 >= SEGMENT_SIZE || !rules.walkable(segment.get(start.0, start.1)) {
        return Err(Error::BadStart {
            row: start.0,
            col: start.1,
        });
    }
    let (reachable, visited) = rules.searcher(segment).explore(start);
    let gold = visited
        .iter()
        .copied()
        .filter(|p| rules.gold.contains(&segment.get(p.0, p.1)))
        .collect();
    Ok(Reachability {
        reachable,
        visited,
        gold,
    })
}

fn cells() -> impl Iterator<Item = Pos> {
    (0..SEGMENT_SIZE).flat_map(|r| (0..SEGMENT_SIZE).map(move |c| (r, c)))
}

/// Top and bottom starts: leftmost walkable cell of the topmost and of the
/// bottommost row holding one.
pub fn lr_starts(segment: &Segment, rules: &AgentRules) -> Option<(Pos, Pos)> {
    let leftmost = |r: usize| {
        (0..SEGMENT_SIZE)
            .find(|&c| rules.walkable(segment.get(r, c)))
            .map(|c| (r, c))
    };
    let top = (0..SEGMENT_SIZE).find_map(leftmost)?;
    let bottom = (0..SEGMENT_SIZE).rev().find_map(leftmost)?;
    Some((top, bottom))
}

pub fn gold_cells(segment: &Segment, rules: &AgentRules) -> Vec<Pos> {
    cells()
        .filter(|p| rules.gold.contains(&segment.get(p.0, p.1)))
        .collect()
}

/// Gold protocol: playable if from either start at least half the gold
/// (rounded up) can be collected; gold-free segments are playable.
pub fn lr_playable(segment: &Segment) -> bool {
    gold_verdict(segment, &AgentRules::lode_runner(), &mut SearchBudget::unlimited()).is_playable()
}

pub fn gold_verdict(segment: &Segment, rules: &AgentRules, budget: &mut SearchBudget) -> Verdict {
    let golds = gold_cells(segment, rules);
    if golds.is_empty() {
        return Verdict::Playable;
    }
    let Some((top, bottom)) = lr_starts(segment, rules) else {
        return Verdict::Unplayable;
    };
    let need = golds.len().div_ceil(2);
    let searcher = rules.searcher(segment);
    for start in [top, bottom] {
        let mut found = 0;
        for (i, &g) in golds.iter().enumerate() {
            match searcher.astar(start, g, budget) {
                Outcome::Found => found += 1,
                Outcome::NotFound => {}
                Outcome::Exhausted => return Verdict::Unknown,
            }
            if found >= need {
                return Verdict::Playable;
            }
            if found + (golds.len() - i - 1) < need {
                break;
            }
        }
    }
    Verdict::Unplayable
}

/// Walkable cell nearest to a corner by Manhattan distance; ties go to the
/// first cell in row-major order.
pub fn corner_cell(segment: &Segment, rules: &AgentRules, corner: Pos) -> Option<Pos> {
    cells()
        .filter(|p| rules.walkable(segment.get(p.0, p.1)))
        .min_by_key(|p| p.0.abs_diff(corner.0) + p.1.abs_diff(corner.1))
}

const LAST: usize = SEGMENT_SIZE - 1;

/// Bottom-left to top-right, bottom-right to top-left, top-left to
/// bottom-right, top-right to bottom-left.
pub const CORNER_QUERIES: [(Pos, Pos); 4] = [
    ((LAST, 0), (0, LAST)),
    ((LAST, LAST), (0, 0)),
    ((0, 0), (LAST, LAST)),
    ((0, LAST), (LAST, 0)),
];

/// Corner protocol: playable if at least two of the four diagonal corner
/// queries succeed.
pub fn corner_verdict(segment: &Segment, rules: &AgentRules, budget: &mut SearchBudget) -> Verdict {
    let searcher = rules.searcher(segment);
    let (mut ok, mut unknown) = (0, 0);
    for (from, to) in CORNER_QUERIES {
        let (Some(s), Some(g)) = (corner_cell(segment, rules, from), corner_cell(segment, rules, to)) else {
            continue;
        };
        match searcher.astar(s, g, budget) {
            Outcome::Found => ok += 1,
            Outcome::NotFound => {}
            Outcome::Exhausted => unknown += 1,
        }
        if ok >= 2 {
            return Verdict::Playable;
        }
    }
    if ok + unknown >= 2 {
        Verdict::Unknown
    } else {
        Verdict::Unplayable
    }
}

pub fn lr_on_loz_playable(segment: &Segment) -> bool {
    corner_verdict(segment, &AgentRules::lode_runner(), &mut SearchBudget::unlimited()).is_playable()
}

pub fn loz_playable(segment: &Segment) -> bool {
    corner_verdict(segment, &AgentRules::zelda(), &mut SearchBudget::unlimited()).is_playable()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agents {
    pub lr: AgentRules,
    pub loz: AgentRules,
}

impl Default for Agents {
    fn default() -> Self {
        Self {
            lr: AgentRules::lode_runner(),
            loz: AgentRules::zelda(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentVerdict {
    pub id: String,
    pub category: Category,
    pub lr: Verdict,
    pub loz: Verdict,
}

/// Both agents' verdicts. LR-like segments use the gold protocol for the
/// platformer agent and LOZ-like segments the corner protocol.
pub fn evaluate_segment(
    segment: &Segment,
    catalog: &TileCatalog,
    agents: &Agents,
    budget: &mut SearchBudget,
) -> SegmentVerdict {
    let category = categorize_segment(segment, catalog);
    let lr = match category {
        Category::LrLike => gold_verdict(segment, &agents.lr, budget),
        Category::LozLike => corner_verdict(segment, &agents.lr, budget),
    };
    let loz = corner_verdict(segment, &agents.loz, budget);
    SegmentVerdict {
        id: segment.id(),
        category,
        lr,
        loz,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayabilityReport {
    pub n: usize,
    pub lr_like: usize,
    pub loz_like: usize,
    pub lr_astar_pct: f64,
    pub loz_astar_pct: f64,
    pub per_segment: Vec<SegmentVerdict>,
}

pub fn playability_report(segments: &[Segment], catalog: &TileCatalog, agents: &Agents) -> Result<PlayabilityReport> {
    if segments.is_empty() {
        return Err(Error::EmptyInput("no segments to evaluate"));
    }
    let per_segment: Vec<SegmentVerdict> = segments
        .iter()
        .map(|s| evaluate_segment(s, catalog, agents, &mut SearchBudget::unlimited()))
        .collect();
    Ok(report_from(per_segment))
}

pub fn report_from(per_segment: Vec<SegmentVerdict>) -> PlayabilityReport {
    let n = per_segment.len();
    let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
    let lr_like = per_segment.iter().filter(|v| v.category == Category::LrLike).count();
    let lr_ok = per_segment.iter().filter(|v| v.lr.is_playable()).count();
    let loz_ok = per_segment.iter().filter(|v| v.loz.is_playable()).count();
    PlayabilityReport {
        n,
        lr_like,
        loz_like: n - lr_like,
        lr_astar_pct: pct(lr_ok),
        loz_astar_pct: pct(loz_ok),
        per_segment,
    }
}

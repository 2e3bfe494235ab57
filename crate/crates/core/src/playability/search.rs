//! Best-first and breadth-first search over resting positions.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use std::time::Instant;

pub type Pos = (usize, usize);

/// A transition to a resting position, listing every cell entered on the
/// way (the destination included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Move {
    pub to: Pos,
    pub path: Vec<Pos>,
}

pub trait World {
    /// Resting position reached from a start cell, with the cells entered
    /// while settling (the start included).
    fn settle(&self, start: Pos) -> (Pos, Vec<Pos>);
    fn successors(&self, at: Pos) -> Vec<Move>;
}

/// Limits on search effort. Exhausting either limit yields an unknown
/// outcome rather than a verdict.
#[derive(Debug, Clone, Default)]
pub struct SearchBudget {
    pub max_expansions: Option<usize>,
    pub deadline: Option<Instant>,
    expansions: usize,
}

impl SearchBudget {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn with_deadline(deadline: Instant) -> Self {
        Self {
            deadline: Some(deadline),
            ..Self::default()
        }
    }

    pub fn with_expansions(n: usize) -> Self {
        Self {
            max_expansions: Some(n),
            ..Self::default()
        }
    }

    pub fn expansions(&self) -> usize {
        self.expansions
    }

    fn spend(&mut self) -> bool {
        self.expansions += 1;
        if self.max_expansions.is_some_and(|m| self.expansions > m) {
            return false;
        }
        // checking the clock every expansion is cheap next to successor generation
        !self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Found,
    NotFound,
    Exhausted,
}

fn manhattan(a: Pos, b: Pos) -> usize {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

/// A* from `start` until some move enters `goal`. Move cost is the number
/// of cells entered, so Manhattan distance is admissible.
pub fn astar<W: World>(world: &W, start: Pos, goal: Pos, budget: &mut SearchBudget) -> Outcome {
    let (rest, path) = world.settle(start);
    if path.contains(&goal) {
        return Outcome::Found;
    }
    let mut best: BTreeMap<Pos, usize> = BTreeMap::from([(rest, 0)]);
    let mut open = BinaryHeap::from([Reverse((manhattan(rest, goal), 0usize, rest))]);
    while let Some(Reverse((_, g, at))) = open.pop() {
        if best.get(&at).is_some_and(|&b| b < g) {
            continue;
        }
        if !budget.spend() {
            return Outcome::Exhausted;
        }
        for m in world.successors(at) {
            if m.path.contains(&goal) {
                return Outcome::Found;
            }
            let ng = g + m.path.len();
            if best.get(&m.to).is_none_or(|&b| ng < b) {
                best.insert(m.to, ng);
                open.push(Reverse((ng + manhattan(m.to, goal), ng, m.to)));
            }
        }
    }
    Outcome::NotFound
}

/// Exhaustive breadth-first exploration: resting positions and every cell
/// entered along the way.
pub fn explore<W: World>(world: &W, start: Pos) -> (BTreeSet<Pos>, BTreeSet<Pos>) {
    let (rest, path) = world.settle(start);
    let mut visited: BTreeSet<Pos> = path.into_iter().collect();
    let mut reachable = BTreeSet::from([rest]);
    let mut queue = VecDeque::from([rest]);
    while let Some(at) = queue.pop_front() {
        for m in world.successors(at) {
            visited.extend(m.path);
            if reachable.insert(m.to) {
                queue.push_back(m.to);
            }
        }
    }
    (reachable, visited)
}

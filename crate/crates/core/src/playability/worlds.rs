use super::search::{Move, Pos, World};
use super::AgentRules;
use crate::corpus::{Segment, SEGMENT_SIZE};

const LAST: usize = SEGMENT_SIZE - 1;

/// Platformer movement: walking, ladders, ropes, falling and digging, with
/// a virtual solid floor below the bottom row.
///
/// State is position only. A dug brick is open for the fall that digs it
/// and closed again afterwards.
pub struct GravityWorld<'a> {
    pub segment: &'a Segment,
    pub rules: &'a AgentRules,
}

impl GravityWorld<'_> {
    fn tile(&self, p: Pos) -> u8 {
        self.segment.get(p.0, p.1)
    }

    fn passable(&self, p: Pos, dug: Option<Pos>) -> bool {
        Some(p) == dug || self.rules.walkable(self.tile(p))
    }

    pub fn supported(&self, p: Pos, dug: Option<Pos>) -> bool {
        let here = self.tile(p);
        if p.0 == LAST || self.rules.climb.contains(&here) || self.rules.rope.contains(&here) {
            return true;
        }
        let below_pos = (p.0 + 1, p.1);
        let below = self.tile(below_pos);
        if self.rules.climb.contains(&below) {
            return true;
        }
        Some(below_pos) != dug && (self.rules.solid.contains(&below) || self.rules.diggable.contains(&below))
    }

    fn fall(&self, from: Pos, dug: Option<Pos>, path: &mut Vec<Pos>) -> Pos {
        let mut at = from;
        path.push(at);
        while !self.supported(at, dug) {
            let next = (at.0 + 1, at.1);
            if !self.passable(next, dug) {
                break;
            }
            at = next;
            path.push(at);
        }
        at
    }

    fn step(&self, to: Pos, dug: Option<Pos>) -> Move {
        let mut path = Vec::new();
        let rest = self.fall(to, dug, &mut path);
        Move { to: rest, path }
    }
}

impl World for GravityWorld<'_> {
    fn settle(&self, start: Pos) -> (Pos, Vec<Pos>) {
        let m = self.step(start, None);
        (m.to, m.path)
    }

    fn successors(&self, at: Pos) -> Vec<Move> {
        let (r, c) = at;
        let mut out = Vec::with_capacity(6);
        let sides = [c.checked_sub(1), (c < LAST).then_some(c + 1)];
        for side in sides.into_iter().flatten() {
            if self.passable((r, side), None) {
                out.push(self.step((r, side), None));
            }
        }
        if r > 0 && self.rules.climb.contains(&self.tile(at)) && self.passable((r - 1, c), None) {
            out.push(self.step((r - 1, c), None));
        }
        if r < LAST && self.passable((r + 1, c), None) {
            out.push(self.step((r + 1, c), None));
        }
        if r < LAST {
            for side in sides.into_iter().flatten() {
                let brick = (r + 1, side);
                if self.rules.diggable.contains(&self.tile(brick)) && self.passable((r, side), None) {
                    out.push(self.step((r, side), Some(brick)));
                }
            }
        }
        out
    }
}

/// Top-down movement between 4-neighbors.
pub struct GridWorld<'a> {
    pub segment: &'a Segment,
    pub rules: &'a AgentRules,
}

impl World for GridWorld<'_> {
    fn settle(&self, start: Pos) -> (Pos, Vec<Pos>) {
        (start, vec![start])
    }

    fn successors(&self, (r, c): Pos) -> Vec<Move> {
        let candidates = [
            r.checked_sub(1).map(|r| (r, c)),
            (r < LAST).then_some((r + 1, c)),
            c.checked_sub(1).map(|c| (r, c)),
            (c < LAST).then_some((r, c + 1)),
        ];
        candidates
            .into_iter()
            .flatten()
            .filter(|p| self.rules.walkable(self.segment.get(p.0, p.1)))
            .map(|p| Move { to: p, path: vec![p] })
            .collect()
    }
}

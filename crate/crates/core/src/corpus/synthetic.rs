//! Deterministic stand-in for the two-game reference corpus.
//!
//! Produces 150 Lode Runner levels (22x32, raw LR characters) and 17 Zelda
//! dungeon maps holding 27 rooms each (459 rooms of 11x16, raw LOZ
//! characters, unused map cells filled with the `-` void tile). The layouts
//! follow the usual structure of each game: brick platforms joined by
//! ladders and ropes with gold on top, and walled rooms with doors, blocks,
//! water and monsters.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{LOZ_ROOM_HEIGHT, LOZ_ROOM_WIDTH, LR_HEIGHT, LR_WIDTH};
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const LR_LEVELS: usize = 150;
pub const LOZ_DUNGEONS: usize = 17;
pub const LOZ_ROOMS_PER_DUNGEON: usize = 27;
const DUNGEON_COLS: usize = 6;
const DUNGEON_ROWS: usize = 6;

/// Text of one synthetic Lode Runner level.
pub fn lr_level_text(seed: u64, index: usize) -> String {
    let mut rng = rng_for(seed, &format!("lr-level-{index}"));
    let mut g = vec![vec![b'.'; LR_WIDTH]; LR_HEIGHT];
    g[LR_HEIGHT - 1].fill(b'B');

    // platform rows, roughly every four rows
    let mut floors = Vec::new();
    let mut r = rng.random_range(3..6);
    while r < LR_HEIGHT - 3 {
        floors.push(r);
        let mut c = rng.random_range(0..4);
        while c < LR_WIDTH {
            let len = rng.random_range(4..15).min(LR_WIDTH - c);
            let solid = rng.random_bool(0.2);
            for x in c..c + len {
                g[r][x] = if solid || rng.random_bool(0.05) { b'B' } else { b'b' };
            }
            c += len + rng.random_range(2..6);
        }
        r += rng.random_range(3..6);
    }
    floors.push(LR_HEIGHT - 1);

    // ladders from each floor up to the floor above (or the top)
    let mut prev_top = 0usize;
    for &floor in &floors {
        for _ in 0..rng.random_range(1..4) {
            let x = rng.random_range(0..LR_WIDTH);
            let top = if prev_top == 0 {
                rng.random_range(0..3)
            } else {
                prev_top - 1
            };
            for row in g.iter_mut().take(floor).skip(top) {
                row[x] = b'#';
            }
        }
        prev_top = floor;
    }

    // ropes hanging in open space
    for _ in 0..rng.random_range(0..3) {
        let row = rng.random_range(1..LR_HEIGHT - 2);
        let start = rng.random_range(0..LR_WIDTH - 4);
        let len = rng.random_range(4..11).min(LR_WIDTH - start);
        for x in start..start + len {
            if g[row][x] == b'.' {
                g[row][x] = b'-';
            }
        }
    }

    let mut standing: Vec<(usize, usize)> = (0..LR_HEIGHT - 1)
        .flat_map(|r| (0..LR_WIDTH).map(move |c| (r, c)))
        .filter(|&(r, c)| g[r][c] == b'.' && matches!(g[r + 1][c], b'b' | b'B'))
        .collect();
    standing.shuffle(&mut rng);
    let golds = rng.random_range(4..11);
    let enemies = rng.random_range(1..5);
    let mut spots = standing.into_iter();
    for _ in 0..golds {
        if let Some((r, c)) = spots.next() {
            g[r][c] = b'G';
        }
    }
    for _ in 0..enemies {
        if let Some((r, c)) = spots.next() {
            g[r][c] = b'E';
        }
    }
    if let Some((r, c)) = spots.next() {
        g[r][c] = b'M';
    }
    to_text(&g)
}

fn room(rng: &mut ChaCha8Rng) -> Vec<Vec<u8>> {
    let (h, w) = (LOZ_ROOM_HEIGHT, LOZ_ROOM_WIDTH);
    let mut g = vec![vec![b'W'; w]; h];
    for row in g.iter_mut().take(h - 2).skip(2) {
        row[2..w - 2].fill(b'F');
    }

    // at least one door; vertical doors are common so rooms can be crossed
    let mut doors = [
        rng.random_bool(0.75),
        rng.random_bool(0.75),
        rng.random_bool(0.5),
        rng.random_bool(0.5),
    ];
    if !doors.iter().any(|&d| d) {
        doors[rng.random_range(0..4)] = true;
    }
    let mid = w / 2;
    if doors[0] {
        for row in g.iter_mut().take(2) {
            row[mid - 1..=mid].fill(b'D');
        }
    }
    if doors[1] {
        for row in g.iter_mut().skip(h - 2) {
            row[mid - 1..=mid].fill(b'D');
        }
    }
    if doors[2] {
        g[h / 2][..2].fill(b'D');
    }
    if doors[3] {
        g[h / 2][w - 2..].fill(b'D');
    }

    let interior = |rng: &mut ChaCha8Rng| (rng.random_range(2..h - 2), rng.random_range(2..w - 2));
    match rng.random_range(0..5) {
        // mirrored block pairs
        0 | 1 => {
            for _ in 0..rng.random_range(1..5) {
                let (r, c) = interior(rng);
                g[r][c] = b'B';
                g[r][w - 1 - c] = b'B';
            }
        }
        // a water strip with a gap
        2 => {
            let r = rng.random_range(3..h - 3);
            let gap = rng.random_range(2..w - 2);
            for c in 3..w - 3 {
                if c != gap && c != gap + 1 {
                    g[r][c] = b'P';
                }
            }
        }
        // an element block cluster
        3 => {
            let (r, c) = interior(rng);
            g[r][c] = if rng.random_bool(0.5) { b'I' } else { b'O' };
            if c + 1 < w - 2 {
                g[r][c + 1] = b'P';
            }
        }
        _ => {}
    }
    for _ in 0..rng.random_range(0..4) {
        let (r, c) = interior(rng);
        g[r][c] = b'M';
    }
    if rng.random_bool(0.1) {
        let (r, c) = interior(rng);
        g[r][c] = b'S';
    }
    g
}

/// Text of one synthetic Zelda dungeon map.
pub fn loz_dungeon_text(seed: u64, index: usize) -> String {
    let mut rng = rng_for(seed, &format!("loz-dungeon-{index}"));
    let mut slots: Vec<usize> = (0..DUNGEON_COLS * DUNGEON_ROWS).collect();
    slots.shuffle(&mut rng);
    let mut used = slots[..LOZ_ROOMS_PER_DUNGEON].to_vec();
    used.sort_unstable();

    let mut g = vec![vec![b'-'; DUNGEON_COLS * LOZ_ROOM_WIDTH]; DUNGEON_ROWS * LOZ_ROOM_HEIGHT];
    for slot in used {
        let (top, left) = (
            (slot / DUNGEON_COLS) * LOZ_ROOM_HEIGHT,
            (slot % DUNGEON_COLS) * LOZ_ROOM_WIDTH,
        );
        for (r, row) in room(&mut rng).into_iter().enumerate() {
            g[top + r][left..left + LOZ_ROOM_WIDTH].copy_from_slice(&row);
        }
    }
    to_text(&g)
}

fn to_text(g: &[Vec<u8>]) -> String {
    let mut s = String::with_capacity(g.len() * (g[0].len() + 1));
    for row in g {
        s.push_str(std::str::from_utf8(row).expect("ascii"));
        s.push('\n');
    }
    s
}

/// Writes the full stand-in corpus as `dir/LR/*.txt` and `dir/LOZ/*.txt`.
pub fn write_reference_corpus(dir: impl AsRef<Path>, seed: u64) -> Result<()> {
    let dir = dir.as_ref();
    let write = |sub: &str, name: String, text: String| -> Result<()> {
        let d = dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(format!("creating {}", d.display()), e))?;
        let p = d.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(format!("writing {}", p.display()), e))
    };
    for i in 0..LR_LEVELS {
        write("LR", format!("level_{i:03}.txt"), lr_level_text(seed, i))?;
    }
    for i in 0..LOZ_DUNGEONS {
        write("LOZ", format!("dungeon_{i:02}.txt"), loz_dungeon_text(seed, i))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_level, split_rooms};
    use crate::tiles::TileCatalog;

    #[test]
    fn lr_levels_parse_at_full_size() {
        let cat = TileCatalog::default();
        for i in 0..10 {
            let g = parse_level(&lr_level_text(1, i), "LR", &cat).unwrap();
            assert_eq!((g.height(), g.width()), (22, 32));
        }
        assert_eq!(lr_level_text(1, 0), lr_level_text(1, 0));
    }

    #[test]
    fn dungeons_hold_27_rooms() {
        let cat = TileCatalog::default();
        for i in 0..3 {
            let g = parse_level(&loz_dungeon_text(5, i), "LOZ", &cat).unwrap();
            assert_eq!(split_rooms(&g).unwrap().len(), LOZ_ROOMS_PER_DUNGEON);
        }
    }
}

//! Small deterministic datasets for tests, benchmarks and demos.

use crate::corpus::{Provenance, Segment, SlotTag, SEGMENT_SIZE};
use crate::embedding::{synth_table, EmbeddingTable};
use crate::error::Result;
use crate::tiles::{TileCatalog, UnifiedTile};

/// Tiles used by [`overfit_segments`].
pub const OVERFIT_TILES: &[u8] = b".BbW#-GD";

/// Eight structured segments (four platformer-like, four room-like) over
/// the [`OVERFIT_TILES`] alphabet.
pub fn overfit_segments() -> Vec<Segment> {
    let mut out = Vec::new();
    for i in 0..4 {
        let mut g = [[b'.'; SEGMENT_SIZE]; SEGMENT_SIZE];
        g[15] = [b'B'; SEGMENT_SIZE];
        let shelf = 5 + 2 * i;
        for c in 2 + i..10 + i {
            g[shelf][c] = b'b';
        }
        let ladder = 12 - i;
        for row in g.iter_mut().take(15).skip(shelf - 1) {
            row[ladder] = b'#';
        }
        for c in 0..6 {
            g[2 + i][c + 8] = b'-';
        }
        g[shelf - 1][3 + i] = b'G';
        g[14][1 + 3 * i] = b'G';
        out.push(Segment::new(
            g,
            Provenance {
                game: "LR".into(),
                level: i,
                slot: SlotTag::TL,
            },
        ));
    }
    for i in 0..4 {
        let mut g = [[b'.'; SEGMENT_SIZE]; SEGMENT_SIZE];
        for (r, row) in g.iter_mut().enumerate().take(14).skip(3) {
            for (c, cell) in row.iter_mut().enumerate() {
                if r == 3 || r == 13 || c == 0 || c == 15 {
                    *cell = b'W';
                }
            }
        }
        if i % 2 == 0 {
            g[3][7] = b'D';
            g[3][8] = b'D';
        }
        if i < 2 {
            g[8][0] = b'D';
        } else {
            g[8][15] = b'D';
        }
        for c in 4..12 {
            g[6 + i][c] = b'B';
        }
        out.push(Segment::new(
            g,
            Provenance {
                game: "LOZ".into(),
                level: i,
                slot: SlotTag::Room,
            },
        ));
    }
    out
}

pub fn overfit_tiles(catalog: &TileCatalog) -> Vec<UnifiedTile> {
    OVERFIT_TILES
        .iter()
        .map(|ch| catalog.tile(*ch).expect("fixture tile in catalog").clone())
        .collect()
}

/// Dimension-8 synthetic table over [`OVERFIT_TILES`].
pub fn overfit_table(catalog: &TileCatalog, seed: u64) -> Result<EmbeddingTable> {
    synth_table(&overfit_tiles(catalog), 8, seed)
}

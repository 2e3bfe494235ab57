//! Level ingestion, segmentation and dataset splitting.

mod archive;
pub mod synthetic;

use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::tiles::{TileCatalog, BLANK};

pub use archive::{load_corpus_dir, ArchiveEntry, SegmentArchive, SplitIds, ARCHIVE_VERSION};

/// Side length of a square training segment, in tiles.
pub const SEGMENT_SIZE: usize = 16;
pub const SEGMENT_CELLS: usize = SEGMENT_SIZE * SEGMENT_SIZE;

pub const LR_HEIGHT: usize = 22;
pub const LR_WIDTH: usize = 32;
pub const LOZ_ROOM_HEIGHT: usize = 11;
pub const LOZ_ROOM_WIDTH: usize = 16;

/// Blank rows added above and below a Zelda room to make it square.
pub const LOZ_PAD_TOP: usize = 3;
pub const LOZ_PAD_BOTTOM: usize = 2;

/// Row offset of the bottom Lode Runner segments.
pub const LR_BOTTOM_OFFSET: usize = LR_HEIGHT - SEGMENT_SIZE;

/// A rectangular grid of unified tile characters, rows top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelGrid {
    pub game: String,
    rows: Vec<Vec<u8>>,
}

impl LevelGrid {
    pub fn new(game: impl Into<String>, rows: Vec<Vec<u8>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).ok_or(Error::EmptyLevel)?;
        if width == 0 {
            return Err(Error::EmptyLevel);
        }
        if let Some((line, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(Error::RaggedLines {
                line: line + 1,
                expected: width,
                found: row.len(),
            });
        }
        Ok(Self {
            game: game.into(),
            rows,
        })
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.rows[row][col]
    }

    fn window(&self, row: usize, col: usize) -> [[u8; SEGMENT_SIZE]; SEGMENT_SIZE] {
        let mut grid = [[BLANK; SEGMENT_SIZE]; SEGMENT_SIZE];
        for (r, out) in grid.iter_mut().enumerate() {
            out.copy_from_slice(&self.rows[row + r][col..col + SEGMENT_SIZE]);
        }
        grid
    }
}

/// Parses a plain-text level, mapping each raw character through the game's
/// unified-tile mapping. Line and column numbers in errors are 1-based.
pub fn parse_level(text: &str, game: &str, catalog: &TileCatalog) -> Result<LevelGrid> {
    if !catalog.has_game(game) {
        return Err(Error::UnknownGame(game.to_string()));
    }
    let mut lines: Vec<&str> = text.split('\n').map(|l| l.trim_end_matches('\r')).collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    if lines.is_empty() {
        return Err(Error::EmptyLevel);
    }
    let width = lines[0].len();
    let mut rows = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.len() != width || line.is_empty() {
            return Err(Error::RaggedLines {
                line: i + 1,
                expected: width,
                found: line.len(),
            });
        }
        let mut row = Vec::with_capacity(width);
        for (j, ch) in line.chars().enumerate() {
            let unknown = Error::UnknownTile {
                ch,
                line: i + 1,
                col: j + 1,
            };
            if !ch.is_ascii() {
                return Err(unknown);
            }
            match catalog.unify_tile(game, ch as u8) {
                Ok(t) => row.push(t.ch),
                Err(_) => return Err(unknown),
            }
        }
        rows.push(row);
    }
    LevelGrid::new(game, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SlotTag {
    TL,
    TR,
    BL,
    BR,
    #[serde(rename = "ROOM")]
    Room,
    #[serde(rename = "GENERATED")]
    Generated,
}

impl fmt::Display for SlotTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SlotTag::TL => "TL",
            SlotTag::TR => "TR",
            SlotTag::BL => "BL",
            SlotTag::BR => "BR",
            SlotTag::Room => "ROOM",
            SlotTag::Generated => "GENERATED",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub game: String,
    pub level: usize,
    pub slot: SlotTag,
}

impl Provenance {
    pub fn generated() -> Self {
        Self {
            game: "GENERATED".into(),
            level: 0,
            slot: SlotTag::Generated,
        }
    }

    /// Stable identifier, e.g. `LR-017-TL`.
    pub fn id(&self) -> String {
        format!("{}-{:03}-{}", self.game, self.level, self.slot)
    }
}

/// A 16x16 chunk of unified tiles.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segment {
    pub grid: [[u8; SEGMENT_SIZE]; SEGMENT_SIZE],
    pub provenance: Provenance,
}

impl Segment {
    pub fn new(grid: [[u8; SEGMENT_SIZE]; SEGMENT_SIZE], provenance: Provenance) -> Self {
        Self { grid, provenance }
    }

    pub fn filled(ch: u8) -> Self {
        Self::new([[ch; SEGMENT_SIZE]; SEGMENT_SIZE], Provenance::generated())
    }

    pub fn id(&self) -> String {
        self.provenance.id()
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.grid[row][col]
    }

    pub fn cells(&self) -> impl Iterator<Item = u8> + '_ {
        self.grid.iter().flat_map(|r| r.iter().copied())
    }

    /// Sixteen strings of sixteen characters, top to bottom.
    pub fn to_lines(&self) -> Vec<String> {
        self.grid
            .iter()
            .map(|r| r.iter().map(|&b| b as char).collect())
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = self.to_lines().join("\n");
        s.push('\n');
        s
    }

    /// Builds a segment from sixteen 16-character lines of unified tiles.
    pub fn from_lines<S: AsRef<str>>(lines: &[S], provenance: Provenance) -> Result<Self> {
        if lines.len() != SEGMENT_SIZE {
            return Err(Error::WrongDimensions {
                expected: "16x16",
                found_height: lines.len(),
                found_width: lines.first().map_or(0, |l| l.as_ref().len()),
            });
        }
        let mut grid = [[BLANK; SEGMENT_SIZE]; SEGMENT_SIZE];
        for (r, line) in lines.iter().enumerate() {
            let bytes = line.as_ref().as_bytes();
            if bytes.len() != SEGMENT_SIZE {
                return Err(Error::WrongDimensions {
                    expected: "16x16",
                    found_height: lines.len(),
                    found_width: bytes.len(),
                });
            }
            grid[r].copy_from_slice(bytes);
        }
        Ok(Self::new(grid, provenance))
    }

    /// Checks every tile against the catalog alphabet.
    pub fn validate(&self, catalog: &TileCatalog) -> Result<()> {
        for (r, row) in self.grid.iter().enumerate() {
            for (c, &ch) in row.iter().enumerate() {
                if !catalog.contains(ch) {
                    return Err(Error::UnknownTile {
                        ch: ch as char,
                        line: r + 1,
                        col: c + 1,
                    });
                }
            }
        }
        Ok(())
    }
}

fn expect_dims(level: &LevelGrid, height: usize, width: usize, expected: &'static str) -> Result<()> {
    if level.height() != height || level.width() != width {
        return Err(Error::WrongDimensions {
            expected,
            found_height: level.height(),
            found_width: level.width(),
        });
    }
    Ok(())
}

/// Cuts a 22x32 Lode Runner level into its four corner segments. The top
/// and bottom windows overlap by ten rows.
pub fn segment_lr_level(level: &LevelGrid, level_index: usize) -> Result<[Segment; 4]> {
    expect_dims(level, LR_HEIGHT, LR_WIDTH, "22x32")?;
    let make = |row, col, slot| {
        Segment::new(
            level.window(row, col),
            Provenance {
                game: level.game.clone(),
                level: level_index,
                slot,
            },
        )
    };
    Ok([
        make(0, 0, SlotTag::TL),
        make(0, SEGMENT_SIZE, SlotTag::TR),
        make(LR_BOTTOM_OFFSET, 0, SlotTag::BL),
        make(LR_BOTTOM_OFFSET, SEGMENT_SIZE, SlotTag::BR),
    ])
}

/// Pads an 11x16 Zelda room with three blank rows above and two below.
pub fn pad_loz_room(room: &LevelGrid, level_index: usize) -> Result<Segment> {
    expect_dims(room, LOZ_ROOM_HEIGHT, LOZ_ROOM_WIDTH, "11x16")?;
    let mut grid = [[BLANK; SEGMENT_SIZE]; SEGMENT_SIZE];
    for (r, row) in room.rows().iter().enumerate() {
        grid[LOZ_PAD_TOP + r].copy_from_slice(row);
    }
    Ok(Segment::new(
        grid,
        Provenance {
            game: room.game.clone(),
            level: level_index,
            slot: SlotTag::Room,
        },
    ))
}

/// Splits a dungeon map laid out as a grid of 11x16 rooms into its rooms,
/// skipping rooms made only of blank tiles. A single room is returned as is.
pub fn split_rooms(level: &LevelGrid) -> Result<Vec<LevelGrid>> {
    if !level.height().is_multiple_of(LOZ_ROOM_HEIGHT) || !level.width().is_multiple_of(LOZ_ROOM_WIDTH) {
        return Err(Error::WrongDimensions {
            expected: "multiple of 11x16",
            found_height: level.height(),
            found_width: level.width(),
        });
    }
    let mut rooms = Vec::new();
    for top in (0..level.height()).step_by(LOZ_ROOM_HEIGHT) {
        for left in (0..level.width()).step_by(LOZ_ROOM_WIDTH) {
            let rows: Vec<Vec<u8>> = level.rows()[top..top + LOZ_ROOM_HEIGHT]
                .iter()
                .map(|r| r[left..left + LOZ_ROOM_WIDTH].to_vec())
                .collect();
            if rows.iter().flatten().all(|&b| b == BLANK) {
                continue;
            }
            rooms.push(LevelGrid::new(level.game.clone(), rows)?);
        }
    }
    Ok(rooms)
}

/// Train/test/validation partition of a segment corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<Segment>,
    pub test: Vec<Segment>,
    pub validation: Vec<Segment>,
    pub seed: u64,
}

impl CorpusSplit {
    /// Every segment as training data, for small fixtures.
    pub fn train_only(train: Vec<Segment>, seed: u64) -> Self {
        Self {
            train,
            test: Vec::new(),
            validation: Vec::new(),
            seed,
        }
    }
}

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.85, 0.10, 0.05);

/// Sizes of the train and test parts; validation takes the remainder.
pub fn split_sizes(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize, usize)> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !r.is_finite() || *r < 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::BadRatios(format!("{a}, {b}, {c}")));
    }
    // small slack so that e.g. 0.85 * 20 floors to 17, not 16
    let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
    let train = floor(a).min(n);
    let test = floor(b).min(n - train);
    Ok((train, test, n - train - test))
}

/// Deterministically shuffles and partitions `segments`.
pub fn split_dataset(segments: &[Segment], ratios: (f64, f64, f64), seed: u64) -> Result<CorpusSplit> {
    if segments.is_empty() {
        return Err(Error::EmptyInput("segment list"));
    }
    let (n_train, n_test, _) = split_sizes(segments.len(), ratios)?;
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.shuffle(&mut rng_for(seed, "split"));
    let pick = |idx: &[usize]| idx.iter().map(|&i| segments[i].clone()).collect::<Vec<_>>();
    Ok(CorpusSplit {
        train: pick(&order[..n_train]),
        test: pick(&order[n_train..n_train + n_test]),
        validation: pick(&order[n_train + n_test..]),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> TileCatalog {
        TileCatalog::default()
    }

    fn lr_level(fill: impl Fn(usize, usize) -> u8) -> LevelGrid {
        let rows = (0..LR_HEIGHT)
            .map(|r| (0..LR_WIDTH).map(|c| fill(r, c)).collect())
            .collect();
        LevelGrid::new("LR", rows).unwrap()
    }

    #[test]
    fn parse_two_by_two() {
        let g = parse_level("B.\n.B", "LR", &cat()).unwrap();
        assert_eq!((g.height(), g.width()), (2, 2));
        assert_eq!(g.rows(), &[b"B.".to_vec(), b".B".to_vec()]);
    }

    #[test]
    fn parse_ragged() {
        assert!(matches!(
            parse_level("B..\nB.", "LR", &cat()),
            Err(Error::RaggedLines {
                line: 2,
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn parse_unknown_reports_position() {
        assert!(matches!(
            parse_level("..\n.Z", "LR", &cat()),
            Err(Error::UnknownTile {
                ch: 'Z',
                line: 2,
                col: 2
            })
        ));
    }

    #[test]
    fn parse_full_lr_level() {
        let line = "B".repeat(LR_WIDTH);
        let text = vec![line; LR_HEIGHT].join("\n") + "\n";
        let g = parse_level(&text, "LR", &cat()).unwrap();
        assert_eq!((g.height(), g.width()), (22, 32));
    }

    #[test]
    fn lr_segments_have_all_slots() {
        let level = lr_level(|r, c| if (r + c) % 3 == 0 { b'B' } else { b'.' });
        let segs = segment_lr_level(&level, 4).unwrap();
        let slots: Vec<_> = segs.iter().map(|s| s.provenance.slot).collect();
        assert_eq!(slots, vec![SlotTag::TL, SlotTag::TR, SlotTag::BL, SlotTag::BR]);
        assert_eq!(segs[3].get(15, 15), level.get(21, 31));
        assert_eq!(segs[1].get(0, 0), level.get(0, 16));
    }

    #[test]
    fn lr_overlap_row_six() {
        let level = lr_level(|r, _| if r == 6 { b'G' } else { b'.' });
        let segs = segment_lr_level(&level, 0).unwrap();
        assert_eq!(segs[2].grid[0], [b'G'; 16]);
        assert_eq!(segs[0].grid[6], [b'G'; 16]);
    }

    #[test]
    fn lr_wrong_dims() {
        let room = LevelGrid::new("LR", vec![vec![b'.'; 16]; 11]).unwrap();
        assert!(matches!(segment_lr_level(&room, 0), Err(Error::WrongDimensions { .. })));
    }

    #[test]
    fn pad_all_wall_room() {
        let room = LevelGrid::new("LOZ", vec![vec![b'W'; 16]; 11]).unwrap();
        let seg = pad_loz_room(&room, 0).unwrap();
        for r in 0..16 {
            let expect = if (3..=13).contains(&r) { b'W' } else { b'.' };
            assert_eq!(seg.grid[r], [expect; 16], "row {r}");
        }
    }

    #[test]
    fn pad_offsets_by_three() {
        let mut rows = vec![vec![b'F'; 16]; 11];
        rows[0] = vec![b'D'; 16];
        let seg = pad_loz_room(&LevelGrid::new("LOZ", rows).unwrap(), 0).unwrap();
        assert_eq!(seg.grid[3], [b'D'; 16]);
        assert_eq!(seg.provenance.slot, SlotTag::Room);
    }

    #[test]
    fn pad_wrong_dims() {
        let room = LevelGrid::new("LOZ", vec![vec![b'.'; 16]; 16]).unwrap();
        assert!(matches!(pad_loz_room(&room, 0), Err(Error::WrongDimensions { .. })));
    }

    #[test]
    fn dungeon_rooms_skip_void() {
        let mut rows = vec![vec![b'.'; 32]; 22];
        for row in rows.iter_mut().take(11) {
            row[..16].fill(b'W');
        }
        rows[15][20] = b'F';
        let level = LevelGrid::new("LOZ", rows).unwrap();
        let rooms = split_rooms(&level).unwrap();
        assert_eq!(rooms.len(), 2);
        assert_eq!(rooms[1].get(4, 4), b'F');
    }

    #[test]
    fn split_sizes_floor_rule() {
        assert_eq!(split_sizes(1059, DEFAULT_RATIOS).unwrap(), (900, 105, 54));
        assert_eq!(split_sizes(20, DEFAULT_RATIOS).unwrap(), (17, 2, 1));
        assert!(matches!(split_sizes(20, (0.5, 0.5, 0.5)), Err(Error::BadRatios(_))));
    }

    #[test]
    fn split_is_deterministic() {
        let segs: Vec<Segment> = (0..40)
            .map(|i| {
                let mut s = Segment::filled(b'.');
                s.provenance.level = i;
                s
            })
            .collect();
        let a = split_dataset(&segs, DEFAULT_RATIOS, 11).unwrap();
        let b = split_dataset(&segs, DEFAULT_RATIOS, 11).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&segs, DEFAULT_RATIOS, 12).unwrap();
        assert_ne!(a.train, c.train);
        assert!(matches!(
            split_dataset(&[], DEFAULT_RATIOS, 0),
            Err(Error::EmptyInput(_))
        ));
    }
}

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    pad_loz_room, parse_level, segment_lr_level, split_dataset, split_rooms, CorpusSplit, LevelGrid, Provenance,
    Segment, SlotTag, LR_HEIGHT, LR_WIDTH, SEGMENT_SIZE,
};
use crate::error::{Error, Result};
use crate::tiles::TileCatalog;

pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub id: String,
    pub game: String,
    pub level: usize,
    pub slot: SlotTag,
    pub tiles: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIds {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub validation: Vec<String>,
}

/// The prepared segment corpus plus its split manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentArchive {
    pub version: u32,
    pub seed: u64,
    pub segments: Vec<ArchiveEntry>,
    pub split: SplitIds,
}

impl SegmentArchive {
    pub fn new(segments: &[Segment], split: &CorpusSplit) -> Self {
        let ids = |v: &[Segment]| v.iter().map(Segment::id).collect();
        Self {
            version: ARCHIVE_VERSION,
            seed: split.seed,
            segments: segments
                .iter()
                .map(|s| ArchiveEntry {
                    id: s.id(),
                    game: s.provenance.game.clone(),
                    level: s.provenance.level,
                    slot: s.provenance.slot,
                    tiles: s.to_lines(),
                })
                .collect(),
            split: SplitIds {
                train: ids(&split.train),
                test: ids(&split.test),
                validation: ids(&split.validation),
            },
        }
    }

    /// Reads every level under `dir/<game>/*.txt` (sorted by name), segments
    /// it and splits the result. Games are processed in catalog order.
    ///
    /// 22x32 levels yield four corner segments, maps tiled by 11x16 rooms
    /// yield one padded segment per non-blank room and 16x16 levels are taken
    /// as they are.
    pub fn prepare(dir: impl AsRef<Path>, catalog: &TileCatalog, ratios: (f64, f64, f64), seed: u64) -> Result<Self> {
        let segments = load_corpus_dir(dir.as_ref(), catalog)?;
        let split = split_dataset(&segments, ratios, seed)?;
        Ok(Self::new(&segments, &split))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let archive: Self = serde_json::from_str(&text)
            .map_err(|e| Error::in_file(path.display().to_string(), Error::Schema(e.to_string())))?;
        if archive.version != ARCHIVE_VERSION {
            return Err(Error::VersionMismatch(format!(
                "archive version {} (expected {ARCHIVE_VERSION})",
                archive.version
            )));
        }
        Ok(archive)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("archive serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn segments(&self) -> Result<Vec<Segment>> {
        self.segments.iter().map(entry_segment).collect()
    }

    pub fn segment(&self, id: &str) -> Option<Result<Segment>> {
        self.segments.iter().find(|e| e.id == id).map(entry_segment)
    }

    /// Rebuilds the split from the stored id lists.
    pub fn corpus_split(&self) -> Result<CorpusSplit> {
        let by_id: HashMap<&str, &ArchiveEntry> = self.segments.iter().map(|e| (e.id.as_str(), e)).collect();
        let resolve = |ids: &[String]| -> Result<Vec<Segment>> {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .ok_or_else(|| Error::Schema(format!("split references unknown id {id}")))
                        .and_then(|e| entry_segment(e))
                })
                .collect()
        };
        Ok(CorpusSplit {
            train: resolve(&self.split.train)?,
            test: resolve(&self.split.test)?,
            validation: resolve(&self.split.validation)?,
            seed: self.seed,
        })
    }
}

fn entry_segment(e: &ArchiveEntry) -> Result<Segment> {
    Segment::from_lines(
        &e.tiles,
        Provenance {
            game: e.game.clone(),
            level: e.level,
            slot: e.slot,
        },
    )
}

/// Loads and segments every level file under `dir/<game>/`.
pub fn load_corpus_dir(dir: &Path, catalog: &TileCatalog) -> Result<Vec<Segment>> {
    let mut segments = Vec::new();
    for game in catalog.games() {
        let game_dir = dir.join(game);
        if !game_dir.is_dir() {
            continue;
        }
        let mut files: Vec<_> = std::fs::read_dir(&game_dir)
            .map_err(|e| Error::io(format!("listing {}", game_dir.display()), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        let mut index = 0usize;
        for path in files {
            let text =
                std::fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            let wrap = |e| Error::in_file(path.display().to_string(), e);
            let level = parse_level(&text, game, catalog).map_err(wrap)?;
            for seg in segment_level(&level, &mut index).map_err(wrap)? {
                segments.push(seg);
            }
        }
    }
    if segments.is_empty() {
        return Err(Error::EmptyInput("corpus directory contains no levels"));
    }
    Ok(segments)
}

fn segment_level(level: &LevelGrid, index: &mut usize) -> Result<Vec<Segment>> {
    let (h, w) = (level.height(), level.width());
    let out = if (h, w) == (LR_HEIGHT, LR_WIDTH) {
        let segs = segment_lr_level(level, *index)?.to_vec();
        *index += 1;
        segs
    } else if (h, w) == (SEGMENT_SIZE, SEGMENT_SIZE) {
        let rows: Vec<String> = level
            .rows()
            .iter()
            .map(|r| String::from_utf8_lossy(r).into_owned())
            .collect();
        let seg = Segment::from_lines(
            &rows,
            Provenance {
                game: level.game.clone(),
                level: *index,
                slot: SlotTag::Room,
            },
        )?;
        *index += 1;
        vec![seg]
    } else {
        let mut segs = Vec::new();
        for room in split_rooms(level)? {
            segs.push(pad_loz_room(&room, *index)?);
            *index += 1;
        }
        segs
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DEFAULT_RATIOS;

    #[test]
    fn archive_round_trip() {
        let segs: Vec<Segment> = (0..10)
            .map(|i| {
                let mut s = Segment::filled(if i % 2 == 0 { b'B' } else { b'.' });
                s.provenance = Provenance {
                    game: "LR".into(),
                    level: i,
                    slot: SlotTag::TL,
                };
                s
            })
            .collect();
        let split = split_dataset(&segs, DEFAULT_RATIOS, 3).unwrap();
        let archive = SegmentArchive::new(&segs, &split);
        let back: SegmentArchive = serde_json::from_str(&archive.to_json()).unwrap();
        assert_eq!(back, archive);
        assert_eq!(back.segments().unwrap(), segs);
        assert_eq!(back.corpus_split().unwrap(), split);
        assert_eq!(back.segment("LR-003-TL").unwrap().unwrap(), segs[3]);
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_corpus_dir(dir.path(), &TileCatalog::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn parse_errors_carry_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("LR")).unwrap();
        std::fs::write(dir.path().join("LR/bad.txt"), "..\n.Z\n").unwrap();
        let err = load_corpus_dir(dir.path(), &TileCatalog::default()).unwrap_err();
        assert!(err.to_string().contains("bad.txt"));
        assert_eq!(err.kind(), "UnknownTile");
    }
}

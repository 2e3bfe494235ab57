//! Tile embedding tables and nearest-tile decoding.
//!
//! A table maps every unified tile to a fixed-length real vector. Segments
//! are embedded by per-cell substitution and decoded back by exact
//! nearest-neighbor search under the L1 (Manhattan) distance, ties going to
//! the smallest tile byte.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Provenance, Segment, SEGMENT_CELLS, SEGMENT_SIZE};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::tiles::{UnifiedTile, AFFORDANCE_BITS};

/// Minimum pairwise L1 gap enforced by [`synth_table`].
pub const SYNTH_MIN_GAP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct TileEmbedding {
    pub tile: u8,
    pub vector: Vec<f64>,
    pub affordances: [u8; AFFORDANCE_BITS],
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: Vec<TileEmbedding>,
    index: Box<[Option<u16>; 256]>,
}

#[derive(Serialize, Deserialize)]
struct EntryFile {
    tile: String,
    vector: Vec<f64>,
    affordances: Vec<u8>,
    color: [u8; 3],
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    dim: usize,
    entries: Vec<EntryFile>,
}

impl EmbeddingTable {
    /// Validates and indexes a list of entries.
    pub fn new(dim: usize, entries: Vec<TileEmbedding>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Schema("dim must be positive".into()));
        }
        if entries.is_empty() {
            return Err(Error::Schema("table has no entries".into()));
        }
        let mut index = Box::new([None; 256]);
        for (i, e) in entries.iter().enumerate() {
            if e.vector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.vector.len(),
                });
            }
            if let Some(j) = e.vector.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(j));
            }
            if index[e.tile as usize].replace(i as u16).is_some() {
                return Err(Error::DuplicateTile(e.tile as char));
            }
        }
        Ok(Self { dim, entries, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[TileEmbedding] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, tile: u8) -> Option<&TileEmbedding> {
        self.index[tile as usize].map(|i| &self.entries[i as usize])
    }

    pub fn tiles(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.tile).collect()
    }

    /// True when every vector is a distinct standard basis vector.
    pub fn is_one_hot(&self) -> bool {
        let mut seen = vec![false; self.dim];
        self.entries.iter().all(|e| {
            let hot: Vec<usize> = (0..self.dim).filter(|&i| e.vector[i] != 0.0).collect();
            match hot.as_slice() {
                [i] if e.vector[*i] == 1.0 && !seen[*i] => {
                    seen[*i] = true;
                    true
                }
                _ => false,
            }
        })
    }

    /// Short content hash identifying this table.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim as u64).to_le_bytes());
        for e in &self.entries {
            h.update([e.tile]);
            for v in &e.vector {
                h.update(v.to_le_bytes());
            }
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: TableFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let mut entries = Vec::with_capacity(file.entries.len());
        for e in file.entries {
            let tile = match e.tile.as_bytes() {
                [b] if b.is_ascii_graphic() => *b,
                _ => return Err(Error::Schema(format!("tile {:?} is not one character", e.tile))),
            };
            if e.affordances.len() != AFFORDANCE_BITS || e.affordances.iter().any(|&b| b > 1) {
                return Err(Error::Schema(format!(
                    "tile {:?}: affordances must be {AFFORDANCE_BITS} bits",
                    e.tile
                )));
            }
            let mut affordances = [0u8; AFFORDANCE_BITS];
            affordances.copy_from_slice(&e.affordances);
            entries.push(TileEmbedding {
                tile,
                vector: e.vector,
                affordances,
                color: e.color,
            });
        }
        Self::new(file.dim, entries)
    }

    pub fn to_json(&self) -> String {
        let file = TableFile {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .map(|e| EntryFile {
                    tile: (e.tile as char).to_string(),
                    vector: e.vector.clone(),
                    affordances: e.affordances.to_vec(),
                    color: e.color,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("table serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

fn entry_for(tile: &UnifiedTile, vector: Vec<f64>) -> TileEmbedding {
    TileEmbedding {
        tile: tile.ch,
        vector,
        affordances: tile.affordance_bits(),
        color: tile.color,
    }
}

/// One-hot table: tile `i` gets hot index `i` in list order.
pub fn one_hot_table(tiles: &[UnifiedTile]) -> Result<EmbeddingTable> {
    let dim = tiles.len();
    let entries = tiles
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut v = vec![0.0; dim];
            v[i] = 1.0;
            entry_for(t, v)
        })
        .collect();
    EmbeddingTable::new(dim, entries)
}

/// Random table standing in for a learned embedding, with vectors drawn
/// uniformly from [-1, 1] and redrawn until every pair is at least
/// [`SYNTH_MIN_GAP`] apart in L1.
pub fn synth_table(tiles: &[UnifiedTile], dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if dim == 0 || dim < tiles.len() {
        return Err(Error::DimTooSmall {
            dim,
            tiles: tiles.len(),
        });
    }
    let mut rng = rng_for(seed, "synth-table");
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(tiles.len());
    for _ in tiles {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            if vectors.iter().all(|u| l1(u, &v) >= SYNTH_MIN_GAP) {
                vectors.push(v);
                break;
            }
        }
    }
    let entries = tiles.iter().zip(vectors).map(|(t, v)| entry_for(t, v)).collect();
    EmbeddingTable::new(dim, entries)
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Smallest pairwise L1 distance between table vectors.
pub fn min_pairwise_gap(table: &EmbeddingTable) -> f64 {
    let e = table.entries();
    let mut best = f64::INFINITY;
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            best = best.min(l1(&e[i].vector, &e[j].vector));
        }
    }
    best
}

/// A segment in embedding space, laid out row-major as `[row][col][dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSegment {
    pub values: Vec<f64>,
    pub dim: usize,
    pub table_id: String,
}

impl EmbeddedSegment {
    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * SEGMENT_SIZE + col) * self.dim;
        &self.values[start..start + self.dim]
    }
}

pub fn embed_segment(segment: &Segment, table: &EmbeddingTable) -> Result<EmbeddedSegment> {
    let dim = table.dim();
    let mut values = Vec::with_capacity(SEGMENT_CELLS * dim);
    for (r, row) in segment.grid.iter().enumerate() {
        for (c, &ch) in row.iter().enumerate() {
            let e = table.get(ch).ok_or(Error::UnknownTile {
                ch: ch as char,
                line: r + 1,
                col: c + 1,
            })?;
            values.extend_from_slice(&e.vector);
        }
    }
    Ok(EmbeddedSegment {
        values,
        dim,
        table_id: table.fingerprint(),
    })
}

/// Closest table tile to `vector` under L1, with its distance.
pub fn nearest_tile(vector: &[f64], table: &EmbeddingTable) -> Result<(u8, f64)> {
    if vector.len() != table.dim() {
        return Err(Error::DimensionMismatch {
            expected: table.dim(),
            found: vector.len(),
        });
    }
    if let Some(i) = vector.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let mut best: Option<(u8, f64)> = None;
    for e in table.entries() {
        let d = l1(vector, &e.vector);
        best = match best {
            Some((t, bd)) if bd < d || (bd == d && t < e.tile) => Some((t, bd)),
            _ => Some((e.tile, d)),
        };
    }
    Ok(best.expect("tables are non-empty"))
}

/// Decodes a `[16][16][dim]` tensor cell by cell to the nearest tiles.
pub fn decode_tensor(values: &[f64], table: &EmbeddingTable) -> Result<Segment> {
    let dim = table.dim();
    if values.len() != SEGMENT_CELLS * dim {
        return Err(Error::DimensionMismatch {
            expected: SEGMENT_CELLS * dim,
            found: values.len(),
        });
    }
    let mut grid = [[0u8; SEGMENT_SIZE]; SEGMENT_SIZE];
    for (i, cell) in values.chunks_exact(dim).enumerate() {
        let (tile, _) = nearest_tile(cell, table).map_err(|e| match e {
            Error::NonFinite(j) => Error::NonFinite(i * dim + j),
            other => other,
        })?;
        grid[i / SEGMENT_SIZE][i % SEGMENT_SIZE] = tile;
    }
    Ok(Segment::new(grid, Provenance::generated()))
}

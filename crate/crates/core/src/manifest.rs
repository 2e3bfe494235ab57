//! JSON manifests of generated and blended segments.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blend::BlendResult;
use crate::corpus::{Provenance, Segment};
use crate::error::{Error, Result};
use crate::tiles::TileCatalog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepTag {
    T(f64),
    Label(String),
}

impl StepTag {
    pub fn random() -> Self {
        StepTag::Label("random".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub t: StepTag,
    pub tiles: Vec<String>,
    pub seed: u64,
}

impl ManifestEntry {
    /// The entry's tiles as a segment, checked against the catalog.
    pub fn segment(&self, catalog: &TileCatalog) -> Result<Segment> {
        let seg = Segment::from_lines(&self.tiles, Provenance::generated())?;
        seg.validate(catalog)?;
        Ok(seg)
    }
}

pub fn random_manifest(segments: &[Segment], seed: u64) -> Vec<ManifestEntry> {
    segments
        .iter()
        .enumerate()
        .map(|(i, s)| ManifestEntry {
            id: format!("random-{i:04}"),
            t: StepTag::random(),
            tiles: s.to_lines(),
            seed,
        })
        .collect()
}

pub fn blend_manifest(result: &BlendResult, seed: u64) -> Vec<ManifestEntry> {
    result
        .steps
        .iter()
        .enumerate()
        .map(|(i, step)| ManifestEntry {
            id: format!("blend-{}-{}-{i:02}", result.a.id(), result.b.id()),
            t: StepTag::T(step.t),
            tiles: step.segment.to_lines(),
            seed,
        })
        .collect()
}

pub fn manifest_to_json(entries: &[ManifestEntry]) -> String {
    let mut s = serde_json::to_string_pretty(entries).expect("manifest serializes");
    s.push('\n');
    s
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    serde_json::from_str(&text).map_err(|e| Error::in_file(path.display().to_string(), Error::Schema(e.to_string())))
}

/// Segments of a manifest, tagged with their manifest ids.
pub fn manifest_segments(entries: &[ManifestEntry], catalog: &TileCatalog) -> Result<Vec<(String, Segment)>> {
    if entries.is_empty() {
        return Err(Error::EmptyInput("manifest has no entries"));
    }
    entries
        .iter()
        .map(|e| {
            e.segment(catalog)
                .map(|s| (e.id.clone(), s))
                .map_err(|err| Error::in_file(format!("manifest entry {}", e.id), err))
        })
        .collect()
}

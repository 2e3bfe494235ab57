//! Per-segment tile metrics and the energy distance between metric sets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Segment, SEGMENT_CELLS, SEGMENT_SIZE};
use crate::error::{Error, Result};
use crate::tiles::{TileCatalog, BLANK};

const DEFAULT_SETS: &str = include_str!("../data/metric_sets.json");

pub const METRIC_NAMES: [&str; 5] = [
    "density",
    "nonlinearity",
    "leniency",
    "interestingness",
    "path_proportion",
];

/// Tile sets counted by the proportion metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricTileSets {
    #[serde(with = "crate::charset")]
    pub density: BTreeSet<u8>,
    #[serde(with = "crate::charset")]
    pub hazard: BTreeSet<u8>,
    #[serde(with = "crate::charset")]
    pub interesting: BTreeSet<u8>,
    #[serde(with = "crate::charset")]
    pub path: BTreeSet<u8>,
}

impl Default for MetricTileSets {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_SETS).expect("built-in metric sets are valid")
    }
}

impl MetricTileSets {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::in_file(path.display().to_string(), Error::Schema(e.to_string())))
    }

    /// Every set must only name tiles of the catalog.
    pub fn validate(&self, catalog: &TileCatalog) -> Result<()> {
        for set in [&self.density, &self.hazard, &self.interesting, &self.path] {
            if let Some(ch) = set.iter().find(|c| !catalog.contains(**c)) {
                return Err(Error::Schema(format!(
                    "metric set names unknown tile {:?}",
                    *ch as char
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub density: f64,
    pub nonlinearity: f64,
    pub leniency: f64,
    pub interestingness: f64,
    pub path_proportion: f64,
}

impl MetricVector {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.density,
            self.nonlinearity,
            self.leniency,
            self.interestingness,
            self.path_proportion,
        ]
    }
}

fn proportion(segment: &Segment, set: &BTreeSet<u8>) -> f64 {
    segment.cells().filter(|c| set.contains(c)).count() as f64 / SEGMENT_CELLS as f64
}

pub fn density(segment: &Segment, sets: &MetricTileSets) -> f64 {
    proportion(segment, &sets.density)
}

pub fn leniency(segment: &Segment, sets: &MetricTileSets) -> f64 {
    1.0 - proportion(segment, &sets.hazard)
}

pub fn interestingness(segment: &Segment, sets: &MetricTileSets) -> f64 {
    proportion(segment, &sets.interesting)
}

pub fn path_proportion(segment: &Segment, sets: &MetricTileSets) -> f64 {
    proportion(segment, &sets.path)
}

/// Mean squared residual of a least-squares line through the column
/// profile `(column, height of the topmost non-blank tile above the bottom
/// row)`, over columns holding any non-blank tile.
pub fn non_linearity(segment: &Segment) -> f64 {
    let points: Vec<(f64, f64)> = (0..SEGMENT_SIZE)
        .filter_map(|c| {
            (0..SEGMENT_SIZE)
                .find(|&r| segment.get(r, c) != BLANK)
                .map(|r| (c as f64, (SEGMENT_SIZE - 1 - r) as f64))
        })
        .collect();
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    points
        .iter()
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum::<f64>()
        / n
}

pub fn metric_vector(segment: &Segment, sets: &MetricTileSets) -> MetricVector {
    MetricVector {
        density: density(segment, sets),
        nonlinearity: non_linearity(segment),
        leniency: leniency(segment, sets),
        interestingness: interestingness(segment, sets),
        path_proportion: path_proportion(segment, sets),
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn mean_pair_distance(a: &[[f64; 5]], b: &[[f64; 5]]) -> f64 {
    let mut acc = 0.0;
    for x in a {
        for y in b {
            acc += euclid(x, y);
        }
    }
    acc / (a.len() * b.len()) as f64
}

/// Energy distance over all ordered pairs, self-pairs included.
pub fn e_distance(a: &[MetricVector], b: &[MetricVector]) -> Result<f64> {
    let a: Vec<[f64; 5]> = a.iter().map(MetricVector::to_array).collect();
    let b: Vec<[f64; 5]> = b.iter().map(MetricVector::to_array).collect();
    e_distance_arrays(&a, &b)
}

pub fn e_distance_arrays(a: &[[f64; 5]], b: &[[f64; 5]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("e_distance needs two non-empty sets"));
    }
    let e = 2.0 * mean_pair_distance(a, b) - mean_pair_distance(a, a) - mean_pair_distance(b, b);
    // cancellation can leave a tiny negative residue for identical sets
    Ok(e.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Population mean and standard deviation of each metric, keyed by name.
pub fn aggregate(vectors: &[MetricVector]) -> Result<BTreeMap<String, MeanStd>> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput("no metric vectors"));
    }
    let n = vectors.len() as f64;
    let mut out = BTreeMap::new();
    for (i, name) in METRIC_NAMES.iter().enumerate() {
        let vals: Vec<f64> = vectors.iter().map(|v| v.to_array()[i]).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        out.insert(name.to_string(), MeanStd { mean, std: var.sqrt() });
    }
    Ok(out)
}

/// Writes `id,density,...` rows.
pub fn write_metrics_csv<W: Write>(rows: &[(String, MetricVector)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["id"];
    header.extend(METRIC_NAMES);
    out.write_record(&header)?;
    for (id, v) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(v.to_array().iter().map(|x| x.to_string()));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("writing metrics", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;

    fn seg(f: impl Fn(usize, usize) -> u8) -> Segment {
        let mut g = [[b'.'; 16]; 16];
        for (r, row) in g.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = f(r, c);
            }
        }
        Segment::new(g, Provenance::generated())
    }

    #[test]
    fn default_sets() {
        let s = MetricTileSets::default();
        assert_eq!(s.density, b"BbFODWMI".iter().copied().collect());
        assert_eq!(s.hazard, b"EM".iter().copied().collect());
        assert_eq!(s.interesting, b"G#-SDP".iter().copied().collect());
        assert_eq!(s.path, b".-#GSE".iter().copied().collect());
        s.validate(&TileCatalog::default()).unwrap();
    }

    #[test]
    fn alternating_profile_uses_least_squares() {
        // heights 0,1,0,1,...: the fitted slope is 1/34, not zero
        let s = seg(|r, c| if r == 15 - (c % 2) { b'B' } else { b'.' });
        let expected = 0.25 - 1.0 / 340.0;
        assert!((non_linearity(&s) - expected).abs() < 1e-12);
    }

    #[test]
    fn sloped_profile_depends_on_column_order() {
        let s = seg(|r, c| if r >= 15 - c / 2 { b'B' } else { b'.' });
        assert!(non_linearity(&s) < 0.1);
        let shuffled = seg(|r, c| {
            let c = (c * 7) % 16;
            if r >= 15 - c / 2 {
                b'B'
            } else {
                b'.'
            }
        });
        assert!(non_linearity(&shuffled) > non_linearity(&s));
    }

    #[test]
    fn e_distance_examples() {
        let v = |x: f64| MetricVector {
            density: x,
            nonlinearity: 0.0,
            leniency: 0.0,
            interestingness: 0.0,
            path_proportion: 0.0,
        };
        assert_eq!(e_distance(&[v(0.0)], &[v(1.0)]).unwrap(), 2.0);
        assert_eq!(e_distance(&[v(0.0), v(2.0)], &[v(1.0)]).unwrap(), 1.0);
        assert_eq!(e_distance(&[v(0.3), v(0.7)], &[v(0.7), v(0.3)]).unwrap(), 0.0);
        assert!(e_distance(&[], &[v(1.0)]).is_err());
    }
}

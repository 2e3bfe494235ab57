//! Text and flat-color image renders of segments.

use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::corpus::{Segment, SEGMENT_SIZE};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderMode {
    #[default]
    Text,
    Image,
}

/// Sixteen lines of sixteen tile characters, newline terminated.
pub fn render_text(segment: &Segment) -> String {
    segment.to_text()
}

/// One `scale`-pixel square per tile in the tile's display color.
pub fn render_image(segment: &Segment, table: &EmbeddingTable, scale: u32) -> Result<RgbImage> {
    if scale == 0 {
        return Err(Error::InvalidArgument("render scale must be positive".into()));
    }
    let side = SEGMENT_SIZE as u32 * scale;
    let mut img = RgbImage::new(side, side);
    for r in 0..SEGMENT_SIZE {
        for c in 0..SEGMENT_SIZE {
            let ch = segment.get(r, c);
            let color = table.get(ch).ok_or(Error::UnknownTile {
                ch: ch as char,
                line: r + 1,
                col: c + 1,
            })?;
            for y in 0..scale {
                for x in 0..scale {
                    img.put_pixel(c as u32 * scale + x, r as u32 * scale + y, Rgb(color.color));
                }
            }
        }
    }
    Ok(img)
}

pub fn save_png(segment: &Segment, table: &EmbeddingTable, scale: u32, path: impl AsRef<Path>) -> Result<()> {
    render_image(segment, table, scale)?.save(path.as_ref())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_level, Provenance};
    use crate::embedding::one_hot_table;
    use crate::tiles::TileCatalog;

    #[test]
    fn blank_text() {
        let text = render_text(&Segment::filled(b'.'));
        assert_eq!(text.lines().count(), 16);
        assert!(text.lines().all(|l| l == "................"));
    }

    #[test]
    fn text_round_trip() {
        let cat = TileCatalog::default();
        let mut g = [[b'.'; 16]; 16];
        g[15] = [b'B'; 16];
        g[3][4] = b'G';
        let s = Segment::new(g, Provenance::generated());
        let grid = parse_level(&render_text(&s), "LR", &cat).unwrap();
        let back: Vec<Vec<u8>> = grid.rows().to_vec();
        assert_eq!(back, g.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
    }

    #[test]
    fn image_size_and_color() {
        let cat = TileCatalog::default();
        let tiles: Vec<_> = cat.tiles().cloned().collect();
        let table = one_hot_table(&tiles).unwrap();
        let img = render_image(&Segment::filled(b'W'), &table, 3).unwrap();
        assert_eq!(img.dimensions(), (48, 48));
        assert_eq!(img.get_pixel(47, 47).0, cat.color(b'W'));
        assert!(render_image(&Segment::filled(b'Z'), &table, 2).is_err());
    }
}

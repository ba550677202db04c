use std::fs;
use std::io::BufWriter;
use std::path::Path;

use crate::data::{pixel_to_byte, Image};
use crate::error::{Error, Result};

/// Border and gutter width in pixels.
pub const GRID_PADDING: usize = 2;
const PAD_VALUE: u8 = 128;

/// `(height, width)` of a `rows × cols` grid of `h × w` tiles.
pub fn grid_canvas_size(rows: usize, cols: usize, h: usize, w: usize) -> (usize, usize) {
    (
        rows * h + (rows + 1) * GRID_PADDING,
        cols * w + (cols + 1) * GRID_PADDING,
    )
}

/// Writes rows of equally shaped images as one RGB PNG, rows top to bottom
/// in input order, on a grey background. Captions are stored as `tEXt`
/// chunks (`Row 0`, `Row 1`, …). Output bytes depend only on the inputs.
pub fn render_image_grid(rows: &[Vec<Image>], captions: &[String], path: &Path) -> Result<(usize, usize)> {
    let first = rows
        .first()
        .and_then(|r| r.first())
        .ok_or_else(|| Error::Shape("image grid needs at least one image".into()))?;
    let [h, w, c] = first.shape();
    let cols = rows[0].len();
    for row in rows {
        if row.len() != cols {
            return Err(Error::Shape(format!(
                "ragged grid: rows of {cols} and {} images",
                row.len()
            )));
        }
        if let Some(img) = row.iter().find(|i| i.shape() != [h, w, c]) {
            return Err(Error::Shape(format!(
                "grid tile {:?} among {:?} tiles",
                img.shape(),
                [h, w, c]
            )));
        }
    }
    if c != 1 && c != 3 {
        return Err(Error::Shape(format!("grid tiles need 1 or 3 channels, got {c}")));
    }
    let (ch, cw) = grid_canvas_size(rows.len(), cols, h, w);
    let mut canvas = vec![PAD_VALUE; ch * cw * 3];
    for (r, row) in rows.iter().enumerate() {
        for (k, img) in row.iter().enumerate() {
            let top = GRID_PADDING + r * (h + GRID_PADDING);
            let left = GRID_PADDING + k * (w + GRID_PADDING);
            for y in 0..h {
                for x in 0..w {
                    let dst = ((top + y) * cw + left + x) * 3;
                    for ch_i in 0..3 {
                        let src = (y * w + x) * c + if c == 1 { 0 } else { ch_i };
                        canvas[dst + ch_i] = pixel_to_byte(img.data[src]);
                    }
                }
            }
        }
    }
    let file = fs::File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), cw as u32, ch as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let encode = |e: png::EncodingError| Error::ImageDecode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    for (i, caption) in captions.iter().enumerate() {
        enc.add_text_chunk(format!("Row {i}"), caption.clone())
            .map_err(encode)?;
    }
    let mut writer = enc.write_header().map_err(encode)?;
    writer.write_image_data(&canvas).map_err(encode)?;
    writer.finish().map_err(encode)?;
    Ok((ch, cw))
}

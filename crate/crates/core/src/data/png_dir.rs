use std::fs;
use std::path::Path;

use super::resize::{match_channels, resize_bilinear};
use super::{byte_to_pixel, Corpus, DatasetManifest, Image, LabeledImage};
use crate::error::{Error, Result};

fn decode_png(path: &Path) -> Result<Image> {
    let err = |reason: String| Error::ImageDecode {
        path: path.to_path_buf(),
        reason,
    };
    let mut decoder = png::Decoder::new(fs::File::open(path)?);
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(|e| err(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| err(e.to_string()))?;
    let (h, w) = (info.height as usize, info.width as usize);
    let bytes = &buf[..info.buffer_size()];
    let (channels, keep) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        other => return Err(err(format!("unsupported colour type {other:?}"))),
    };
    let data = bytes
        .chunks_exact(channels)
        .flat_map(|px| px[..keep].iter().map(|&b| byte_to_pixel(b)))
        .collect();
    Image::new([h, w, keep], data)
}

/// Loads `<root>/<label>/<name>.png`, labels being decimal directory names.
/// Files are visited in label then file-name order; alpha is dropped.
pub fn ingest_png_directory(root: &Path, manifest: &DatasetManifest) -> Result<Corpus> {
    manifest.validate()?;
    let [th, tw, tc] = manifest.image_shape;
    let mut items = Vec::new();
    for (label, &want) in manifest.item_count_per_class.iter().enumerate() {
        if want == 0 {
            continue;
        }
        let dir = root.join(label.to_string());
        let mut files: Vec<_> = fs::read_dir(&dir)
            .map_err(|e| Error::InvalidManifest(format!("cannot read {}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
            .collect();
        files.sort();
        if files.len() < want {
            return Err(Error::InvalidManifest(format!(
                "item_count_per_class asks for {want} items of class {label}, {} holds {}",
                dir.display(),
                files.len()
            )));
        }
        for path in files.into_iter().take(want) {
            let img = decode_png(&path)?;
            let img = match_channels(img, tc).ok_or_else(|| Error::ImageDecode {
                path: path.clone(),
                reason: format!("cannot map onto {tc} channels"),
            })?;
            items.push(LabeledImage {
                pixels: resize_bilinear(&img, th, tw),
                label,
                domain: manifest.domain,
            });
        }
    }
    Corpus::new(
        manifest.name.clone(),
        manifest.domain,
        manifest.class_count,
        manifest.image_shape,
        items,
    )
}

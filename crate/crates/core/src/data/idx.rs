//! IDX binary arrays: a big-endian magic `0x0000_08_NN` (unsigned bytes,
//! `NN` dimensions), `NN` big-endian `u32` sizes, then the raw bytes.

use std::path::Path;

use super::resize::{match_channels, resize_bilinear};
use super::{byte_to_pixel, Corpus, DatasetManifest, Image, LabeledImage};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IMAGES_RGB_MAGIC: u32 = 0x0000_0804;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxArray {
    pub fn magic(&self) -> u32 {
        0x0800 | self.dims.len() as u32
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.dims.len() + self.data.len());
        out.extend_from_slice(&self.magic().to_be_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_be_bytes());
        }
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let err = |reason: String| Error::Idx {
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < 4 {
            return Err(err("truncated before the magic number".into()));
        }
        let magic = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes"));
        if magic & 0xFFFF_FF00 != 0x0800 {
            return Err(err(format!(
                "magic number {magic:#010x} is not an unsigned-byte IDX array"
            )));
        }
        let ndim = (magic & 0xFF) as usize;
        let header = 4 + 4 * ndim;
        if bytes.len() < header {
            return Err(err("truncated dimension header".into()));
        }
        let dims: Vec<usize> = bytes[4..header]
            .chunks_exact(4)
            .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")) as usize)
            .collect();
        let count: usize = dims.iter().product();
        if bytes.len() < header + count {
            return Err(err(format!(
                "truncated: {} data bytes, dimensions {dims:?} need {count}",
                bytes.len() - header
            )));
        }
        Ok(Self {
            dims,
            data: bytes[header..header + count].to_vec(),
        })
    }
}

pub fn read_idx(path: &Path) -> Result<IdxArray> {
    IdxArray::from_bytes(&std::fs::read(path)?, path)
}

pub fn write_idx(path: &Path, array: &IdxArray) -> Result<()> {
    std::fs::write(path, array.to_bytes())?;
    Ok(())
}

/// Loads an IDX image/label pair into the manifest's canonical shape.
///
/// Bytes map affinely onto `[-1, 1]`; single-channel images are replicated
/// and every image is bilinearly resized. `item_count_per_class` selects the
/// first that many items of each class in file order.
pub fn ingest_idx(images_path: &Path, labels_path: &Path, manifest: &DatasetManifest) -> Result<Corpus> {
    manifest.validate()?;
    let images = read_idx(images_path)?;
    let labels = read_idx(labels_path)?;
    let idx_err = |path: &Path, reason: String| Error::Idx {
        path: path.to_path_buf(),
        reason,
    };
    if labels.magic() != LABELS_MAGIC {
        return Err(idx_err(
            labels_path,
            format!(
                "expected label magic {LABELS_MAGIC:#010x}, found {:#010x}",
                labels.magic()
            ),
        ));
    }
    let (n, h, w, c) = match (images.magic(), images.dims.as_slice()) {
        (IMAGES_MAGIC, [n, h, w]) => (*n, *h, *w, 1),
        (IMAGES_RGB_MAGIC, [n, h, w, c]) => (*n, *h, *w, *c),
        (m, _) => {
            return Err(idx_err(
                images_path,
                format!("expected image magic {IMAGES_MAGIC:#010x} or {IMAGES_RGB_MAGIC:#010x}, found {m:#010x}"),
            ))
        }
    };
    if labels.dims[0] != n {
        return Err(idx_err(
            labels_path,
            format!("{} labels for {n} images", labels.dims[0]),
        ));
    }
    let [th, tw, tc] = manifest.image_shape;
    let mut remaining = manifest.item_count_per_class.clone();
    let mut items = Vec::new();
    let per = h * w * c;
    for (i, &label) in labels.data.iter().enumerate() {
        let label = label as usize;
        if label >= manifest.class_count {
            return Err(Error::LabelOutOfRange {
                label,
                classes: manifest.class_count,
            });
        }
        if remaining[label] == 0 {
            continue;
        }
        remaining[label] -= 1;
        let pixels: Vec<f32> = images.data[i * per..(i + 1) * per]
            .iter()
            .map(|&b| byte_to_pixel(b))
            .collect();
        let img = Image::new([h, w, c], pixels)?;
        let img = match_channels(img, tc)
            .ok_or_else(|| idx_err(images_path, format!("cannot map {c} channels onto {tc}")))?;
        items.push(LabeledImage {
            pixels: resize_bilinear(&img, th, tw),
            label,
            domain: manifest.domain,
        });
    }
    if let Some((class, &short)) = remaining.iter().enumerate().find(|(_, &r)| r > 0) {
        return Err(Error::InvalidManifest(format!(
            "item_count_per_class asks for {} items of class {class}, file has {}",
            manifest.item_count_per_class[class],
            manifest.item_count_per_class[class] - short
        )));
    }
    Corpus::new(
        manifest.name.clone(),
        manifest.domain,
        manifest.class_count,
        manifest.image_shape,
        items,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Domain, Source, Split};

    fn manifest(per_class: usize) -> DatasetManifest {
        let mut m = DatasetManifest::synthetic("mnist", Domain::Real, Split::Train, 2, per_class, [32, 32, 3], 0);
        m.source = Source::IdxFiles;
        m.images_path = Some("images".into());
        m.labels_path = Some("labels".into());
        m
    }

    fn write_pair(dir: &Path, values: &[u8], labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let n = labels.len();
        let mut data = Vec::new();
        for &v in values {
            data.extend(std::iter::repeat(v).take(28 * 28));
        }
        let ip = dir.join("images.idx");
        let lp = dir.join("labels.idx");
        write_idx(
            &ip,
            &IdxArray {
                dims: vec![n, 28, 28],
                data,
            },
        )
        .unwrap();
        write_idx(
            &lp,
            &IdxArray {
                dims: vec![n],
                data: labels.to_vec(),
            },
        )
        .unwrap();
        (ip, lp)
    }

    #[test]
    fn affine_map_replication_and_resize() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_pair(dir.path(), &[0, 255, 128, 7], &[0, 1, 1, 0]);
        let c = ingest_idx(&ip, &lp, &manifest(2)).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.labels(), vec![0, 1, 1, 0]);
        let first = &c.items[0].pixels;
        assert_eq!(first.shape(), [32, 32, 3]);
        assert!(first.data.iter().all(|&v| v == -1.0));
        assert!(c.items[1].pixels.data.iter().all(|&v| v == 1.0));
        assert!(c.items[2].pixels.data.iter().all(|&v| (v - 0.003_921_569).abs() < 1e-6));
        for px in c.items[3].pixels.data.chunks_exact(3) {
            assert!(px[0] == px[1] && px[1] == px[2]);
        }
    }

    #[test]
    fn magic_count_and_truncation_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = write_pair(dir.path(), &[0, 1], &[0, 1]);
        // swapped files: magic mismatch
        assert!(matches!(ingest_idx(&lp, &ip, &manifest(1)), Err(Error::Idx { .. })));
        // count mismatch
        let lp3 = dir.path().join("l3.idx");
        write_idx(
            &lp3,
            &IdxArray {
                dims: vec![3],
                data: vec![0, 1, 0],
            },
        )
        .unwrap();
        assert!(matches!(ingest_idx(&ip, &lp3, &manifest(1)), Err(Error::Idx { .. })));
        // truncated payload
        let bytes = std::fs::read(&ip).unwrap();
        let tp = dir.path().join("t.idx");
        std::fs::write(&tp, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(read_idx(&tp), Err(Error::Idx { .. })));
    }

    #[test]
    fn writer_emits_standard_header() {
        let a = IdxArray {
            dims: vec![2],
            data: vec![3, 4],
        };
        assert_eq!(a.to_bytes(), vec![0, 0, 8, 1, 0, 0, 0, 2, 3, 4]);
    }
}

//! Labeled corpora: synthetic digit pairs, IDX and PNG-directory ingestion,
//! imbalance induction and minibatch sampling.

mod glyphs;
mod idx;
mod imbalance;
mod manifest;
mod png_dir;
mod resize;
mod stream;
mod synthetic;

pub use idx::{ingest_idx, read_idx, write_idx, IdxArray};
pub use imbalance::{induce_imbalance, retained_count, ImbalanceSpec};
pub use manifest::{DatasetManifest, Source, Split};
pub use png_dir::ingest_png_directory;
pub use resize::resize_bilinear;
pub use stream::{Batch, BatchPart, BatchStream, Composition, Sampler};
pub use synthetic::build_synthetic_corpus;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::archive::{Archive, NamedTensor};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Builds the corpus a manifest declares, whatever its source.
pub fn build_corpus(manifest: &DatasetManifest) -> Result<Corpus> {
    manifest.validate()?;
    let mut corpus = match (
        manifest.source,
        &manifest.images_path,
        &manifest.labels_path,
        &manifest.root,
    ) {
        (Source::Synthetic, ..) => return build_synthetic_corpus(manifest),
        (Source::IdxFiles, Some(images), Some(labels), _) => ingest_idx(images, labels, manifest)?,
        (Source::PngDirectory, _, _, Some(root)) => ingest_png_directory(root, manifest)?,
        _ => unreachable!("validated manifest names its files"),
    };
    if manifest.horizontal_flip {
        let mirrored: Vec<_> = corpus
            .items
            .iter()
            .map(|i| LabeledImage {
                pixels: i.pixels.mirrored(),
                ..i.clone()
            })
            .collect();
        corpus.items.extend(mirrored);
    }
    Ok(corpus)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Real,
    Simulated,
}

impl Domain {
    pub fn flipped(self) -> Self {
        match self {
            Domain::Real => Domain::Simulated,
            Domain::Simulated => Domain::Real,
        }
    }
}

/// `height × width × channels` pixels in `[-1, 1]`, row-major HWC.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(shape: [usize; 3], data: Vec<f32>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!(
                "{shape:?} image needs {} values, got {}",
                shape.iter().product::<usize>(),
                data.len()
            )));
        }
        Ok(Self {
            height: shape[0],
            width: shape[1],
            channels: shape[2],
            data,
        })
    }

    pub fn filled(shape: [usize; 3], value: f32) -> Self {
        Self {
            height: shape[0],
            width: shape[1],
            channels: shape[2],
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }

    pub fn mirrored(&self) -> Self {
        let (h, w, c) = (self.height, self.width, self.channels);
        let mut data = vec![0.0; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let s = (y * w + x) * c;
                let d = (y * w + (w - 1 - x)) * c;
                data[d..d + c].copy_from_slice(&self.data[s..s + c]);
            }
        }
        Self { data, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImage {
    pub pixels: Image,
    pub label: usize,
    pub domain: Domain,
}

/// An immutable labeled collection sharing one image shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub domain: Domain,
    pub class_count: usize,
    pub image_shape: [usize; 3],
    pub items: Vec<LabeledImage>,
}

impl Corpus {
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        class_count: usize,
        image_shape: [usize; 3],
        items: Vec<LabeledImage>,
    ) -> Result<Self> {
        for item in &items {
            if item.pixels.shape() != image_shape {
                return Err(Error::Shape(format!(
                    "corpus item of shape {:?} in a {image_shape:?} corpus",
                    item.pixels.shape()
                )));
            }
            if item.label >= class_count {
                return Err(Error::LabelOutOfRange {
                    label: item.label,
                    classes: class_count,
                });
            }
        }
        Ok(Self {
            name: name.into(),
            domain,
            class_count,
            image_shape,
            items,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for item in &self.items {
            counts[item.label] += 1;
        }
        counts
    }

    /// Items of one class, in corpus order.
    pub fn filter_class(&self, class: usize) -> Corpus {
        Corpus {
            items: self.items.iter().filter(|i| i.label == class).cloned().collect(),
            ..self.empty_like()
        }
    }

    pub fn empty_like(&self) -> Corpus {
        Corpus {
            name: self.name.clone(),
            domain: self.domain,
            class_count: self.class_count,
            image_shape: self.image_shape,
            items: Vec::new(),
        }
    }

    /// Stacks the selected items into an NHWC batch with their labels.
    pub fn gather(&self, indices: &[usize]) -> (Tensor<f32>, Vec<usize>) {
        let per: usize = self.image_shape.iter().product();
        let mut data = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&self.items[i].pixels.data);
            labels.push(self.items[i].label);
        }
        let [h, w, c] = self.image_shape;
        let t = Tensor::from_vec(&[indices.len(), h, w, c], data).expect("consistent corpus");
        (t, labels)
    }

    pub fn mean_pixel(&self) -> f64 {
        let (sum, n) = self.items.iter().fold((0.0f64, 0usize), |(s, n), i| {
            (
                s + i.pixels.data.iter().map(|&v| v as f64).sum::<f64>(),
                n + i.pixels.data.len(),
            )
        });
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    pub fn to_archive(&self) -> Archive {
        let [h, w, c] = self.image_shape;
        let mut pixels = Vec::with_capacity(self.items.len() * h * w * c);
        for item in &self.items {
            pixels.extend_from_slice(&item.pixels.data);
        }
        let labels = self.items.iter().map(|i| i.label as f32).collect();
        Archive {
            metadata: serde_json::json!({
                "kind": "corpus",
                "name": self.name,
                "domain": self.domain,
                "class_count": self.class_count,
                "image_shape": self.image_shape,
            }),
            tensors: vec![
                NamedTensor::new("pixels", vec![self.items.len(), h, w, c], pixels),
                NamedTensor::new("labels", vec![self.items.len()], labels),
            ],
        }
    }

    pub fn from_archive(archive: &Archive) -> Result<Self> {
        #[derive(Deserialize)]
        struct Meta {
            name: String,
            domain: Domain,
            class_count: usize,
            image_shape: [usize; 3],
        }
        let meta: Meta = serde_json::from_value(archive.metadata.clone())?;
        let pixels = archive.tensor("pixels")?;
        let labels = archive.tensor("labels")?;
        let per: usize = meta.image_shape.iter().product();
        let n = labels.data.len();
        if pixels.data.len() != n * per {
            return Err(Error::Archive("pixel and label counts disagree".into()));
        }
        let items = labels
            .data
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                Ok(LabeledImage {
                    pixels: Image::new(meta.image_shape, pixels.data[i * per..(i + 1) * per].to_vec())?,
                    label: l as usize,
                    domain: meta.domain,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(meta.name, meta.domain, meta.class_count, meta.image_shape, items)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_archive().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_archive(&Archive::load(path)?)
    }
}

/// Pixel byte `[0, 255]` to `[-1, 1]`.
pub fn byte_to_pixel(b: u8) -> f32 {
    (2.0 * b as f32 / 255.0) - 1.0
}

/// Pixel `[-1, 1]` to the nearest byte.
pub fn pixel_to_byte(v: f32) -> u8 {
    (((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round()) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_pixel_endpoints() {
        assert_eq!(byte_to_pixel(0), -1.0);
        assert_eq!(byte_to_pixel(255), 1.0);
        assert!((byte_to_pixel(128) - 0.003_921_569).abs() < 1e-6);
        for b in 0..=255u8 {
            assert_eq!(pixel_to_byte(byte_to_pixel(b)), b);
        }
    }

    #[test]
    fn corpus_archive_round_trip() {
        let items = (0..4)
            .map(|i| LabeledImage {
                pixels: Image::filled([2, 2, 3], i as f32 * 0.25 - 0.5),
                label: i % 2,
                domain: Domain::Real,
            })
            .collect();
        let c = Corpus::new("x", Domain::Real, 2, [2, 2, 3], items).unwrap();
        let back = Corpus::from_archive(&c.to_archive()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.class_counts(), vec![2, 2]);
    }

    #[test]
    fn mirror_flips_columns() {
        let img = Image::new([1, 3, 1], vec![1.0, 0.0, -1.0]).unwrap();
        assert_eq!(img.mirrored().data, vec![-1.0, 0.0, 1.0]);
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Domain;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Synthetic,
    IdxFiles,
    PngDirectory,
}

/// Declarative description of one corpus split.
///
/// For `idx_files` sources `images_path`/`labels_path` locate the files and
/// `item_count_per_class` caps how many items of each class are taken (in
/// file order); for `png_directory`, `root` holds `<label>/<name>.png`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub domain: Domain,
    pub class_count: usize,
    pub image_shape: [usize; 3],
    pub split: Split,
    pub item_count_per_class: Vec<usize>,
    pub source: Source,
    pub seed: u64,
    /// Appends a horizontally mirrored copy of every item at build time.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub horizontal_flip: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn synthetic(
        name: impl Into<String>,
        domain: Domain,
        split: Split,
        class_count: usize,
        per_class: usize,
        image_shape: [usize; 3],
        seed: u64,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            class_count,
            image_shape,
            split,
            item_count_per_class: vec![per_class; class_count],
            source: Source::Synthetic,
            seed,
            horizontal_flip: false,
            images_path: None,
            labels_path: None,
            root: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::InvalidManifest(format!(
                "class_count must be at least 2, got {}",
                self.class_count
            )));
        }
        let [h, w, c] = self.image_shape;
        if h < 16 || w < 16 {
            return Err(Error::UnsupportedShape(self.image_shape));
        }
        if c != 1 && c != 3 {
            return Err(Error::InvalidManifest(format!(
                "image_shape channels must be 1 or 3, got {c}"
            )));
        }
        if self.item_count_per_class.len() != self.class_count {
            return Err(Error::InvalidManifest(format!(
                "item_count_per_class has {} entries for class_count {}",
                self.item_count_per_class.len(),
                self.class_count
            )));
        }
        if self.split == Split::Train && self.item_count_per_class.iter().sum::<usize>() == 0 {
            return Err(Error::InvalidManifest(
                "item_count_per_class sums to 0 for a train split".into(),
            ));
        }
        match self.source {
            Source::Synthetic => {}
            Source::IdxFiles => {
                if self.images_path.is_none() || self.labels_path.is_none() {
                    return Err(Error::InvalidManifest(
                        "idx_files source needs images_path and labels_path".into(),
                    ));
                }
            }
            Source::PngDirectory => {
                if self.root.is_none() {
                    return Err(Error::InvalidManifest("png_directory source needs root".into()));
                }
            }
        }
        Ok(())
    }

    /// Parses and validates a JSON manifest; parse errors carry the path of
    /// the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let manifest: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::InvalidManifest(format!("field `{}`: {}", e.path(), e.inner())))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// Same corpus description for another split.
    pub fn for_split(&self, split: Split, per_class: usize) -> Self {
        Self {
            name: format!("{}-{}", self.name.trim_end_matches("-train"), split.tag()),
            split,
            item_count_per_class: vec![per_class; self.class_count],
            ..self.clone()
        }
    }

    /// Fails unless `other` describes images of the same shape and class
    /// count, as required of the two domains of an experiment.
    pub fn check_pair(&self, other: &Self) -> Result<()> {
        if self.image_shape != other.image_shape {
            return Err(Error::InvalidManifest(format!(
                "image_shape {:?} of `{}` differs from {:?} of `{}`",
                self.image_shape, self.name, other.image_shape, other.name
            )));
        }
        if self.class_count != other.class_count {
            return Err(Error::InvalidManifest(format!(
                "class_count {} of `{}` differs from {} of `{}`",
                self.class_count, self.name, other.class_count, other.name
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DatasetManifest {
        DatasetManifest::synthetic("digits", Domain::Real, Split::Train, 3, 10, [16, 16, 3], 4)
    }

    #[test]
    fn json_round_trip_uses_field_names() {
        let m = sample();
        let json = m.to_json();
        for key in [
            "name",
            "domain",
            "class_count",
            "image_shape",
            "split",
            "item_count_per_class",
            "source",
            "seed",
        ] {
            assert!(json.contains(&format!("\"{key}\"")), "{key} missing from {json}");
        }
        assert_eq!(DatasetManifest::from_json(&json).unwrap(), m);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = sample()
            .to_json()
            .replace("\"class_count\": 3", "\"class_count\": \"three\"");
        let err = DatasetManifest::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("class_count"), "{err}");
    }

    #[test]
    fn validation_rules() {
        let mut m = sample();
        m.class_count = 1;
        m.item_count_per_class = vec![5];
        assert!(matches!(m.validate(), Err(Error::InvalidManifest(_))));
        let mut m = sample();
        m.image_shape = [8, 8, 3];
        assert!(matches!(m.validate(), Err(Error::UnsupportedShape(_))));
        let mut m = sample();
        m.item_count_per_class = vec![0, 0, 0];
        assert!(m.validate().is_err());
        m.split = Split::Test;
        assert!(m.validate().is_ok());
    }
}

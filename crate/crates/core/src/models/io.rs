//! Model files: one archive per network holding its named parameter tensors
//! and a metadata block `{kind, config, seed, step}`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifierConfig, Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use crate::archive::Archive;
use crate::error::{Error, Result};
use crate::nn::ParamSet;

/// Appends every parameter as `{prefix}{name}`.
pub fn push_params(archive: &mut Archive, prefix: &str, params: &ParamSet<f32>) {
    for p in params.entries() {
        archive.push(format!("{prefix}{}", p.name), p.shape.clone(), p.value.clone());
    }
}

/// Loads every parameter from `{prefix}{name}`, checking shapes.
pub fn load_params(archive: &Archive, prefix: &str, params: &mut ParamSet<f32>) -> Result<()> {
    params.load_named(|name| {
        archive
            .tensor(&format!("{prefix}{name}"))
            .ok()
            .map(|t| (t.shape.as_slice(), t.data.clone()))
    })
}

#[derive(Serialize, Deserialize)]
struct Meta<C> {
    kind: String,
    config: C,
    seed: u64,
    step: u64,
}

fn to_archive<C: Serialize>(kind: &str, config: &C, seed: u64, step: u64, params: &ParamSet<f32>) -> Archive {
    let meta = Meta {
        kind: kind.to_string(),
        config,
        seed,
        step,
    };
    let mut a = Archive::new(serde_json::to_value(meta).expect("config serializes"));
    push_params(&mut a, "", params);
    a
}

fn read_meta<C: DeserializeOwned>(archive: &Archive, kind: &str) -> Result<Meta<C>> {
    let meta: Meta<C> = serde_json::from_value(archive.metadata.clone())?;
    if meta.kind != kind {
        return Err(Error::Archive(format!(
            "expected a {kind} archive, found `{}`",
            meta.kind
        )));
    }
    Ok(meta)
}

/// Provenance stored beside a model's parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelStamp {
    pub seed: u64,
    pub step: u64,
}

macro_rules! model_io {
    ($ty:ident, $cfg:ident, $kind:literal) => {
        impl $ty<f32> {
            pub fn to_archive(&self, stamp: ModelStamp) -> Archive {
                to_archive($kind, self.config(), stamp.seed, stamp.step, self.params())
            }

            pub fn from_archive(archive: &Archive) -> Result<(Self, ModelStamp)> {
                let meta: Meta<$cfg> = read_meta(archive, $kind)?;
                let mut model = Self::new(meta.config, meta.seed)?;
                load_params(archive, "", model.params_mut())?;
                Ok((
                    model,
                    ModelStamp {
                        seed: meta.seed,
                        step: meta.step,
                    },
                ))
            }

            pub fn save(&self, path: &Path, stamp: ModelStamp) -> Result<()> {
                self.to_archive(stamp).save(path)
            }

            pub fn load(path: &Path) -> Result<(Self, ModelStamp)> {
                Self::from_archive(&Archive::load(path)?)
            }
        }
    };
}

model_io!(Generator, GeneratorConfig, "generator");
model_io!(Discriminator, DiscriminatorConfig, "discriminator");
model_io!(Classifier, ClassifierConfig, "classifier");

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Direction, Side};

    #[test]
    fn round_trips() {
        let stamp = ModelStamp { seed: 4, step: 17 };
        let mut g = Generator::<f32>::new(GeneratorConfig::new([16, 16, 3], Direction::S2r).with_labels(3), 4).unwrap();
        g.params_mut().entries_mut()[0].value[0] = 0.123;
        let (back, s) = Generator::from_archive(&g.to_archive(stamp)).unwrap();
        assert_eq!(back, g);
        assert_eq!(s, stamp);

        let c = Classifier::<f32>::new(ClassifierConfig::new([16, 16, 3], 3, Side::RealSide), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.lcgan");
        c.save(&path, stamp).unwrap();
        assert_eq!(Classifier::load(&path).unwrap().0, c);
        assert!(Discriminator::load(&path).is_err());
    }
}

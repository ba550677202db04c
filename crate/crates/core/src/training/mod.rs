//! Optimization loops: classifier pretraining and retraining, the three-mode
//! GAN trainer with checkpoint/resume, and corpus translation.

mod classifier;
mod gan;
mod objective;
mod pool;
mod transform;

pub use classifier::{
    baseline_classifier, fit_classifier, pretrain_classifier, retrain_classifier, ClassifierEpoch, ClassifierRun,
    RetrainOutcome,
};
pub use gan::{
    train_gan, EpochRecord, GanOutcome, GanRunOptions, GanTrainer, StepOutcome, DIAGNOSTIC_CHECKPOINT,
    LATEST_CHECKPOINT,
};
pub use objective::{
    discriminator_loss, generator_forward_pass, generator_objective, Frozen, GanBatch, GanNets, GeneratorPass,
    ObjectiveSettings,
};
pub use pool::ImagePool;
pub use transform::transform_corpus;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Domain;
use crate::error::{Error, Result};
use crate::losses::{AdversarialForm, LossWeights, Mode};
use crate::models::{ClassifierConfig, Direction, DiscriminatorConfig, GeneratorConfig, Side};
use crate::optim::{AdamConfig, LrDecay};

/// Network widths and depths. Generator conditioning is independent of the
/// training mode; `None` means "conditional iff the mode is label_cyclegan".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub generator_channels: usize,
    pub down_stages: usize,
    pub res_blocks: usize,
    pub condition_s2r: Option<bool>,
    pub condition_r2s: Option<bool>,
    pub discriminator_channels: usize,
    pub discriminator_stages: usize,
    pub classifier_channels: [usize; 2],
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            generator_channels: 32,
            down_stages: 2,
            res_blocks: 3,
            condition_s2r: None,
            condition_r2s: None,
            discriminator_channels: 32,
            discriminator_stages: 3,
            classifier_channels: [16, 32],
        }
    }
}

impl Architecture {
    pub fn generator(
        &self,
        image_shape: [usize; 3],
        classes: usize,
        direction: Direction,
        mode: Mode,
    ) -> GeneratorConfig {
        let flag = match direction {
            Direction::S2r => self.condition_s2r,
            Direction::R2s => self.condition_r2s,
        };
        let conditional = flag.unwrap_or(mode == Mode::LabelCyclegan);
        GeneratorConfig {
            image_shape,
            base_channels: self.generator_channels,
            down_stages: self.down_stages,
            res_blocks: self.res_blocks,
            label_channels: if conditional { classes } else { 0 },
            direction,
        }
    }

    pub fn discriminator(&self, image_shape: [usize; 3], side: Side) -> DiscriminatorConfig {
        DiscriminatorConfig {
            image_shape,
            base_channels: self.discriminator_channels,
            stages: self.discriminator_stages,
            side,
        }
    }

    pub fn classifier(&self, image_shape: [usize; 3], classes: usize, side: Side) -> ClassifierConfig {
        ClassifierConfig {
            image_shape,
            classes,
            channels: self.classifier_channels,
            side,
        }
    }
}

/// Knobs of one training phase. Field names are the TOML keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub mode: Mode,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: LrDecay,
    pub weights: LossWeights,
    pub exclude_minor_from_label_loss: bool,
    /// Drop minor-class items from the GAN's training corpora altogether
    /// instead of only masking them in the label losses.
    pub drop_minor_from_gan_batches: bool,
    pub minor_classes: BTreeSet<usize>,
    pub seed: u64,
    pub pool_size: usize,
    pub adversarial: AdversarialForm,
    /// Adam β1; `None` picks 0.5 for GAN phases and 0.9 for classifiers.
    pub beta1: Option<f64>,
    /// Mixed retraining batches must be exactly b/2 + b/2; when false an
    /// unusable transformed corpus falls back to real-only batches.
    pub strict_batches: bool,
    /// Retrain from the pretrained real-side classifier instead of fresh weights.
    pub retrain_from_pretrained: bool,
    pub arch: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: Mode::LabelCyclegan,
            epochs: 20,
            batch_size: 16,
            learning_rate: 0.001,
            lr_decay: LrDecay::LinearAfterHalf,
            weights: LossWeights::default(),
            exclude_minor_from_label_loss: true,
            drop_minor_from_gan_batches: false,
            minor_classes: BTreeSet::new(),
            seed: 1,
            pool_size: 50,
            adversarial: AdversarialForm::LeastSquares,
            beta1: None,
            strict_batches: true,
            retrain_from_pretrained: false,
            arch: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        self.validate_allowing_zero_epochs()
    }

    pub(crate) fn validate_allowing_zero_epochs(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Some(b) = self.beta1 {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("beta1 must lie in [0, 1), got {b}")));
            }
        }
        self.weights.validate()
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub(crate) fn adam(&self, gan: bool) -> AdamConfig {
        let base = if gan {
            AdamConfig::gan()
        } else {
            AdamConfig::classifier()
        };
        AdamConfig {
            beta1: self.beta1.unwrap_or(base.beta1),
            ..base
        }
    }

    /// Classes masked out of the label losses.
    pub fn label_loss_exclusions(&self) -> BTreeSet<usize> {
        if self.exclude_minor_from_label_loss {
            self.minor_classes.clone()
        } else {
            BTreeSet::new()
        }
    }
}

/// Hex SHA-256 of a value's JSON encoding.
pub fn config_hash<S: Serialize>(value: &S) -> String {
    let json = serde_json::to_vec(value).expect("config serializes");
    Sha256::digest(json).iter().map(|b| format!("{b:02x}")).collect()
}

/// Independent stream seed for a named component of a run.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

pub(crate) fn side_of(domain: Domain) -> Side {
    match domain {
        Domain::Real => Side::RealSide,
        Domain::Simulated => Side::SimSide,
    }
}

//! Label-conditioned unpaired image translation.
//!
//! A CycleGAN whose generators receive a tiled one-hot label map at the
//! encoder/decoder boundary and whose objective adds the cross-entropy of
//! frozen, pretrained domain classifiers on translated and cycle-translated
//! images. SimGAN and plain CycleGAN are provided as baselines, together
//! with the imbalanced-class augmentation protocol used to compare them.

pub mod archive;
pub mod data;
pub mod error;
pub mod eval;
pub mod losses;
pub mod models;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};

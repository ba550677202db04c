//! Metrics and reporting: per-class accuracy, confusion matrices, label
//! preservation, finite-difference gradient checks, image grids and the
//! cross-run summary table.

mod gradcheck;
mod grid;
mod summary;

pub use gradcheck::{gradcheck, relative_error, GradcheckReport, REL_ERR_FLOOR};
pub use grid::{grid_canvas_size, render_image_grid, GRID_PADDING};
pub use summary::{read_summary_csv, write_summary_csv, SummaryRow};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Corpus;
use crate::error::{Error, Result};
use crate::models::{Classifier, Direction, Generator, Side};

/// Items per forward pass during evaluation.
pub const EVAL_CHUNK: usize = 128;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub config_hash: String,
    pub checkpoint_step: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class_accuracy: Vec<f64>,
    pub overall_accuracy: f64,
    pub macro_accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<u64>>,
    /// Absent when the evaluation involved no generator.
    pub label_preservation_rate: Option<f64>,
    pub metadata: RunMetadata,
}

impl EvalReport {
    /// Tallies argmax decisions against true labels. A class with no test
    /// items scores 0; the macro mean runs over all `classes`.
    pub fn from_predictions(predictions: &[usize], labels: &[usize], classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Loss("evaluation over an empty corpus".into()));
        }
        if predictions.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} predictions for {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        let mut confusion = vec![vec![0u64; classes]; classes];
        for (&p, &y) in predictions.iter().zip(labels) {
            if y >= classes || p >= classes {
                return Err(Error::LabelOutOfRange {
                    label: y.max(p),
                    classes,
                });
            }
            confusion[y][p] += 1;
        }
        let per_class_accuracy: Vec<f64> = confusion
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let n: u64 = row.iter().sum();
                if n == 0 {
                    0.0
                } else {
                    row[k] as f64 / n as f64
                }
            })
            .collect();
        let correct: u64 = (0..classes).map(|k| confusion[k][k]).sum();
        Ok(Self {
            macro_accuracy: per_class_accuracy.iter().sum::<f64>() / classes as f64,
            per_class_accuracy,
            overall_accuracy: correct as f64 / labels.len() as f64,
            confusion,
            label_preservation_rate: None,
            metadata: RunMetadata::default(),
        })
    }

    pub fn with_metadata(mut self, metadata: RunMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Predictions of `classifier` over the whole corpus, in corpus order.
pub fn predict_corpus(classifier: &Classifier<f32>, corpus: &Corpus) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(corpus.len());
    let indices: Vec<usize> = (0..corpus.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let (images, _) = corpus.gather(chunk);
        out.extend(classifier.predict(&images)?);
    }
    Ok(out)
}

/// Argmax metrics of `classifier` on a labelled test corpus. Ties in the
/// logits go to the lower class index.
pub fn evaluate_classifier(classifier: &Classifier<f32>, test: &Corpus) -> Result<EvalReport> {
    if classifier.config().image_shape != test.image_shape {
        return Err(Error::Shape(format!(
            "classifier expects {:?} images, corpus holds {:?}",
            classifier.config().image_shape,
            test.image_shape
        )));
    }
    if classifier.classes() != test.class_count {
        return Err(Error::Config(format!(
            "classifier has {} classes, corpus {}",
            classifier.classes(),
            test.class_count
        )));
    }
    EvalReport::from_predictions(&predict_corpus(classifier, test)?, &test.labels(), test.class_count)
}

/// Translates every item (conditioned on its own label when the generator is
/// conditional), in corpus order.
pub fn translate_corpus(generator: &Generator<f32>, corpus: &Corpus) -> Result<Vec<Vec<f32>>> {
    let mut out = Vec::with_capacity(corpus.len());
    let indices: Vec<usize> = (0..corpus.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let (images, labels) = corpus.gather(chunk);
        let fake = generator.forward(&images, Some(&labels))?;
        let per = fake.len() / chunk.len();
        out.extend(fake.data().chunks_exact(per).map(<[f32]>::to_vec));
    }
    Ok(out)
}

/// Fraction of items whose translation the classifier assigns to the item's
/// own label.
pub fn label_preservation_rate(
    classifier: &Classifier<f32>,
    generator: &Generator<f32>,
    corpus: &Corpus,
) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::Loss("label preservation over an empty corpus".into()));
    }
    let output_side = match generator.config().direction {
        Direction::S2r => Side::RealSide,
        Direction::R2s => Side::SimSide,
    };
    if classifier.config().side != output_side {
        return Err(Error::Config(format!(
            "{} output is judged by a {:?} classifier, got {:?}",
            generator.config().direction.tag(),
            output_side,
            classifier.config().side
        )));
    }
    let mut agree = 0usize;
    let indices: Vec<usize> = (0..corpus.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let (images, labels) = corpus.gather(chunk);
        let fake = generator.forward(&images, Some(&labels))?;
        let pred = classifier.predict(&fake)?;
        agree += pred.iter().zip(&labels).filter(|(p, y)| p == y).count();
    }
    Ok(agree as f64 / corpus.len() as f64)
}

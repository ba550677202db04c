use serde::{Deserialize, Serialize};

use super::{derive_seed, side_of, TrainConfig};
use crate::data::{BatchStream, Corpus};
use crate::error::{Error, Result};
use crate::eval::{evaluate_classifier, EvalReport};
use crate::losses::cross_entropy_grad;
use crate::models::Classifier;
use crate::nn::Grads;
use crate::optim::Adam;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierEpoch {
    pub epoch: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub mean_loss: f64,
}

/// Mean cross-entropy minimization over `epochs × batches_per_epoch` steps
/// drawn from `stream`. `on_batch` sees each batch's composition.
pub fn fit_classifier(
    classifier: &mut Classifier<f32>,
    stream: &mut BatchStream,
    first: &Corpus,
    second: Option<&Corpus>,
    config: &TrainConfig,
    mut on_batch: impl FnMut([usize; 2]),
) -> Result<Vec<ClassifierEpoch>> {
    let mut opt = Adam::new(classifier.params(), config.adam(false));
    let classes = classifier.classes();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let lr = config.lr_decay.rate(config.learning_rate, epoch, config.epochs);
        let steps = stream.batches_per_epoch();
        let mut total = 0.0;
        for _ in 0..steps {
            let batch = stream.next_batch(first, second)?;
            on_batch(batch.composition);
            let labels = &batch.first.labels;
            let (logits, trace) = classifier.forward_traced(&batch.first.images)?;
            let n = labels.len() as f32;
            let mut grad = Vec::with_capacity(logits.len());
            let mut loss = 0.0;
            for (row, &y) in logits.data().chunks_exact(classes).zip(labels) {
                let (l, g) = cross_entropy_grad(row, y)?;
                loss += l as f64;
                grad.extend(g.into_iter().map(|v| v / n));
            }
            total += loss / labels.len() as f64;
            let mut grads = Grads::zeros_like(classifier.params());
            classifier.backward(&trace, Tensor::from_vec(logits.shape(), grad)?, Some(&mut grads), false)?;
            opt.step(classifier.params_mut(), &grads, lr)?;
        }
        history.push(ClassifierEpoch {
            epoch,
            learning_rate: lr,
            steps,
            mean_loss: total / steps as f64,
        });
    }
    Ok(history)
}

#[derive(Clone, Debug)]
pub struct ClassifierRun {
    pub classifier: Classifier<f32>,
    pub held_out_accuracy: f64,
    pub history: Vec<ClassifierEpoch>,
}

/// Trains a fresh classifier for the corpus's domain and reports its
/// accuracy on `held_out`. Zero epochs return the initialization.
pub fn pretrain_classifier(train: &Corpus, held_out: &Corpus, config: &TrainConfig) -> Result<ClassifierRun> {
    config.validate_allowing_zero_epochs()?;
    let populated = train.class_counts().iter().filter(|&&n| n > 0).count();
    if populated < 2 {
        return Err(Error::Config(format!(
            "corpus `{}` has items of {populated} class(es); a classifier needs at least two",
            train.name
        )));
    }
    if held_out.image_shape != train.image_shape || held_out.class_count != train.class_count {
        return Err(Error::Config(
            "held-out corpus disagrees with the training corpus".into(),
        ));
    }
    let side = side_of(train.domain);
    let cfg = config.arch.classifier(train.image_shape, train.class_count, side);
    let tag = match side {
        crate::models::Side::RealSide => "f_r",
        crate::models::Side::SimSide => "f_s",
    };
    let mut classifier = Classifier::new(cfg, derive_seed(config.seed, tag))?;
    let mut stream = BatchStream::single(
        train,
        config.batch_size,
        derive_seed(config.seed, &format!("{tag}.order")),
    )?;
    let history = fit_classifier(&mut classifier, &mut stream, train, None, config, |_| {})?;
    let held_out_accuracy = evaluate_classifier(&classifier, held_out)?.overall_accuracy;
    Ok(ClassifierRun {
        classifier,
        held_out_accuracy,
        history,
    })
}

#[derive(Clone, Debug)]
pub struct RetrainOutcome {
    pub classifier: Classifier<f32>,
    pub report: EvalReport,
    pub history: Vec<ClassifierEpoch>,
    /// `[from real, from transformed]` per batch, in order.
    pub compositions: Vec<[usize; 2]>,
    pub warnings: Vec<String>,
}

/// Trains a classifier on exact b/2 real + b/2 transformed batches and
/// evaluates it on `test`. When the mixed stream cannot be built (odd `b`,
/// empty or too small a transformed corpus) strict runs fail; otherwise
/// training falls back to real-only batches and records a warning.
pub fn retrain_classifier(
    real: &Corpus,
    transformed: &Corpus,
    test: &Corpus,
    config: &TrainConfig,
    init: Option<&Classifier<f32>>,
) -> Result<RetrainOutcome> {
    config.validate()?;
    if real.class_count != transformed.class_count || real.image_shape != transformed.image_shape {
        return Err(Error::Config(
            "real and transformed corpora disagree on classes or image shape".into(),
        ));
    }
    let mut warnings = Vec::new();
    let order_seed = derive_seed(config.seed, "retrain.order");
    let mixed = BatchStream::mixed(real, transformed, config.batch_size, order_seed);
    let (mut stream, second) = match mixed {
        Ok(s) => (s, Some(transformed)),
        Err(e) if !config.strict_batches => {
            let msg = format!("falling back to real-only batches: {e}");
            warnings.push(msg);
            (BatchStream::single(real, config.batch_size, order_seed)?, None)
        }
        Err(e) => return Err(e),
    };
    let mut classifier = match init {
        Some(c) if config.retrain_from_pretrained => c.clone(),
        _ => Classifier::new(
            config
                .arch
                .classifier(real.image_shape, real.class_count, side_of(real.domain)),
            derive_seed(config.seed, "retrain.init"),
        )?,
    };
    let mut compositions = Vec::new();
    let history = fit_classifier(&mut classifier, &mut stream, real, second, config, |c| {
        compositions.push(c)
    })?;
    let report = evaluate_classifier(&classifier, test)?;
    Ok(RetrainOutcome {
        classifier,
        report,
        history,
        compositions,
        warnings,
    })
}

/// Real-only training under the same schedule; the no-augmentation baseline.
pub fn baseline_classifier(real: &Corpus, test: &Corpus, config: &TrainConfig) -> Result<RetrainOutcome> {
    config.validate()?;
    let mut stream = BatchStream::single(real, config.batch_size, derive_seed(config.seed, "retrain.order"))?;
    let mut classifier = Classifier::new(
        config
            .arch
            .classifier(real.image_shape, real.class_count, side_of(real.domain)),
        derive_seed(config.seed, "retrain.init"),
    )?;
    let mut compositions = Vec::new();
    let history = fit_classifier(&mut classifier, &mut stream, real, None, config, |c| {
        compositions.push(c)
    })?;
    let report = evaluate_classifier(&classifier, test)?;
    Ok(RetrainOutcome {
        classifier,
        report,
        history,
        compositions,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_synthetic_corpus, DatasetManifest, Domain, Split};

    fn corpus(domain: Domain, split: Split, per: usize) -> Corpus {
        build_synthetic_corpus(&DatasetManifest::synthetic("c", domain, split, 3, per, [16, 16, 3], 5)).unwrap()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 1,
            batch_size: 8,
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_is_chance_level() {
        let train = corpus(Domain::Real, Split::Train, 10);
        let test = corpus(Domain::Real, Split::Test, 30);
        let run = pretrain_classifier(&train, &test, &TrainConfig { epochs: 0, ..quick() }).unwrap();
        assert!(run.history.is_empty());
        assert!(run.held_out_accuracy <= 0.6, "{}", run.held_out_accuracy);
    }

    #[test]
    fn refuses_single_class_corpus() {
        let train = corpus(Domain::Real, Split::Train, 4).filter_class(1);
        let test = corpus(Domain::Real, Split::Test, 4);
        assert!(matches!(
            pretrain_classifier(&train, &test, &quick()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn pretraining_is_deterministic() {
        let train = corpus(Domain::Simulated, Split::Train, 8);
        let test = corpus(Domain::Simulated, Split::Test, 4);
        let a = pretrain_classifier(&train, &test, &quick()).unwrap();
        let b = pretrain_classifier(&train, &test, &quick()).unwrap();
        assert_eq!(a.classifier, b.classifier);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn retraining_batches_are_half_and_half() {
        let real = corpus(Domain::Real, Split::Train, 12);
        let sim = corpus(Domain::Simulated, Split::Train, 12);
        let test = corpus(Domain::Real, Split::Test, 3);
        let cfg = TrainConfig {
            batch_size: 8,
            ..quick()
        };
        let out = retrain_classifier(&real, &sim, &test, &cfg, None).unwrap();
        assert_eq!(out.compositions.len(), 9);
        assert!(out.compositions.iter().all(|c| *c == [4, 4]));
        assert!(retrain_classifier(
            &real,
            &sim,
            &test,
            &TrainConfig {
                batch_size: 7,
                ..cfg.clone()
            },
            None
        )
        .is_err());
    }

    #[test]
    fn empty_transformed_strict_vs_permissive() {
        let real = corpus(Domain::Real, Split::Train, 6);
        let empty = real.empty_like();
        let test = corpus(Domain::Real, Split::Test, 2);
        assert!(retrain_classifier(&real, &empty, &test, &quick(), None).is_err());
        let lax = TrainConfig {
            strict_batches: false,
            ..quick()
        };
        let out = retrain_classifier(&real, &empty, &test, &lax, None).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.compositions.iter().all(|c| c[1] == 0));
    }
}

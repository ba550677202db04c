//! Scalar objectives and their gradients.
//!
//! Every loss comes as a value function and a `*_grad` twin returning the
//! gradient with respect to the tensor the caller backpropagates through.
//! Generic over [`Element`] so the same code is finite-difference checked in
//! f64 and trained in f32.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::tensor::{Element, Tensor};

/// Which objective the GAN trainer optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simgan,
    Cyclegan,
    LabelCyclegan,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::Simgan => "simgan",
            Mode::Cyclegan => "cyclegan",
            Mode::LabelCyclegan => "label_cyclegan",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "simgan" => Ok(Mode::Simgan),
            "cyclegan" => Ok(Mode::Cyclegan),
            "label_cyclegan" => Ok(Mode::LabelCyclegan),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected simgan, cyclegan or label_cyclegan)"
            ))),
        }
    }

    pub fn has_cycle(self) -> bool {
        self != Mode::Simgan
    }

    /// Coefficient of each [`LossReport`] component in the total, in the
    /// order `adv_r, adv_s, cycle, lab_r, lab_s, selfreg`.
    pub fn coefficients(self, w: &LossWeights) -> [f64; 6] {
        match self {
            Mode::Simgan => [1.0, 0.0, 0.0, 0.0, 0.0, w.lambda_selfreg],
            Mode::Cyclegan => [1.0, 1.0, w.lambda_cyc, 0.0, 0.0, 0.0],
            Mode::LabelCyclegan => [1.0, 1.0, w.lambda_cyc, w.lambda_lab_r, w.lambda_lab_s, 0.0],
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Form of the adversarial criterion applied to raw score maps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialForm {
    /// Mean of `(score − t)²`.
    #[default]
    LeastSquares,
    /// Mean sigmoid cross-entropy with the score as logit.
    BinaryCrossEntropy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub lambda_cyc: f64,
    pub lambda_lab_r: f64,
    pub lambda_lab_s: f64,
    pub lambda_selfreg: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_cyc: 10.0,
            lambda_lab_r: 1.0,
            lambda_lab_s: 1.0,
            lambda_selfreg: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_cyc", self.lambda_cyc),
            ("lambda_lab_r", self.lambda_lab_r),
            ("lambda_lab_s", self.lambda_lab_s),
            ("lambda_selfreg", self.lambda_selfreg),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Loss(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// One generator step's loss components. Serialized as one JSON line with
/// exactly these keys.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub adv_r: f64,
    pub adv_s: f64,
    pub cycle: f64,
    pub lab_r: f64,
    pub lab_s: f64,
    pub selfreg: f64,
    pub total: f64,
    pub masked_fraction: f64,
}

impl LossReport {
    /// Fills `total` from the components under `mode`.
    pub fn finish(mut self, weights: &LossWeights, mode: Mode) -> Result<Self> {
        self.total = total_objective(&self, weights, mode)?;
        Ok(self)
    }

    fn components(&self) -> [f64; 6] {
        [self.adv_r, self.adv_s, self.cycle, self.lab_r, self.lab_s, self.selfreg]
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("plain struct serializes")
    }
}

fn check_finite<T: Element>(values: &[T], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Loss(format!("{what} contains non-finite values")))
    }
}

/// `−log softmax(logits)[label]`.
pub fn cross_entropy<T: Element>(logits: &[T], label: usize) -> Result<T> {
    Ok(cross_entropy_grad(logits, label)?.0)
}

/// Cross-entropy and its gradient `softmax − onehot` with respect to the logits.
pub fn cross_entropy_grad<T: Element>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    check_finite(logits, "logits")?;
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&v| (v - max).exp()).sum();
    let log_z = max + sum.ln();
    let loss = (log_z - logits[label]).max(T::zero());
    let grad = logits
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let p = (v - log_z).exp();
            if k == label {
                p - T::one()
            } else {
                p
            }
        })
        .collect();
    Ok((loss, grad))
}

/// Mean adversarial criterion over every score of the map.
pub fn adversarial_loss<T: Element>(scores: &Tensor<T>, target_real: bool, form: AdversarialForm) -> Result<T> {
    Ok(adversarial_loss_grad(scores, target_real, form)?.0)
}

pub fn adversarial_loss_grad<T: Element>(
    scores: &Tensor<T>,
    target_real: bool,
    form: AdversarialForm,
) -> Result<(T, Tensor<T>)> {
    if scores.is_empty() {
        return Err(Error::Loss("empty score map".into()));
    }
    check_finite(scores.data(), "scores")?;
    let n = T::lit(scores.len() as f64);
    let t = if target_real { T::one() } else { T::zero() };
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(scores.len());
    for &s in scores.data() {
        match form {
            AdversarialForm::LeastSquares => {
                let d = s - t;
                loss += d * d;
                grad.push(T::lit(2.0) * d / n);
            }
            AdversarialForm::BinaryCrossEntropy => {
                // softplus(s) − t·s, stable for large |s|
                let softplus = s.max(T::zero()) + (-s.abs()).exp().ln_1p();
                loss += softplus - t * s;
                grad.push((sigmoid(s) - t) / n);
            }
        }
    }
    let grad = Tensor::from_vec(scores.shape(), grad)?;
    Ok((loss / n, grad))
}

fn sigmoid<T: Element>(s: T) -> T {
    if s >= T::zero() {
        T::one() / (T::one() + (-s).exp())
    } else {
        let e = s.exp();
        e / (T::one() + e)
    }
}

fn mean_abs_grad<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "mean absolute difference of shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.is_empty() {
        return Err(Error::Loss("empty images".into()));
    }
    let n = T::lit(a.len() as f64);
    let mut sum = T::zero();
    let mut grad = Vec::with_capacity(a.len());
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let d = y - x;
        sum += d.abs();
        grad.push(if d > T::zero() {
            T::one() / n
        } else if d < T::zero() {
            -T::one() / n
        } else {
            T::zero()
        });
    }
    Ok((sum / n, Tensor::from_vec(b.shape(), grad)?))
}

/// Mean `|reconstructed − original|`.
pub fn cycle_loss<T: Element>(original: &Tensor<T>, reconstructed: &Tensor<T>) -> Result<T> {
    Ok(mean_abs_grad(original, reconstructed)?.0)
}

/// Value and gradient with respect to `reconstructed`.
pub fn cycle_loss_grad<T: Element>(original: &Tensor<T>, reconstructed: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    mean_abs_grad(original, reconstructed)
}

/// Mean `|refined − simulated|`, the refiner's pixel regularizer.
pub fn self_regularization_loss<T: Element>(simulated: &Tensor<T>, refined: &Tensor<T>) -> Result<T> {
    Ok(mean_abs_grad(simulated, refined)?.0)
}

/// Value and gradient with respect to `refined`.
pub fn self_regularization_loss_grad<T: Element>(simulated: &Tensor<T>, refined: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    mean_abs_grad(simulated, refined)
}

/// Mean cross-entropy over the rows of `[batch, K]` logits whose label is not
/// excluded; returns the value, the number of excluded rows and, if asked,
/// the per-row gradient already divided by `normalizer`.
fn masked_cross_entropy<T: Element>(
    logits: &[T],
    classes: usize,
    labels: &[usize],
    exclude: &BTreeSet<usize>,
    normalizer: usize,
    want_grad: bool,
) -> Result<(T, Option<Vec<T>>)> {
    let mut sum = T::zero();
    let mut grad = want_grad.then(|| vec![T::zero(); logits.len()]);
    let scale = T::one() / T::lit(normalizer.max(1) as f64);
    for (i, (row, &label)) in logits.chunks_exact(classes).zip(labels).enumerate() {
        if exclude.contains(&label) {
            continue;
        }
        let (ce, g) = cross_entropy_grad(row, label)?;
        sum += ce;
        if let Some(grad) = grad.as_mut() {
            for (dst, gv) in grad[i * classes..(i + 1) * classes].iter_mut().zip(g) {
                *dst = gv * scale;
            }
        }
    }
    Ok((sum * scale, grad))
}

/// Mean cross-entropy over the non-excluded rows of several logit blocks,
/// pooled. Returns `(value, masked_fraction)`; all-excluded gives `(0, 1)`.
pub fn pooled_masked_cross_entropy<T: Element>(
    blocks: &[(&[T], &[usize])],
    classes: usize,
    exclude: &BTreeSet<usize>,
) -> Result<(T, f64)> {
    let total: usize = blocks.iter().map(|(_, l)| l.len()).sum();
    let kept: usize = blocks
        .iter()
        .flat_map(|(_, l)| l.iter())
        .filter(|l| !exclude.contains(l))
        .count();
    if total == 0 {
        return Err(Error::Loss("label loss over empty batches".into()));
    }
    let mut value = T::zero();
    for (logits, labels) in blocks {
        if logits.len() != labels.len() * classes {
            return Err(Error::Loss(format!(
                "{} logits for {} labels of {classes} classes",
                logits.len(),
                labels.len()
            )));
        }
        value += masked_cross_entropy(logits, classes, labels, exclude, kept, false)?.0;
    }
    Ok((value, (total - kept) as f64 / total as f64))
}

/// Result of [`label_loss_grad`].
#[derive(Clone, Debug)]
pub struct LabelLoss<T> {
    pub value: T,
    pub masked_fraction: f64,
    /// Gradient with respect to `transformed`.
    pub grad_transformed: Tensor<T>,
    /// Gradient with respect to `cycle_transformed`.
    pub grad_cycle: Tensor<T>,
}

/// Frozen-classifier cross-entropy on translated images (`transformed`,
/// labelled with their source labels) and on cycle-translated images
/// (`cycle_transformed`, labelled with theirs), pooled by mean over every item
/// whose label is not in `exclude`. Returns `(value, masked_fraction)`.
pub fn label_loss<T: Element>(
    classifier: &Classifier<T>,
    transformed: &Tensor<T>,
    labels: &[usize],
    cycle_transformed: &Tensor<T>,
    cycle_labels: &[usize],
    exclude: &BTreeSet<usize>,
) -> Result<(T, f64)> {
    let out = label_loss_impl(
        classifier,
        transformed,
        labels,
        cycle_transformed,
        cycle_labels,
        exclude,
        false,
    )?;
    Ok((out.value, out.masked_fraction))
}

/// [`label_loss`] with gradients with respect to both image batches. The
/// classifier receives no parameter gradient.
pub fn label_loss_grad<T: Element>(
    classifier: &Classifier<T>,
    transformed: &Tensor<T>,
    labels: &[usize],
    cycle_transformed: &Tensor<T>,
    cycle_labels: &[usize],
    exclude: &BTreeSet<usize>,
) -> Result<LabelLoss<T>> {
    label_loss_impl(
        classifier,
        transformed,
        labels,
        cycle_transformed,
        cycle_labels,
        exclude,
        true,
    )
}

fn label_loss_impl<T: Element>(
    classifier: &Classifier<T>,
    transformed: &Tensor<T>,
    labels: &[usize],
    cycle_transformed: &Tensor<T>,
    cycle_labels: &[usize],
    exclude: &BTreeSet<usize>,
    want_grad: bool,
) -> Result<LabelLoss<T>> {
    let streams = [(transformed, labels), (cycle_transformed, cycle_labels)];
    for (images, l) in streams {
        if images.shape().first() != Some(&l.len()) {
            return Err(Error::Loss(format!(
                "batch of {:?} images with {} labels",
                images.shape().first(),
                l.len()
            )));
        }
    }
    let total = labels.len() + cycle_labels.len();
    if total == 0 {
        return Err(Error::Loss("label loss over empty batches".into()));
    }
    let kept = labels
        .iter()
        .chain(cycle_labels)
        .filter(|l| !exclude.contains(l))
        .count();
    let classes = classifier.classes();
    let mut value = T::zero();
    let mut grads = Vec::with_capacity(2);
    for (images, l) in streams {
        let stream_kept = l.iter().any(|c| !exclude.contains(c));
        if !stream_kept {
            // nothing contributes: skip the classifier entirely
            grads.push(Tensor::zeros(images.shape()));
            continue;
        }
        if want_grad {
            let (logits, trace) = classifier.forward_traced(images)?;
            let (v, g) = masked_cross_entropy(logits.data(), classes, l, exclude, kept, true)?;
            value += v;
            let g = Tensor::from_vec(logits.shape(), g.expect("requested"))?;
            grads.push(classifier.backward(&trace, g, None, true)?);
        } else {
            let logits = classifier.forward(images)?;
            value += masked_cross_entropy(logits.data(), classes, l, exclude, kept, false)?.0;
            grads.push(Tensor::zeros(&[0]));
        }
    }
    let grad_cycle = grads.pop().expect("two streams");
    let grad_transformed = grads.pop().expect("two streams");
    Ok(LabelLoss {
        value,
        masked_fraction: (total - kept) as f64 / total as f64,
        grad_transformed,
        grad_cycle,
    })
}

/// Weighted sum of the components active under `mode`:
/// SimGAN `adv_r + λ_selfreg·selfreg`; CycleGAN `adv_r + adv_s + λ_cyc·cycle`;
/// Label-CycleGAN adds `λ_lab_r·lab_r + λ_lab_s·lab_s`.
pub fn total_objective(components: &LossReport, weights: &LossWeights, mode: Mode) -> Result<f64> {
    weights.validate()?;
    let values = components.components();
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Loss(format!("non-finite loss component {v}")));
    }
    Ok(mode
        .coefficients(weights)
        .iter()
        .zip(values)
        .filter(|(c, _)| **c != 0.0)
        .map(|(c, v)| c * v)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ClassifierConfig, Side};
    use proptest::prelude::*;

    fn t(shape: &[usize], data: Vec<f64>) -> Tensor<f64> {
        Tensor::from_vec(shape, data).unwrap()
    }

    #[test]
    fn cross_entropy_fixtures() {
        let ln10 = 10f64.ln();
        assert!((cross_entropy(&[0.0f64; 10], 3).unwrap() - ln10).abs() < 1e-12);
        let mut sat = vec![0.0f64; 10];
        sat[2] = 1000.0;
        assert!(cross_entropy(&sat, 2).unwrap().abs() < 1e-12);
        // independent evaluation: p0 = e² / (e² + e + e^0.1)
        let p0 = 2f64.exp() / (2f64.exp() + 1f64.exp() + 0.1f64.exp());
        let ce = cross_entropy(&[2.0f64, 1.0, 0.1], 0).unwrap();
        assert!((ce + p0.ln()).abs() < 1e-12);
        assert!((ce - 0.41703).abs() < 1e-5);
        assert!(matches!(
            cross_entropy(&[0.0f64; 3], 3),
            Err(Error::LabelOutOfRange { .. })
        ));
        assert!(cross_entropy(&[f64::NAN, 0.0], 0).is_err());
    }

    #[test]
    fn adversarial_fixtures() {
        let ls = AdversarialForm::LeastSquares;
        assert_eq!(
            adversarial_loss(&Tensor::full(&[1, 4, 4], 1.0f64), true, ls).unwrap(),
            0.0
        );
        assert_eq!(
            adversarial_loss(&Tensor::full(&[1, 4, 4], 0.0f64), true, ls).unwrap(),
            1.0
        );
        let s = t(&[1, 1, 2], vec![0.5, -0.5]);
        assert!((adversarial_loss(&s, false, ls).unwrap() - 0.25).abs() < 1e-15);
        assert!(adversarial_loss(&Tensor::<f64>::zeros(&[0]), true, ls).is_err());
        // BCE: zero logits give ln 2 for either target
        let bce = AdversarialForm::BinaryCrossEntropy;
        let z = Tensor::full(&[1, 2, 2], 0.0f64);
        assert!((adversarial_loss(&z, true, bce).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(adversarial_loss(&Tensor::full(&[1, 1, 1], 800.0f64), true, bce).unwrap() < 1e-12);
    }

    #[test]
    fn mean_abs_fixtures() {
        let x = t(&[1, 2, 2, 1], vec![0.1, -0.7, 0.3, 0.9]);
        assert_eq!(cycle_loss(&x, &x).unwrap(), 0.0);
        let lo = Tensor::full(&[1, 2, 2, 3], -1.0f64);
        let hi = Tensor::full(&[1, 2, 2, 3], 1.0f64);
        assert_eq!(cycle_loss(&lo, &hi).unwrap(), 2.0);
        let shifted = x.map(|v| v - 0.25);
        assert!((self_regularization_loss(&x, &shifted).unwrap() - 0.25).abs() < 1e-15);
        let y = t(&[1, 2, 2, 1], vec![0.4, 0.2, -0.6, 0.9]);
        let oracle = (0.3 + 0.9 + 0.9 + 0.0) / 4.0;
        assert!((cycle_loss(&x, &y).unwrap() - oracle).abs() < 1e-12);
        assert!(cycle_loss(&x, &Tensor::zeros(&[1, 4])).is_err());
    }

    #[test]
    fn pooled_ce_fixture() {
        let none = BTreeSet::new();
        let uniform = [0.0f64; 10];
        let mut sat = [0.0f64; 10];
        sat[1] = 1000.0;
        let (v, m) = pooled_masked_cross_entropy(&[(&uniform[..], &[4][..]), (&sat[..], &[1][..])], 10, &none).unwrap();
        assert!((v - 10f64.ln() / 2.0).abs() < 1e-12);
        assert!((v - 1.151293).abs() < 1e-6);
        assert_eq!(m, 0.0);
        let all: BTreeSet<usize> = [1, 4].into();
        let (v, m) = pooled_masked_cross_entropy(&[(&uniform[..], &[4][..]), (&sat[..], &[1][..])], 10, &all).unwrap();
        assert_eq!((v, m), (0.0, 1.0));
    }

    fn tiny_classifier() -> Classifier<f64> {
        let mut cfg = ClassifierConfig::new([8, 8, 3], 2, Side::RealSide);
        cfg.channels = [2, 2];
        Classifier::new(cfg, 3).unwrap()
    }

    fn images(n: usize, seed: u64) -> Tensor<f64> {
        let data = (0..n * 8 * 8 * 3)
            .map(|i| (((i as u64 + 1).wrapping_mul(2654435761 + seed) % 1000) as f64 / 500.0) - 1.0)
            .collect();
        t(&[n, 8, 8, 3], data)
    }

    #[test]
    fn label_loss_masking() {
        let f = tiny_classifier();
        let a = images(3, 1);
        let b = images(2, 2);
        let none = BTreeSet::new();
        let (full, m) = label_loss(&f, &a, &[0, 1, 1], &b, &[0, 1], &none).unwrap();
        assert_eq!(m, 0.0);
        assert!(full > 0.0);
        let all: BTreeSet<usize> = [0, 1].into();
        let out = label_loss_grad(&f, &a, &[0, 1, 1], &b, &[0, 1], &all).unwrap();
        assert_eq!((out.value, out.masked_fraction), (0.0, 1.0));
        assert!(out.grad_transformed.data().iter().all(|&g| g == 0.0));

        // excluding class 1 == deleting its items before the mean
        let one: BTreeSet<usize> = [1].into();
        let (masked, m) = label_loss(&f, &a, &[0, 1, 1], &b, &[0, 1], &one).unwrap();
        assert!((m - 0.6).abs() < 1e-12);
        let (deleted, _) = label_loss(&f, &a.slice_batch(0, 1), &[0], &b.slice_batch(0, 1), &[0], &none).unwrap();
        assert!((masked - deleted).abs() < 1e-12);
        assert!(label_loss(&f, &a, &[0, 1], &b, &[0, 1], &none).is_err());
    }

    #[test]
    fn adding_an_excluded_item_changes_nothing() {
        let f = tiny_classifier();
        let a = images(2, 5);
        let extra = images(1, 9);
        let one: BTreeSet<usize> = [1].into();
        let (before, _) = label_loss(&f, &a, &[0, 0], &a, &[0, 1], &one).unwrap();
        let grown = Tensor::stack(&[&a, &extra]).unwrap();
        let (after, _) = label_loss(&f, &grown, &[0, 0, 1], &a, &[0, 1], &one).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn total_objective_fixtures() {
        let w = LossWeights::default();
        let c = LossReport {
            adv_r: 1.0,
            adv_s: 1.0,
            cycle: 0.5,
            lab_r: 0.7,
            lab_s: 0.2,
            selfreg: 0.3,
            ..Default::default()
        };
        assert_eq!(total_objective(&c, &w, Mode::Cyclegan).unwrap(), 7.0);
        assert!((total_objective(&c, &w, Mode::LabelCyclegan).unwrap() - 7.9).abs() < 1e-12);
        let zero_lab = LossWeights {
            lambda_lab_r: 0.0,
            lambda_lab_s: 0.0,
            ..w.clone()
        };
        assert_eq!(
            total_objective(&c, &zero_lab, Mode::LabelCyclegan).unwrap(),
            total_objective(&c, &zero_lab, Mode::Cyclegan).unwrap()
        );
        let s = LossReport {
            adv_r: 0.25,
            selfreg: 0.1,
            ..Default::default()
        };
        assert!((total_objective(&s, &w, Mode::Simgan).unwrap() - 0.35).abs() < 1e-12);
        let bad = LossWeights {
            lambda_cyc: -1.0,
            ..w.clone()
        };
        assert!(total_objective(&c, &bad, Mode::Cyclegan).is_err());
        let nan = LossReport {
            cycle: f64::NAN,
            ..c.clone()
        };
        assert!(total_objective(&nan, &w, Mode::Cyclegan).is_err());
    }

    #[test]
    fn report_json_keys_are_the_field_names() {
        let v: serde_json::Value = serde_json::from_str(&LossReport::default().to_json_line()).unwrap();
        let keys: BTreeSet<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let want: BTreeSet<&str> = [
            "adv_r",
            "adv_s",
            "cycle",
            "lab_r",
            "lab_s",
            "selfreg",
            "total",
            "masked_fraction",
        ]
        .into();
        assert_eq!(keys, want);
    }

    fn fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], i: usize) -> f64 {
        let h = 1e-6;
        let mut p = x.to_vec();
        p[i] += h;
        let up = f(&p);
        p[i] -= 2.0 * h;
        (up - f(&p)) / (2.0 * h)
    }

    #[test]
    fn elementwise_gradients() {
        let logits = [0.3, -1.2, 2.0, 0.5];
        let (_, g) = cross_entropy_grad(&logits, 2).unwrap();
        for i in 0..4 {
            let n = fd(|x| cross_entropy(x, 2).unwrap(), &logits, i);
            assert!((g[i] - n).abs() < 1e-7);
        }
        let s = [0.3, -1.2, 2.0, 0.5];
        for form in [AdversarialForm::LeastSquares, AdversarialForm::BinaryCrossEntropy] {
            for real in [true, false] {
                let (_, g) = adversarial_loss_grad(&t(&[1, 2, 2], s.to_vec()), real, form).unwrap();
                for i in 0..4 {
                    let n = fd(
                        |x| adversarial_loss(&t(&[1, 2, 2], x.to_vec()), real, form).unwrap(),
                        &s,
                        i,
                    );
                    assert!((g.data()[i] - n).abs() < 1e-7);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn losses_nonnegative(v in proptest::collection::vec(-5.0f64..5.0, 8), label in 0usize..8) {
            prop_assert!(cross_entropy(&v, label).unwrap() >= 0.0);
            let a = t(&[2, 2, 2], v.clone());
            let b = a.map(|x| x * 0.5);
            prop_assert!(cycle_loss(&a, &b).unwrap() >= 0.0);
            prop_assert!(adversarial_loss(&a, true, AdversarialForm::LeastSquares).unwrap() >= 0.0);
            prop_assert!(adversarial_loss(&a, false, AdversarialForm::BinaryCrossEntropy).unwrap() >= 0.0);
        }

        #[test]
        fn pooled_ce_is_permutation_invariant(
            rows in proptest::collection::vec((proptest::collection::vec(-3.0f64..3.0, 3), 0usize..3), 1..5),
            excl in proptest::option::of(0usize..3),
        ) {
            let exclude: BTreeSet<usize> = excl.into_iter().collect();
            let flat: Vec<f64> = rows.iter().flat_map(|(r, _)| r.clone()).collect();
            let labels: Vec<usize> = rows.iter().map(|(_, l)| *l).collect();
            let (v, _) = pooled_masked_cross_entropy(&[(&flat[..], &labels[..])], 3, &exclude).unwrap();
            let rev_flat: Vec<f64> = rows.iter().rev().flat_map(|(r, _)| r.clone()).collect();
            let rev_labels: Vec<usize> = labels.iter().rev().copied().collect();
            let (w, _) = pooled_masked_cross_entropy(&[(&rev_flat[..], &rev_labels[..])], 3, &exclude).unwrap();
            prop_assert!((v - w).abs() < 1e-12);
            // brute-force oracle
            let kept: Vec<f64> = rows.iter().filter(|(_, l)| !exclude.contains(l))
                .map(|(r, l)| cross_entropy(r, *l).unwrap()).collect();
            let oracle = if kept.is_empty() { 0.0 } else { kept.iter().sum::<f64>() / kept.len() as f64 };
            prop_assert!((v - oracle).abs() < 1e-12);
            // splitting the batch in two pooled blocks changes nothing
            let cut = rows.len() / 2;
            let (w2, _) = pooled_masked_cross_entropy(
                &[(&flat[..cut * 3], &labels[..cut]), (&flat[cut * 3..], &labels[cut..])], 3, &exclude).unwrap();
            prop_assert!((v - w2).abs() < 1e-12);
        }
    }
}

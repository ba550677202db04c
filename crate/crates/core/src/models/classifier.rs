use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_image_batch, Network, Side};
use crate::error::{Error, Result};
use crate::nn::{Grads, Layer, NetBuilder, ParamSet, Trace};
use crate::tensor::{Element, Tensor};

/// Two conv + ReLU + 2×2 max-pool stages followed by one dense layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub image_shape: [usize; 3],
    pub classes: usize,
    pub channels: [usize; 2],
    pub side: Side,
}

impl ClassifierConfig {
    pub fn new(image_shape: [usize; 3], classes: usize, side: Side) -> Self {
        Self {
            image_shape,
            classes,
            channels: [16, 32],
            side,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classifier<T> {
    config: ClassifierConfig,
    net: Network<T>,
}

impl<T: Element> Classifier<T> {
    pub fn new(config: ClassifierConfig, seed: u64) -> Result<Self> {
        let [h, w, ch] = config.image_shape;
        if h < 4 || w < 4 || config.classes == 0 {
            return Err(Error::Shape(format!(
                "classifier needs images of at least 4x4 and one class, got {:?} / {}",
                config.image_shape, config.classes
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = NetBuilder::<T, _>::new(&mut rng);
        let [c1, c2] = config.channels;
        let layers = vec![
            b.conv("conv0", ch, c1, 3, 1, 1),
            Layer::Relu,
            Layer::MaxPool2,
            b.conv("conv1", c1, c2, 3, 1, 1),
            Layer::Relu,
            Layer::MaxPool2,
            b.dense("dense", (h / 4) * (w / 4) * c2, config.classes),
        ];
        let params = b.params;
        Ok(Self {
            config,
            net: Network::new(layers, params),
        })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    pub fn params(&self) -> &ParamSet<T> {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        self.net.params_mut()
    }

    fn check(&self, images: &Tensor<T>) -> Result<()> {
        check_image_batch(images, self.config.image_shape)?;
        if let Some(name) = self.net.params().first_non_finite() {
            return Err(Error::CorruptParams(format!(
                "non-finite value in classifier parameter `{name}`"
            )));
        }
        Ok(())
    }

    /// `[batch, K]` logits.
    pub fn forward(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(images)?;
        self.net.run(images.clone(), None)
    }

    pub fn forward_traced(&self, images: &Tensor<T>) -> Result<(Tensor<T>, Trace<T>)> {
        self.check(images)?;
        self.net.run_traced(images.clone(), None)
    }

    pub fn backward(
        &self,
        trace: &Trace<T>,
        grad: Tensor<T>,
        grads: Option<&mut Grads<T>>,
        need_input_grad: bool,
    ) -> Result<Tensor<T>> {
        self.net.backward(trace, grad, grads, need_input_grad)
    }

    /// Arg-max class per item, ties going to the lower index.
    pub fn predict(&self, images: &Tensor<T>) -> Result<Vec<usize>> {
        let logits = self.forward(images)?;
        Ok(logits.data().chunks_exact(self.config.classes).map(argmax).collect())
    }

    pub fn cast<U: Element>(&self) -> Classifier<U> {
        Classifier {
            config: self.config.clone(),
            net: self.net.cast(),
        }
    }
}

/// Index of the largest value; the first one wins on ties.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax.
pub fn softmax<T: Element>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_finite_logits_and_normalized_softmax() {
        let c = Classifier::<f32>::new(ClassifierConfig::new([32, 32, 3], 10, Side::RealSide), 5).unwrap();
        let x = Tensor::full(&[3, 32, 32, 3], 0.4);
        let logits = c.forward(&x).unwrap();
        assert_eq!(logits.shape(), &[3, 10]);
        assert!(logits.all_finite());
        for row in logits.data().chunks_exact(10) {
            let p = softmax(row);
            let s: f32 = p.iter().sum();
            assert!((s - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn zero_logits_give_uniform_probabilities() {
        let p = softmax(&[0.0f64; 4]);
        assert!(p.iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn corrupt_parameters_detected() {
        let mut c = Classifier::<f32>::new(ClassifierConfig::new([16, 16, 3], 3, Side::SimSide), 1).unwrap();
        c.params_mut().entries_mut()[0].value[0] = f32::NAN;
        let x = Tensor::zeros(&[1, 16, 16, 3]);
        assert!(matches!(c.forward(&x), Err(Error::CorruptParams(_))));
    }
}

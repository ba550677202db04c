use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_image_batch, Network};
use crate::error::{Error, Result};
use crate::nn::{Grads, Layer, NetBuilder, ParamSet, Trace};
use crate::tensor::{Element, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// simulated → real
    S2r,
    /// real → simulated
    R2s,
}

impl Direction {
    pub fn tag(self) -> &'static str {
        match self {
            Direction::S2r => "g_s2r",
            Direction::R2s => "g_r2s",
        }
    }
}

/// Encoder (stem + stride-2 stages + residual blocks), label-map
/// concatenation, then decoder (upsample + conv stages) with a tanh head.
///
/// `base_channels == 0` builds the empty pass-through network used to test
/// data plumbing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub image_shape: [usize; 3],
    pub base_channels: usize,
    pub down_stages: usize,
    pub res_blocks: usize,
    pub label_channels: usize,
    pub direction: Direction,
}

impl GeneratorConfig {
    pub fn new(image_shape: [usize; 3], direction: Direction) -> Self {
        Self {
            image_shape,
            base_channels: 32,
            down_stages: 2,
            res_blocks: 3,
            label_channels: 0,
            direction,
        }
    }

    pub fn with_labels(mut self, classes: usize) -> Self {
        self.label_channels = classes;
        self
    }

    pub fn identity(image_shape: [usize; 3], direction: Direction) -> Self {
        Self {
            image_shape,
            base_channels: 0,
            down_stages: 0,
            res_blocks: 0,
            label_channels: 0,
            direction,
        }
    }

    /// `(h, w, c)` of the encoder output, before label channels are added.
    pub fn bottleneck_shape(&self) -> [usize; 3] {
        let f = 1 << self.down_stages;
        [
            self.image_shape[0] / f,
            self.image_shape[1] / f,
            self.base_channels << self.down_stages,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let f = 1usize << self.down_stages;
        let [h, w, ch] = self.image_shape;
        if h % f != 0 || w % f != 0 || h < f || w < f {
            return Err(Error::Shape(format!(
                "{h}x{w} images are not divisible by the downsampling factor {f}"
            )));
        }
        if ch == 0 {
            return Err(Error::Shape("images need at least one channel".into()));
        }
        if self.base_channels == 0 && self.label_channels > 0 {
            return Err(Error::Config(
                "the pass-through generator cannot take label channels".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator<T> {
    config: GeneratorConfig,
    net: Network<T>,
}

impl<T: Element> Generator<T> {
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = NetBuilder::<T, _>::new(&mut rng);
        let mut layers = Vec::new();
        if config.base_channels > 0 {
            let base = config.base_channels;
            let ch = config.image_shape[2];
            layers.push(b.conv("enc.stem", ch, base, 3, 1, 1));
            layers.push(Layer::InstanceNorm);
            layers.push(Layer::Relu);
            for i in 0..config.down_stages {
                let cin = base << i;
                layers.push(b.conv(&format!("enc.down{i}"), cin, cin * 2, 3, 2, 1));
                layers.push(Layer::InstanceNorm);
                layers.push(Layer::Relu);
            }
            let c = base << config.down_stages;
            for r in 0..config.res_blocks {
                let c1 = b.conv(&format!("enc.res{r}.a"), c, c, 3, 1, 1);
                let c2 = b.conv(&format!("enc.res{r}.b"), c, c, 3, 1, 1);
                layers.push(Layer::Residual(vec![
                    c1,
                    Layer::InstanceNorm,
                    Layer::Relu,
                    c2,
                    Layer::InstanceNorm,
                ]));
            }
            layers.push(Layer::EmbedLabel {
                classes: config.label_channels,
            });
            let mut cin = c + config.label_channels;
            for i in (0..config.down_stages).rev() {
                let cout = base << i;
                layers.push(Layer::Upsample2);
                layers.push(b.conv(&format!("dec.up{i}"), cin, cout, 3, 1, 1));
                layers.push(Layer::InstanceNorm);
                layers.push(Layer::Relu);
                cin = cout;
            }
            layers.push(b.conv("dec.head", cin, ch, 3, 1, 1));
            layers.push(Layer::Tanh);
        }
        let params = b.params;
        Ok(Self {
            config,
            net: Network::new(layers, params),
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet<T> {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        self.net.params_mut()
    }

    pub fn is_conditional(&self) -> bool {
        self.config.label_channels > 0
    }

    fn check(&self, images: &Tensor<T>, labels: Option<&[usize]>) -> Result<()> {
        let n = check_image_batch(images, self.config.image_shape)?;
        if self.is_conditional() {
            let labels = labels.ok_or(Error::MissingLabel(self.config.label_channels))?;
            if labels.len() != n {
                return Err(Error::Shape(format!("{} labels for a batch of {n}", labels.len())));
            }
        }
        Ok(())
    }

    /// Translates an NHWC batch. Labels are required iff the generator is
    /// conditional and ignored otherwise.
    pub fn forward(&self, images: &Tensor<T>, labels: Option<&[usize]>) -> Result<Tensor<T>> {
        self.check(images, labels)?;
        let labels = if self.is_conditional() { labels } else { None };
        self.net.run(images.clone(), labels)
    }

    pub fn forward_traced(&self, images: &Tensor<T>, labels: Option<&[usize]>) -> Result<(Tensor<T>, Trace<T>)> {
        self.check(images, labels)?;
        let labels = if self.is_conditional() { labels } else { None };
        self.net.run_traced(images.clone(), labels)
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

    pub fn cast<U: Element>(&self) -> Generator<U> {
        Generator {
            config: self.config.clone(),
            net: self.net.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_batch(n: usize, seed: u32) -> Tensor<f32> {
        let data = (0..n * 32 * 32 * 3)
            .map(|i| (((i as u32).wrapping_mul(2654435761).wrapping_add(seed) >> 8) as f32 / 8388608.0) - 1.0)
            .collect();
        Tensor::from_vec(&[n, 32, 32, 3], data).unwrap()
    }

    #[test]
    fn default_bottleneck_is_8x8x128() {
        let cfg = GeneratorConfig::new([32, 32, 3], Direction::S2r);
        assert_eq!(cfg.bottleneck_shape(), [8, 8, 128]);
    }

    #[test]
    fn output_keeps_shape_and_open_range() {
        let g = Generator::<f32>::new(GeneratorConfig::new([32, 32, 3], Direction::S2r).with_labels(10), 7).unwrap();
        let x = image_batch(2, 1);
        let y = g.forward(&x, Some(&[1, 9])).unwrap();
        assert_eq!(y.shape(), &[2, 32, 32, 3]);
        assert!(y.data().iter().all(|v| *v > -1.0 && *v < 1.0));
    }

    #[test]
    fn missing_label_and_bad_shapes_rejected() {
        let cond = Generator::<f32>::new(GeneratorConfig::new([16, 16, 3], Direction::R2s).with_labels(3), 1).unwrap();
        let x = Tensor::zeros(&[1, 16, 16, 3]);
        assert!(matches!(cond.forward(&x, None), Err(Error::MissingLabel(3))));
        let mut cfg = GeneratorConfig::new([18, 18, 3], Direction::S2r);
        cfg.down_stages = 2;
        assert!(Generator::<f32>::new(cfg, 1).is_err());
    }

    #[test]
    fn initialization_is_deterministic() {
        let cfg = GeneratorConfig::new([16, 16, 3], Direction::S2r);
        let a = Generator::<f32>::new(cfg.clone(), 42).unwrap();
        let b = Generator::<f32>::new(cfg, 42).unwrap();
        let x = Tensor::full(&[1, 16, 16, 3], 0.25);
        assert_eq!(a.forward(&x, None).unwrap(), b.forward(&x, None).unwrap());
    }

    #[test]
    fn pass_through_generator_returns_input() {
        let g = Generator::<f32>::new(GeneratorConfig::identity([16, 16, 3], Direction::S2r), 0).unwrap();
        assert!(g.params().is_empty());
        let x = Tensor::full(&[2, 16, 16, 3], -0.5);
        assert_eq!(g.forward(&x, None).unwrap(), x);
    }
}

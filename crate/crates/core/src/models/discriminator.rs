use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_image_batch, Network, Side};
use crate::error::{Error, Result};
use crate::nn::{Grads, Layer, NetBuilder, ParamSet, Trace};
use crate::tensor::{Element, Tensor};

/// PatchGAN-style critic: `stages` stride-2 4×4 convolutions (instance norm
/// on all but the first) and a 3×3 head emitting one raw score per patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub image_shape: [usize; 3],
    pub base_channels: usize,
    pub stages: usize,
    pub side: Side,
}

impl DiscriminatorConfig {
    pub fn new(image_shape: [usize; 3], side: Side) -> Self {
        Self {
            image_shape,
            base_channels: 32,
            stages: 3,
            side,
        }
    }

    /// Spatial size of the score map.
    pub fn score_map_shape(&self) -> [usize; 2] {
        let mut h = self.image_shape[0];
        let mut w = self.image_shape[1];
        for _ in 0..self.stages {
            // k=4, s=2, p=1
            h = (h + 2 - 4) / 2 + 1;
            w = (w + 2 - 4) / 2 + 1;
        }
        [h, w]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator<T> {
    config: DiscriminatorConfig,
    net: Network<T>,
}

impl<T: Element> Discriminator<T> {
    pub fn new(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        let min_side = 2usize << config.stages;
        if config.image_shape[0] < min_side / 2 || config.image_shape[1] < min_side / 2 {
            return Err(Error::Shape(format!(
                "{:?} too small for {} stride-2 stages",
                config.image_shape, config.stages
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = NetBuilder::<T, _>::new(&mut rng);
        let mut layers = Vec::new();
        let mut cin = config.image_shape[2];
        for i in 0..config.stages {
            let cout = config.base_channels << i;
            layers.push(b.conv(&format!("stage{i}"), cin, cout, 4, 2, 1));
            if i > 0 {
                layers.push(Layer::InstanceNorm);
            }
            layers.push(Layer::LeakyRelu(0.2));
            cin = cout;
        }
        layers.push(b.conv("head", cin, 1, 3, 1, 1));
        let params = b.params;
        Ok(Self {
            config,
            net: Network::new(layers, params),
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet<T> {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        self.net.params_mut()
    }

    /// Raw patch scores, `[batch, h', w', 1]`.
    pub fn forward(&self, images: &Tensor<T>) -> Result<Tensor<T>> {
        check_image_batch(images, self.config.image_shape)?;
        self.net.run(images.clone(), None)
    }

    pub fn forward_traced(&self, images: &Tensor<T>) -> Result<(Tensor<T>, Trace<T>)> {
        check_image_batch(images, self.config.image_shape)?;
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

    pub fn cast<U: Element>(&self) -> Discriminator<U> {
        Discriminator {
            config: self.config.clone(),
            net: self.net.cast(),
        }
    }
}

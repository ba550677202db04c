//! Generators, patch discriminators and classifiers, each a layer list over
//! a named [`ParamSet`](crate::nn::ParamSet).

mod classifier;
mod discriminator;
mod generator;
mod io;
mod label_map;

pub use classifier::{argmax, softmax, Classifier, ClassifierConfig};
pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use generator::{Direction, Generator, GeneratorConfig};
pub use io::{load_params, push_params, ModelStamp};
pub use label_map::{embed_label_map, embed_label_map_batch, LabelMap};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{self, Grads, Layer, ParamSet, Trace};
use crate::tensor::{Element, Tensor};

/// Which side of the translation a discriminator or classifier judges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    RealSide,
    SimSide,
}

/// Layers plus the parameters they index into.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    layers: Vec<Layer>,
    params: ParamSet<T>,
}

impl<T: Element> Network<T> {
    pub fn new(layers: Vec<Layer>, params: ParamSet<T>) -> Self {
        Self { layers, params }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn run(&self, x: Tensor<T>, labels: Option<&[usize]>) -> Result<Tensor<T>> {
        Ok(nn::forward(&self.layers, &self.params, x, labels, false)?.0)
    }

    pub fn run_traced(&self, x: Tensor<T>, labels: Option<&[usize]>) -> Result<(Tensor<T>, Trace<T>)> {
        nn::forward(&self.layers, &self.params, x, labels, true)
    }

    pub fn backward(
        &self,
        trace: &Trace<T>,
        grad: Tensor<T>,
        grads: Option<&mut Grads<T>>,
        need_input_grad: bool,
    ) -> Result<Tensor<T>> {
        nn::backward(&self.layers, &self.params, trace, grad, grads, need_input_grad)
    }

    pub fn cast<U: Element>(&self) -> Network<U> {
        Network {
            layers: self.layers.clone(),
            params: self.params.cast(),
        }
    }
}

fn check_image_batch<T: Element>(x: &Tensor<T>, shape: [usize; 3]) -> Result<usize> {
    let (n, h, w, c) = x.dims4()?;
    if [h, w, c] != shape {
        return Err(crate::error::Error::Shape(format!(
            "network configured for {shape:?} images, got {:?}",
            [h, w, c]
        )));
    }
    Ok(n)
}

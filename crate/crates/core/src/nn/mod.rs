//! A small layer library with explicit backward passes.
//!
//! Parameters live in a [`ParamSet`] held by the network; a forward pass
//! borrows them immutably and returns a trace of per-layer caches, so the
//! same network can be applied several times within one optimization step
//! (the cycle passes reuse both generators) and each application
//! back-propagated separately into a shared [`Grads`] accumulator.

mod conv;
mod ops;

pub use conv::Conv2d;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Standard deviation of the zero-mean Gaussian used for every weight.
pub const INIT_STD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet<T> {
    entries: Vec<Param<T>>,
}

impl<T: Element> ParamSet<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], value: Vec<T>) -> usize {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.entries.push(Param {
            name: name.into(),
            shape: shape.to_vec(),
            value,
        });
        self.entries.len() - 1
    }

    pub fn get(&self, index: usize) -> &Param<T> {
        &self.entries[index]
    }

    pub fn value(&self, index: usize) -> &[T] {
        &self.entries[index].value
    }

    pub fn entries(&self) -> &[Param<T>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Param<T>] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalars.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.entries.iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.scalar_count() {
            return Err(Error::Shape(format!(
                "flat parameter vector has {} scalars, expected {}",
                flat.len(),
                self.scalar_count()
            )));
        }
        let mut offset = 0;
        for p in &mut self.entries {
            let n = p.value.len();
            p.value.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn first_non_finite(&self) -> Option<&str> {
        self.entries
            .iter()
            .find(|p| p.value.iter().any(|v| !v.is_finite()))
            .map(|p| p.name.as_str())
    }

    pub fn cast<U: Element>(&self) -> ParamSet<U> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    shape: p.shape.clone(),
                    value: p
                        .value
                        .iter()
                        .map(|&v| U::from_f64(v.as_f64()).expect("cast"))
                        .collect(),
                })
                .collect(),
        }
    }

    /// Replaces values from `(name, shape, data)` triples; every parameter
    /// must be supplied exactly once.
    pub fn load_named<'a>(&mut self, mut lookup: impl FnMut(&str) -> Option<(&'a [usize], Vec<T>)>) -> Result<()> {
        for p in &mut self.entries {
            let (shape, data) =
                lookup(&p.name).ok_or_else(|| Error::Archive(format!("missing parameter tensor `{}`", p.name)))?;
            if shape != p.shape.as_slice() {
                return Err(Error::Archive(format!(
                    "parameter `{}` has shape {:?}, archive holds {:?}",
                    p.name, p.shape, shape
                )));
            }
            p.value = data;
        }
        Ok(())
    }
}

/// Gradient accumulator aligned with a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads<T> {
    pub tensors: Vec<Vec<T>>,
}

impl<T: Element> Grads<T> {
    pub fn zeros_like(params: &ParamSet<T>) -> Self {
        Self {
            tensors: params
                .entries()
                .iter()
                .map(|p| vec![T::zero(); p.value.len()])
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<T> {
        self.tensors.iter().flatten().copied().collect()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Conv(Conv2d),
    InstanceNorm,
    Relu,
    LeakyRelu(f64),
    Tanh,
    MaxPool2,
    Upsample2,
    Dense {
        weight: usize,
        bias: usize,
        inputs: usize,
        outputs: usize,
    },
    Residual(Vec<Layer>),
    /// Concatenates a one-hot label map of `classes` channels.
    EmbedLabel {
        classes: usize,
    },
}

#[derive(Debug)]
pub enum Cache<T> {
    Conv {
        cols: Vec<T>,
        in_shape: [usize; 4],
        out_hw: (usize, usize),
    },
    Norm {
        normalized: Vec<T>,
        inv_std: Vec<T>,
        shape: [usize; 4],
    },
    Relu {
        input: Vec<T>,
    },
    LeakyRelu {
        input: Vec<T>,
    },
    Tanh {
        output: Vec<T>,
    },
    MaxPool {
        argmax: Vec<u32>,
        in_shape: Vec<usize>,
    },
    Upsample {
        in_shape: [usize; 4],
    },
    Dense {
        input: Vec<T>,
        in_shape: Vec<usize>,
    },
    Residual(Vec<Cache<T>>),
    Embed {
        feature_channels: usize,
    },
}

/// Per-layer caches of one forward application.
pub type Trace<T> = Vec<Cache<T>>;

/// Runs `layers` on `x`. With `record` the returned trace supports
/// [`backward`]; otherwise it is empty.
pub fn forward<T: Element>(
    layers: &[Layer],
    params: &ParamSet<T>,
    mut x: Tensor<T>,
    labels: Option<&[usize]>,
    record: bool,
) -> Result<(Tensor<T>, Trace<T>)> {
    let mut trace = Vec::with_capacity(if record { layers.len() } else { 0 });
    for layer in layers {
        let (y, cache) = forward_layer(layer, params, x, labels, record)?;
        x = y;
        if let Some(c) = cache {
            trace.push(c);
        }
    }
    Ok((x, trace))
}

fn forward_layer<T: Element>(
    layer: &Layer,
    params: &ParamSet<T>,
    x: Tensor<T>,
    labels: Option<&[usize]>,
    record: bool,
) -> Result<(Tensor<T>, Option<Cache<T>>)> {
    Ok(match layer {
        Layer::Conv(conv) => {
            let (y, cols, in_shape) = conv.forward(params, &x)?;
            let (_, oh, ow, _) = y.dims4()?;
            let cache = record.then(|| Cache::Conv {
                cols,
                in_shape,
                out_hw: (oh, ow),
            });
            (y, cache)
        }
        Layer::InstanceNorm => {
            let (y, normalized, inv_std, shape) = ops::instance_norm(&x)?;
            let cache = record.then(|| Cache::Norm {
                normalized,
                inv_std,
                shape,
            });
            (y, cache)
        }
        Layer::Relu => {
            let y = x.map(|v| if v > T::zero() { v } else { T::zero() });
            let cache = record.then(|| Cache::Relu { input: x.into_data() });
            (y, cache)
        }
        Layer::LeakyRelu(slope) => {
            let s = T::lit(*slope);
            let y = x.map(|v| if v > T::zero() { v } else { s * v });
            let cache = record.then(|| Cache::LeakyRelu { input: x.into_data() });
            (y, cache)
        }
        Layer::Tanh => {
            let y = x.map(|v| v.tanh());
            let cache = record.then(|| Cache::Tanh {
                output: y.data().to_vec(),
            });
            (y, cache)
        }
        Layer::MaxPool2 => {
            let (y, argmax) = ops::max_pool2(&x)?;
            let cache = record.then(|| Cache::MaxPool {
                argmax,
                in_shape: x.shape().to_vec(),
            });
            (y, cache)
        }
        Layer::Upsample2 => {
            let (n, h, w, c) = x.dims4()?;
            let y = ops::upsample2(&x)?;
            (y, record.then_some(Cache::Upsample { in_shape: [n, h, w, c] }))
        }
        Layer::Dense {
            weight,
            bias,
            inputs,
            outputs,
        } => {
            let (n, per) = x.batch_split();
            if per != *inputs {
                return Err(Error::Shape(format!(
                    "dense layer expects {inputs} inputs per item, got {per}"
                )));
            }
            let mut y = Tensor::zeros(&[n, *outputs]);
            ops::dense_forward(
                x.data(),
                params.value(*weight),
                params.value(*bias),
                n,
                *inputs,
                *outputs,
                y.data_mut(),
            );
            let cache = record.then(|| Cache::Dense {
                in_shape: x.shape().to_vec(),
                input: x.into_data(),
            });
            (y, cache)
        }
        Layer::Residual(inner) => {
            let (fx, trace) = forward(inner, params, x.clone(), labels, record)?;
            if fx.shape() != x.shape() {
                return Err(Error::Shape(format!(
                    "residual branch changed shape {:?} -> {:?}",
                    x.shape(),
                    fx.shape()
                )));
            }
            let mut y = x;
            y.add_assign(&fx);
            (y, record.then_some(Cache::Residual(trace)))
        }
        Layer::EmbedLabel { classes } => {
            let (n, _, _, c) = x.dims4()?;
            let y = if *classes == 0 {
                x
            } else {
                let labels = labels.ok_or(Error::MissingLabel(*classes))?;
                if labels.len() != n {
                    return Err(Error::Shape(format!("{} labels for a batch of {n}", labels.len())));
                }
                crate::models::embed_label_map_batch(&x, labels, *classes)?
            };
            (y, record.then_some(Cache::Embed { feature_channels: c }))
        }
    })
}

/// Back-propagates `grad` through a recorded forward application.
///
/// Parameter gradients are accumulated into `grads` when given (frozen
/// networks pass `None`). Returns the gradient with respect to the input,
/// or an empty tensor when `need_input_grad` is false.
pub fn backward<T: Element>(
    layers: &[Layer],
    params: &ParamSet<T>,
    trace: &Trace<T>,
    mut grad: Tensor<T>,
    mut grads: Option<&mut Grads<T>>,
    need_input_grad: bool,
) -> Result<Tensor<T>> {
    if trace.len() != layers.len() {
        return Err(Error::Shape("backward called on an unrecorded forward pass".into()));
    }
    for (i, (layer, cache)) in layers.iter().zip(trace).enumerate().rev() {
        let wants_input = need_input_grad || i > 0;
        grad = backward_layer(layer, params, cache, grad, grads.as_deref_mut(), wants_input)?;
    }
    Ok(grad)
}

fn backward_layer<T: Element>(
    layer: &Layer,
    params: &ParamSet<T>,
    cache: &Cache<T>,
    grad: Tensor<T>,
    grads: Option<&mut Grads<T>>,
    need_input_grad: bool,
) -> Result<Tensor<T>> {
    Ok(match (layer, cache) {
        (Layer::Conv(conv), Cache::Conv { cols, in_shape, out_hw }) => {
            conv.backward(params, cols, *in_shape, *out_hw, &grad, grads, need_input_grad)?
        }
        (
            Layer::InstanceNorm,
            Cache::Norm {
                normalized,
                inv_std,
                shape,
            },
        ) => ops::instance_norm_backward(&grad, normalized, inv_std, *shape)?,
        (Layer::Relu, Cache::Relu { input }) => {
            let mut g = grad;
            for (gv, &x) in g.data_mut().iter_mut().zip(input) {
                if x <= T::zero() {
                    *gv = T::zero();
                }
            }
            g
        }
        (Layer::LeakyRelu(slope), Cache::LeakyRelu { input }) => {
            let s = T::lit(*slope);
            let mut g = grad;
            for (gv, &x) in g.data_mut().iter_mut().zip(input) {
                if x <= T::zero() {
                    *gv *= s;
                }
            }
            g
        }
        (Layer::Tanh, Cache::Tanh { output }) => {
            let mut g = grad;
            for (gv, &y) in g.data_mut().iter_mut().zip(output) {
                *gv *= T::one() - y * y;
            }
            g
        }
        (Layer::MaxPool2, Cache::MaxPool { argmax, in_shape }) => {
            let mut gx = Tensor::zeros(in_shape);
            let dst = gx.data_mut();
            for (&idx, &g) in argmax.iter().zip(grad.data()) {
                dst[idx as usize] += g;
            }
            gx
        }
        (Layer::Upsample2, Cache::Upsample { in_shape }) => ops::upsample2_backward(&grad, *in_shape),
        (
            Layer::Dense {
                weight,
                bias,
                inputs,
                outputs,
            },
            Cache::Dense { input, in_shape },
        ) => {
            let n = in_shape[0];
            let (dw, db) = match grads {
                Some(g) => {
                    let (lo, hi) = g.tensors.split_at_mut((*weight).max(*bias));
                    if weight < bias {
                        (Some(&mut lo[*weight]), Some(&mut hi[0]))
                    } else {
                        (Some(&mut hi[0]), Some(&mut lo[*bias]))
                    }
                }
                None => (None, None),
            };
            let gx = ops::dense_backward(
                input,
                params.value(*weight),
                grad.data(),
                n,
                *inputs,
                *outputs,
                dw.map(|v| v.as_mut_slice()),
                db.map(|v| v.as_mut_slice()),
                need_input_grad,
            );
            if need_input_grad {
                Tensor::from_vec(in_shape, gx)?
            } else {
                Tensor::zeros(&[0])
            }
        }
        (Layer::Residual(inner), Cache::Residual(trace)) => {
            let mut g = backward(inner, params, trace, grad.clone(), grads, true)?;
            g.add_assign(&grad);
            g
        }
        (Layer::EmbedLabel { classes }, Cache::Embed { feature_channels }) => {
            if *classes == 0 {
                grad
            } else {
                let (n, h, w, ct) = grad.dims4()?;
                let c = *feature_channels;
                let mut gx = Tensor::zeros(&[n, h, w, c]);
                for (dst, src) in gx
                    .data_mut()
                    .chunks_exact_mut(c.max(1))
                    .zip(grad.data().chunks_exact(ct))
                {
                    if c > 0 {
                        dst.copy_from_slice(&src[..c]);
                    }
                }
                gx
            }
        }
        _ => return Err(Error::Shape("trace does not match the layer list".into())),
    })
}

/// Registers parameters and emits layers while a network is assembled.
pub struct NetBuilder<'r, T, R> {
    pub params: ParamSet<T>,
    rng: &'r mut R,
}

impl<'r, T: Element, R: Rng> NetBuilder<'r, T, R> {
    pub fn new(rng: &'r mut R) -> Self {
        Self {
            params: ParamSet::new(),
            rng,
        }
    }

    fn gaussian(&mut self, count: usize) -> Vec<T> {
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        (0..count).map(|_| T::lit(normal.sample(&mut *self.rng))).collect()
    }

    pub fn conv(&mut self, name: &str, cin: usize, cout: usize, kernel: usize, stride: usize, pad: usize) -> Layer {
        let w = self.gaussian(kernel * kernel * cin * cout);
        let weight = self
            .params
            .push(format!("{name}.weight"), &[kernel, kernel, cin, cout], w);
        let bias = self.params.push(format!("{name}.bias"), &[cout], vec![T::zero(); cout]);
        Layer::Conv(Conv2d {
            weight,
            bias: Some(bias),
            cin,
            cout,
            kernel,
            stride,
            pad,
        })
    }

    pub fn dense(&mut self, name: &str, inputs: usize, outputs: usize) -> Layer {
        let w = self.gaussian(inputs * outputs);
        let weight = self.params.push(format!("{name}.weight"), &[inputs, outputs], w);
        let bias = self
            .params
            .push(format!("{name}.bias"), &[outputs], vec![T::zero(); outputs]);
        Layer::Dense {
            weight,
            bias,
            inputs,
            outputs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_readout(y: &Tensor<f64>) -> (f64, Tensor<f64>) {
        // sum_i w_i * y_i with fixed pseudo-random weights
        let w: Vec<f64> = (0..y.len()).map(|i| ((i * 7 + 3) as f64).sin()).collect();
        let v = y.data().iter().zip(&w).map(|(a, b)| a * b).sum();
        (v, Tensor::from_vec(y.shape(), w).unwrap())
    }

    fn check_layers(layers: &[Layer], params: &ParamSet<f64>, x: Tensor<f64>, labels: Option<&[usize]>) {
        let (y, trace) = forward(layers, params, x.clone(), labels, true).unwrap();
        let (_, gy) = scalar_readout(&y);
        let mut grads = Grads::zeros_like(params);
        let gx = backward(layers, params, &trace, gy, Some(&mut grads), true).unwrap();
        let eps = 1e-6;
        let eval = |p: &ParamSet<f64>, x: &Tensor<f64>| {
            let (y, _) = forward(layers, p, x.clone(), labels, false).unwrap();
            scalar_readout(&y).0
        };
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp.data_mut()[i] += eps;
            let mut xm = x.clone();
            xm.data_mut()[i] -= eps;
            let fd = (eval(params, &xp) - eval(params, &xm)) / (2.0 * eps);
            let a = gx.data()[i];
            assert!(
                (fd - a).abs() <= 1e-6 + 1e-5 * a.abs().max(fd.abs()),
                "input {i}: fd {fd} vs {a}"
            );
        }
        let flat = params.flatten();
        let analytic = grads.flatten();
        for i in 0..flat.len() {
            let mut p = params.clone();
            let mut f = flat.clone();
            f[i] += eps;
            p.set_flat(&f).unwrap();
            let up = eval(&p, &x);
            f[i] -= 2.0 * eps;
            p.set_flat(&f).unwrap();
            let down = eval(&p, &x);
            let fd = (up - down) / (2.0 * eps);
            let a = analytic[i];
            assert!(
                (fd - a).abs() <= 1e-6 + 1e-5 * a.abs().max(fd.abs()),
                "param {i}: fd {fd} vs {a}"
            );
        }
    }

    fn input(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn conv_stack_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut b = NetBuilder::<f64, _>::new(&mut rng);
        // larger init than the production default so signals are not tiny
        let c1 = b.conv("c1", 2, 3, 3, 2, 1);
        let c2 = b.conv("c2", 3, 2, 3, 1, 1);
        let mut params = b.params;
        for p in params.entries_mut() {
            p.value.iter_mut().for_each(|v| *v *= 20.0);
        }
        let layers = vec![
            c1,
            Layer::InstanceNorm,
            Layer::LeakyRelu(0.2),
            Layer::Upsample2,
            c2,
            Layer::Tanh,
        ];
        check_layers(&layers, &params, input(&[2, 6, 6, 2], 9), None);
    }

    #[test]
    fn residual_pool_dense_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut b = NetBuilder::<f64, _>::new(&mut rng);
        let r = b.conv("r", 3, 3, 3, 1, 1);
        let d = b.dense("d", 2 * 2 * 3, 4);
        let mut params = b.params;
        for p in params.entries_mut() {
            p.value.iter_mut().for_each(|v| *v *= 30.0);
        }
        let layers = vec![Layer::Residual(vec![r, Layer::Relu]), Layer::MaxPool2, d];
        check_layers(&layers, &params, input(&[2, 4, 4, 3], 11), None);
    }

    #[test]
    fn embed_label_gradient_drops_label_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = NetBuilder::<f64, _>::new(&mut rng);
        let c = b.conv("c", 2 + 3, 1, 1, 1, 0);
        let mut params = b.params;
        for p in params.entries_mut() {
            p.value.iter_mut().for_each(|v| *v *= 40.0);
        }
        let layers = vec![Layer::EmbedLabel { classes: 3 }, c];
        check_layers(&layers, &params, input(&[2, 2, 2, 2], 2), Some(&[2, 0]));
    }
}

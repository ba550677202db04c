use serde::{Deserialize, Serialize};

use super::{Grads, ParamSet};
use crate::error::{Error, Result};
use crate::tensor::{gemm, Element, Tensor};

/// 2-D convolution over NHWC input with zero padding. Weights are stored
/// `[kernel, kernel, cin, cout]`, which is the im2col column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv2d {
    pub weight: usize,
    pub bias: Option<usize>,
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (k, s, p) = (self.kernel, self.stride, self.pad);
        if h + 2 * p < k || w + 2 * p < k {
            return Err(Error::Shape(format!("{h}x{w} input too small for a {k}x{k} kernel")));
        }
        Ok(((h + 2 * p - k) / s + 1, (w + 2 * p - k) / s + 1))
    }

    pub(super) fn forward<T: Element>(
        &self,
        params: &ParamSet<T>,
        x: &Tensor<T>,
    ) -> Result<(Tensor<T>, Vec<T>, [usize; 4])> {
        let (n, h, w, c) = x.dims4()?;
        if c != self.cin {
            return Err(Error::Shape(format!(
                "conv expects {} input channels, got {c}",
                self.cin
            )));
        }
        let (oh, ow) = self.output_hw(h, w)?;
        let cols = im2col(x.data(), [n, h, w, c], self, oh, ow);
        let rows = n * oh * ow;
        let kk = self.kernel * self.kernel * c;
        let mut y = Tensor::zeros(&[n, oh, ow, self.cout]);
        gemm(
            rows,
            kk,
            self.cout,
            &cols,
            false,
            params.value(self.weight),
            false,
            y.data_mut(),
            false,
        );
        if let Some(b) = self.bias {
            let bias = params.value(b);
            for row in y.data_mut().chunks_exact_mut(self.cout) {
                for (v, &bv) in row.iter_mut().zip(bias) {
                    *v += bv;
                }
            }
        }
        Ok((y, cols, [n, h, w, c]))
    }

    #[allow(clippy::too_many_arguments)]
    pub(super) fn backward<T: Element>(
        &self,
        params: &ParamSet<T>,
        cols: &[T],
        in_shape: [usize; 4],
        (oh, ow): (usize, usize),
        grad: &Tensor<T>,
        grads: Option<&mut Grads<T>>,
        need_input_grad: bool,
    ) -> Result<Tensor<T>> {
        let [n, _, _, c] = in_shape;
        let rows = n * oh * ow;
        let kk = self.kernel * self.kernel * c;
        if grad.len() != rows * self.cout {
            return Err(Error::Shape("conv backward: gradient size".into()));
        }
        if let Some(g) = grads {
            gemm(
                kk,
                rows,
                self.cout,
                cols,
                true,
                grad.data(),
                false,
                &mut g.tensors[self.weight],
                true,
            );
            if let Some(b) = self.bias {
                let db = &mut g.tensors[b];
                for row in grad.data().chunks_exact(self.cout) {
                    for (d, &v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
            }
        }
        if !need_input_grad {
            return Ok(Tensor::zeros(&[0]));
        }
        let mut dcols = vec![T::zero(); rows * kk];
        gemm(
            rows,
            self.cout,
            kk,
            grad.data(),
            false,
            params.value(self.weight),
            true,
            &mut dcols,
            false,
        );
        let mut gx = Tensor::zeros(&in_shape);
        col2im(&dcols, gx.data_mut(), in_shape, self, oh, ow);
        Ok(gx)
    }
}

/// Visits every (column offset, input offset) pair of in-bounds taps.
#[inline]
fn for_each_tap([n, h, w, c]: [usize; 4], conv: &Conv2d, oh: usize, ow: usize, mut f: impl FnMut(usize, usize)) {
    let (k, s, p) = (conv.kernel, conv.stride, conv.pad);
    let kk = k * k * c;
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = ((b * oh + oy) * ow + ox) * kk;
                for ky in 0..k {
                    let iy = (oy * s + ky) as isize - p as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..k {
                        let ix = (ox * s + kx) as isize - p as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let src = ((b * h + iy as usize) * w + ix as usize) * c;
                        f(row + (ky * k + kx) * c, src);
                    }
                }
            }
        }
    }
}

fn im2col<T: Element>(x: &[T], shape: [usize; 4], conv: &Conv2d, oh: usize, ow: usize) -> Vec<T> {
    let [n, _, _, c] = shape;
    let mut cols = vec![T::zero(); n * oh * ow * conv.kernel * conv.kernel * c];
    for_each_tap(shape, conv, oh, ow, |dst, src| {
        cols[dst..dst + c].copy_from_slice(&x[src..src + c]);
    });
    cols
}

fn col2im<T: Element>(cols: &[T], gx: &mut [T], shape: [usize; 4], conv: &Conv2d, oh: usize, ow: usize) {
    let c = shape[3];
    for_each_tap(shape, conv, oh, ow, |col, dst| {
        for (g, &v) in gx[dst..dst + c].iter_mut().zip(&cols[col..col + c]) {
            *g += v;
        }
    });
}

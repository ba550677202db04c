use crate::error::{Error, Result};
use crate::tensor::{gemm, Element, Tensor};

const NORM_EPS: f64 = 1e-5;

type NormOutput<T> = (Tensor<T>, Vec<T>, Vec<T>, [usize; 4]);

/// Instance normalization without affine parameters: each (item, channel)
/// plane is shifted to zero mean and scaled to unit (biased) variance.
pub(super) fn instance_norm<T: Element>(x: &Tensor<T>) -> Result<NormOutput<T>> {
    let (n, h, w, c) = x.dims4()?;
    let hw = h * w;
    let inv_hw = T::one() / T::lit(hw as f64);
    let eps = T::lit(NORM_EPS);
    let mut y = Tensor::zeros(&[n, h, w, c]);
    let mut inv_std = vec![T::zero(); n * c];
    for b in 0..n {
        let plane = &x.data()[b * hw * c..(b + 1) * hw * c];
        let mut mean = vec![T::zero(); c];
        for px in plane.chunks_exact(c) {
            for (m, &v) in mean.iter_mut().zip(px) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m *= inv_hw);
        let mut var = vec![T::zero(); c];
        for px in plane.chunks_exact(c) {
            for ((s, &v), &m) in var.iter_mut().zip(px).zip(&mean) {
                let d = v - m;
                *s += d * d;
            }
        }
        let istd = &mut inv_std[b * c..(b + 1) * c];
        for (i, s) in istd.iter_mut().zip(&var) {
            *i = T::one() / (*s * inv_hw + eps).sqrt();
        }
        let out = &mut y.data_mut()[b * hw * c..(b + 1) * hw * c];
        for (o, px) in out.chunks_exact_mut(c).zip(plane.chunks_exact(c)) {
            for ch in 0..c {
                o[ch] = (px[ch] - mean[ch]) * istd[ch];
            }
        }
    }
    let normalized = y.data().to_vec();
    Ok((y, normalized, inv_std, [n, h, w, c]))
}

pub(super) fn instance_norm_backward<T: Element>(
    grad: &Tensor<T>,
    normalized: &[T],
    inv_std: &[T],
    [n, h, w, c]: [usize; 4],
) -> Result<Tensor<T>> {
    let hw = h * w;
    let inv_hw = T::one() / T::lit(hw as f64);
    let mut gx = Tensor::zeros(&[n, h, w, c]);
    for b in 0..n {
        let range = b * hw * c..(b + 1) * hw * c;
        let g = &grad.data()[range.clone()];
        let xh = &normalized[range.clone()];
        let mut mean_g = vec![T::zero(); c];
        let mut mean_gx = vec![T::zero(); c];
        for (gp, xp) in g.chunks_exact(c).zip(xh.chunks_exact(c)) {
            for ch in 0..c {
                mean_g[ch] += gp[ch];
                mean_gx[ch] += gp[ch] * xp[ch];
            }
        }
        mean_g.iter_mut().for_each(|v| *v *= inv_hw);
        mean_gx.iter_mut().for_each(|v| *v *= inv_hw);
        let istd = &inv_std[b * c..(b + 1) * c];
        let out = &mut gx.data_mut()[range];
        for ((o, gp), xp) in out.chunks_exact_mut(c).zip(g.chunks_exact(c)).zip(xh.chunks_exact(c)) {
            for ch in 0..c {
                o[ch] = istd[ch] * (gp[ch] - mean_g[ch] - xp[ch] * mean_gx[ch]);
            }
        }
    }
    Ok(gx)
}

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
pub(super) fn max_pool2<T: Element>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<u32>)> {
    let (n, h, w, c) = x.dims4()?;
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::Shape(format!("{h}x{w} too small to pool")));
    }
    let mut y = Tensor::zeros(&[n, oh, ow, c]);
    let mut argmax = vec![0u32; n * oh * ow * c];
    let src = x.data();
    let dst = y.data_mut();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let o = ((b * oh + oy) * ow + ox) * c;
                for ch in 0..c {
                    let mut best_i = ((b * h + 2 * oy) * w + 2 * ox) * c + ch;
                    let mut best = src[best_i];
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let i = ((b * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch;
                        if src[i] > best {
                            best = src[i];
                            best_i = i;
                        }
                    }
                    dst[o + ch] = best;
                    argmax[o + ch] = best_i as u32;
                }
            }
        }
    }
    Ok((y, argmax))
}

/// Nearest-neighbour ×2 upsampling.
pub(super) fn upsample2<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, h, w, c) = x.dims4()?;
    let mut y = Tensor::zeros(&[n, 2 * h, 2 * w, c]);
    let src = x.data();
    let dst = y.data_mut();
    for b in 0..n {
        for oy in 0..2 * h {
            for ox in 0..2 * w {
                let s = ((b * h + oy / 2) * w + ox / 2) * c;
                let d = ((b * 2 * h + oy) * 2 * w + ox) * c;
                dst[d..d + c].copy_from_slice(&src[s..s + c]);
            }
        }
    }
    Ok(y)
}

pub(super) fn upsample2_backward<T: Element>(grad: &Tensor<T>, in_shape: [usize; 4]) -> Tensor<T> {
    let [n, h, w, c] = in_shape;
    let mut gx = Tensor::zeros(&in_shape);
    let src = grad.data();
    let dst = gx.data_mut();
    for b in 0..n {
        for oy in 0..2 * h {
            for ox in 0..2 * w {
                let s = ((b * 2 * h + oy) * 2 * w + ox) * c;
                let d = ((b * h + oy / 2) * w + ox / 2) * c;
                for ch in 0..c {
                    dst[d + ch] += src[s + ch];
                }
            }
        }
    }
    gx
}

pub(super) fn dense_forward<T: Element>(
    x: &[T],
    weight: &[T],
    bias: &[T],
    n: usize,
    inputs: usize,
    outputs: usize,
    y: &mut [T],
) {
    gemm(n, inputs, outputs, x, false, weight, false, y, false);
    for row in y.chunks_exact_mut(outputs) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(super) fn dense_backward<T: Element>(
    x: &[T],
    weight: &[T],
    grad: &[T],
    n: usize,
    inputs: usize,
    outputs: usize,
    dw: Option<&mut [T]>,
    db: Option<&mut [T]>,
    need_input_grad: bool,
) -> Vec<T> {
    if let Some(dw) = dw {
        gemm(inputs, n, outputs, x, true, grad, false, dw, true);
    }
    if let Some(db) = db {
        for row in grad.chunks_exact(outputs) {
            for (d, &g) in db.iter_mut().zip(row) {
                *d += g;
            }
        }
    }
    if !need_input_grad {
        return Vec::new();
    }
    let mut gx = vec![T::zero(); n * inputs];
    gemm(n, outputs, inputs, grad, false, weight, true, &mut gx, false);
    gx
}

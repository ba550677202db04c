use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// A class label tiled over an `h × w` grid as a one-hot `n`-channel map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub label: usize,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, classes: usize, label: usize) -> Result<Self> {
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Self {
            height,
            width,
            classes,
            label,
        })
    }

    /// `h × w × n` tensor.
    pub fn to_tensor<T: Element>(&self) -> Tensor<T> {
        let mut t = Tensor::zeros(&[self.height, self.width, self.classes]);
        for px in t.data_mut().chunks_exact_mut(self.classes) {
            px[self.label] = T::one();
        }
        t
    }
}

/// Concatenates the label map of `label` after the `c` feature channels of
/// an `h × w × c` bottleneck, giving `h × w × (c + n)`.
pub fn embed_label_map<T: Element>(bottleneck: &Tensor<T>, label: usize, classes: usize) -> Result<Tensor<T>> {
    let [h, w, c] = match bottleneck.shape() {
        &[h, w, c] => [h, w, c],
        other => return Err(Error::Shape(format!("bottleneck must be h x w x c, got {other:?}"))),
    };
    if classes > 0 && label >= classes {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    let batched = bottleneck.clone().reshape(&[1, h, w, c])?;
    let out = embed_label_map_batch(&batched, &[label], classes)?;
    out.reshape(&[h, w, c + classes])
}

/// Batched form over an NHWC tensor, one label per item.
pub fn embed_label_map_batch<T: Element>(x: &Tensor<T>, labels: &[usize], classes: usize) -> Result<Tensor<T>> {
    let (n, h, w, c) = x.dims4()?;
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for a batch of {n}", labels.len())));
    }
    if classes == 0 {
        return Ok(x.clone());
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label: bad, classes });
    }
    let ct = c + classes;
    let mut y = Tensor::zeros(&[n, h, w, ct]);
    let hw = h * w;
    for (b, &label) in labels.iter().enumerate() {
        let src = &x.data()[b * hw * c..(b + 1) * hw * c];
        let dst = &mut y.data_mut()[b * hw * ct..(b + 1) * hw * ct];
        for (p, out) in dst.chunks_exact_mut(ct).enumerate() {
            out[..c].copy_from_slice(&src[p * c..(p + 1) * c]);
            out[c + label] = T::one();
        }
    }
    Ok(y)
}

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// History of generated images shown to a discriminator. Until full, every
/// fake is stored and returned; afterwards each fake is, with probability
/// 1/2, swapped for a uniformly chosen stored one.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePool {
    capacity: usize,
    item_shape: Vec<usize>,
    images: Vec<Vec<f32>>,
}

impl ImagePool {
    pub fn new(capacity: usize, item_shape: &[usize]) -> Self {
        Self {
            capacity,
            item_shape: item_shape.to_vec(),
            images: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn query<R: Rng>(&mut self, batch: &Tensor<f32>, rng: &mut R) -> Result<Tensor<f32>> {
        if batch.shape().get(1..) != Some(self.item_shape.as_slice()) {
            return Err(Error::Shape(format!(
                "pool holds {:?} items, given a {:?} batch",
                self.item_shape,
                batch.shape()
            )));
        }
        if self.capacity == 0 {
            return Ok(batch.clone());
        }
        let (n, _) = batch.batch_split();
        let mut out = Vec::with_capacity(batch.len());
        for i in 0..n {
            let fresh = batch.item(i);
            if self.images.len() < self.capacity {
                self.images.push(fresh.to_vec());
                out.extend_from_slice(fresh);
            } else if rng.gen_bool(0.5) {
                let k = rng.gen_range(0..self.capacity);
                out.extend_from_slice(&self.images[k]);
                self.images[k] = fresh.to_vec();
            } else {
                out.extend_from_slice(fresh);
            }
        }
        Tensor::from_vec(batch.shape(), out)
    }

    /// Stored images as one `[len, ...]` tensor.
    pub fn to_tensor(&self) -> (Vec<usize>, Vec<f32>) {
        let mut shape = vec![self.images.len()];
        shape.extend_from_slice(&self.item_shape);
        (shape, self.images.concat())
    }

    pub fn from_tensor(capacity: usize, shape: &[usize], data: &[f32]) -> Result<Self> {
        let (&n, item_shape) = shape
            .split_first()
            .ok_or_else(|| Error::Archive("pool tensor without a leading axis".into()))?;
        if n > capacity {
            return Err(Error::Archive(format!("pool of capacity {capacity} holds {n} images")));
        }
        let per: usize = item_shape.iter().product();
        Ok(Self {
            capacity,
            item_shape: item_shape.to_vec(),
            images: data.chunks_exact(per.max(1)).take(n).map(<[f32]>::to_vec).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(v: f32) -> Tensor<f32> {
        Tensor::from_vec(&[1, 1], vec![v]).unwrap()
    }

    #[test]
    fn fills_then_swaps_half_the_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut pool = ImagePool::new(50, &[1]);
        for i in 0..50 {
            assert_eq!(pool.query(&single(i as f32), &mut rng).unwrap().data(), &[i as f32]);
        }
        let draws = 20_000;
        let mut swapped = 0;
        let mut seen: std::collections::BTreeSet<u32> = (0..50).collect();
        for i in 0..draws {
            let fresh = 1000.0 + i as f32;
            let got = pool.query(&single(fresh), &mut rng).unwrap().data()[0];
            if got != fresh {
                swapped += 1;
                assert!(seen.contains(&(got as u32)), "returned an image never given");
            }
            seen.insert(fresh as u32);
            assert!(pool.len() <= pool.capacity());
        }
        let rate = swapped as f64 / draws as f64;
        assert!((rate - 0.5).abs() <= 0.02, "swap rate {rate}");
    }

    #[test]
    fn zero_capacity_passes_through_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut pool = ImagePool::new(0, &[2]);
        let b = Tensor::from_vec(&[1, 2], vec![0.5, -0.5]).unwrap();
        assert_eq!(pool.query(&b, &mut rng).unwrap(), b);
        assert!(pool.is_empty());

        let mut pool = ImagePool::new(4, &[2]);
        pool.query(&Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(), &mut rng)
            .unwrap();
        let (shape, data) = pool.to_tensor();
        assert_eq!(shape, vec![2, 2]);
        assert_eq!(ImagePool::from_tensor(4, &shape, &data).unwrap(), pool);
        let (shape, data) = ImagePool::new(4, &[2]).to_tensor();
        assert!(ImagePool::from_tensor(4, &shape, &data).unwrap().is_empty());
    }
}

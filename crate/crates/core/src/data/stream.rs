//! Deterministic minibatch sampling. Streams hold only indices and seeds so
//! their state can be checkpointed and resumed exactly.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Walks a fresh permutation of `0..len`, reshuffling whenever it runs out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampler {
    len: usize,
    seed: u64,
    passes: u64,
    order: Vec<usize>,
    cursor: usize,
}

impl Sampler {
    pub fn new(len: usize, seed: u64) -> Result<Self> {
        if len == 0 {
            return Err(Error::Batch("cannot sample from an empty corpus".into()));
        }
        let mut s = Self {
            len,
            seed,
            passes: 0,
            order: Vec::new(),
            cursor: 0,
        };
        s.reshuffle();
        Ok(s)
    }

    fn reshuffle(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.passes);
        self.order = (0..self.len).collect();
        self.order.shuffle(&mut rng);
        self.cursor = 0;
        self.passes += 1;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn take(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            if self.cursor == self.len {
                self.reshuffle();
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// `batch_size` items of one corpus.
    Single,
    /// `batch_size / 2` items of each corpus, concatenated (first corpus first).
    Mixed,
    /// `batch_size` items of each corpus, drawn independently.
    Paired,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchPart {
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub first: BatchPart,
    /// Present for paired streams only.
    pub second: Option<BatchPart>,
    /// Items drawn from the first and the second corpus.
    pub composition: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchStream {
    pub batch_size: usize,
    pub ordering_seed: u64,
    pub composition: Composition,
    first: Sampler,
    second: Option<Sampler>,
    batches_per_epoch: usize,
}

impl BatchStream {
    pub fn single(corpus: &Corpus, batch_size: usize, ordering_seed: u64) -> Result<Self> {
        check_batch_size(batch_size)?;
        Ok(Self {
            batch_size,
            ordering_seed,
            composition: Composition::Single,
            first: Sampler::new(corpus.len(), ordering_seed)?,
            second: None,
            batches_per_epoch: corpus.len().div_ceil(batch_size),
        })
    }

    /// Half-and-half batches; an epoch is one pass over the smaller corpus.
    pub fn mixed(first: &Corpus, second: &Corpus, batch_size: usize, ordering_seed: u64) -> Result<Self> {
        check_batch_size(batch_size)?;
        check_pair(first, second)?;
        if batch_size % 2 != 0 {
            return Err(Error::Batch(format!(
                "mixed batches need an even size, got {batch_size}"
            )));
        }
        let smaller = first.len().min(second.len());
        if batch_size > 2 * smaller {
            return Err(Error::Batch(format!(
                "batch size {batch_size} exceeds twice the smaller corpus ({smaller} items)"
            )));
        }
        let half = batch_size / 2;
        Ok(Self {
            batch_size,
            ordering_seed,
            composition: Composition::Mixed,
            first: Sampler::new(first.len(), ordering_seed)?,
            second: Some(Sampler::new(second.len(), ordering_seed ^ 0x5EED_0002)?),
            batches_per_epoch: smaller.div_ceil(half),
        })
    }

    /// Independent batches from each corpus; an epoch is one pass over the first.
    pub fn paired(first: &Corpus, second: &Corpus, batch_size: usize, ordering_seed: u64) -> Result<Self> {
        check_batch_size(batch_size)?;
        check_pair(first, second)?;
        Ok(Self {
            batch_size,
            ordering_seed,
            composition: Composition::Paired,
            first: Sampler::new(first.len(), ordering_seed)?,
            second: Some(Sampler::new(second.len(), ordering_seed ^ 0x5EED_0002)?),
            batches_per_epoch: first.len().div_ceil(batch_size),
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.batches_per_epoch
    }

    /// Index lists for the next batch, without touching pixel data.
    pub fn next_indices(&mut self) -> (Vec<usize>, Vec<usize>) {
        match self.composition {
            Composition::Single => (self.first.take(self.batch_size), Vec::new()),
            Composition::Mixed => {
                let half = self.batch_size / 2;
                let second = self.second.as_mut().expect("mixed stream has two samplers");
                (self.first.take(half), second.take(half))
            }
            Composition::Paired => {
                let second = self.second.as_mut().expect("paired stream has two samplers");
                (self.first.take(self.batch_size), second.take(self.batch_size))
            }
        }
    }

    /// The corpora must be the ones (or same-sized as those) the stream was built from.
    pub fn next_batch(&mut self, first: &Corpus, second: Option<&Corpus>) -> Result<Batch> {
        if first.len() != self.first.len() {
            return Err(Error::Batch(
                "first corpus changed size since the stream was built".into(),
            ));
        }
        if let (Some(s), Some(c)) = (&self.second, second) {
            if s.len() != c.len() {
                return Err(Error::Batch(
                    "second corpus changed size since the stream was built".into(),
                ));
            }
        }
        let needs_second = self.second.is_some();
        let second = match (needs_second, second) {
            (true, Some(c)) => Some(c),
            (false, _) => None,
            (true, None) => return Err(Error::Batch("two-corpus stream given one corpus".into())),
        };
        let (a, b) = self.next_indices();
        let (images, labels) = first.gather(&a);
        let first_part = BatchPart { images, labels };
        Ok(match self.composition {
            Composition::Single => Batch {
                first: first_part,
                second: None,
                composition: [a.len(), 0],
            },
            Composition::Mixed => {
                let (more, more_labels) = second.expect("checked").gather(&b);
                let mut labels = first_part.labels;
                labels.extend(more_labels);
                Batch {
                    first: BatchPart {
                        images: Tensor::stack(&[&first_part.images, &more])?,
                        labels,
                    },
                    second: None,
                    composition: [a.len(), b.len()],
                }
            }
            Composition::Paired => {
                let (images, labels) = second.expect("checked").gather(&b);
                Batch {
                    first: first_part,
                    second: Some(BatchPart { images, labels }),
                    composition: [a.len(), b.len()],
                }
            }
        })
    }
}

fn check_batch_size(batch_size: usize) -> Result<()> {
    if batch_size == 0 {
        return Err(Error::Batch("batch size must be positive".into()));
    }
    Ok(())
}

fn check_pair(a: &Corpus, b: &Corpus) -> Result<()> {
    if a.image_shape != b.image_shape {
        return Err(Error::Shape(format!(
            "paired corpora disagree on image shape: {:?} vs {:?}",
            a.image_shape, b.image_shape
        )));
    }
    Ok(())
}

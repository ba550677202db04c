use std::collections::BTreeSet;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};

/// Minor classes and the fraction of their items removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceSpec {
    pub minor_classes: BTreeSet<usize>,
    pub reduction_rate: f64,
}

impl ImbalanceSpec {
    pub fn new(minor_classes: impl IntoIterator<Item = usize>, reduction_rate: f64) -> Self {
        Self {
            minor_classes: minor_classes.into_iter().collect(),
            reduction_rate,
        }
    }

    pub fn validate(&self, class_count: usize) -> Result<()> {
        if !(0.0..1.0).contains(&self.reduction_rate) {
            return Err(Error::Imbalance(format!(
                "reduction_rate {} outside [0, 1)",
                self.reduction_rate
            )));
        }
        if let Some(&c) = self.minor_classes.iter().find(|&&c| c >= class_count) {
            return Err(Error::Imbalance(format!("minor class {c} outside [0, {class_count})")));
        }
        Ok(())
    }
}

/// `⌈(1 − rate) · n⌉`, robust to the representation error of rates such as
/// 0.99 (where the product lands a few ulps above the integer).
pub fn retained_count(n: usize, rate: f64) -> usize {
    let exact = (1.0 - rate) * n as f64;
    (exact - 1e-9 * exact.max(1.0)).ceil().max(0.0) as usize
}

/// Keeps a uniformly drawn `retained_count` subset of every minor class and
/// every item of the other classes, preserving corpus order.
pub fn induce_imbalance(corpus: &Corpus, spec: &ImbalanceSpec, seed: u64) -> Result<Corpus> {
    spec.validate(corpus.class_count)?;
    let mut keep = vec![true; corpus.len()];
    for &class in &spec.minor_classes {
        let members: Vec<usize> = corpus
            .items
            .iter()
            .enumerate()
            .filter(|(_, i)| i.label == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            return Err(Error::Imbalance(format!(
                "minor class {class} has no items in `{}`",
                corpus.name
            )));
        }
        let retain = retained_count(members.len(), spec.reduction_rate);
        if retain == 0 {
            return Err(Error::Imbalance(format!(
                "rate {} would leave class {class} empty",
                spec.reduction_rate
            )));
        }
        if retain == members.len() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (class as u64).wrapping_mul(0x9E37_79B9));
        let chosen: BTreeSet<usize> = index::sample(&mut rng, members.len(), retain).into_iter().collect();
        for (pos, &item) in members.iter().enumerate() {
            keep[item] = chosen.contains(&pos);
        }
    }
    Ok(Corpus {
        items: corpus
            .items
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(i, _)| i.clone())
            .collect(),
        ..corpus.empty_like()
    })
}

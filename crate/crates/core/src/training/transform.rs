use crate::data::{Corpus, Domain, Image, LabeledImage};
use crate::error::{Error, Result};
use crate::eval::translate_corpus;
use crate::models::{Direction, Generator};

/// Maps every item through the generator (conditioned on its own label when
/// the generator is conditional). Labels and order are kept; the domain flag
/// flips.
pub fn transform_corpus(generator: &Generator<f32>, corpus: &Corpus) -> Result<Corpus> {
    let cfg = generator.config();
    let expected = match cfg.direction {
        Direction::S2r => Domain::Simulated,
        Direction::R2s => Domain::Real,
    };
    if corpus.domain != expected {
        return Err(Error::Config(format!(
            "{} translates {:?} images, corpus `{}` is {:?}",
            cfg.direction.tag(),
            expected,
            corpus.name,
            corpus.domain
        )));
    }
    if cfg.label_channels > 0 && cfg.label_channels != corpus.class_count {
        return Err(Error::Config(format!(
            "generator embeds {} label channels, corpus has {} classes",
            cfg.label_channels, corpus.class_count
        )));
    }
    if cfg.image_shape != corpus.image_shape {
        return Err(Error::Shape(format!(
            "generator expects {:?} images, corpus holds {:?}",
            cfg.image_shape, corpus.image_shape
        )));
    }
    let domain = corpus.domain.flipped();
    let pixels = translate_corpus(generator, corpus)?;
    let items = corpus
        .items
        .iter()
        .zip(pixels)
        .map(|(item, data)| {
            Ok(LabeledImage {
                pixels: Image::new(corpus.image_shape, data)?,
                label: item.label,
                domain,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(
        format!("{}:{}", corpus.name, cfg.direction.tag()),
        domain,
        corpus.class_count,
        corpus.image_shape,
        items,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_synthetic_corpus, DatasetManifest, Split};
    use crate::models::GeneratorConfig;

    fn sim() -> Corpus {
        build_synthetic_corpus(&DatasetManifest::synthetic(
            "s",
            Domain::Simulated,
            Split::Train,
            3,
            5,
            [16, 16, 3],
            2,
        ))
        .unwrap()
    }

    #[test]
    fn identity_generator_keeps_pixels_and_labels() {
        let c = sim();
        let g = Generator::<f32>::new(GeneratorConfig::identity([16, 16, 3], Direction::S2r), 0).unwrap();
        let t = transform_corpus(&g, &c).unwrap();
        assert_eq!(t.len(), c.len());
        assert_eq!(t.labels(), c.labels());
        assert_eq!(t.domain, Domain::Real);
        for (a, b) in t.items.iter().zip(&c.items) {
            assert_eq!(a.pixels, b.pixels);
        }
    }

    #[test]
    fn conditional_generator_output_stays_in_range() {
        let c = sim();
        let mut cfg = GeneratorConfig::new([16, 16, 3], Direction::S2r).with_labels(3);
        cfg.base_channels = 4;
        let g = Generator::<f32>::new(cfg, 1).unwrap();
        let t = transform_corpus(&g, &c).unwrap();
        assert!(t.items.iter().all(|i| i.pixels.data.iter().all(|v| v.abs() < 1.0)));
    }

    #[test]
    fn mismatches_are_rejected() {
        let c = sim();
        let wrong_dir = Generator::<f32>::new(GeneratorConfig::identity([16, 16, 3], Direction::R2s), 0).unwrap();
        assert!(transform_corpus(&wrong_dir, &c).is_err());
        let mut cfg = GeneratorConfig::new([16, 16, 3], Direction::S2r).with_labels(4);
        cfg.base_channels = 2;
        let g = Generator::<f32>::new(cfg, 1).unwrap();
        assert!(transform_corpus(&g, &c).is_err());
    }
}

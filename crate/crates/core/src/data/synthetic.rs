//! Desk-scale stand-in for a street-number / handwritten-digit pair.
//!
//! The simulated domain renders crisp anti-aliased glyphs in a random colour
//! over a random colour gradient; the real domain renders thick white
//! strokes on black under a random affine map plus a smooth sinusoidal
//! displacement field, replicated to every channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::glyphs::{digit_strokes, distance_to_strokes};
use super::{Corpus, DatasetManifest, Domain, Image, LabeledImage, Source, Split};
use crate::error::{Error, Result};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn item_seed(manifest: &DatasetManifest, class: usize, index: usize) -> u64 {
    let domain = match manifest.domain {
        Domain::Real => 1,
        Domain::Simulated => 2,
    };
    let split = match manifest.split {
        Split::Train => 1,
        Split::Validation => 2,
        Split::Test => 3,
    };
    [domain, split, class as u64, index as u64]
        .into_iter()
        .fold(splitmix(manifest.seed), |acc, v| splitmix(acc ^ v))
}

/// Renders the corpus a synthetic manifest declares. Pure in the manifest.
pub fn build_synthetic_corpus(manifest: &DatasetManifest) -> Result<Corpus> {
    manifest.validate()?;
    if manifest.source != Source::Synthetic {
        return Err(Error::InvalidManifest(format!(
            "source must be synthetic, got {:?}",
            manifest.source
        )));
    }
    if manifest.class_count > 10 {
        return Err(Error::InvalidManifest(format!(
            "synthetic digits support at most 10 classes, class_count is {}",
            manifest.class_count
        )));
    }
    let mut items = Vec::new();
    for (class, &count) in manifest.item_count_per_class.iter().enumerate() {
        let strokes = digit_strokes(class);
        for index in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(item_seed(manifest, class, index));
            let data = match manifest.domain {
                Domain::Simulated => render_simulated(&strokes, manifest.image_shape, &mut rng),
                Domain::Real => render_real(&strokes, manifest.image_shape, &mut rng),
            };
            items.push(LabeledImage {
                pixels: Image::new(manifest.image_shape, data)?,
                label: class,
                domain: manifest.domain,
            });
        }
    }
    if manifest.horizontal_flip {
        let mirrored: Vec<_> = items
            .iter()
            .map(|i| LabeledImage {
                pixels: i.pixels.mirrored(),
                ..i.clone()
            })
            .collect();
        items.extend(mirrored);
    }
    Corpus::new(
        manifest.name.clone(),
        manifest.domain,
        manifest.class_count,
        manifest.image_shape,
        items,
    )
}

/// Maps canvas coordinates in `[0,1]²` to glyph-box coordinates.
struct Placement {
    inv: [[f32; 2]; 2],
    shift: (f32, f32),
    warp: Option<Warp>,
}

struct Warp {
    amp: f32,
    freq: (f32, f32),
    phase: (f32, f32),
}

impl Placement {
    fn to_glyph(&self, mut u: f32, mut v: f32) -> (f32, f32) {
        if let Some(w) = &self.warp {
            let tau = std::f32::consts::TAU;
            let du = w.amp * (tau * (w.freq.0 * v + w.phase.0)).sin();
            let dv = w.amp * (tau * (w.freq.1 * u + w.phase.1)).sin();
            u += du;
            v += dv;
        }
        let (x, y) = (u - 0.5 - self.shift.0, v - 0.5 - self.shift.1);
        (
            0.5 + self.inv[0][0] * x + self.inv[0][1] * y,
            0.5 + self.inv[1][0] * x + self.inv[1][1] * y,
        )
    }
}

/// Forward map `rotation · shear · diag(sx, sy)`, stored inverted.
fn placement(sx: f32, sy: f32, shear: f32, angle: f32, shift: (f32, f32), warp: Option<Warp>) -> Placement {
    let (s, c) = angle.sin_cos();
    // R · K · S with K = [[1, shear], [0, 1]]
    let m = [[c * sx, (c * shear - s) * sy], [s * sx, (s * shear + c) * sy]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    Placement {
        inv: [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]],
        shift,
        warp,
    }
}

fn coverage(
    strokes: &[Vec<(f32, f32)>],
    place: &Placement,
    x: usize,
    y: usize,
    [h, w, _]: [usize; 3],
    half_width: f32,
    softness: f32,
) -> f32 {
    let u = (x as f32 + 0.5) / w as f32;
    let v = (y as f32 + 0.5) / h as f32;
    let p = place.to_glyph(u, v);
    let d = distance_to_strokes(strokes, p);
    (0.5 + (half_width - d) / softness).clamp(0.0, 1.0)
}

fn render_simulated(strokes: &[Vec<(f32, f32)>], shape: [usize; 3], rng: &mut ChaCha8Rng) -> Vec<f32> {
    let [h, w, ch] = shape;
    let scale = rng.gen_range(0.66..0.8);
    let aspect = rng.gen_range(0.8..1.0);
    let shift = (rng.gen_range(-0.06..0.06), rng.gen_range(-0.05..0.05));
    let place = placement(scale * aspect, scale, 0.0, 0.0, shift, None);
    let half_width = rng.gen_range(0.055..0.08);
    let softness = 1.0 / (w as f32 * scale);

    let bg: Vec<f32> = (0..ch).map(|_| rng.gen_range(-0.85..0.85)).collect();
    let grad: Vec<(f32, f32)> = (0..ch)
        .map(|_| (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)))
        .collect();
    let fg = loop {
        let fg: Vec<f32> = (0..ch).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let contrast = fg.iter().zip(&bg).map(|(a, b)| (a - b).abs()).sum::<f32>() / ch as f32;
        if contrast >= 0.7 {
            break fg;
        }
    };
    let noise = 0.03;

    let mut data = vec![0.0; h * w * ch];
    for y in 0..h {
        for x in 0..w {
            let cov = coverage(strokes, &place, x, y, shape, half_width, softness);
            let (fx, fy) = (x as f32 / w as f32 - 0.5, y as f32 / h as f32 - 0.5);
            for c in 0..ch {
                let back = bg[c] + grad[c].0 * fx + grad[c].1 * fy;
                let jitter = noise * (rng.gen::<f32>() * 2.0 - 1.0);
                data[(y * w + x) * ch + c] = (back * (1.0 - cov) + fg[c] * cov + jitter).clamp(-1.0, 1.0);
            }
        }
    }
    data
}

fn render_real(strokes: &[Vec<(f32, f32)>], shape: [usize; 3], rng: &mut ChaCha8Rng) -> Vec<f32> {
    let [h, w, ch] = shape;
    let scale = rng.gen_range(0.62..0.78);
    let aspect = rng.gen_range(0.75..1.05);
    let angle = rng.gen_range(-0.25..0.25);
    let shear = rng.gen_range(-0.2..0.2);
    let shift = (rng.gen_range(-0.05..0.05), rng.gen_range(-0.04..0.04));
    let warp = Warp {
        amp: rng.gen_range(0.01..0.035),
        freq: (rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5)),
        phase: (rng.gen(), rng.gen()),
    };
    let place = placement(scale * aspect, scale, shear, angle, shift, Some(warp));
    let half_width = rng.gen_range(0.08..0.12);
    let softness = 1.6 / (w as f32 * scale);

    let mut data = vec![0.0; h * w * ch];
    for y in 0..h {
        for x in 0..w {
            let cov = coverage(strokes, &place, x, y, shape, half_width, softness);
            let v = -1.0 + 2.0 * cov;
            data[(y * w + x) * ch..(y * w + x + 1) * ch].fill(v);
        }
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(domain: Domain, k: usize, per: usize, seed: u64) -> DatasetManifest {
        DatasetManifest::synthetic("d", domain, Split::Train, k, per, [16, 16, 3], seed)
    }

    #[test]
    fn declared_counts_and_pixel_range() {
        let m = DatasetManifest::synthetic("d", Domain::Simulated, Split::Train, 10, 100, [32, 32, 3], 7);
        let c = build_synthetic_corpus(&m).unwrap();
        assert_eq!(c.len(), 1000);
        assert_eq!(c.class_counts(), vec![100; 10]);
        for item in &c.items {
            assert!(item.pixels.data.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn generation_is_pure() {
        for d in [Domain::Real, Domain::Simulated] {
            let a = build_synthetic_corpus(&manifest(d, 3, 5, 11)).unwrap();
            let b = build_synthetic_corpus(&manifest(d, 3, 5, 11)).unwrap();
            assert_eq!(a, b);
            let c = build_synthetic_corpus(&manifest(d, 3, 5, 12)).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn real_domain_channels_are_equal() {
        let c = build_synthetic_corpus(&manifest(Domain::Real, 3, 3, 2)).unwrap();
        for item in &c.items {
            for px in item.pixels.data.chunks_exact(3) {
                assert!(px[0] == px[1] && px[1] == px[2]);
            }
        }
    }

    #[test]
    fn rejects_bad_manifests() {
        let mut m = manifest(Domain::Real, 3, 3, 2);
        m.class_count = 1;
        m.item_count_per_class = vec![3];
        assert!(matches!(build_synthetic_corpus(&m), Err(Error::InvalidManifest(_))));
        let mut m = manifest(Domain::Real, 3, 3, 2);
        m.image_shape = [12, 12, 3];
        assert!(matches!(build_synthetic_corpus(&m), Err(Error::UnsupportedShape(_))));
    }

    #[test]
    fn flip_doubles_the_corpus() {
        let mut m = manifest(Domain::Simulated, 2, 4, 1);
        m.horizontal_flip = true;
        let c = build_synthetic_corpus(&m).unwrap();
        assert_eq!(c.class_counts(), vec![8, 8]);
        assert_eq!(c.items[8].pixels, c.items[0].pixels.mirrored());
    }
}

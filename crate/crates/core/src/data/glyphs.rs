//! Stroke skeletons of the digits 0-9 in a unit box (x right, y down).

type Stroke = Vec<(f32, f32)>;

fn ellipse(cx: f32, cy: f32, rx: f32, ry: f32, from: f32, to: f32, steps: usize) -> Stroke {
    (0..=steps)
        .map(|i| {
            let t = from + (to - from) * i as f32 / steps as f32;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

const TAU: f32 = std::f32::consts::TAU;

pub(super) fn digit_strokes(digit: usize) -> Vec<Stroke> {
    match digit {
        0 => vec![ellipse(0.5, 0.5, 0.27, 0.4, 0.0, TAU, 20)],
        1 => vec![vec![(0.36, 0.25), (0.52, 0.1), (0.52, 0.9)]],
        2 => vec![vec![
            (0.27, 0.28),
            (0.36, 0.14),
            (0.5, 0.1),
            (0.64, 0.14),
            (0.72, 0.28),
            (0.66, 0.45),
            (0.27, 0.9),
            (0.76, 0.9),
        ]],
        3 => vec![vec![
            (0.27, 0.13),
            (0.72, 0.13),
            (0.46, 0.44),
            (0.64, 0.52),
            (0.73, 0.68),
            (0.63, 0.86),
            (0.45, 0.91),
            (0.26, 0.83),
        ]],
        4 => vec![vec![(0.64, 0.9), (0.64, 0.1), (0.22, 0.64), (0.8, 0.64)]],
        5 => vec![vec![
            (0.72, 0.1),
            (0.32, 0.1),
            (0.28, 0.46),
            (0.5, 0.4),
            (0.68, 0.5),
            (0.73, 0.68),
            (0.62, 0.87),
            (0.42, 0.91),
            (0.26, 0.82),
        ]],
        6 => vec![vec![
            (0.66, 0.12),
            (0.46, 0.2),
            (0.31, 0.44),
            (0.28, 0.7),
            (0.4, 0.89),
            (0.6, 0.89),
            (0.72, 0.71),
            (0.62, 0.53),
            (0.42, 0.52),
            (0.3, 0.65),
        ]],
        7 => vec![vec![(0.25, 0.1), (0.76, 0.1), (0.44, 0.9)]],
        8 => vec![
            ellipse(0.5, 0.29, 0.19, 0.19, 0.0, TAU, 16),
            ellipse(0.5, 0.7, 0.24, 0.21, 0.0, TAU, 16),
        ],
        9 => vec![
            ellipse(0.5, 0.32, 0.2, 0.21, 0.0, TAU, 16),
            vec![(0.7, 0.34), (0.67, 0.6), (0.58, 0.9)],
        ],
        _ => panic!("no glyph for digit {digit}"),
    }
}

/// Distance from `p` to the nearest stroke segment.
pub(super) fn distance_to_strokes(strokes: &[Stroke], p: (f32, f32)) -> f32 {
    let mut best = f32::INFINITY;
    for s in strokes {
        for seg in s.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
            best = best.min((qx * qx + qy * qy).sqrt());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_digit_has_strokes_inside_unit_box() {
        for d in 0..10 {
            let s = digit_strokes(d);
            assert!(!s.is_empty());
            for (x, y) in s.iter().flatten() {
                assert!((0.0..=1.0).contains(x) && (0.0..=1.0).contains(y), "digit {d}");
            }
        }
    }

    #[test]
    fn distance_to_segment() {
        let s = vec![vec![(0.0, 0.0), (1.0, 0.0)]];
        assert!((distance_to_strokes(&s, (0.5, 0.3)) - 0.3).abs() < 1e-6);
        assert!((distance_to_strokes(&s, (2.0, 0.0)) - 1.0).abs() < 1e-6);
    }
}

use super::Image;

/// Bilinear resampling with half-pixel centres; channels are untouched.
pub fn resize_bilinear(src: &Image, height: usize, width: usize) -> Image {
    if src.height == height && src.width == width {
        return src.clone();
    }
    let c = src.channels;
    let mut data = vec![0.0; height * width * c];
    let sy = src.height as f32 / height as f32;
    let sx = src.width as f32 / width as f32;
    let max_y = (src.height - 1) as f32;
    let max_x = (src.width - 1) as f32;
    for y in 0..height {
        let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(src.height - 1);
        let ty = fy - y0 as f32;
        for x in 0..width {
            let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(src.width - 1);
            let tx = fx - x0 as f32;
            for ch in 0..c {
                let at = |yy: usize, xx: usize| src.data[(yy * src.width + xx) * c + ch];
                let top = at(y0, x0) * (1.0 - tx) + at(y0, x1) * tx;
                let bottom = at(y1, x0) * (1.0 - tx) + at(y1, x1) * tx;
                data[(y * width + x) * c + ch] = top * (1.0 - ty) + bottom * ty;
            }
        }
    }
    Image {
        height,
        width,
        channels: c,
        data,
    }
}

/// Converts between 1 and `channels` channels by replication or averaging.
pub(super) fn match_channels(src: Image, channels: usize) -> Option<Image> {
    if src.channels == channels {
        return Some(src);
    }
    let pixels = src.height * src.width;
    let data: Vec<f32> = match (src.channels, channels) {
        (1, n) => src.data.iter().flat_map(|&v| std::iter::repeat(v).take(n)).collect(),
        (n, 1) => src
            .data
            .chunks_exact(n)
            .map(|px| px.iter().sum::<f32>() / n as f32)
            .collect(),
        _ => return None,
    };
    debug_assert_eq!(pixels * channels, data.len());
    Some(Image { channels, data, ..src })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_image_stays_constant() {
        let img = Image::filled([28, 28, 1], 0.3);
        let out = resize_bilinear(&img, 32, 32);
        assert_eq!(out.shape(), [32, 32, 1]);
        assert!(out.data.iter().all(|v| (v - 0.3).abs() < 1e-6));
    }

    #[test]
    fn horizontal_ramp_stays_monotone() {
        let data = (0..4).map(|x| x as f32).collect();
        let img = Image::new([1, 4, 1], data).unwrap();
        let out = resize_bilinear(&img, 1, 8);
        assert!(out.data.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(out.data[0], 0.0);
        assert_eq!(out.data[7], 3.0);
    }

    #[test]
    fn replication_to_three_channels() {
        let img = Image::new([1, 2, 1], vec![0.5, -0.5]).unwrap();
        let out = match_channels(img, 3).unwrap();
        assert_eq!(out.data, vec![0.5, 0.5, 0.5, -0.5, -0.5, -0.5]);
    }
}

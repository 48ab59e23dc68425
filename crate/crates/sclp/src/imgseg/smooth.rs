//! Separable Gaussian pre-smoothing for the segmentation stage.

use crate::raster::RasterImage;

/// Builds the normalized 1-D kernel with radius `ceil(4*sigma)`.
fn kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as usize;
    let mut weights = Vec::with_capacity(2 * radius + 1);
    for i in 0..=2 * radius {
        let x = i as f64 - radius as f64;
        weights.push((-x * x / (2.0 * sigma * sigma)).exp());
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    weights
}

/// Mirror indexing about the border pixel (index -1 maps to 1, n maps to n-2).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let mut i = i;
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Per-channel separable Gaussian blur; `sigma = 0` returns the input unchanged.
pub fn gaussian_smooth(image: &RasterImage, sigma: f64) -> RasterImage {
    debug_assert!(sigma >= 0.0, "sigma must be non-negative");
    if sigma <= 0.0 {
        return image.clone();
    }
    let weights = kernel(sigma);
    let radius = (weights.len() / 2) as isize;
    let (w, h) = (image.width(), image.height());

    // horizontal pass on float intermediates, then vertical
    let mut tmp = vec![[0.0f64; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (i, &wt) in weights.iter().enumerate() {
                let sx = reflect(x as isize + i as isize - radius, w);
                let px = image.get(sx, y);
                for c in 0..3 {
                    acc[c] += wt * px[c] as f64;
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for (i, &wt) in weights.iter().enumerate() {
                let sy = reflect(y as isize + i as isize - radius, h);
                let px = tmp[sy * w + x];
                for c in 0..3 {
                    acc[c] += wt * px[c];
                }
            }
            out.push([
                acc[0].round().clamp(0.0, 255.0) as u8,
                acc[1].round().clamp(0.0, 255.0) as u8,
                acc[2].round().clamp(0.0, 255.0) as u8,
            ]);
        }
    }
    RasterImage::from_pixels(w, h, out).expect("dimensions preserved")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct 2-D convolution with the same mirror border rule; the oracle the
    /// separable implementation must agree with.
    fn dense_oracle(image: &RasterImage, sigma: f64) -> Vec<[f64; 3]> {
        let weights = kernel(sigma);
        let radius = (weights.len() / 2) as isize;
        let (w, h) = (image.width(), image.height());
        let mut out = vec![[0.0f64; 3]; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0f64; 3];
                for ky in 0..weights.len() {
                    for kx in 0..weights.len() {
                        let sx = reflect(x as isize + kx as isize - radius, w);
                        let sy = reflect(y as isize + ky as isize - radius, h);
                        let px = image.get(sx, sy);
                        let wt = weights[ky] * weights[kx];
                        for c in 0..3 {
                            acc[c] += wt * px[c] as f64;
                        }
                    }
                }
                out[y * w + x] = acc;
            }
        }
        out
    }

    fn noise_image(w: usize, h: usize, seed: u64) -> RasterImage {
        // small xorshift so the test needs no RNG dependency wiring
        let mut state = seed.wrapping_mul(2685821657736338717).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let pixels = (0..w * h)
            .map(|_| {
                let v = next();
                [(v & 0xff) as u8, ((v >> 8) & 0xff) as u8, ((v >> 16) & 0xff) as u8]
            })
            .collect();
        RasterImage::from_pixels(w, h, pixels).unwrap()
    }

    #[test]
    fn sigma_zero_is_identity() {
        let img = noise_image(9, 7, 3);
        assert_eq!(gaussian_smooth(&img, 0.0), img);
    }

    #[test]
    fn constant_image_is_fixed_point() {
        let img = RasterImage::filled(12, 9, [77, 130, 200]).unwrap();
        assert_eq!(gaussian_smooth(&img, 0.8), img);
    }

    #[test]
    fn ramp_stays_within_input_range() {
        let pixels: Vec<[u8; 3]> = (0..32).map(|x| [(x * 8) as u8; 3]).collect();
        let img = RasterImage::from_pixels(32, 1, pixels).unwrap();
        let smoothed = gaussian_smooth(&img, 1.5);
        for px in smoothed.pixels() {
            assert!(px[0] <= 248, "smoothing must not overshoot the max");
        }
    }

    #[test]
    fn separable_matches_dense_convolution() {
        for (seed, sigma) in [(1u64, 0.8), (2, 1.3), (3, 2.0)] {
            let img = noise_image(13, 11, seed);
            let smoothed = gaussian_smooth(&img, sigma);
            let oracle = dense_oracle(&img, sigma);
            for y in 0..img.height() {
                for x in 0..img.width() {
                    let got = smoothed.get(x, y);
                    let want = oracle[y * img.width() + x];
                    for c in 0..3 {
                        let diff = (got[c] as f64 - want[c]).abs();
                        // both sides round to u8 at most once
                        assert!(
                            diff <= 0.5 + 1e-6,
                            "({x},{y}) channel {c}: separable {} vs dense {}",
                            got[c],
                            want[c]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn single_pixel_image_survives_reflection() {
        let img = RasterImage::filled(1, 1, [10, 20, 30]).unwrap();
        assert_eq!(gaussian_smooth(&img, 2.0), img);
    }
}

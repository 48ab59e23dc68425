//! Label-map visualization: alpha-blended class colors over the source image.

use crate::error::{Error, Result};
use crate::raster::{LabelMap, RasterImage, VOID};

/// Blends each labeled pixel toward its palette color; void pixels pass
/// through untouched.
pub fn render_overlay(
    image: &RasterImage,
    labels: &LabelMap,
    palette: &[[u8; 3]],
    alpha: f64,
) -> Result<RasterImage> {
    if image.width() != labels.width() || image.height() != labels.height() {
        return Err(Error::invalid_input(format!(
            "image is {}x{} but labels are {}x{}",
            image.width(),
            image.height(),
            labels.width(),
            labels.height()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid_input(format!(
            "alpha {alpha} outside [0, 1]"
        )));
    }
    if let Some(&label) = labels.labels().iter().filter(|&&l| l != VOID).max() {
        if label as usize >= palette.len() {
            return Err(Error::invalid_input(format!(
                "palette has {} colors but label {label} is present",
                palette.len()
            )));
        }
    }
    let pixels = image
        .pixels()
        .iter()
        .zip(labels.labels())
        .map(|(&rgb, &label)| {
            if label == VOID {
                return rgb;
            }
            let tint = palette[label as usize];
            let mut out = [0u8; 3];
            for c in 0..3 {
                let blended = (1.0 - alpha) * rgb[c] as f64 + alpha * tint[c] as f64;
                out[c] = blended.round().clamp(0.0, 255.0) as u8;
            }
            out
        })
        .collect();
    RasterImage::from_pixels(image.width(), image.height(), pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (RasterImage, LabelMap, Vec<[u8; 3]>) {
        let image = RasterImage::from_pixels(
            2,
            2,
            vec![[10, 20, 30], [40, 50, 60], [70, 80, 90], [200, 210, 220]],
        )
        .unwrap();
        let labels = LabelMap::from_labels(2, 2, vec![0, 1, VOID, 1], 2).unwrap();
        let palette = vec![[255, 0, 0], [0, 0, 255]];
        (image, labels, palette)
    }

    #[test]
    fn zero_alpha_returns_the_input() {
        let (image, labels, palette) = fixture();
        let out = render_overlay(&image, &labels, &palette, 0.0).unwrap();
        assert_eq!(out.pixels(), image.pixels());
    }

    #[test]
    fn full_alpha_paints_palette_colors_except_void() {
        let (image, labels, palette) = fixture();
        let out = render_overlay(&image, &labels, &palette, 1.0).unwrap();
        assert_eq!(out.get(0, 0), [255, 0, 0]);
        assert_eq!(out.get(1, 0), [0, 0, 255]);
        assert_eq!(out.get(0, 1), [70, 80, 90]); // void pixel untouched
        assert_eq!(out.get(1, 1), [0, 0, 255]);
    }

    #[test]
    fn half_alpha_blends_and_rounds() {
        let (image, labels, palette) = fixture();
        let out = render_overlay(&image, &labels, &palette, 0.5).unwrap();
        assert_eq!(out.get(0, 0), [133, 10, 15]);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let (image, labels, palette) = fixture();
        assert!(render_overlay(&image, &labels, &palette[..1], 0.5).is_err());
        assert!(render_overlay(&image, &labels, &palette, 1.5).is_err());
        assert!(render_overlay(&image, &labels, &palette, -0.1).is_err());
        let small = LabelMap::from_labels(1, 1, vec![0], 2).unwrap();
        assert!(render_overlay(&image, &small, &palette, 0.5).is_err());
    }

    #[test]
    fn deterministic_bytes() {
        let (image, labels, palette) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ppm");
        let b = dir.path().join("b.ppm");
        render_overlay(&image, &labels, &palette, 0.3)
            .unwrap()
            .write(&a)
            .unwrap();
        render_overlay(&image, &labels, &palette, 0.3)
            .unwrap()
            .write(&b)
            .unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}

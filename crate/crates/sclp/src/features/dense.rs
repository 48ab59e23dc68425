//! Dense gradient-orientation descriptors: 128-dim (4x4 cells x 8 orientation
//! bins) over a 16x16 luminance patch, sampled on a regular stride-8 grid.

use crate::imgseg::smooth::reflect;
use crate::raster::RasterImage;

pub const DESCRIPTOR_DIM: usize = 128;
const CELLS: usize = 4;
const ORIENTATION_BINS: usize = 8;

/// One descriptor and the pixel it is centered on.
#[derive(Debug, Clone)]
pub struct DenseSample {
    pub x: usize,
    pub y: usize,
    pub descriptor: Vec<f64>,
}

/// Computes descriptors at every grid point whose patch fits inside the image.
///
/// Centers run from `patch/2` in steps of `stride` while the patch
/// `[cx - patch/2, cx + patch/2)` stays in bounds; images smaller than the
/// patch yield no samples.
pub fn dense_descriptors(image: &RasterImage, patch: usize, stride: usize) -> Vec<DenseSample> {
    assert!(patch >= CELLS && stride >= 1, "degenerate descriptor grid");
    let (w, h) = (image.width(), image.height());
    let lum: Vec<f64> = image
        .pixels()
        .iter()
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect();

    // central-difference gradients with mirror borders
    let mut gx = vec![0.0f64; w * h];
    let mut gy = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let xm = lum[y * w + reflect(x as isize - 1, w)];
            let xp = lum[y * w + reflect(x as isize + 1, w)];
            let ym = lum[reflect(y as isize - 1, h) * w + x];
            let yp = lum[reflect(y as isize + 1, h) * w + x];
            gx[y * w + x] = (xp - xm) / 2.0;
            gy[y * w + x] = (yp - ym) / 2.0;
        }
    }

    let half = patch / 2;
    if w < patch || h < patch {
        return Vec::new();
    }
    let mut samples = Vec::new();
    let mut cy = half;
    while cy + half <= h {
        let mut cx = half;
        while cx + half <= w {
            samples.push(DenseSample {
                x: cx,
                y: cy,
                descriptor: patch_descriptor(&gx, &gy, w, cx, cy, patch),
            });
            cx += stride;
        }
        cy += stride;
    }
    samples
}

fn patch_descriptor(
    gx: &[f64],
    gy: &[f64],
    w: usize,
    cx: usize,
    cy: usize,
    patch: usize,
) -> Vec<f64> {
    let half = patch / 2;
    let cell = patch / CELLS;
    let mut d = vec![0.0f64; DESCRIPTOR_DIM];
    for dy in 0..patch {
        for dx in 0..patch {
            let x = cx - half + dx;
            let y = cy - half + dy;
            let (vx, vy) = (gx[y * w + x], gy[y * w + x]);
            let magnitude = (vx * vx + vy * vy).sqrt();
            if magnitude == 0.0 {
                continue;
            }
            let theta = vy.atan2(vx); // [-pi, pi]
            let bin = (((theta + std::f64::consts::PI)
                / (2.0 * std::f64::consts::PI / ORIENTATION_BINS as f64))
                as usize)
                .min(ORIENTATION_BINS - 1);
            let (cell_x, cell_y) = (dx / cell, dy / cell);
            d[(cell_y * CELLS + cell_x) * ORIENTATION_BINS + bin] += magnitude;
        }
    }
    // L2 normalize, clip heavy bins at 0.2, renormalize
    l2_normalize(&mut d);
    let mut clipped = false;
    for v in &mut d {
        if *v > 0.2 {
            *v = 0.2;
            clipped = true;
        }
    }
    if clipped {
        l2_normalize(&mut d);
    }
    d
}

fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

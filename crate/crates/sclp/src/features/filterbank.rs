//! 17-dimensional texton filter bank.
//!
//! Per-pixel responses, in fixed order:
//! - 0..9: Gaussians at sigma 1, 2, 4 on R, G, B (sigma-major),
//! - 9..13: Laplacian-of-Gaussian at sigma 1, 2, 4, 8 on luminance,
//! - 13..17: x/y first-derivative Gaussians at sigma 2 and 4 on luminance.
//!
//! All convolutions are separable with mirror borders and kernel radius
//! `ceil(4*sigma)`, matching the smoothing stage.

use crate::imgseg::smooth::reflect;
use crate::raster::RasterImage;

pub const TEXTON_DIM: usize = 17;

/// A single-channel float plane.
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn conv_h(&self, kernel: &[f64]) -> Plane {
        let radius = (kernel.len() / 2) as isize;
        let mut out = vec![0.0; self.data.len()];
        for y in 0..self.h {
            let row = &self.data[y * self.w..(y + 1) * self.w];
            for x in 0..self.w {
                let mut acc = 0.0;
                for (i, &k) in kernel.iter().enumerate() {
                    acc += k * row[reflect(x as isize + i as isize - radius, self.w)];
                }
                out[y * self.w + x] = acc;
            }
        }
        Plane {
            w: self.w,
            h: self.h,
            data: out,
        }
    }

    fn conv_v(&self, kernel: &[f64]) -> Plane {
        let radius = (kernel.len() / 2) as isize;
        let mut out = vec![0.0; self.data.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                let mut acc = 0.0;
                for (i, &k) in kernel.iter().enumerate() {
                    let sy = reflect(y as isize + i as isize - radius, self.h);
                    acc += k * self.data[sy * self.w + x];
                }
                out[y * self.w + x] = acc;
            }
        }
        Plane {
            w: self.w,
            h: self.h,
            data: out,
        }
    }

    fn add(mut self, other: &Plane) -> Plane {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        self
    }
}

/// Normalized Gaussian kernel with radius `ceil(4*sigma)`.
fn gauss_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// First derivative of the normalized Gaussian: g'(x) = -x/sigma^2 * g(x).
fn dgauss_kernel(sigma: f64) -> Vec<f64> {
    let g = gauss_kernel(sigma);
    let radius = (g.len() / 2) as isize;
    g.iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = (i as isize - radius) as f64;
            -x / (sigma * sigma) * v
        })
        .collect()
}

/// Second derivative of the normalized Gaussian: g''(x) = (x^2 - sigma^2)/sigma^4 * g(x),
/// mean-corrected so the truncated kernel responds with exactly zero on
/// constant signals.
fn ddgauss_kernel(sigma: f64) -> Vec<f64> {
    let g = gauss_kernel(sigma);
    let radius = (g.len() / 2) as isize;
    let mut k: Vec<f64> = g
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = (i as isize - radius) as f64;
            (x * x - sigma * sigma) / (sigma * sigma * sigma * sigma) * v
        })
        .collect();
    let mean: f64 = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    k
}

fn channel_plane(image: &RasterImage, c: usize) -> Plane {
    Plane {
        w: image.width(),
        h: image.height(),
        data: image.pixels().iter().map(|p| p[c] as f64).collect(),
    }
}

fn luminance_plane(image: &RasterImage) -> Plane {
    Plane {
        w: image.width(),
        h: image.height(),
        data: image
            .pixels()
            .iter()
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect(),
    }
}

/// Computes the 17 filter responses for every pixel, row-major.
pub fn texton_responses(image: &RasterImage) -> Vec<[f64; TEXTON_DIM]> {
    let n = image.width() * image.height();
    let mut out = vec![[0.0; TEXTON_DIM]; n];
    let mut slot = 0usize;
    let store = |plane: Plane, out: &mut Vec<[f64; TEXTON_DIM]>, slot: &mut usize| {
        for (px, v) in out.iter_mut().zip(plane.data) {
            px[*slot] = v;
        }
        *slot += 1;
    };

    for &sigma in &[1.0, 2.0, 4.0] {
        let g = gauss_kernel(sigma);
        for c in 0..3 {
            let plane = channel_plane(image, c).conv_h(&g).conv_v(&g);
            store(plane, &mut out, &mut slot);
        }
    }

    let lum = luminance_plane(image);
    for &sigma in &[1.0, 2.0, 4.0, 8.0] {
        let g = gauss_kernel(sigma);
        let dd = ddgauss_kernel(sigma);
        // LoG = Gxx + Gyy via two separable passes
        let gxx = lum.conv_h(&dd).conv_v(&g);
        let gyy = lum.conv_h(&g).conv_v(&dd);
        store(gxx.add(&gyy), &mut out, &mut slot);
    }

    for &sigma in &[2.0, 4.0] {
        let g = gauss_kernel(sigma);
        let d = dgauss_kernel(sigma);
        store(lum.conv_h(&d).conv_v(&g), &mut out, &mut slot);
        store(lum.conv_h(&g).conv_v(&d), &mut out, &mut slot);
    }
    debug_assert_eq!(slot, TEXTON_DIM);
    out
}

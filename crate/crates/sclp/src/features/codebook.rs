//! Quantization codebooks for texton and dense-descriptor histograms,
//! learned by seeded k-means with k-means++ initialization.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::dense::{dense_descriptors, DESCRIPTOR_DIM};
use crate::features::filterbank::{texton_responses, TEXTON_DIM};
use crate::raster::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodebookKind {
    Texton,
    Dense,
}

impl CodebookKind {
    pub fn descriptor_dim(&self) -> usize {
        match self {
            CodebookKind::Texton => TEXTON_DIM,
            CodebookKind::Dense => DESCRIPTOR_DIM,
        }
    }
}

/// A fixed set of cluster centers; descriptors quantize to their nearest center.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub kind: CodebookKind,
    pub centers: Vec<Vec<f64>>,
}

impl Codebook {
    /// Number of centers, i.e. histogram bins.
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Index of the nearest center; ties go to the lowest index.
    pub fn assign(&self, descriptor: &[f64]) -> usize {
        debug_assert_eq!(descriptor.len(), self.kind.descriptor_dim());
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, center) in self.centers.iter().enumerate() {
            let d = squared_distance(descriptor, center);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Persists centers as CSV, one row per center.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        for center in &self.centers {
            let line: Vec<String> = center.iter().map(|v| v.to_string()).collect();
            writeln!(writer, "{}", line.join(",")).map_err(io)?;
        }
        writer.flush().map_err(io)
    }

    /// Loads a codebook saved by [`Codebook::save`], checking descriptor width.
    pub fn load(path: impl AsRef<Path>, kind: CodebookKind) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut centers = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|t| {
                    t.trim().parse::<f64>().map_err(|_| {
                        Error::parse(path, idx + 1, format!("bad center value {t:?}"))
                    })
                })
                .collect::<Result<_>>()?;
            if row.len() != kind.descriptor_dim() {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!(
                        "center has {} values, expected {}",
                        row.len(),
                        kind.descriptor_dim()
                    ),
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(path, idx + 1, "non-finite center value"));
            }
            centers.push(row);
        }
        if centers.is_empty() {
            return Err(Error::parse(path, 1, "empty codebook"));
        }
        Ok(Codebook { kind, centers })
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means with k-means++ init; stops after `max_iters` Lloyd rounds or
/// when no center moves more than `tol`. Empty clusters keep their previous
/// center.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, max_iters: usize, tol: f64) -> Vec<Vec<f64>> {
    assert!(k >= 1 && points.len() >= k, "need at least k points");
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++: first center uniform, the rest proportional to squared
    // distance from the nearest chosen center
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut idx = 0;
            for (i, &d) in d2.iter().enumerate() {
                idx = i;
                if r < d {
                    break;
                }
                r -= d;
            }
            idx
        } else {
            // all remaining mass collapsed onto the chosen centers
            rng.random_range(0..points.len())
        };
        centers.push(points[chosen].clone());
        let last = centers.last().unwrap();
        for (d, p) in d2.iter_mut().zip(points) {
            let nd = squared_distance(p, last);
            if nd < *d {
                *d = nd;
            }
        }
    }

    let mut assignment = vec![0usize; points.len()];
    for iter in 0..max_iters {
        assignment
            .par_iter_mut()
            .zip(points.par_iter())
            .for_each(|(a, p)| {
                let mut best = 0usize;
                let mut best_d = f64::INFINITY;
                for (i, c) in centers.iter().enumerate() {
                    let d = squared_distance(p, c);
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                *a = best;
            });

        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut max_shift2 = 0.0f64;
        for i in 0..k {
            if counts[i] == 0 {
                continue;
            }
            let new_center: Vec<f64> = sums[i].iter().map(|s| s / counts[i] as f64).collect();
            max_shift2 = max_shift2.max(squared_distance(&new_center, &centers[i]));
            centers[i] = new_center;
        }
        if max_shift2 < tol * tol {
            log::debug!("k-means converged after {} iterations", iter + 1);
            break;
        }
    }
    centers
}

/// Learns a codebook from training images.
///
/// Descriptors are sampled up to `sample_budget` with a per-image quota and a
/// seeded shuffle, then clustered into `k` centers. Fails with
/// insufficient-data if fewer than `k` descriptors are available.
pub fn build_codebook(
    kind: CodebookKind,
    images: &[RasterImage],
    k: usize,
    sample_budget: usize,
    seed: u64,
) -> Result<Codebook> {
    if images.is_empty() {
        return Err(Error::insufficient_data("no training images for codebook"));
    }
    let per_image: Vec<Vec<Vec<f64>>> = images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let mut descriptors: Vec<Vec<f64>> = match kind {
                CodebookKind::Texton => texton_responses(img)
                    .into_iter()
                    .map(|r| r.to_vec())
                    .collect(),
                CodebookKind::Dense => dense_descriptors(img, 16, 8)
                    .into_iter()
                    .map(|s| s.descriptor)
                    .collect(),
            };
            let quota = sample_budget / images.len() + usize::from(i < sample_budget % images.len());
            subsample(&mut descriptors, quota, seed, i);
            descriptors
        })
        .collect();
    let samples: Vec<Vec<f64>> = per_image.into_iter().flatten().collect();
    if samples.len() < k {
        return Err(Error::insufficient_data(format!(
            "{} descriptors available, need at least {k} for the codebook",
            samples.len()
        )));
    }
    log::debug!(
        "clustering {} {:?} descriptors into {k} centers",
        samples.len(),
        kind
    );
    let centers = kmeans(&samples, k, seed, 100, 1e-6);
    Ok(Codebook { kind, centers })
}

/// Keeps `quota` elements chosen by a seeded partial Fisher-Yates shuffle;
/// the (seed, image index) pair fixes the draw regardless of thread schedule.
fn subsample(descriptors: &mut Vec<Vec<f64>>, quota: usize, seed: u64, image_index: usize) {
    if descriptors.len() <= quota {
        return;
    }
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed.wrapping_add((image_index as u64).wrapping_mul(0x9E3779B97F4A7C15)));
    for i in 0..quota {
        let j = rng.random_range(i..descriptors.len());
        descriptors.swap(i, j);
    }
    descriptors.truncate(quota);
}

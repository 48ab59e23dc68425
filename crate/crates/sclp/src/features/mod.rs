//! Per-superpixel visual features, quantization codebooks, discretization and
//! class-specific mRMR feature selection.
//!
//! The feature vector has a fixed layout (537 dimensions with the default
//! 100-center codebooks):
//!
//! | range      | content                                            |
//! |------------|----------------------------------------------------|
//! | 0..3       | mean RGB                                           |
//! | 3..6       | std RGB                                            |
//! | 6..7       | bounding-box top row / image height                |
//! | 7..71      | 8x8 bounding-box occupancy shape mask              |
//! | 71..104    | 11-bin histograms of R, G, B                       |
//! | 104..204   | texton histogram                                   |
//! | 204..304   | dense-descriptor histogram                         |
//! | 304..537   | the same RGB/texton/dense histograms over the      |
//! |            | superpixel dilated by a 10-pixel disk              |
//!
//! Every histogram block is L1-normalized on its own (all-zero when the
//! region contributes no samples, e.g. no dense-grid centers fall inside).

mod codebook;
mod dense;
mod discretize;
mod filterbank;
mod mrmr;

pub use codebook::{build_codebook, kmeans, Codebook, CodebookKind};
pub use dense::{dense_descriptors, DenseSample, DESCRIPTOR_DIM};
pub use discretize::{DiscretizeThresholds, DiscretizedMatrix};
pub use filterbank::{texton_responses, TEXTON_DIM};
pub use mrmr::{mrmr_select, mutual_information, SelectedFeatures};

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::imgseg::SuperpixelMap;
use crate::raster::RasterImage;

/// Feature dimension with the default 100-center codebooks.
pub const FEATURE_DIM: usize = 537;

const SHAPE_CELLS: usize = 8;
const RGB_BINS: usize = 11;

/// Extraction tunables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureParams {
    /// Disk radius for the dilated-region histograms.
    pub dilation_radius: usize,
    /// Dense descriptor patch side in pixels.
    pub dense_patch: usize,
    /// Dense descriptor grid stride in pixels.
    pub dense_stride: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            dilation_radius: 10,
            dense_patch: 16,
            dense_stride: 8,
        }
    }
}

/// Byte offsets of each segment for given codebook sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub texton_bins: usize,
    pub dense_bins: usize,
}

impl FeatureLayout {
    pub fn new(texton_bins: usize, dense_bins: usize) -> Self {
        FeatureLayout {
            texton_bins,
            dense_bins,
        }
    }

    pub fn dim(&self) -> usize {
        // 6 color moments + 1 top ratio + 64 shape + 33 RGB hist, then the
        // codebook histograms twice (plain + dilated) and the dilated RGB hist
        104 + self.texton_bins + self.dense_bins + 33 + self.texton_bins + self.dense_bins
    }

    pub fn texton_range(&self) -> std::ops::Range<usize> {
        104..104 + self.texton_bins
    }

    pub fn dense_range(&self) -> std::ops::Range<usize> {
        let start = 104 + self.texton_bins;
        start..start + self.dense_bins
    }

    pub fn dilated_start(&self) -> usize {
        104 + self.texton_bins + self.dense_bins
    }
}

/// Row-major matrix of per-superpixel feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    feature_dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(feature_dim: usize) -> Self {
        FeatureMatrix {
            feature_dim,
            data: Vec::new(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn rows(&self) -> usize {
        if self.feature_dim == 0 {
            0
        } else {
            self.data.len() / self.feature_dim
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.feature_dim);
        self.data.extend_from_slice(row);
    }

    /// Persists as CSV with a header row of column indices.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        let header: Vec<String> = (0..self.feature_dim).map(|i| i.to_string()).collect();
        writeln!(writer, "{}", header.join(",")).map_err(io)?;
        for i in 0..self.rows() {
            let line: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            writeln!(writer, "{}", line.join(",")).map_err(io)?;
        }
        writer.flush().map_err(io)
    }

    /// Loads a CSV written by [`FeatureMatrix::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty feature matrix"))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let feature_dim = header.split(',').count();
        let mut matrix = FeatureMatrix::new(feature_dim);
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(path, idx + 1, format!("bad value {t:?}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != feature_dim {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("row has {} values, expected {feature_dim}", row.len()),
                ));
            }
            matrix.push_row(&row);
        }
        Ok(matrix)
    }
}

#[inline]
fn rgb_bin(v: u8) -> usize {
    // uniform bins over [0, 255]
    (v as usize * RGB_BINS) / 256
}

fn l1_normalize(hist: &mut [f64]) {
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        hist.iter_mut().for_each(|v| *v /= total);
    }
}

/// Extracts one feature row per superpixel. The map must match the image
/// dimensions; codebooks fix the histogram widths.
pub fn extract_features(
    image: &RasterImage,
    map: &SuperpixelMap,
    texton_codebook: &Codebook,
    dense_codebook: &Codebook,
    params: &FeatureParams,
) -> Result<FeatureMatrix> {
    if image.width() != map.width() || image.height() != map.height() {
        return Err(Error::invalid_input(format!(
            "image is {}x{} but superpixel map is {}x{}",
            image.width(),
            image.height(),
            map.width(),
            map.height()
        )));
    }
    let (w, h) = (image.width(), image.height());
    let layout = FeatureLayout::new(texton_codebook.len(), dense_codebook.len());

    // quantize every pixel's filter response and every dense grid descriptor
    let responses = texton_responses(image);
    let texton_idx: Vec<u16> = responses
        .iter()
        .map(|r| texton_codebook.assign(r) as u16)
        .collect();
    let dense_samples: Vec<(usize, usize, u16)> =
        dense_descriptors(image, params.dense_patch, params.dense_stride)
            .into_iter()
            .map(|s| (s.x, s.y, dense_codebook.assign(&s.descriptor) as u16))
            .collect();

    // member pixel lists per superpixel
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); map.count()];
    for p in 0..w * h {
        members[map.ids()[p] as usize].push(p as u32);
    }

    // disk offsets for dilation
    let r = params.dilation_radius as isize;
    let mut disk = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                disk.push((dx, dy));
            }
        }
    }

    let mut matrix = FeatureMatrix::new(layout.dim());
    let mut stamp = vec![0u32; w * h];
    let mut row = vec![0.0f64; layout.dim()];
    for (sp, pixels) in members.iter().enumerate() {
        row.iter_mut().for_each(|v| *v = 0.0);
        let stats = map.stat(sp as u32);
        let count = pixels.len() as f64;

        // color moments (population std: a flat region is exactly zero)
        let mut sum = [0.0f64; 3];
        let mut sum_sq = [0.0f64; 3];
        for &p in pixels {
            let px = image.pixels()[p as usize];
            for c in 0..3 {
                sum[c] += px[c] as f64;
                sum_sq[c] += (px[c] as f64) * (px[c] as f64);
            }
        }
        for c in 0..3 {
            let mean = sum[c] / count;
            row[c] = mean;
            row[3 + c] = (sum_sq[c] / count - mean * mean).max(0.0).sqrt();
        }

        row[6] = stats.bbox.min_y as f64 / h as f64;

        // 8x8 occupancy over the bounding box; integer cell boundaries, empty
        // cells (box thinner than 8 pixels) stay zero
        let bw = stats.bbox.width();
        let bh = stats.bbox.height();
        let bx: Vec<usize> = (0..=SHAPE_CELLS).map(|i| i * bw / SHAPE_CELLS).collect();
        let by: Vec<usize> = (0..=SHAPE_CELLS).map(|i| i * bh / SHAPE_CELLS).collect();
        let mut cell_counts = [0u32; SHAPE_CELLS * SHAPE_CELLS];
        for &p in pixels {
            let (x, y) = (p as usize % w - stats.bbox.min_x, p as usize / w - stats.bbox.min_y);
            let cx = (0..SHAPE_CELLS).position(|i| x >= bx[i] && x < bx[i + 1]).unwrap();
            let cy = (0..SHAPE_CELLS).position(|i| y >= by[i] && y < by[i + 1]).unwrap();
            cell_counts[cy * SHAPE_CELLS + cx] += 1;
        }
        for cy in 0..SHAPE_CELLS {
            for cx in 0..SHAPE_CELLS {
                let area = (bx[cx + 1] - bx[cx]) * (by[cy + 1] - by[cy]);
                if area > 0 {
                    row[7 + cy * SHAPE_CELLS + cx] =
                        cell_counts[cy * SHAPE_CELLS + cx] as f64 / area as f64;
                }
            }
        }

        // plain-region histograms
        for &p in pixels {
            let px = image.pixels()[p as usize];
            for c in 0..3 {
                row[71 + c * RGB_BINS + rgb_bin(px[c])] += 1.0;
            }
            row[layout.texton_range().start + texton_idx[p as usize] as usize] += 1.0;
        }
        for c in 0..3 {
            l1_normalize(&mut row[71 + c * RGB_BINS..71 + (c + 1) * RGB_BINS]);
        }
        l1_normalize(&mut row[layout.texton_range()]);

        // dilated region: stamp the disk around every member pixel
        let epoch = sp as u32 + 1;
        let mut dilated: Vec<u32> = Vec::with_capacity(pixels.len() * 2);
        for &p in pixels {
            let (x, y) = (p as usize % w, p as usize / w);
            for &(dx, dy) in &disk {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let q = ny as usize * w + nx as usize;
                if stamp[q] != epoch {
                    stamp[q] = epoch;
                    dilated.push(q as u32);
                }
            }
        }
        let ds = layout.dilated_start();
        for &q in &dilated {
            let px = image.pixels()[q as usize];
            for c in 0..3 {
                row[ds + c * RGB_BINS + rgb_bin(px[c])] += 1.0;
            }
            row[ds + 33 + texton_idx[q as usize] as usize] += 1.0;
        }
        for c in 0..3 {
            l1_normalize(&mut row[ds + c * RGB_BINS..ds + (c + 1) * RGB_BINS]);
        }
        l1_normalize(&mut row[ds + 33..ds + 33 + layout.texton_bins]);

        // dense histograms: plain over samples centered inside the superpixel,
        // dilated over samples centered inside the stamped region
        let dense_plain = &mut row[layout.dense_range()];
        for &(x, y, center) in &dense_samples {
            if map.id_at(x, y) == sp as u32 {
                dense_plain[center as usize] += 1.0;
            }
        }
        l1_normalize(dense_plain);
        let dd = ds + 33 + layout.texton_bins;
        for &(x, y, center) in &dense_samples {
            if stamp[y * w + x] == epoch {
                row[dd + center as usize] += 1.0;
            }
        }
        l1_normalize(&mut row[dd..dd + layout.dense_bins]);

        matrix.push_row(&row);
    }
    Ok(matrix)
}

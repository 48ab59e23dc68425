//! Spatially constrained location priors learnt from labeled training data.
//!
//! The global prior is a conditional distribution over classes for every
//! (conditioning class, ordered block pair): given that class `c_hat` mass sits
//! in block `k1`, how is class mass distributed in block `k2`? Counts are
//! products of per-block pixel tallies, so a superpixel contributes all of its
//! pixels to the block holding its centroid. The local prior is the analogous
//! class-to-class distribution over adjacent superpixel pairs, with no block
//! structure. Rows with no observed mass fall back to the uniform
//! distribution so downstream votes never erase a class purely from missing
//! statistics.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{LabelMap, VOID};

/// A fixed rectangular partition of the image plane into spatial blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub width: usize,
    pub height: usize,
}

impl BlockGrid {
    pub fn new(blocks_x: usize, blocks_y: usize, width: usize, height: usize) -> Result<Self> {
        if blocks_x == 0 || blocks_y == 0 || blocks_x * blocks_y < 2 {
            return Err(Error::invalid_input(format!(
                "block grid {blocks_x}x{blocks_y} needs at least 2 cells"
            )));
        }
        if width < blocks_x || height < blocks_y {
            return Err(Error::invalid_input(format!(
                "{width}x{height} image cannot hold a {blocks_x}x{blocks_y} block grid"
            )));
        }
        Ok(BlockGrid {
            blocks_x,
            blocks_y,
            width,
            height,
        })
    }

    /// Total block count.
    pub fn len(&self) -> usize {
        self.blocks_x * self.blocks_y
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Block ids are row-major: `cell_y * blocks_x + cell_x`. Cell boundaries
    /// sit at `i * extent / blocks`, so cell sizes differ by at most one
    /// pixel; a centroid exactly on a boundary joins the higher-index cell.
    pub fn assign_block(&self, centroid: (f64, f64)) -> Result<usize> {
        let (x, y) = centroid;
        if !(x >= 0.0 && x < self.width as f64 && y >= 0.0 && y < self.height as f64) {
            return Err(Error::invalid_input(format!(
                "centroid ({x}, {y}) outside {}x{} image",
                self.width, self.height
            )));
        }
        let cell = |v: f64, extent: usize, blocks: usize| {
            let mut idx = 0;
            // boundary i..i+1 is [i*extent/blocks, (i+1)*extent/blocks)
            while idx + 1 < blocks && v >= ((idx + 1) * extent / blocks) as f64 {
                idx += 1;
            }
            idx
        };
        let cx = cell(x, self.width, self.blocks_x);
        let cy = cell(y, self.height, self.blocks_y);
        Ok(cy * self.blocks_x + cx)
    }
}

/// Most frequent non-void label; ties go to the lowest class id, and a
/// superpixel whose pixels are all void stays void.
pub fn majority_label(pixel_labels: &[i32]) -> i32 {
    let mut counts: Vec<(i32, u32)> = Vec::new();
    for &l in pixel_labels {
        if l == VOID {
            continue;
        }
        match counts.iter_mut().find(|(c, _)| *c == l) {
            Some(entry) => entry.1 += 1,
            None => counts.push((l, 1)),
        }
    }
    counts
        .into_iter()
        .min_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)))
        .map(|(c, _)| c)
        .unwrap_or(VOID)
}

/// Majority ground-truth label for every superpixel in the map.
pub fn superpixel_labels(
    ids: &[u32],
    superpixel_count: usize,
    labels: &LabelMap,
) -> Result<Vec<i32>> {
    if ids.len() != labels.labels().len() {
        return Err(Error::invalid_input(format!(
            "superpixel map covers {} pixels, label map {}",
            ids.len(),
            labels.labels().len()
        )));
    }
    let mut grouped: Vec<Vec<i32>> = vec![Vec::new(); superpixel_count];
    for (&id, &label) in ids.iter().zip(labels.labels()) {
        grouped[id as usize].push(label);
    }
    Ok(grouped.iter().map(|g| majority_label(g)).collect())
}

/// One training superpixel reduced to what the priors need.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledSuperpixel {
    /// Majority ground-truth class, or void (skipped by the builders).
    pub class_id: i32,
    pub block: usize,
    pub pixel_count: u64,
}

/// Conditional class distributions per (conditioning class, ordered block pair).
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPrior {
    pub class_count: usize,
    pub block_count: usize,
    /// Laid out as `((c_hat * K + k1) * K + k2) * M + c`, so one conditional
    /// row is contiguous.
    values: Vec<f64>,
}

impl GlobalPrior {
    fn row_start(&self, c_hat: usize, k1: usize, k2: usize) -> usize {
        debug_assert!(c_hat < self.class_count && k1 < self.block_count && k2 < self.block_count);
        ((c_hat * self.block_count + k1) * self.block_count + k2) * self.class_count
    }

    /// The distribution over classes in `k2` given class `c_hat` in `k1`.
    pub fn row(&self, c_hat: usize, k1: usize, k2: usize) -> &[f64] {
        let start = self.row_start(c_hat, k1, k2);
        &self.values[start..start + self.class_count]
    }

    /// Text format: header `M K`, then `c_hat c k1 k2 value` for every nonzero
    /// entry of a data-built row; uniform-fallback rows are implied.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        writeln!(writer, "{} {}", self.class_count, self.block_count).map_err(io)?;
        let uniform = 1.0 / self.class_count as f64;
        for c_hat in 0..self.class_count {
            for k1 in 0..self.block_count {
                for k2 in 0..self.block_count {
                    let row = self.row(c_hat, k1, k2);
                    if row.iter().all(|&v| v == uniform) {
                        continue;
                    }
                    for (c, &v) in row.iter().enumerate() {
                        if v != 0.0 {
                            writeln!(writer, "{c_hat} {c} {k1} {k2} {v}").map_err(io)?;
                        }
                    }
                }
            }
        }
        writer.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut lines = reader.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty prior file"))?;
        let header = header.map_err(|e| Error::io(path, e))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let bad_header = || Error::parse(path, 1, "expected header 'class_count block_count'");
        if parts.len() != 2 {
            return Err(bad_header());
        }
        let class_count: usize = parts[0].parse().map_err(|_| bad_header())?;
        let block_count: usize = parts[1].parse().map_err(|_| bad_header())?;
        if class_count == 0 || block_count < 2 {
            return Err(Error::parse(path, 1, "degenerate prior dimensions"));
        }
        let mut prior = GlobalPrior {
            class_count,
            block_count,
            values: vec![1.0 / class_count as f64; class_count * class_count * block_count * block_count],
        };
        // rows mentioned in the file were data-built: clear the implied uniform
        let mut touched = vec![false; class_count * block_count * block_count];
        let mut entries = Vec::new();
        for (idx, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |what: &str| Error::parse(path, idx + 1, format!("bad {what}"));
            let mut tokens = line.split_whitespace();
            let mut next_idx = |what: &str| -> Result<usize> {
                tokens
                    .next()
                    .ok_or_else(|| bad(what))?
                    .parse()
                    .map_err(|_| bad(what))
            };
            let c_hat = next_idx("conditioning class")?;
            let c = next_idx("class")?;
            let k1 = next_idx("source block")?;
            let k2 = next_idx("target block")?;
            let value: f64 = tokens
                .next()
                .ok_or_else(|| bad("value"))?
                .parse()
                .map_err(|_| bad("value"))?;
            if c_hat >= class_count || c >= class_count || k1 >= block_count || k2 >= block_count {
                return Err(bad("index"));
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(bad("value"));
            }
            touched[(c_hat * block_count + k1) * block_count + k2] = true;
            entries.push((c_hat, c, k1, k2, value));
        }
        for (row_idx, was_touched) in touched.iter().enumerate() {
            if *was_touched {
                let start = row_idx * class_count;
                prior.values[start..start + class_count].fill(0.0);
            }
        }
        for (c_hat, c, k1, k2, value) in entries {
            let start = prior.row_start(c_hat, k1, k2);
            prior.values[start + c] = value;
        }
        Ok(prior)
    }
}

/// Class-to-class distribution over adjacent superpixels.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPrior {
    pub class_count: usize,
    /// Row-major `M x M`; row index is the neighbor's class.
    values: Vec<f64>,
}

impl LocalPrior {
    /// The distribution over a superpixel's class given an adjacent `c_hat`.
    pub fn row(&self, c_hat: usize) -> &[f64] {
        debug_assert!(c_hat < self.class_count);
        &self.values[c_hat * self.class_count..(c_hat + 1) * self.class_count]
    }

    /// CSV, one row per conditioning class.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        for c_hat in 0..self.class_count {
            let cells: Vec<String> = self.row(c_hat).iter().map(|v| v.to_string()).collect();
            writeln!(writer, "{}", cells.join(",")).map_err(|e| Error::io(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::parse(path, idx + 1, "bad value"))
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        let class_count = rows.len();
        if class_count == 0 || rows.iter().any(|r| r.len() != class_count) {
            return Err(Error::parse(path, 1, "local prior must be square"));
        }
        Ok(LocalPrior {
            class_count,
            values: rows.concat(),
        })
    }
}

/// Normalizes one count row into `out`, with optional additive smoothing and
/// the uniform fallback for zero mass.
fn normalize_row(counts: &[u64], smoothing: f64, out: &mut [f64]) {
    let class_count = counts.len();
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + smoothing * class_count as f64;
    if denom == 0.0 {
        out.fill(1.0 / class_count as f64);
    } else {
        for (o, &c) in out.iter_mut().zip(counts) {
            *o = (c as f64 + smoothing) / denom;
        }
    }
}

fn check_observations(
    images: &[Vec<LabeledSuperpixel>],
    class_count: usize,
    block_count: usize,
) -> Result<()> {
    if class_count == 0 {
        return Err(Error::invalid_input("class count must be positive"));
    }
    for sp in images.iter().flatten() {
        if sp.class_id != VOID && (sp.class_id < 0 || sp.class_id as usize >= class_count) {
            return Err(Error::invalid_input(format!(
                "superpixel class {} outside [0, {class_count})",
                sp.class_id
            )));
        }
        if sp.block >= block_count {
            return Err(Error::invalid_input(format!(
                "block {} outside [0, {block_count})",
                sp.block
            )));
        }
    }
    Ok(())
}

/// Builds the global prior from per-image labeled superpixels.
///
/// For each image, class pixel mass is tallied per block; every ordered block
/// pair `(k1, k2)` with `k1 != k2` then contributes the product of tallies to
/// `count[c_hat][c][k1][k2]`. Void superpixels are ignored.
pub fn build_global_prior(
    images: &[Vec<LabeledSuperpixel>],
    class_count: usize,
    grid_blocks: usize,
    smoothing: f64,
) -> Result<GlobalPrior> {
    check_observations(images, class_count, grid_blocks)?;
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::invalid_input("smoothing must be finite and >= 0"));
    }
    let k = grid_blocks;
    let m = class_count;
    let mut counts = vec![0u64; m * m * k * k];
    let mut any = false;
    let mut tally = vec![0u64; k * m];
    for image in images {
        tally.fill(0);
        for sp in image {
            if sp.class_id == VOID {
                continue;
            }
            tally[sp.block * m + sp.class_id as usize] += sp.pixel_count;
            any = any || sp.pixel_count > 0;
        }
        let nonzero: Vec<(usize, usize, u64)> = (0..k)
            .flat_map(|block| (0..m).map(move |c| (block, c)))
            .filter_map(|(block, c)| {
                let t = tally[block * m + c];
                (t > 0).then_some((block, c, t))
            })
            .collect();
        for &(k1, c_hat, t1) in &nonzero {
            for &(k2, c, t2) in &nonzero {
                if k1 == k2 {
                    continue;
                }
                counts[((c_hat * k + k1) * k + k2) * m + c] += t1 * t2;
            }
        }
    }
    if !any {
        return Err(Error::insufficient_data(
            "no non-void superpixels in the training corpus",
        ));
    }
    let mut values = vec![0.0f64; counts.len()];
    for row_idx in 0..m * k * k {
        let start = row_idx * m;
        normalize_row(
            &counts[start..start + m],
            smoothing,
            &mut values[start..start + m],
        );
    }
    Ok(GlobalPrior {
        class_count: m,
        block_count: k,
        values,
    })
}

/// Builds the local prior from ordered adjacent label pairs; pairs touching a
/// void label are skipped.
pub fn build_local_prior(
    pairs: &[(i32, i32)],
    class_count: usize,
    smoothing: f64,
) -> Result<LocalPrior> {
    if class_count == 0 {
        return Err(Error::invalid_input("class count must be positive"));
    }
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(Error::invalid_input("smoothing must be finite and >= 0"));
    }
    let m = class_count;
    let mut counts = vec![0u64; m * m];
    let mut any = false;
    for &(c_hat, c) in pairs {
        if c_hat == VOID || c == VOID {
            continue;
        }
        if c_hat < 0 || c < 0 || c_hat as usize >= m || c as usize >= m {
            return Err(Error::invalid_input(format!(
                "pair ({c_hat}, {c}) outside [0, {m})"
            )));
        }
        counts[c_hat as usize * m + c as usize] += 1;
        any = true;
    }
    if !any {
        return Err(Error::insufficient_data("no labeled adjacency pairs"));
    }
    let mut values = vec![0.0f64; m * m];
    for c_hat in 0..m {
        normalize_row(
            &counts[c_hat * m..(c_hat + 1) * m],
            smoothing,
            &mut values[c_hat * m..(c_hat + 1) * m],
        );
    }
    Ok(LocalPrior {
        class_count: m,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(class_id: i32, block: usize, pixel_count: u64) -> LabeledSuperpixel {
        LabeledSuperpixel {
            class_id,
            block,
            pixel_count,
        }
    }

    #[test]
    fn block_grid_corners_and_boundaries() {
        let grid = BlockGrid::new(6, 6, 60, 60).unwrap();
        assert_eq!(grid.len(), 36);
        assert_eq!(grid.assign_block((0.0, 0.0)).unwrap(), 0);
        assert_eq!(grid.assign_block((59.0, 59.0)).unwrap(), 35);
        // boundary centroids belong to the higher-index cell
        assert_eq!(grid.assign_block((10.0, 0.0)).unwrap(), 1);
        assert_eq!(grid.assign_block((9.999, 0.0)).unwrap(), 0);
        assert_eq!(grid.assign_block((0.0, 10.0)).unwrap(), 6);
        assert!(grid.assign_block((-0.1, 0.0)).is_err());
        assert!(grid.assign_block((0.0, 60.0)).is_err());
    }

    #[test]
    fn block_grid_tiles_uneven_dimensions() {
        let grid = BlockGrid::new(6, 6, 67, 41).unwrap();
        let mut per_block = vec![0u32; grid.len()];
        for y in 0..41 {
            for x in 0..67 {
                per_block[grid.assign_block((x as f64, y as f64)).unwrap()] += 1;
            }
        }
        assert_eq!(per_block.iter().sum::<u32>(), 67 * 41);
        // column widths and row heights each differ by at most one pixel
        let widths: Vec<u32> = (0..6)
            .map(|cx| {
                (0..67)
                    .filter(|&x| grid.assign_block((x as f64, 0.0)).unwrap() == cx)
                    .count() as u32
            })
            .collect();
        let heights: Vec<u32> = (0..6)
            .map(|cy| {
                (0..41)
                    .filter(|&y| grid.assign_block((0.0, y as f64)).unwrap() == cy * 6)
                    .count() as u32
            })
            .collect();
        for dims in [widths, heights] {
            let lo = dims.iter().min().unwrap();
            let hi = dims.iter().max().unwrap();
            assert!(hi - lo <= 1, "uneven tiling: {dims:?}");
        }
    }

    #[test]
    fn majority_label_rules() {
        let mut pixels = vec![1i32; 60];
        pixels.extend(vec![0i32; 40]);
        assert_eq!(majority_label(&pixels), 1);
        assert_eq!(majority_label(&[VOID, VOID, VOID]), VOID);
        assert_eq!(majority_label(&[2, 2, 5, 5]), 2);
        assert_eq!(majority_label(&[VOID, 3]), 3);
    }

    #[test]
    fn single_pair_image_pins_the_counting_rule() {
        let images = vec![vec![sp(0, 0, 100), sp(1, 1, 50)]];
        let prior = build_global_prior(&images, 2, 4, 0.0).unwrap();
        assert_eq!(prior.row(0, 0, 1), &[0.0, 1.0]);
        assert_eq!(prior.row(1, 1, 0), &[1.0, 0.0]);
        // unseen conditioning triples fall back to uniform
        assert_eq!(prior.row(0, 2, 3), &[0.5, 0.5]);
        assert_eq!(prior.row(1, 0, 1), &[0.5, 0.5]);
    }

    /// Direct quadruple loop over superpixel pairs, bypassing block tallies.
    fn brute_force_global(
        images: &[Vec<LabeledSuperpixel>],
        m: usize,
        k: usize,
    ) -> Vec<u64> {
        let mut counts = vec![0u64; m * m * k * k];
        for image in images {
            for a in image {
                for b in image {
                    if a.class_id == VOID || b.class_id == VOID || a.block == b.block {
                        continue;
                    }
                    let idx = ((a.class_id as usize * k + a.block) * k + b.block) * m
                        + b.class_id as usize;
                    counts[idx] += a.pixel_count * b.pixel_count;
                }
            }
        }
        counts
    }

    #[test]
    fn global_prior_matches_pairwise_counting_oracle() {
        // three images, mixed voids, repeated (block, class) combinations
        let images = vec![
            vec![sp(0, 0, 30), sp(0, 0, 12), sp(1, 1, 7), sp(2, 3, 50), sp(VOID, 2, 99)],
            vec![sp(2, 1, 5), sp(1, 1, 5), sp(0, 2, 40)],
            vec![sp(1, 3, 8), sp(2, 0, 21), sp(0, 1, 13), sp(1, 2, 2)],
        ];
        let (m, k) = (3, 4);
        let prior = build_global_prior(&images, m, k, 0.0).unwrap();
        let counts = brute_force_global(&images, m, k);
        for c_hat in 0..m {
            for k1 in 0..k {
                for k2 in 0..k {
                    let start = ((c_hat * k + k1) * k + k2) * m;
                    let row_counts = &counts[start..start + m];
                    let total: u64 = row_counts.iter().sum();
                    let expected: Vec<f64> = if total == 0 {
                        vec![1.0 / m as f64; m]
                    } else {
                        row_counts.iter().map(|&c| c as f64 / total as f64).collect()
                    };
                    assert_eq!(prior.row(c_hat, k1, k2), &expected[..]);
                }
            }
        }
    }

    #[test]
    fn duplicating_the_corpus_changes_nothing() {
        let images = vec![
            vec![sp(0, 0, 30), sp(1, 1, 7), sp(2, 3, 50)],
            vec![sp(2, 1, 5), sp(1, 1, 5), sp(0, 2, 40)],
        ];
        let mut doubled = images.clone();
        doubled.extend(images.clone());
        let single = build_global_prior(&images, 3, 4, 0.0).unwrap();
        let twice = build_global_prior(&doubled, 3, 4, 0.0).unwrap();
        assert_eq!(single, twice);

        let pairs = vec![(0, 1), (1, 0), (1, 2), (2, 1), (0, 2)];
        let mut pairs2 = pairs.clone();
        pairs2.extend(pairs.clone());
        assert_eq!(
            build_local_prior(&pairs, 3, 0.0).unwrap(),
            build_local_prior(&pairs2, 3, 0.0).unwrap()
        );
    }

    #[test]
    fn local_prior_counting() {
        // every neighbor of class 0 is class 1; symmetric single pairs
        let pairs = vec![(0, 1), (0, 1), (1, 0), (VOID, 1), (1, VOID)];
        let prior = build_local_prior(&pairs, 3, 0.0).unwrap();
        assert_eq!(prior.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(prior.row(1), &[1.0, 0.0, 0.0]);
        let third = 1.0 / 3.0;
        assert_eq!(prior.row(2), &[third, third, third]);
    }

    #[test]
    fn empty_training_data_is_rejected() {
        let images = vec![vec![sp(VOID, 0, 10)], vec![]];
        assert!(matches!(
            build_global_prior(&images, 2, 4, 0.0),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            build_local_prior(&[(VOID, 0)], 2, 0.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn smoothing_softens_sparse_rows() {
        let images = vec![vec![sp(0, 0, 10), sp(1, 1, 10)]];
        let prior = build_global_prior(&images, 2, 4, 1.0).unwrap();
        let row = prior.row(0, 0, 1);
        // (0 + 1) / (100 + 2) and (100 + 1) / (100 + 2)
        assert!((row[0] - 1.0 / 102.0).abs() < 1e-12);
        assert!((row[1] - 101.0 / 102.0).abs() < 1e-12);
    }

    #[test]
    fn superpixel_labels_groups_by_id() {
        let labels = LabelMap::from_labels(3, 2, vec![0, 0, 1, VOID, 1, 1], 2).unwrap();
        let ids = vec![0u32, 0, 1, 0, 1, 1];
        let majorities = superpixel_labels(&ids, 2, &labels).unwrap();
        assert_eq!(majorities, vec![0, 1]);
    }

    #[test]
    fn prior_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let images = vec![vec![sp(0, 0, 100), sp(1, 1, 50), sp(1, 2, 25)]];
        let global = build_global_prior(&images, 2, 4, 0.0).unwrap();
        let path = dir.path().join("global.txt");
        global.save(&path).unwrap();
        // zero entries inside data-built rows must survive the roundtrip
        assert_eq!(GlobalPrior::load(&path).unwrap(), global);

        let local = build_local_prior(&[(0, 1), (1, 0), (1, 1)], 3, 0.0).unwrap();
        let path = dir.path().join("local.csv");
        local.save(&path).unwrap();
        assert_eq!(LocalPrior::load(&path).unwrap(), local);
    }

    proptest! {
        #[test]
        fn priors_stay_normalized_on_random_corpora(
            corpus in prop::collection::vec(
                prop::collection::vec((0i32..3, 0usize..4, 1u64..500), 1..12),
                1..4,
            ),
            pairs in prop::collection::vec((0i32..3, 0i32..3), 1..40),
        ) {
            let images: Vec<Vec<LabeledSuperpixel>> = corpus
                .iter()
                .map(|image| {
                    image
                        .iter()
                        .map(|&(c, b, n)| sp(if c == 2 { VOID } else { c }, b, n))
                        .collect()
                })
                .collect();
            if let Ok(prior) = build_global_prior(&images, 2, 4, 0.0) {
                for c_hat in 0..2 {
                    for k1 in 0..4 {
                        for k2 in 0..4 {
                            let row = prior.row(c_hat, k1, k2);
                            let sum: f64 = row.iter().sum();
                            prop_assert!((sum - 1.0).abs() < 1e-9);
                            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
                        }
                    }
                }
            }
            let local = build_local_prior(&pairs, 3, 0.0).unwrap();
            for c_hat in 0..3 {
                let sum: f64 = local.row(c_hat).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }
}

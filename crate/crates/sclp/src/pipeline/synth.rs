//! Synthetic scene generation for desk-scale experiments.
//!
//! Scenes are horizontal bands split into vertical segments, each painted in
//! a class color plus Gaussian pixel noise, with band and segment boundaries
//! jittered per image. The default grammar makes two classes share one color
//! distribution, so they are indistinguishable by appearance and separable
//! only through where they sit in the scene.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pipeline::dataset::write_manifest;
use crate::raster::{LabelMap, RasterImage};

/// One horizontal band: its share of the image height and the left-to-right
/// `(class, width share)` segments inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSpec {
    pub height_fraction: f64,
    pub segments: Vec<(usize, f64)>,
}

/// A band/segment scene layout with per-class color distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGrammar {
    pub width: usize,
    pub height: usize,
    pub class_names: Vec<String>,
    /// Display palette for overlays (distinct even for same-color classes).
    pub palette: Vec<[u8; 3]>,
    /// Mean scene color per class.
    pub colors: Vec<[f64; 3]>,
    /// Top-to-bottom bands.
    pub bands: Vec<BandSpec>,
    pub noise_sigma: f64,
    /// Maximum boundary displacement in pixels, applied per image.
    pub boundary_jitter: usize,
}

impl SceneGrammar {
    /// The standard ambiguity benchmark: a 96x96 four-class scene. Classes 2
    /// and 3 sit in the bottom band, each flanked by class-1 strips, and
    /// share one color distribution whose luminance matches the strips, so
    /// appearance alone cannot tell them apart; only scene position can.
    pub fn ambiguous_default() -> Self {
        SceneGrammar {
            width: 96,
            height: 96,
            class_names: vec!["top".into(), "mid".into(), "left".into(), "right".into()],
            palette: vec![
                [135, 180, 235],
                [60, 140, 60],
                [200, 80, 80],
                [250, 220, 90],
            ],
            // classes 2 and 3 share a color that is luminance-matched to the
            // class-1 green, so gradient statistics cannot tell them apart
            colors: vec![
                [135.0, 180.0, 235.0],
                [60.0, 140.0, 60.0],
                [125.0, 90.0, 147.0],
                [125.0, 90.0, 147.0],
            ],
            // the bottom band is a palindrome, so each ambiguous region sees
            // the same flanking structure up to a mirror
            bands: vec![
                BandSpec {
                    height_fraction: 0.125,
                    segments: vec![(0, 1.0)],
                },
                BandSpec {
                    height_fraction: 0.125,
                    segments: vec![(1, 1.0)],
                },
                BandSpec {
                    height_fraction: 0.75,
                    segments: vec![
                        (1, 1.0 / 6.0),
                        (2, 0.25),
                        (1, 1.0 / 6.0),
                        (3, 0.25),
                        (1, 1.0 / 6.0),
                    ],
                },
            ],
            noise_sigma: 12.0,
            boundary_jitter: 2,
        }
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.class_count();
        if m == 0 || self.palette.len() != m || self.colors.len() != m {
            return Err(Error::invalid_input(
                "grammar needs matching class names, palette, and colors",
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid_input("grammar image dimensions must be positive"));
        }
        if self.bands.is_empty() {
            return Err(Error::invalid_input("grammar defines no bands"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid_input("noise sigma must be finite and >= 0"));
        }
        let band_total: f64 = self.bands.iter().map(|b| b.height_fraction).sum();
        if (band_total - 1.0).abs() > 1e-6 {
            return Err(Error::invalid_input(format!(
                "band height fractions sum to {band_total}, expected 1"
            )));
        }
        for band in &self.bands {
            if band.height_fraction <= 0.0 || band.segments.is_empty() {
                return Err(Error::invalid_input("every band needs positive height and segments"));
            }
            let seg_total: f64 = band.segments.iter().map(|(_, f)| f).sum();
            if (seg_total - 1.0).abs() > 1e-6 {
                return Err(Error::invalid_input(format!(
                    "segment width fractions sum to {seg_total}, expected 1"
                )));
            }
            for &(class, fraction) in &band.segments {
                if class >= m {
                    return Err(Error::invalid_input(format!(
                        "segment class {class} outside [0, {m})"
                    )));
                }
                if fraction <= 0.0 {
                    return Err(Error::invalid_input("segment fractions must be positive"));
                }
            }
        }
        // every class must rasterize to a positive area without jitter
        let mut area = vec![0u64; m];
        let grid = self.label_grid(&mut |_| 0);
        for &label in &grid {
            area[label as usize] += 1;
        }
        if let Some(empty) = area.iter().position(|&a| a == 0) {
            return Err(Error::invalid_input(format!(
                "class {empty} ('{}') covers zero pixels",
                self.class_names[empty]
            )));
        }
        Ok(())
    }

    /// Cumulative fractions into strictly increasing pixel boundaries, with
    /// each interior boundary displaced by `jitter(i)`.
    fn cut_points(
        fractions: &[f64],
        extent: usize,
        jitter: &mut dyn FnMut(usize) -> i64,
    ) -> Vec<usize> {
        let n = fractions.len();
        let mut cuts = Vec::with_capacity(n + 1);
        cuts.push(0usize);
        let mut cumulative = 0.0;
        for (i, &f) in fractions.iter().enumerate().take(n - 1) {
            cumulative += f;
            let base = (cumulative * extent as f64).round() as i64 + jitter(i);
            let lo = cuts[i] as i64 + 1;
            let hi = extent as i64 - (n - 1 - i) as i64;
            cuts.push(base.clamp(lo, hi.max(lo)) as usize);
        }
        cuts.push(extent);
        cuts
    }

    /// Row-major class labels under a given jitter source.
    fn label_grid(&self, jitter: &mut dyn FnMut(usize) -> i64) -> Vec<i32> {
        let band_fractions: Vec<f64> = self.bands.iter().map(|b| b.height_fraction).collect();
        let rows = Self::cut_points(&band_fractions, self.height, jitter);
        let mut grid = vec![0i32; self.width * self.height];
        for (b, band) in self.bands.iter().enumerate() {
            let seg_fractions: Vec<f64> = band.segments.iter().map(|(_, f)| *f).collect();
            let cols = Self::cut_points(&seg_fractions, self.width, jitter);
            for (s, &(class, _)) in band.segments.iter().enumerate() {
                for y in rows[b]..rows[b + 1] {
                    for x in cols[s]..cols[s + 1] {
                        grid[y * self.width + x] = class as i32;
                    }
                }
            }
        }
        grid
    }

    /// Generates one scene and its ground truth.
    pub fn generate(&self, rng: &mut ChaCha8Rng) -> Result<(RasterImage, LabelMap)> {
        let j = self.boundary_jitter as i64;
        let mut jitter = |_: usize| if j == 0 { 0 } else { rng.random_range(-j..=j) };
        let grid = self.label_grid(&mut jitter);
        let noise = Normal::new(0.0, self.noise_sigma.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::invalid_input(format!("noise distribution: {e}")))?;
        let mut pixels = Vec::with_capacity(grid.len());
        for &label in &grid {
            let mean = self.colors[label as usize];
            let mut color = [0u8; 3];
            for (out, &base) in color.iter_mut().zip(&mean) {
                let sample = if self.noise_sigma > 0.0 {
                    base + noise.sample(rng)
                } else {
                    base
                };
                *out = sample.round().clamp(0.0, 255.0) as u8;
            }
            pixels.push(color);
        }
        let image = RasterImage::from_pixels(self.width, self.height, pixels)?;
        let labels = LabelMap::from_labels(self.width, self.height, grid, self.class_count())?;
        Ok((image, labels))
    }
}

/// Writes a train/test corpus under `dir` and returns the two manifest paths.
pub fn synth_corpus(
    grammar: &SceneGrammar,
    n_train: usize,
    n_test: usize,
    seed: u64,
    dir: impl AsRef<Path>,
) -> Result<(PathBuf, PathBuf)> {
    grammar.validate()?;
    if n_train == 0 || n_test == 0 {
        return Err(Error::invalid_input("need at least one train and one test image"));
    }
    let dir = dir.as_ref();
    let images_dir = dir.join("images");
    let labels_dir = dir.join("labels");
    for d in [dir, &images_dir, &labels_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let write_split = |prefix: &str, count: usize, rng: &mut ChaCha8Rng| -> Result<PathBuf> {
        let mut pairs = Vec::with_capacity(count);
        for i in 0..count {
            let (image, labels) = grammar.generate(rng)?;
            let image_rel = format!("images/{prefix}_{i:04}.ppm");
            let label_rel = format!("labels/{prefix}_{i:04}.txt");
            image.write(dir.join(&image_rel))?;
            labels.write(dir.join(&label_rel))?;
            pairs.push((image_rel, label_rel));
        }
        let manifest = dir.join(format!("{prefix}.txt"));
        write_manifest(&manifest, &grammar.class_names, &grammar.palette, &pairs)?;
        Ok(manifest)
    };
    let train = write_split("train", n_train, &mut rng)?;
    let test = write_split("test", n_test, &mut rng)?;
    log::info!(
        "wrote {n_train}+{n_test} synthetic scenes ({}x{}, {} classes) under {}",
        grammar.width,
        grammar.height,
        grammar.class_count(),
        dir.display()
    );
    Ok((train, test))
}

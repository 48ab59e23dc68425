//! Run configuration: every pipeline tunable with its default, plus the flat
//! `key = value` file format used by the CLI.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::classify::TrainParams;
use crate::error::{Error, Result};
use crate::imgseg::SegParams;

/// All pipeline tunables. Defaults follow the reference setup: Gaussian
/// sigma 0.8, minimum superpixel size 100, scale constant 200 anchored at a
/// 640-pixel image side, a 6x6 block grid, 50 selected features per class,
/// and 100-center codebooks.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sigma: f64,
    pub min_size: usize,
    /// Segmentation scale at the reference image size.
    pub k_scale: f64,
    /// Longer-dimension anchor for the scale formula.
    pub k_reference: f64,
    pub blocks_x: usize,
    pub blocks_y: usize,
    /// Features kept per class by the selection stage.
    pub feature_count: usize,
    /// Centers in each of the texton and dense codebooks.
    pub codebook_size: usize,
    /// Descriptor sample cap for codebook clustering.
    pub codebook_budget: usize,
    pub lambda: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Fraction of labeled training superpixels held out for fusion fitting.
    pub fusion_split: f64,
    /// Additive smoothing for both priors.
    pub prior_smoothing: f64,
    pub folds: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sigma: 0.8,
            min_size: 100,
            k_scale: 200.0,
            k_reference: 640.0,
            blocks_x: 6,
            blocks_y: 6,
            feature_count: 50,
            codebook_size: 100,
            codebook_budget: 20_000,
            lambda: 1e-3,
            max_iterations: 5000,
            tolerance: 1e-6,
            fusion_split: 0.2,
            prior_smoothing: 0.0,
            folds: 5,
            seed: 7,
            out_dir: PathBuf::from("sclp-out"),
        }
    }
}

impl RunConfig {
    /// Segmentation parameters for an image with the given longer dimension.
    pub fn seg_params(&self, longer_dimension: usize) -> SegParams {
        SegParams {
            sigma: self.sigma,
            k: self.k_scale * (longer_dimension as f64 / self.k_reference).sqrt().max(1.0),
            min_size: self.min_size,
        }
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            lambda: self.lambda,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            ..TrainParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let complain = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid_input(format!("config: {msg}")))
            }
        };
        complain(self.sigma >= 0.0 && self.sigma.is_finite(), "sigma must be >= 0")?;
        complain(self.min_size >= 1, "min_size must be >= 1")?;
        complain(self.k_scale > 0.0, "k_scale must be > 0")?;
        complain(self.k_reference > 0.0, "k_reference must be > 0")?;
        complain(self.blocks_x * self.blocks_y >= 2, "block grid needs >= 2 cells")?;
        complain(self.feature_count >= 1, "feature_count must be >= 1")?;
        complain(self.codebook_size >= 1, "codebook_size must be >= 1")?;
        complain(
            self.codebook_budget >= self.codebook_size,
            "codebook_budget must cover codebook_size",
        )?;
        complain(self.lambda >= 0.0, "lambda must be >= 0")?;
        complain(self.max_iterations >= 1, "max_iterations must be >= 1")?;
        complain(self.tolerance > 0.0, "tolerance must be > 0")?;
        complain(
            self.fusion_split > 0.0 && self.fusion_split < 1.0,
            "fusion_split must be in (0, 1)",
        )?;
        complain(
            self.prior_smoothing >= 0.0 && self.prior_smoothing.is_finite(),
            "prior_smoothing must be >= 0",
        )?;
        complain(self.folds >= 2, "folds must be >= 2")?;
        Ok(())
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::invalid_input(format!("config {key}: bad {what} '{value}'"));
        match key {
            "sigma" => self.sigma = value.parse().map_err(|_| bad("number"))?,
            "min_size" => self.min_size = value.parse().map_err(|_| bad("integer"))?,
            "k_scale" => self.k_scale = value.parse().map_err(|_| bad("number"))?,
            "k_reference" => self.k_reference = value.parse().map_err(|_| bad("number"))?,
            "blocks_x" => self.blocks_x = value.parse().map_err(|_| bad("integer"))?,
            "blocks_y" => self.blocks_y = value.parse().map_err(|_| bad("integer"))?,
            "feature_count" => self.feature_count = value.parse().map_err(|_| bad("integer"))?,
            "codebook_size" => self.codebook_size = value.parse().map_err(|_| bad("integer"))?,
            "codebook_budget" => {
                self.codebook_budget = value.parse().map_err(|_| bad("integer"))?
            }
            "lambda" => self.lambda = value.parse().map_err(|_| bad("number"))?,
            "max_iterations" => self.max_iterations = value.parse().map_err(|_| bad("integer"))?,
            "tolerance" => self.tolerance = value.parse().map_err(|_| bad("number"))?,
            "fusion_split" => self.fusion_split = value.parse().map_err(|_| bad("number"))?,
            "prior_smoothing" => {
                self.prior_smoothing = value.parse().map_err(|_| bad("number"))?
            }
            "folds" => self.folds = value.parse().map_err(|_| bad("integer"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("integer"))?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(Error::invalid_input(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Loads defaults overridden by a flat `key = value` file; `#` comments.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut config = RunConfig::default();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, idx + 1, "expected 'key = value'"))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        write!(
            writer,
            "sigma = {}\nmin_size = {}\nk_scale = {}\nk_reference = {}\n\
             blocks_x = {}\nblocks_y = {}\nfeature_count = {}\ncodebook_size = {}\n\
             codebook_budget = {}\nlambda = {}\nmax_iterations = {}\ntolerance = {}\n\
             fusion_split = {}\nprior_smoothing = {}\nfolds = {}\nseed = {}\nout_dir = {}\n",
            self.sigma,
            self.min_size,
            self.k_scale,
            self.k_reference,
            self.blocks_x,
            self.blocks_y,
            self.feature_count,
            self.codebook_size,
            self.codebook_budget,
            self.lambda,
            self.max_iterations,
            self.tolerance,
            self.fusion_split,
            self.prior_smoothing,
            self.folds,
            self.seed,
            self.out_dir.display(),
        )
        .map_err(|e| Error::io(path, e))?;
        writer.flush().map_err(|e| Error::io(path, e))
    }
}

//! End-to-end orchestration: training every stage from a dataset manifest,
//! predicting label maps with context fusion, and the artifact store both
//! sides share.
//!
//! Training runs segment -> codebooks -> features -> discretize/select ->
//! one-vs-all classifiers -> priors -> fusion. Classifiers are fit on a
//! seeded 80% split of the labeled superpixels; the held-out remainder
//! generates the fusion triples so the fusion weights never see in-sample
//! visual probabilities. Priors use every labeled training superpixel.

pub mod config;
pub mod dataset;
pub mod folds;
pub mod metrics;
pub mod overlay;
pub mod stages;
pub mod synth;

pub use config::RunConfig;
pub use dataset::{
    load_dataset, read_manifest, write_manifest, DatasetManifest, LoadedDataset,
};
pub use folds::split_folds;
pub use metrics::{evaluate, Metrics};
pub use overlay::render_overlay;
pub use synth::{synth_corpus, BandSpec, SceneGrammar};

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classify::{
    most_probable_class, predict_proba, train_one_vs_all, BinaryClassModel,
};
use crate::context::{
    final_label, fit_fusion, local_votes, normalize_votes, BlockClassMass, FusionModel,
    FusionTriple, Voter,
};
use crate::error::{Error, Result};
use crate::features::{
    build_codebook, extract_features, Codebook, CodebookKind, DiscretizeThresholds, FeatureMatrix,
    FeatureParams, SelectedFeatures,
};
use crate::features::mrmr_select;
use crate::imgseg::{segment, SuperpixelMap};
use crate::prior::{
    build_global_prior, build_local_prior, superpixel_labels, BlockGrid, GlobalPrior,
    LabeledSuperpixel, LocalPrior,
};
use crate::raster::{LabelMap, RasterImage, VOID};

const CONFIG_FILE: &str = "config.txt";
const CLASSES_FILE: &str = "classes.txt";
const TEXTON_FILE: &str = "codebook_texton.txt";
const DENSE_FILE: &str = "codebook_dense.txt";
const THRESHOLDS_FILE: &str = "thresholds.txt";
const SELECTED_FILE: &str = "selected.txt";
const CLASSIFIER_DIR: &str = "classifiers";
const GLOBAL_PRIOR_FILE: &str = "prior_global.txt";
const LOCAL_PRIOR_FILE: &str = "prior_local.csv";
const FUSION_FILE: &str = "fusion.csv";

/// Prefixes recoverable errors with the pipeline stage that raised them.
fn stage<T>(name: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::InvalidInput(msg) => Error::InvalidInput(format!("{name}: {msg}")),
        Error::InsufficientData(msg) => Error::InsufficientData(format!("{name}: {msg}")),
        other => other,
    })
}

fn artifact_path(dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact(path))
    }
}

/// The complete trained model set.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub config: RunConfig,
    pub class_names: Vec<String>,
    pub palette: Vec<[u8; 3]>,
    pub texton_codebook: Codebook,
    pub dense_codebook: Codebook,
    pub thresholds: DiscretizeThresholds,
    pub selected: SelectedFeatures,
    pub models: Vec<BinaryClassModel>,
    pub global_prior: GlobalPrior,
    pub local_prior: LocalPrior,
    pub fusion: FusionModel,
}

fn save_classes(path: &Path, names: &[String], palette: &[[u8; 3]]) -> Result<()> {
    let body = format!(
        "classes {}\npalette {}\n",
        names.join(" "),
        dataset::format_palette(palette)
    );
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn load_classes(path: &Path) -> Result<(Vec<String>, Vec<[u8; 3]>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut names = Vec::new();
    let mut palette = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("classes") => names = tokens.map(str::to_string).collect(),
            Some("palette") => {
                palette = tokens
                    .map(|t| {
                        dataset::parse_palette_token(t)
                            .ok_or_else(|| Error::parse(path, idx + 1, "bad palette color"))
                    })
                    .collect::<Result<_>>()?;
            }
            _ => return Err(Error::parse(path, idx + 1, "expected 'classes' or 'palette'")),
        }
    }
    if names.is_empty() || names.len() != palette.len() {
        return Err(Error::parse(path, 1, "classes and palette must align"));
    }
    Ok((names, palette))
}

impl Artifacts {
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.class_count();
        let consistent = self.palette.len() == m
            && self.models.len() == m
            && self.selected.per_class.len() == m
            && self.fusion.weights.len() == m
            && self.global_prior.class_count == m
            && self.local_prior.class_count == m
            && self.global_prior.block_count == self.config.blocks_x * self.config.blocks_y;
        if !consistent {
            return Err(Error::InvalidModel(format!(
                "artifact set is internally inconsistent for {m} classes"
            )));
        }
        Ok(())
    }

    /// Writes every artifact under `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let classifier_dir = dir.join(CLASSIFIER_DIR);
        std::fs::create_dir_all(&classifier_dir).map_err(|e| Error::io(dir, e))?;
        self.config.save(dir.join(CONFIG_FILE))?;
        save_classes(&dir.join(CLASSES_FILE), &self.class_names, &self.palette)?;
        self.texton_codebook.save(dir.join(TEXTON_FILE))?;
        self.dense_codebook.save(dir.join(DENSE_FILE))?;
        self.thresholds.save(dir.join(THRESHOLDS_FILE))?;
        self.selected.save(dir.join(SELECTED_FILE))?;
        for model in &self.models {
            model.save(classifier_dir.join(format!("class_{}.txt", model.class_id)))?;
        }
        self.global_prior.save(dir.join(GLOBAL_PRIOR_FILE))?;
        self.local_prior.save(dir.join(LOCAL_PRIOR_FILE))?;
        self.fusion.save(dir.join(FUSION_FILE))?;
        Ok(())
    }

    /// Loads a trained model set; any absent file is a missing-artifact error
    /// naming its path.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let config = RunConfig::load(artifact_path(dir, CONFIG_FILE)?)?;
        let (class_names, palette) = load_classes(&artifact_path(dir, CLASSES_FILE)?)?;
        let texton_codebook =
            Codebook::load(artifact_path(dir, TEXTON_FILE)?, CodebookKind::Texton)?;
        let dense_codebook = Codebook::load(artifact_path(dir, DENSE_FILE)?, CodebookKind::Dense)?;
        let thresholds = DiscretizeThresholds::load(artifact_path(dir, THRESHOLDS_FILE)?)?;
        let selected = SelectedFeatures::load(artifact_path(dir, SELECTED_FILE)?)?;
        let models = (0..class_names.len())
            .map(|c| {
                let name = format!("{CLASSIFIER_DIR}/class_{c}.txt");
                BinaryClassModel::load(artifact_path(dir, &name)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let global_prior = GlobalPrior::load(artifact_path(dir, GLOBAL_PRIOR_FILE)?)?;
        let local_prior = LocalPrior::load(artifact_path(dir, LOCAL_PRIOR_FILE)?)?;
        let fusion = FusionModel::load(artifact_path(dir, FUSION_FILE)?)?;
        let artifacts = Artifacts {
            config,
            class_names,
            palette,
            texton_codebook,
            dense_codebook,
            thresholds,
            selected,
            models,
            global_prior,
            local_prior,
            fusion,
        };
        artifacts.validate()?;
        Ok(artifacts)
    }
}

/// Segments every image with size-scaled parameters.
fn segment_all(config: &RunConfig, data: &LoadedDataset) -> Result<Vec<SuperpixelMap>> {
    data.images
        .par_iter()
        .map(|img| segment(img, &config.seg_params(img.longer_dimension())))
        .collect()
}

/// Extracts the per-superpixel feature matrix of every image.
fn features_all(
    data: &LoadedDataset,
    maps: &[SuperpixelMap],
    texton: &Codebook,
    dense: &Codebook,
) -> Result<Vec<FeatureMatrix>> {
    data.images
        .par_iter()
        .zip(maps)
        .map(|(img, map)| extract_features(img, map, texton, dense, &FeatureParams::default()))
        .collect()
}

/// Majority ground-truth label per superpixel, per image.
fn majority_all(maps: &[SuperpixelMap], labels: &[LabelMap]) -> Result<Vec<Vec<i32>>> {
    maps.par_iter()
        .zip(labels)
        .map(|(map, gt)| superpixel_labels(map.ids(), map.count(), gt))
        .collect()
}

/// Block assignment per superpixel, per image.
fn blocks_all(config: &RunConfig, maps: &[SuperpixelMap]) -> Result<Vec<Vec<usize>>> {
    maps.iter()
        .map(|map| {
            let grid = BlockGrid::new(config.blocks_x, config.blocks_y, map.width(), map.height())?;
            map.stats()
                .iter()
                .map(|s| grid.assign_block(s.centroid))
                .collect()
        })
        .collect()
}

/// Labeled training rows split into the classifier part and the fusion
/// holdout.
struct TrainingRows {
    clf_matrix: FeatureMatrix,
    clf_labels: Vec<usize>,
    /// (image, superpixel, class) triples reserved for fusion fitting.
    holdout: Vec<(usize, u32, usize)>,
}

fn assemble_rows(
    config: &RunConfig,
    feats: &[FeatureMatrix],
    sp_labels: &[Vec<i32>],
) -> Result<TrainingRows> {
    let dim = feats
        .first()
        .map(FeatureMatrix::feature_dim)
        .ok_or_else(|| Error::insufficient_data("no training images"))?;
    let mut provenance: Vec<(usize, u32, usize)> = Vec::new();
    for (i, labels) in sp_labels.iter().enumerate() {
        if feats[i].feature_dim() != dim {
            return Err(Error::invalid_input(format!(
                "image {i} has {}-dim features, expected {dim}",
                feats[i].feature_dim()
            )));
        }
        if feats[i].rows() != labels.len() {
            return Err(Error::invalid_input(format!(
                "image {i} has {} feature rows for {} superpixels",
                feats[i].rows(),
                labels.len()
            )));
        }
        for (sp, &label) in labels.iter().enumerate() {
            if label != VOID {
                provenance.push((i, sp as u32, label as usize));
            }
        }
    }
    if provenance.len() < 2 {
        return Err(Error::insufficient_data(
            "need at least 2 labeled superpixels to split for fusion",
        ));
    }
    let mut order: Vec<usize> = (0..provenance.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1)));
    let holdout_len = ((provenance.len() as f64) * config.fusion_split).round() as usize;
    let holdout_len = holdout_len.clamp(1, provenance.len() - 1);
    let (rest, held) = order.split_at(provenance.len() - holdout_len);
    let mut clf_idx = rest.to_vec();
    let mut holdout_idx = held.to_vec();
    clf_idx.sort_unstable();
    holdout_idx.sort_unstable();

    let mut clf_matrix = FeatureMatrix::new(dim);
    let mut clf_labels = Vec::with_capacity(clf_idx.len());
    for &r in &clf_idx {
        let (image, sp, class) = provenance[r];
        clf_matrix.push_row(feats[image].row(sp as usize));
        clf_labels.push(class);
    }
    let holdout = holdout_idx.into_iter().map(|r| provenance[r]).collect();
    Ok(TrainingRows {
        clf_matrix,
        clf_labels,
        holdout,
    })
}

/// Discretization thresholds plus per-class mRMR selections on the
/// classifier split.
fn select_features(
    config: &RunConfig,
    class_count: usize,
    rows: &TrainingRows,
) -> Result<(DiscretizeThresholds, SelectedFeatures)> {
    let thresholds = DiscretizeThresholds::fit(&rows.clf_matrix);
    let states = thresholds.apply(&rows.clf_matrix)?;
    let per_class: Vec<Vec<usize>> = (0..class_count)
        .into_par_iter()
        .map(|c| {
            let target: Vec<i8> = rows
                .clf_labels
                .iter()
                .map(|&l| i8::from(l == c))
                .collect();
            mrmr_select(&states, &target, config.feature_count)
        })
        .collect::<Result<_>>()?;
    Ok((thresholds, SelectedFeatures { per_class }))
}

/// Per-image labeled-superpixel observations for the global prior.
fn prior_observations(
    sp_labels: &[Vec<i32>],
    blocks: &[Vec<usize>],
    maps: &[SuperpixelMap],
) -> Vec<Vec<LabeledSuperpixel>> {
    sp_labels
        .iter()
        .zip(blocks)
        .zip(maps)
        .map(|((labels, blocks), map)| {
            labels
                .iter()
                .zip(blocks)
                .zip(map.stats())
                .map(|((&class_id, &block), stat)| LabeledSuperpixel {
                    class_id,
                    block,
                    pixel_count: stat.pixel_count as u64,
                })
                .collect()
        })
        .collect()
}

fn build_priors(
    config: &RunConfig,
    class_count: usize,
    maps: &[SuperpixelMap],
    sp_labels: &[Vec<i32>],
    blocks: &[Vec<usize>],
) -> Result<(GlobalPrior, LocalPrior)> {
    let observations = prior_observations(sp_labels, blocks, maps);
    let global = build_global_prior(
        &observations,
        class_count,
        config.blocks_x * config.blocks_y,
        config.prior_smoothing,
    )?;
    let mut pairs = Vec::new();
    for (map, labels) in maps.iter().zip(sp_labels) {
        for (sp, stat) in map.stats().iter().enumerate() {
            for &nb in &stat.neighbors {
                pairs.push((labels[sp], labels[nb as usize]));
            }
        }
    }
    let local = build_local_prior(&pairs, class_count, config.prior_smoothing)?;
    Ok((global, local))
}

/// Visual probabilities and the voter roster for one image.
fn visual_stage(
    feats: &FeatureMatrix,
    map: &SuperpixelMap,
    blocks: &[usize],
    models: &[BinaryClassModel],
    selected: &SelectedFeatures,
) -> Result<(Vec<Vec<f64>>, Vec<Voter>)> {
    let mut probs = Vec::with_capacity(map.count());
    let mut voters = Vec::with_capacity(map.count());
    for sp in 0..map.count() {
        let pv = predict_proba(models, feats.row(sp), selected)?;
        let (class_id, confidence) = most_probable_class(&pv)?;
        voters.push(Voter {
            block: blocks[sp],
            class_id,
            confidence,
            pixel_count: map.stat(sp as u32).pixel_count as u64,
        });
        probs.push(pv);
    }
    Ok((probs, voters))
}

/// Builds held-out fusion triples from visual predictions plus both priors.
#[allow(clippy::too_many_arguments)]
fn fusion_stage(
    class_count: usize,
    maps: &[SuperpixelMap],
    feats: &[FeatureMatrix],
    blocks: &[Vec<usize>],
    models: &[BinaryClassModel],
    selected: &SelectedFeatures,
    global_prior: &GlobalPrior,
    local_prior: &LocalPrior,
    holdout: &[(usize, u32, usize)],
) -> Result<FusionModel> {
    let per_image: Vec<(Vec<Vec<f64>>, Vec<Voter>)> = (0..maps.len())
        .into_par_iter()
        .map(|i| visual_stage(&feats[i], &maps[i], &blocks[i], models, selected))
        .collect::<Result<_>>()?;
    let tables: Vec<BlockClassMass> = per_image
        .iter()
        .map(|(_, voters)| {
            BlockClassMass::accumulate(voters, global_prior.block_count, class_count)
        })
        .collect::<Result<_>>()?;
    let mut triples = Vec::with_capacity(holdout.len());
    for &(image, sp, target_class) in holdout {
        let (probs, voters) = &per_image[image];
        let sp = sp as usize;
        let pg = normalize_votes(&tables[image].global_votes(blocks[image][sp], global_prior)?)?;
        let neighbor_voters: Vec<Voter> = maps[image]
            .stat(sp as u32)
            .neighbors
            .iter()
            .map(|&nb| voters[nb as usize])
            .collect();
        let pl = normalize_votes(&local_votes(&neighbor_voters, local_prior)?)?;
        triples.push(FusionTriple {
            pv: probs[sp].clone(),
            pl,
            pg,
            target_class,
        });
    }
    fit_fusion(&triples, class_count)
}

/// Trains every stage from a manifest and persists the artifacts under
/// `config.out_dir`. Rerunning with the same seed reproduces every file
/// bit for bit.
pub fn run_train(config: &RunConfig, manifest_path: impl AsRef<Path>) -> Result<Artifacts> {
    config.validate()?;
    let manifest = read_manifest(manifest_path)?;
    let class_count = manifest.class_count();
    let data = load_dataset(&manifest)?;
    log::info!("training on {} images, {class_count} classes", data.images.len());

    let maps = stage("segment", segment_all(config, &data))?;
    let texton_codebook = stage(
        "codebook",
        build_codebook(
            CodebookKind::Texton,
            &data.images,
            config.codebook_size,
            config.codebook_budget,
            config.seed,
        ),
    )?;
    let dense_codebook = stage(
        "codebook",
        build_codebook(
            CodebookKind::Dense,
            &data.images,
            config.codebook_size,
            config.codebook_budget,
            config.seed,
        ),
    )?;
    let feats = stage(
        "features",
        features_all(&data, &maps, &texton_codebook, &dense_codebook),
    )?;
    let sp_labels = stage("features", majority_all(&maps, &data.labels))?;
    let rows = stage("select", assemble_rows(config, &feats, &sp_labels))?;
    let (thresholds, selected) = stage("select", select_features(config, class_count, &rows))?;
    let models = stage(
        "train-clf",
        train_one_vs_all(
            &rows.clf_matrix,
            &rows.clf_labels,
            class_count,
            &selected,
            &config.train_params(),
        ),
    )?;
    let blocks = stage("prior", blocks_all(config, &maps))?;
    let (global_prior, local_prior) = stage(
        "prior",
        build_priors(config, class_count, &maps, &sp_labels, &blocks),
    )?;
    let fusion = stage(
        "train-fusion",
        fusion_stage(
            class_count,
            &maps,
            &feats,
            &blocks,
            &models,
            &selected,
            &global_prior,
            &local_prior,
            &rows.holdout,
        ),
    )?;

    let artifacts = Artifacts {
        config: config.clone(),
        class_names: manifest.class_names.clone(),
        palette: manifest.palette.clone(),
        texton_codebook,
        dense_codebook,
        thresholds,
        selected,
        models,
        global_prior,
        local_prior,
        fusion,
    };
    artifacts.save(&config.out_dir)?;
    Ok(artifacts)
}

/// One predicted image: fused and visual-only label maps plus the
/// per-superpixel fused distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub superpixels: SuperpixelMap,
    pub fused_labels: LabelMap,
    pub visual_labels: LabelMap,
    pub fused_probabilities: Vec<Vec<f64>>,
}

/// Labels one image with the trained artifacts.
pub fn run_predict(artifacts: &Artifacts, image: &RasterImage) -> Result<Prediction> {
    artifacts.validate()?;
    let config = &artifacts.config;
    let class_count = artifacts.class_count();
    let map = segment(image, &config.seg_params(image.longer_dimension()))?;
    let feats = extract_features(
        image,
        &map,
        &artifacts.texton_codebook,
        &artifacts.dense_codebook,
        &FeatureParams::default(),
    )?;
    let grid = BlockGrid::new(config.blocks_x, config.blocks_y, image.width(), image.height())?;
    let blocks: Vec<usize> = map
        .stats()
        .iter()
        .map(|s| grid.assign_block(s.centroid))
        .collect::<Result<_>>()?;
    let (probs, voters) = visual_stage(&feats, &map, &blocks, &artifacts.models, &artifacts.selected)?;
    let table = BlockClassMass::accumulate(&voters, grid.len(), class_count)?;

    let mut fused_probabilities = Vec::with_capacity(map.count());
    let mut fused_per_sp = Vec::with_capacity(map.count());
    let mut visual_per_sp = Vec::with_capacity(map.count());
    for sp in 0..map.count() {
        let pg = normalize_votes(&table.global_votes(blocks[sp], &artifacts.global_prior)?)?;
        let neighbor_voters: Vec<Voter> = map
            .stat(sp as u32)
            .neighbors
            .iter()
            .map(|&nb| voters[nb as usize])
            .collect();
        let pl = normalize_votes(&local_votes(&neighbor_voters, &artifacts.local_prior)?)?;
        let fused = artifacts.fusion.fuse(&probs[sp], &pl, &pg)?;
        fused_per_sp.push(final_label(&fused)? as i32);
        visual_per_sp.push(voters[sp].class_id as i32);
        fused_probabilities.push(fused);
    }

    let project = |per_sp: &[i32]| -> Result<LabelMap> {
        let labels: Vec<i32> = map.ids().iter().map(|&id| per_sp[id as usize]).collect();
        LabelMap::from_labels(image.width(), image.height(), labels, class_count)
    };
    Ok(Prediction {
        fused_labels: project(&fused_per_sp)?,
        visual_labels: project(&visual_per_sp)?,
        superpixels: map,
        fused_probabilities,
    })
}

//! Individual pipeline stages that persist their outputs, so training can be
//! run piecemeal across processes. Running every stage in order writes the
//! same artifact bytes as [`run_train`](super::run_train).

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::*;

const MAPS_DIR: &str = "maps";
const FEATURES_DIR: &str = "features";

fn map_file(dir: &Path, index: usize) -> PathBuf {
    dir.join(MAPS_DIR).join(format!("{index:04}.txt"))
}

fn features_file(dir: &Path, index: usize) -> PathBuf {
    dir.join(FEATURES_DIR).join(format!("{index:04}.csv"))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Loads the stored superpixel maps for every dataset image, checking that
/// the stored dimensions still match.
fn load_maps(dir: &Path, data: &LoadedDataset) -> Result<Vec<SuperpixelMap>> {
    data.images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let map = SuperpixelMap::read(artifact_path(dir, &format!("{MAPS_DIR}/{i:04}.txt"))?)?;
            if map.width() != img.width() || map.height() != img.height() {
                return Err(Error::invalid_input(format!(
                    "stored map {i} is {}x{} but image is {}x{}; rerun segment",
                    map.width(),
                    map.height(),
                    img.width(),
                    img.height()
                )));
            }
            Ok(map)
        })
        .collect()
}

/// Loads the stored feature matrices, checking row counts against the maps.
fn load_features(dir: &Path, maps: &[SuperpixelMap]) -> Result<Vec<FeatureMatrix>> {
    maps.iter()
        .enumerate()
        .map(|(i, map)| {
            let feats =
                FeatureMatrix::load(artifact_path(dir, &format!("{FEATURES_DIR}/{i:04}.csv"))?)?;
            if feats.rows() != map.count() {
                return Err(Error::invalid_input(format!(
                    "stored features {i} have {} rows for {} superpixels; rerun features",
                    feats.rows(),
                    map.count()
                )));
            }
            Ok(feats)
        })
        .collect()
}

fn load_models(dir: &Path, class_count: usize) -> Result<Vec<BinaryClassModel>> {
    (0..class_count)
        .map(|c| BinaryClassModel::load(artifact_path(dir, &format!("{CLASSIFIER_DIR}/class_{c}.txt"))?))
        .collect()
}

/// Records the run configuration and class set so the output directory is
/// self-describing.
fn save_run_context(config: &RunConfig, manifest: &DatasetManifest) -> Result<()> {
    ensure_dir(&config.out_dir)?;
    config.save(config.out_dir.join(CONFIG_FILE))?;
    save_classes(
        &config.out_dir.join(CLASSES_FILE),
        &manifest.class_names,
        &manifest.palette,
    )
}

fn prepared(config: &RunConfig, manifest_path: &Path) -> Result<(DatasetManifest, LoadedDataset)> {
    config.validate()?;
    let manifest = read_manifest(manifest_path)?;
    let data = load_dataset(&manifest)?;
    save_run_context(config, &manifest)?;
    Ok((manifest, data))
}

/// Segments every image and stores the superpixel maps.
pub fn stage_segment(config: &RunConfig, manifest_path: &Path) -> Result<()> {
    let (_, data) = prepared(config, manifest_path)?;
    let maps = stage("segment", segment_all(config, &data))?;
    ensure_dir(&config.out_dir.join(MAPS_DIR))?;
    for (i, map) in maps.iter().enumerate() {
        map.write(map_file(&config.out_dir, i))?;
        log::debug!("image {i}: {} superpixels", map.count());
    }
    log::info!("segmented {} images", maps.len());
    Ok(())
}

/// Learns and stores both visual-word codebooks.
pub fn stage_codebook(config: &RunConfig, manifest_path: &Path) -> Result<()> {
    let (_, data) = prepared(config, manifest_path)?;
    for (kind, file) in [
        (CodebookKind::Texton, TEXTON_FILE),
        (CodebookKind::Dense, DENSE_FILE),
    ] {
        let codebook = stage(
            "codebook",
            build_codebook(
                kind,
                &data.images,
                config.codebook_size,
                config.codebook_budget,
                config.seed,
            ),
        )?;
        codebook.save(config.out_dir.join(file))?;
    }
    log::info!("built {}-word codebooks", config.codebook_size);
    Ok(())
}

/// Extracts and stores the per-superpixel feature matrices.
pub fn stage_features(config: &RunConfig, manifest_path: &Path) -> Result<()> {
    let (_, data) = prepared(config, manifest_path)?;
    let dir = &config.out_dir;
    let maps = load_maps(dir, &data)?;
    let texton = Codebook::load(artifact_path(dir, TEXTON_FILE)?, CodebookKind::Texton)?;
    let dense = Codebook::load(artifact_path(dir, DENSE_FILE)?, CodebookKind::Dense)?;
    let feats = stage("features", features_all(&data, &maps, &texton, &dense))?;
    ensure_dir(&dir.join(FEATURES_DIR))?;
    for (i, matrix) in feats.iter().enumerate() {
        matrix.save(features_file(dir, i))?;
    }
    log::info!("extracted features for {} images", feats.len());
    Ok(())
}

fn stored_rows(config: &RunConfig, data: &LoadedDataset) -> Result<(Vec<SuperpixelMap>, Vec<FeatureMatrix>, TrainingRows)> {
    let dir = &config.out_dir;
    let maps = load_maps(dir, data)?;
    let feats = load_features(dir, &maps)?;
    let sp_labels = stage("features", majority_all(&maps, &data.labels))?;
    let rows = stage("select", assemble_rows(config, &feats, &sp_labels))?;
    Ok((maps, feats, rows))
}

/// Fits discretization thresholds and the per-class feature selections.
pub fn stage_select(config: &RunConfig, manifest_path: &Path) -> Result<()> {
    let (manifest, data) = prepared(config, manifest_path)?;
    let (_, _, rows) = stored_rows(config, &data)?;
    let (thresholds, selected) = stage(
        "select",
        select_features(config, manifest.class_count(), &rows),
    )?;
    thresholds.save(config.out_dir.join(THRESHOLDS_FILE))?;
    selected.save(config.out_dir.join(SELECTED_FILE))?;
    log::info!(
        "selected {} features per class from {} rows",
        config.feature_count,
        rows.clf_labels.len()
    );
    Ok(())
}

/// Trains and stores the one-vs-all classifiers.
pub fn stage_train_clf(config: &RunConfig, manifest_path: &Path) -> Result<()> {
    let (manifest, data) = prepared(config, manifest_path)?;
    let (_, _, rows) = stored_rows(config, &data)?;
    let selected = SelectedFeatures::load(artifact_path(&config.out_dir, SELECTED_FILE)?)?;
    let models = stage(
        "train-clf",
        train_one_vs_all(
            &rows.clf_matrix,
            &rows.clf_labels,
            manifest.class_count(),
            &selected,
            &config.train_params(),
        ),
    )?;
    let classifier_dir = config.out_dir.join(CLASSIFIER_DIR);
    ensure_dir(&classifier_dir)?;
    for model in &models {
        model.save(classifier_dir.join(format!("class_{}.txt", model.class_id)))?;
    }
    log::info!("trained {} classifiers", models.len());
    Ok(())
}

/// Builds and stores the global and local location priors.
pub fn stage_prior(config: &RunConfig, manifest_path: &Path) -> Result<()> {
    let (manifest, data) = prepared(config, manifest_path)?;
    let maps = load_maps(&config.out_dir, &data)?;
    let sp_labels = stage("prior", majority_all(&maps, &data.labels))?;
    let blocks = stage("prior", blocks_all(config, &maps))?;
    let (global, local) = stage(
        "prior",
        build_priors(config, manifest.class_count(), &maps, &sp_labels, &blocks),
    )?;
    global.save(config.out_dir.join(GLOBAL_PRIOR_FILE))?;
    local.save(config.out_dir.join(LOCAL_PRIOR_FILE))?;
    log::info!("built priors over {} blocks", global.block_count);
    Ok(())
}

/// Fits and stores the fusion weights on the held-out superpixels.
pub fn stage_train_fusion(config: &RunConfig, manifest_path: &Path) -> Result<()> {
    let (manifest, data) = prepared(config, manifest_path)?;
    let class_count = manifest.class_count();
    let (maps, feats, rows) = stored_rows(config, &data)?;
    let dir = &config.out_dir;
    let selected = SelectedFeatures::load(artifact_path(dir, SELECTED_FILE)?)?;
    let models = load_models(dir, class_count)?;
    let global = GlobalPrior::load(artifact_path(dir, GLOBAL_PRIOR_FILE)?)?;
    let local = LocalPrior::load(artifact_path(dir, LOCAL_PRIOR_FILE)?)?;
    let blocks = stage("train-fusion", blocks_all(config, &maps))?;
    let fusion = stage(
        "train-fusion",
        fusion_stage(
            class_count,
            &maps,
            &feats,
            &blocks,
            &models,
            &selected,
            &global,
            &local,
            &rows.holdout,
        ),
    )?;
    fusion.save(dir.join(FUSION_FILE))?;
    log::info!("fit fusion weights on {} held-out superpixels", rows.holdout.len());
    Ok(())
}

/// Predicts every image of a manifest in parallel with shared artifacts.
pub fn predict_manifest(
    artifacts: &Artifacts,
    data: &LoadedDataset,
) -> Result<Vec<Prediction>> {
    data.images
        .par_iter()
        .map(|img| run_predict(artifacts, img))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::synth::{synth_corpus, BandSpec, SceneGrammar};

    fn grammar() -> SceneGrammar {
        SceneGrammar {
            width: 48,
            height: 48,
            class_names: vec!["a".into(), "b".into()],
            palette: vec![[255, 0, 0], [0, 0, 255]],
            colors: vec![[220.0, 70.0, 50.0], [40.0, 80.0, 210.0]],
            bands: vec![
                BandSpec {
                    height_fraction: 0.5,
                    segments: vec![(0, 1.0)],
                },
                BandSpec {
                    height_fraction: 0.5,
                    segments: vec![(1, 1.0)],
                },
            ],
            noise_sigma: 7.0,
            boundary_jitter: 1,
        }
    }

    fn config(out_dir: &Path) -> RunConfig {
        let mut config = RunConfig::default();
        config.min_size = 20;
        config.codebook_size = 8;
        config.codebook_budget = 1000;
        config.feature_count = 8;
        config.max_iterations = 400;
        config.seed = 3;
        config.out_dir = out_dir.to_path_buf();
        config
    }

    #[test]
    fn stagewise_training_matches_all_in_one() {
        let dir = tempfile::tempdir().unwrap();
        let (train_manifest, _) =
            synth_corpus(&grammar(), 6, 1, 9, dir.path().join("data")).unwrap();

        let staged = config(&dir.path().join("staged"));
        stage_segment(&staged, &train_manifest).unwrap();
        stage_codebook(&staged, &train_manifest).unwrap();
        stage_features(&staged, &train_manifest).unwrap();
        stage_select(&staged, &train_manifest).unwrap();
        stage_train_clf(&staged, &train_manifest).unwrap();
        stage_prior(&staged, &train_manifest).unwrap();
        stage_train_fusion(&staged, &train_manifest).unwrap();

        let whole = config(&dir.path().join("whole"));
        run_train(&whole, &train_manifest).unwrap();

        for name in [
            SELECTED_FILE,
            THRESHOLDS_FILE,
            GLOBAL_PRIOR_FILE,
            LOCAL_PRIOR_FILE,
            FUSION_FILE,
            "classifiers/class_0.txt",
            "classifiers/class_1.txt",
        ] {
            let a = std::fs::read(staged.out_dir.join(name)).unwrap();
            let b = std::fs::read(whole.out_dir.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between staged and all-in-one runs");
        }
        // and the staged directory is a loadable model
        Artifacts::load(&staged.out_dir).unwrap();
    }

    #[test]
    fn stages_out_of_order_report_missing_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let (train_manifest, _) =
            synth_corpus(&grammar(), 3, 1, 9, dir.path().join("data")).unwrap();
        let config = config(&dir.path().join("model"));
        // features before segment: no maps stored yet
        let err = stage_features(&config, &train_manifest).unwrap_err();
        match err {
            Error::MissingArtifact(path) => {
                assert!(path.to_string_lossy().contains("maps"), "{}", path.display())
            }
            other => panic!("expected missing artifact, got {other}"),
        }
    }
}

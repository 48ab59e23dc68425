//! Superpixel scene parsing with spatially constrained location priors.
//!
//! The crate segments images into superpixels, describes each superpixel with
//! a 537-dimensional visual feature vector, classifies it with one-vs-all
//! probabilistic models on mRMR-selected feature subsets, and then refines the
//! visual probabilities with contextual class votes propagated through two
//! location priors learned from training data: a global prior over spatial
//! block pairs and a local prior over superpixel adjacencies. A per-class
//! linear fusion of the visual, local and global probabilities produces the
//! final labeling.

pub mod classify;
pub mod context;
pub mod error;
pub mod features;
pub mod imgseg;
pub mod pipeline;
pub mod prior;
pub mod raster;

pub use classify::{
    logistic_loss_and_grad, most_probable_class, predict_proba, train_one_vs_all,
    BinaryClassModel, TrainParams,
};
pub use context::{
    final_label, fit_fusion, global_votes, local_votes, normalize_votes, BlockClassMass,
    FusionModel, FusionTriple, Voter,
};
pub use error::{Error, Result};
pub use features::{
    mrmr_select, mutual_information, Codebook, CodebookKind, DiscretizeThresholds,
    DiscretizedMatrix, FeatureMatrix, FeatureParams, SelectedFeatures, FEATURE_DIM,
};
pub use imgseg::{compute_k, gaussian_smooth, segment, SegParams, SuperpixelMap};
pub use pipeline::{
    evaluate, load_dataset, read_manifest, render_overlay, run_predict, run_train, split_folds,
    synth_corpus, write_manifest, Artifacts, BandSpec, DatasetManifest, LoadedDataset, Metrics,
    Prediction, RunConfig, SceneGrammar,
};
pub use prior::{
    build_global_prior, build_local_prior, majority_label, superpixel_labels, BlockGrid,
    GlobalPrior, LabeledSuperpixel, LocalPrior,
};
pub use raster::{LabelMap, RasterImage, VOID};

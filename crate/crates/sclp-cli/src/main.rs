//! Command-line front end for the scene-parsing toolkit.
//!
//! Each subcommand wraps one library entry point; training stages can run
//! one at a time or all at once via `train`. A flat `key = value` config
//! file seeds the run configuration and the global flags override it.
//! Exit codes: 0 success, 2 invalid input, 3 missing artifact,
//! 4 insufficient data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sclp::pipeline::stages;
use sclp::{
    evaluate, read_manifest, render_overlay, run_predict, run_train, synth_corpus, Artifacts,
    Error, LabelMap, RasterImage, Result, RunConfig, SceneGrammar,
};

#[derive(Parser)]
#[command(name = "sclp", version, about = "Superpixel scene parsing with location priors")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Flat `key = value` config file; defaults apply for absent keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config artifact directory.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Worker threads; 0 or absent picks the core count.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Segment every manifest image and store the superpixel maps.
    Segment { manifest: PathBuf },
    /// Cluster the texton and dense codebooks from training images.
    Codebook { manifest: PathBuf },
    /// Extract feature vectors for every stored superpixel.
    Features { manifest: PathBuf },
    /// Discretize training features and select the top set per class.
    Select { manifest: PathBuf },
    /// Train the one-vs-all visual classifiers.
    TrainClf { manifest: PathBuf },
    /// Estimate the global and local location priors.
    Prior { manifest: PathBuf },
    /// Fit the fusion weights on the held-out split.
    TrainFusion { manifest: PathBuf },
    /// Run every training stage in order and archive the artifacts.
    Train { manifest: PathBuf },
    /// Label images with the trained model; each image gets a
    /// `<stem>_labels.txt` grid in the artifact directory. Prediction always
    /// uses the configuration archived with the artifacts.
    Predict {
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Predict over a labeled manifest, print the metrics table, and write
    /// the confusion matrix CSV.
    Evaluate { manifest: PathBuf },
    /// Blend a label map over its image using the manifest palette.
    Visualize {
        manifest: PathBuf,
        image: PathBuf,
        labels: PathBuf,
        output: PathBuf,
        /// Blend strength: 0 keeps the image, 1 paints pure class colors.
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Generate the synthetic ambiguous-scene corpus under a directory.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 60)]
        train_images: usize,
        #[arg(long, default_value_t = 20)]
        test_images: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::from(exit_code(&error))
        }
    }
}

fn exit_code(error: &Error) -> u8 {
    match error {
        Error::MissingArtifact(_) => 3,
        Error::InsufficientData(_) => 4,
        _ => 2,
    }
}

fn load_config(args: &GlobalArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dir) = &args.out_dir {
        config.out_dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::invalid_input(format!("thread pool: {e}")))?;
    }
    let config = load_config(&cli.global)?;
    match cli.command {
        Command::Segment { manifest } => stages::stage_segment(&config, &manifest),
        Command::Codebook { manifest } => stages::stage_codebook(&config, &manifest),
        Command::Features { manifest } => stages::stage_features(&config, &manifest),
        Command::Select { manifest } => stages::stage_select(&config, &manifest),
        Command::TrainClf { manifest } => stages::stage_train_clf(&config, &manifest),
        Command::Prior { manifest } => stages::stage_prior(&config, &manifest),
        Command::TrainFusion { manifest } => stages::stage_train_fusion(&config, &manifest),
        Command::Train { manifest } => {
            run_train(&config, &manifest)?;
            println!("artifacts written to {}", config.out_dir.display());
            Ok(())
        }
        Command::Predict { images } => predict_images(&config, &images),
        Command::Evaluate { manifest } => evaluate_manifest(&config, &manifest),
        Command::Visualize {
            manifest,
            image,
            labels,
            output,
            alpha,
        } => visualize(&manifest, &image, &labels, &output, alpha),
        Command::Synth {
            dir,
            train_images,
            test_images,
        } => synth(&config, &dir, train_images, test_images),
    }
}

fn predict_images(config: &RunConfig, images: &[PathBuf]) -> Result<()> {
    let artifacts = Artifacts::load(&config.out_dir)?;
    for path in images {
        let image = RasterImage::read(path)?;
        let prediction = run_predict(&artifacts, &image)?;
        let stem = path
            .file_stem()
            .ok_or_else(|| Error::invalid_input(format!("{}: no file name", path.display())))?
            .to_string_lossy();
        let out = config.out_dir.join(format!("{stem}_labels.txt"));
        prediction.fused_labels.write(&out)?;
        println!("{} -> {}", path.display(), out.display());
    }
    Ok(())
}

fn evaluate_manifest(config: &RunConfig, manifest_path: &Path) -> Result<()> {
    let artifacts = Artifacts::load(&config.out_dir)?;
    let manifest = read_manifest(manifest_path)?;
    if manifest.class_names != artifacts.class_names {
        return Err(Error::invalid_input(format!(
            "manifest classes {:?} do not match trained classes {:?}",
            manifest.class_names, artifacts.class_names
        )));
    }
    let data = sclp::load_dataset(&manifest)?;
    let predictions = stages::predict_manifest(&artifacts, &data)?;
    let fused: Vec<LabelMap> = predictions.iter().map(|p| p.fused_labels.clone()).collect();
    let visual: Vec<LabelMap> = predictions.iter().map(|p| p.visual_labels.clone()).collect();
    let metrics = evaluate(&fused, &data.labels, artifacts.class_count())?;
    let visual_metrics = evaluate(&visual, &data.labels, artifacts.class_count())?;
    log::info!(
        "visual-only global accuracy {:.4} (fused {:.4})",
        visual_metrics.global_accuracy,
        metrics.global_accuracy
    );
    print!("{}", metrics.format_table(&artifacts.class_names));
    let csv = config.out_dir.join("confusion.csv");
    metrics.write_confusion_csv(&csv)?;
    println!("confusion matrix written to {}", csv.display());
    Ok(())
}

fn visualize(
    manifest_path: &Path,
    image_path: &Path,
    labels_path: &Path,
    output: &Path,
    alpha: f64,
) -> Result<()> {
    let manifest = read_manifest(manifest_path)?;
    let image = RasterImage::read(image_path)?;
    let labels = LabelMap::read(labels_path, manifest.class_count())?;
    let overlay = render_overlay(&image, &labels, &manifest.palette, alpha)?;
    overlay.write(output)?;
    println!("overlay written to {}", output.display());
    Ok(())
}

fn synth(config: &RunConfig, dir: &Path, train_images: usize, test_images: usize) -> Result<()> {
    let grammar = SceneGrammar::ambiguous_default();
    let (train, test) = synth_corpus(&grammar, train_images, test_images, config.seed, dir)?;
    println!("{}", train.display());
    println!("{}", test.display());
    Ok(())
}

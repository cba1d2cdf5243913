use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hapmap_core::classifier::dataset::{load_manifest, parse_manifest};
use hapmap_core::classifier::{
    predict_gated, sample_mesh_off, synthetic_split, train, Dataset, PointSetModel, Taxonomy, TrainConfig,
};
use hapmap_core::dcgd::{detect_ground, ground_level};
use hapmap_core::depthio::{encode_mask_pgm, encode_pgm16};
use hapmap_core::pipeline::{load_frame, perceive, ModelClassifier};
use hapmap_core::scenegen::{random_scene, render_depth, RandomSceneOptions, SceneSpec};
use hapmap_core::{run_pipeline, run_raw, DepthFrame, GridFormat, PipelineConfig, PipelineError, PointCloud, Stage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Depth frame to refreshable pin-array tactile map.
#[derive(Parser)]
#[command(name = "hapmap", version)]
struct Cli {
    /// Pipeline config (`section.key=value` lines).
    #[arg(long, global = true, env = "HAPMAP_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FrameArgs {
    /// 16-bit PGM or HDPT raw depth frame in millimetres.
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Ground mask as an 8-bit PGM.
    Ground(FrameArgs),
    /// Clustered obstacle points as `x y z segment` lines.
    Segment(FrameArgs),
    /// Per-object geometry report without classification.
    Features(FrameArgs),
    /// Classify one point cloud (`.xyz` text or `.off` mesh).
    Classify {
        #[arg(long)]
        cloud: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train a classifier on a manifest or on synthetic desk-scale shapes.
    Train(TrainArgs),
    /// Full pipeline: depth frame in, pin grid out.
    #[command(alias = "run")]
    Synth {
        #[command(flatten)]
        frame: FrameArgs,
        #[arg(long)]
        format: Option<GridFormat>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Map the raw cloud by height bands instead of labeling objects.
        #[arg(long)]
        raw: bool,
        /// Where to write the per-object report (stdout when omitted).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render a synthetic scene to a depth frame.
    Scenegen {
        /// Scene description; a random scene is drawn from the seed otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth floor mask PGM.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Writes the scene description that was rendered.
        #[arg(long)]
        spec_out: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        max_boxes: usize,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Lines of `<path> <fine_class>`.
    #[arg(long, conflicts_with = "synthetic_per_class")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    test_manifest: Option<PathBuf>,
    #[arg(long)]
    synthetic_per_class: Option<usize>,
    #[arg(long, default_value_t = 50)]
    synthetic_test_per_class: usize,
    /// Train on the fine class list instead of the six coarse classes.
    #[arg(long)]
    fine: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    epochs: usize,
    #[arg(long, default_value_t = 20)]
    decay_every: usize,
    #[arg(long, default_value_t = 256)]
    n_points: usize,
    #[arg(long, value_delimiter = ',', default_value = "3,64,128,256")]
    point_widths: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "128")]
    head_hidden: Vec<usize>,
}

fn stage(stage: Stage, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(stage, e)
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes).context("writing stdout")
        }
    }
}

fn frame_for(config: &PipelineConfig, path: &Path) -> Result<DepthFrame> {
    let frame = load_frame(path)?;
    config.validate()?;
    Ok(frame)
}

fn read_cloud(path: &Path, n: usize, rng: &mut ChaCha8Rng) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| stage(Stage::Classifier, format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("off")) {
        Ok(sample_mesh_off(&bytes, n, rng).map_err(|e| stage(Stage::Classifier, e))?)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| stage(Stage::Classifier, "cloud is not UTF-8"))?;
        Ok(PointCloud::parse_xyz(&text).map_err(|e| stage(Stage::Classifier, e))?)
    }
}

fn manifest_dataset(path: &Path, taxonomy: Taxonomy, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| stage(Stage::Classifier, format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let entries = parse_manifest(&text, base).map_err(|e| stage(Stage::Classifier, e))?;
    Ok(load_manifest(&entries, taxonomy, n, rng).map_err(|e| stage(Stage::Classifier, e))?)
}

fn cmd_train(args: &TrainArgs, seed: u64) -> Result<()> {
    let taxonomy = if args.fine { Taxonomy::Fine } else { Taxonomy::Coarse };
    let (train_set, test_set) = match (&args.manifest, args.synthetic_per_class) {
        (Some(m), _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let train_set = manifest_dataset(m, taxonomy, args.n_points * 4, &mut rng)?;
            let test_set = match &args.test_manifest {
                Some(t) => manifest_dataset(t, taxonomy, args.n_points * 4, &mut rng)?,
                None => Dataset { classes: train_set.classes.clone(), samples: Vec::new() },
            };
            (train_set, test_set)
        }
        (None, Some(per_class)) => synthetic_split(taxonomy, per_class, args.synthetic_test_per_class, seed),
        (None, None) => bail!("train needs --manifest or --synthetic-per-class"),
    };
    let config = TrainConfig {
        epochs: args.epochs,
        decay_every: args.decay_every,
        seed,
        n_points: args.n_points,
        point_widths: args.point_widths.clone(),
        head_hidden: args.head_hidden.clone(),
        ..TrainConfig::default()
    };
    let (model, history) = train(&train_set, &test_set, &config).map_err(|e| stage(Stage::Classifier, e))?;
    for e in &history {
        eprintln!(
            "epoch {:>3} lr {:.5} train loss {:.4} acc {:.4} test loss {:.4} acc {:.4}",
            e.epoch, e.lr, e.train_loss, e.train_accuracy, e.test_loss, e.test_accuracy
        );
    }
    write_out(Some(&args.out), &model.to_bytes())
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli)?;
    match &cli.command {
        Command::Ground(a) => {
            let frame = frame_for(&config, &a.depth)?;
            let k = &config.intrinsics;
            if frame.width() != k.width || frame.height() != k.height {
                return Err(stage(Stage::Depthio, "frame size does not match intrinsics").into());
            }
            let mask = detect_ground(&frame, k, &config.dcgd);
            let y = ground_level(&frame, k, &mask).ok_or_else(|| stage(Stage::Dcgd, "no ground pixels detected"))?;
            eprintln!("ground pixels {} level {:.1}mm", mask.count(), y);
            write_out(a.out.as_deref(), &encode_mask_pgm(frame.width(), frame.height(), &mask.mask))
        }
        Command::Segment(a) => {
            let frame = frame_for(&config, &a.depth)?;
            let p = perceive(&frame, &config)?;
            let mut out = String::new();
            for s in &p.segments {
                for q in s.points.iter() {
                    out.push_str(&format!("{:.3} {:.3} {:.3} {}\n", q.x, q.y, q.z, s.id));
                }
            }
            eprintln!("{} segments, ground level {:.1}mm", p.segments.len(), p.ground_y);
            write_out(a.out.as_deref(), out.as_bytes())
        }
        Command::Features(a) => {
            let frame = frame_for(&config, &a.depth)?;
            let out = run_pipeline(&config, &frame, None)?;
            write_out(a.out.as_deref(), out.report.as_bytes())
        }
        Command::Classify { cloud, model } => {
            let path = model.as_ref().or(config.model_path.as_ref()).context("classify needs --model")?;
            let bytes = fs::read(path).map_err(|e| stage(Stage::Classifier, format!("{}: {e}", path.display())))?;
            let model = PointSetModel::from_bytes(&bytes).map_err(|e| stage(Stage::Classifier, e))?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let points = read_cloud(cloud, model.n_points * 4, &mut rng)?;
            let gated = predict_gated(&model, &points, config.threshold, &mut rng).map_err(|e| stage(Stage::Classifier, e))?;
            let verdict = match (gated.class, gated.candidate) {
                (Some(c), _) => c.name().to_string(),
                (None, Some(c)) => format!("rejected(p={:.2}, candidate {})", gated.confidence, c.name()),
                (None, None) => format!("rejected(p={:.2})", gated.confidence),
            };
            println!("{verdict}\t{:.4}", gated.confidence);
            Ok(())
        }
        Command::Train(args) => cmd_train(args, config.seed),
        Command::Synth { frame: a, format, model, raw, report } => {
            let mut config = config.clone();
            if let Some(m) = model {
                config.model_path = Some(m.clone());
            }
            let format = format.unwrap_or(config.format);
            let frame = frame_for(&config, &a.depth)?;
            let out = if *raw {
                run_raw(&config, &frame)?
            } else {
                let model = config.load_model()?;
                let classifier = model.as_ref().map(|m| ModelClassifier { model: m, seed: config.seed });
                run_pipeline(&config, &frame, classifier.as_ref().map(|c| c as _))?
            };
            write_out(a.out.as_deref(), &out.emit(format))?;
            match report {
                Some(p) => write_out(Some(p), out.report.as_bytes()),
                None if a.out.is_some() && !*raw => write_out(None, out.report.as_bytes()),
                None => Ok(()),
            }
        }
        Command::Scenegen { spec, out, truth, spec_out, max_boxes } => {
            let k = &config.intrinsics;
            let scene = match spec {
                Some(p) => SceneSpec::load(p).with_context(|| format!("scenegen: {}", p.display()))?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    let opts = RandomSceneOptions { max_boxes: *max_boxes, ..RandomSceneOptions::default() };
                    random_scene(&mut rng, k, &opts)
                }
            };
            let (frame, gt) = render_depth(&scene, k).context("scenegen")?;
            write_out(Some(out), &encode_pgm16(&frame))?;
            if let Some(t) = truth {
                write_out(Some(t), &encode_mask_pgm(gt.width, gt.height, &gt.ground_mask()))?;
            }
            if let Some(s) = spec_out {
                write_out(Some(s), scene.to_text().as_bytes())?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

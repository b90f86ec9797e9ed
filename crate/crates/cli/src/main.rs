use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde_json::json;

use fatigue_core::classifier::save_svm;
use fatigue_core::detector::{load_cascade, save_cascade, StageSpec};
use fatigue_core::features::save_pca;
use fatigue_core::harness::{
    evaluate, fit_pipeline, infer_stream, ingest, load_frames, load_pipeline, predict_dataset,
    save_pipeline, synth_generate, DetectorFixture, DetectorMode, Frame, HarnessError, LightLevel,
    MetricsReport, PipelineConfig, PipelineModel, SyntheticSpec,
};

#[derive(Parser)]
#[command(
    name = "fatigue",
    version,
    about = "Driver fatigue detection from camera frames"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Render synthetic frames and a manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        #[arg(long, default_value_t = 0.5)]
        fraction_fatigued: f64,
        #[arg(long, default_value_t = 160)]
        width: usize,
        #[arg(long, default_value_t = 160)]
        height: usize,
        #[arg(long, default_value_t = 16)]
        jitter: usize,
        #[arg(long, default_value_t = 8.0)]
        noise_sigma: f64,
        #[arg(long, default_value = "normal")]
        light: LightLevel,
        #[arg(long, default_value_t = 96)]
        face_side: usize,
        #[arg(long, default_value_t = 10)]
        subjects: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train PCA + SVM on a manifest; writes model.pca, model.svm and model.pipe.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score a trained model on a manifest, optionally with cross-validation.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Also run k-fold cross-validation with the model's settings.
        #[arg(long)]
        folds: Option<usize>,
        /// Write a JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Stream a manifest's frames through the model and the alert unit.
    Simulate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Write the trace here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train a Haar cascade on the synthetic face-vs-background fixture.
    DetectTrain {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 240)]
        positives: usize,
        #[arg(long, default_value_t = 1000)]
        negatives: usize,
        /// Boosting rounds per stage, comma separated.
        #[arg(long, default_value = "6,20")]
        rounds: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Model(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Model(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Model(e) => e,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_model_error() {
            Failure::Model(e.into())
        } else if matches!(e, HarnessError::Config(_) | HarnessError::InvalidSpec(_)) {
            Failure::Usage(e.into())
        } else {
            Failure::Data(e.into())
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn data<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Data(e.into())
}

fn load_config(args: &ConfigArgs) -> Outcome<PipelineConfig> {
    let mut config = PipelineConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(Failure::Usage)?;
        config.apply_text(&text)?;
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(anyhow!("--set expects KEY=VALUE, got {kv:?}")))?;
        config.set(k, v)?;
    }
    config.validate()?;
    Ok(config)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Outcome {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(data)
}

fn read_model(path: &Path) -> Outcome<PipelineModel> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading model {}", path.display()))
        .map_err(Failure::Model)?;
    load_pipeline(&text).map_err(|e| {
        Failure::Model(anyhow::Error::from(e).context(format!("loading {}", path.display())))
    })
}

fn run_train(manifest: &Path, out_dir: &Path, args: &ConfigArgs) -> Outcome {
    let config = load_config(args)?;
    let cascade = match (&config.detector, &config.cascade_path) {
        (DetectorMode::Cascade, Some(p)) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading cascade {}", p.display()))
                .map_err(Failure::Model)?;
            Some(load_cascade(&text).map_err(|e| Failure::Model(e.into()))?)
        }
        _ => None,
    };
    let frames = load_frames(&ingest(manifest)?)?;
    let fit = fit_pipeline(&frames, &config, cascade)?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(data)?;
    write(&out_dir.join("model.pca"), save_pca(&fit.model.pca))?;
    write(&out_dir.join("model.svm"), save_svm(&fit.model.svm))?;
    write(&out_dir.join("model.pipe"), save_pipeline(&fit.model))?;
    println!(
        "trained on {} frames ({} skipped): {} components, {} support vectors, training accuracy {:.4}",
        frames.len() - fit.skipped,
        fit.skipped,
        fit.model.pca.k(),
        fit.model.svm.support_vectors.len(),
        fit.training_accuracy
    );
    Ok(())
}

fn report_json(holdout: &MetricsReport, cv: Option<&MetricsReport>) -> serde_json::Value {
    let one = |m: &MetricsReport| {
        json!({
            "n": m.n,
            "skipped": m.skipped,
            "accuracy": m.accuracy,
            "precision": m.precision,
            "recall": m.recall,
            "confusion": {
                "tp": m.confusion.tp,
                "fp": m.confusion.fp,
                "tn": m.confusion.tn,
                "fn": m.confusion.fn_,
            },
            "folds": m.folds.iter().map(|f| json!({
                "accuracy": f.accuracy,
                "n_train": f.train.len(),
                "n_test": f.test.len(),
            })).collect::<Vec<_>>(),
            "mean_fold_accuracy": m.mean_fold_accuracy,
            "latency": m.latency.map(|l| json!({
                "onsets": l.onsets,
                "detected": l.detected,
                "mean_ticks": l.mean_ticks,
            })),
        })
    };
    json!({
        "holdout": one(holdout),
        "cross_validation": cv.map(one),
    })
}

fn run_eval(
    manifest: &Path,
    model_path: &Path,
    folds: Option<usize>,
    report: Option<&Path>,
    args: &ConfigArgs,
) -> Outcome {
    let config = load_config(args)?;
    let model = read_model(model_path)?;
    let frames = load_frames(&ingest(manifest)?)?;
    let holdout = predict_dataset(&model, &frames, config.no_face)?;
    println!("holdout\n{}", holdout.to_text());
    let cv = match folds {
        Some(k) => {
            let r = evaluate(&model, &frames, k, config.seed, &config.alert)?;
            println!("cross-validation ({k} folds)\n{}", r.to_text());
            Some(r)
        }
        None => None,
    };
    if let Some(path) = report {
        let text =
            serde_json::to_string_pretty(&report_json(&holdout, cv.as_ref())).map_err(data)?;
        write(path, text + "\n")?;
    }
    Ok(())
}

fn run_simulate(
    manifest: &Path,
    model_path: &Path,
    out: Option<&Path>,
    args: &ConfigArgs,
) -> Outcome {
    let config = load_config(args)?;
    let model = read_model(model_path)?;
    let frames: Vec<Frame> = load_frames(&ingest(manifest)?)?
        .into_iter()
        .map(|f| f.frame)
        .collect();
    let result = infer_stream(&model, &frames, &config.alert, config.no_face)?;
    let text = result.to_text();
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_detect_train(
    out: &Path,
    positives: usize,
    negatives: usize,
    rounds: &str,
    seed: u64,
) -> Outcome {
    let rounds: Vec<usize> = rounds
        .split(',')
        .map(|r| r.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            Failure::Usage(anyhow!(
                "--rounds expects comma-separated integers, got {rounds:?}"
            ))
        })?;
    if rounds.is_empty() || rounds.contains(&0) {
        return Err(Failure::Usage(anyhow!(
            "every stage needs at least one round"
        )));
    }
    let mut fx = DetectorFixture {
        n_positive: positives,
        n_negative: negatives,
        seed,
        ..Default::default()
    };
    fx.synth.n_frames = positives.max(1);
    fx.stages = rounds
        .iter()
        .map(|&r| StageSpec {
            rounds: r,
            target_detection_rate: 0.995,
        })
        .collect();
    let cascade = fatigue_core::harness::train_detector(&fx)?;
    write(out, save_cascade(&cascade))?;
    println!(
        "cascade with {} stages written to {}",
        cascade.stages.len(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Synth {
            out,
            frames,
            fraction_fatigued,
            width,
            height,
            jitter,
            noise_sigma,
            light,
            face_side,
            subjects,
            seed,
        } => {
            let spec = SyntheticSpec {
                frame_w: width,
                frame_h: height,
                n_frames: frames,
                fraction_fatigued,
                jitter,
                noise_sigma,
                light,
                seed,
                face_side,
                n_subjects: subjects,
            };
            let records = synth_generate(&spec, &out)?;
            println!("{} frames written to {}", records.len(), out.display());
            Ok(())
        }
        Command::Train {
            manifest,
            out_dir,
            cfg,
        } => run_train(&manifest, &out_dir, &cfg),
        Command::Eval {
            manifest,
            model,
            folds,
            report,
            cfg,
        } => run_eval(&manifest, &model, folds, report.as_deref(), &cfg),
        Command::Simulate {
            manifest,
            model,
            out,
            cfg,
        } => run_simulate(&manifest, &model, out.as_deref(), &cfg),
        Command::DetectTrain {
            out,
            positives,
            negatives,
            rounds,
            seed,
        } => run_detect_train(&out, positives, negatives, &rounds, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use log::info;
use vidcensor::embeddings::ProviderSpec;
use vidcensor::pipeline::{
    run_censor, run_eval, run_train, BundleClassifier, CensorOptions, KernelKind, ModelBundle, ModelConfig,
};
use vidcensor::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "vidcensor", version, about = "Detect and censor inappropriate scenes in video")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Blur and mute the segments a model flags, and write an XML report.
    Censor {
        /// Input video (YUV4MPEG2).
        video: PathBuf,
        /// Input audio (16-bit PCM WAV).
        audio: PathBuf,
        /// Trained model bundle.
        #[arg(long)]
        model: PathBuf,
        /// Segment length in seconds [default: the model's setting].
        #[arg(long = "seg-len")]
        seg_len: Option<f64>,
        /// Gaussian blur sigma in pixels [default: the model's setting].
        #[arg(long)]
        sigma: Option<f64>,
        /// Embedding source: synthetic, precomputed:<dir> or external:<cmd>.
        #[arg(long, default_value = "synthetic")]
        provider: ProviderSpec,
        /// Directory for the censored video and audio.
        #[arg(long)]
        out: PathBuf,
        /// Path of the XML report.
        #[arg(long)]
        report: PathBuf,
        /// Worker threads [default: all cores].
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Train a model bundle from a labelled manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Where to write the bundle.
        #[arg(long)]
        out: PathBuf,
        /// SVM box constraint.
        #[arg(long = "C", visible_alias = "c", default_value_t = 1.0)]
        c: f64,
        #[arg(long, default_value = "rbf")]
        kernel: KernelKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// SMO KKT tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Requested image PCA components.
        #[arg(long)]
        image_components: Option<usize>,
        /// Requested audio PCA components.
        #[arg(long)]
        audio_components: Option<usize>,
        /// Segment length stored with the model.
        #[arg(long = "seg-len")]
        seg_len: Option<f64>,
        /// Blur sigma stored with the model.
        #[arg(long)]
        sigma: Option<f64>,
        /// Embedding source for media manifests.
        #[arg(long, default_value = "synthetic")]
        provider: ProviderSpec,
    },
    /// Score a bundle on the held-out split and cross-validate its settings.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Number of cross-validation folds.
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Embedding source for media manifests.
        #[arg(long, default_value = "synthetic")]
        provider: ProviderSpec,
        /// Also write the report as JSON to this path.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Censor {
            video,
            audio,
            model,
            seg_len,
            sigma,
            provider,
            out,
            report,
            workers,
        } => {
            let bundle = ModelBundle::load(&model)?;
            let provider = provider.open(bundle.pca_img.in_dim(), bundle.pca_aud.in_dim())?;
            let classifier = BundleClassifier::new(&bundle, Arc::clone(&provider))?;
            let mut options = CensorOptions::new(video, audio, out, report);
            options.segment_seconds = seg_len.unwrap_or(bundle.config.segment_seconds);
            options.sigma = sigma.unwrap_or(bundle.config.sigma);
            options.workers = workers;
            let outcome = run_censor(&options, &classifier)?;
            println!(
                "censored {} of {} segments; wrote {}, {} and {}",
                outcome.flagged,
                outcome.segments,
                outcome.video_out.display(),
                outcome.audio_out.display(),
                options.report.display()
            );
        }
        Command::Train {
            manifest,
            out,
            c,
            kernel,
            seed,
            tol,
            image_components,
            audio_components,
            seg_len,
            sigma,
            provider,
        } => {
            let defaults = ModelConfig::default();
            let config = ModelConfig {
                c,
                kernel,
                seed,
                tol: tol.unwrap_or(defaults.tol),
                image_components: image_components.unwrap_or(defaults.image_components),
                audio_components: audio_components.unwrap_or(defaults.audio_components),
                segment_seconds: seg_len.unwrap_or(defaults.segment_seconds),
                sigma: sigma.unwrap_or(defaults.sigma),
                ..defaults
            };
            let outcome = run_train(&manifest, &out, &config, &provider)?;
            println!(
                "trained on {} items ({} support vectors, {} + {} components); wrote {}",
                outcome.train_size,
                outcome.bundle.svm.support_vectors().rows(),
                outcome.bundle.pca_img.out_dim(),
                outcome.bundle.pca_aud.out_dim(),
                out.display()
            );
            if let Some(reports) = &outcome.test_reports {
                println!("Held-out test set ({} items)", outcome.test_size);
                println!("{}", vidcensor::metrics::render_reports(reports));
            }
        }
        Command::Eval {
            manifest,
            model,
            k,
            seed,
            provider,
            json,
        } => {
            let bundle = ModelBundle::load(&model)?;
            let report = run_eval(&manifest, &bundle, k, seed, &provider)?;
            println!("{}", report.render());
            if let Some(path) = json {
                let text = serde_json::to_vec_pretty(&report)
                    .map_err(|e| Error::Internal(format!("cannot serialize the report: {e}")))?;
                vidcensor::pipeline::write_atomically(&[(&path, text)])?;
                info!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_input_error() {
                ExitCode::from(EXIT_INPUT)
            } else {
                ExitCode::from(EXIT_INTERNAL)
            }
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fuzzy_evidence::contextual::{classify_image, ClassifyMode, ClassifyOptions};
use fuzzy_evidence::error::{Error, Result};
use fuzzy_evidence::eval::{confusion_matrix, read_rulebase, run_pipeline, write_json, RunConfig};
use fuzzy_evidence::evidence::BpaMode;
use fuzzy_evidence::fuzzy::{DEFAULT_CONFIDENCE_THRESHOLD, DEFAULT_Q};
use fuzzy_evidence::induction::{induce_rulebase, InductionConfig};
use fuzzy_evidence::raster::{
    generate_scene, load_ground_truth, load_labels, load_raster, read_training_csv,
    sample_training_set, save_ground_truth, save_labels, save_raster, write_training_csv,
    SceneSpec,
};
use fuzzy_evidence::tuning::{tune, TuningConfig};
use fuzzy_evidence::LabelMap;

#[derive(Parser)]
#[command(name = "fuzzy-evidence", version, about = "Fuzzy rule and evidence-theoretic raster classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene (image.json + truth.json) from a scene spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw a class-stratified training set as CSV.
    Sample {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the initial rulebase from a training CSV.
    Induce {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        kw: Option<f64>,
        #[arg(long)]
        nodes: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_Q, allow_hyphen_values = true)]
        q: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Refine a rulebase by gradient descent on a training CSV.
    Tune {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label every pixel of an image.
    Classify {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long, default_value = "evidential")]
        mode: ClassifyMode,
        #[arg(long, default_value = "frame")]
        bpa_mode: BpaMode,
        #[arg(long, default_value_t = DEFAULT_CONFIDENCE_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a label map against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        exclude_borders: bool,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run sample, induce, tune, classify and evaluate for every training seed.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kw: Option<f64>,
        #[arg(long)]
        per_class: Option<usize>,
        #[arg(long)]
        bpa_mode: Option<BpaMode>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { spec, out, seed } => {
            let mut spec: SceneSpec = read_json(&spec)?;
            if let Some(seed) = seed {
                spec.rng_seed = seed;
            }
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            let (img, gt) = generate_scene(&spec)?;
            save_raster(&img, out.join("image.json"))?;
            save_ground_truth(&gt, out.join("truth.json"))?;
        }
        Command::Sample {
            image,
            gt,
            per_class,
            seed,
            out,
        } => {
            let img = load_raster(&image)?;
            let gt = load_ground_truth(&gt)?;
            write_training_csv(&sample_training_set(&img, &gt, per_class, seed)?, &out)?;
        }
        Command::Induce {
            train,
            kw,
            nodes,
            epochs,
            seed,
            q,
            out,
        } => {
            let data = read_training_csv(&train)?;
            let defaults = InductionConfig::default();
            let cfg = InductionConfig {
                k_w: kw.unwrap_or(defaults.k_w),
                sofm_nodes: nodes.unwrap_or(defaults.sofm_nodes),
                sofm_epochs: epochs.unwrap_or(defaults.sofm_epochs),
                rng_seed: seed,
                ..defaults
            };
            let mut rb = induce_rulebase(&data, &cfg, q)?;
            rb.provenance.insert(
                "induction".into(),
                serde_json::to_value(&cfg).expect("config serializes"),
            );
            write_json(&rb, &out)?;
        }
        Command::Tune {
            train,
            rules,
            lr,
            max_epochs,
            tol,
            out,
        } => {
            let data = read_training_csv(&train)?;
            let rb = read_rulebase(&rules)?;
            let defaults = TuningConfig::default();
            let cfg = TuningConfig {
                learning_rate: lr.or(defaults.learning_rate),
                max_epochs: max_epochs.unwrap_or(defaults.max_epochs),
                rel_tol: tol.unwrap_or(defaults.rel_tol),
            };
            let (mut tuned, report) = tune(&rb, &data, &cfg)?;
            tuned.provenance.insert(
                "tuning".into(),
                serde_json::to_value(&report).expect("report serializes"),
            );
            write_json(&tuned, &out)?;
        }
        Command::Classify {
            image,
            rules,
            mode,
            bpa_mode,
            threshold,
            out,
        } => {
            let img = load_raster(&image)?;
            let rb = read_rulebase(&rules)?;
            let opts = ClassifyOptions {
                mode,
                bpa_mode,
                threshold,
            };
            let (map, stats) = classify_image(&rb, &img, &opts)?;
            save_labels(map.width, map.height, &map.labels, &out)?;
            eprintln!(
                "classified {} pixels in {:.3}s ({} border, {} conflict, {} degenerate fallbacks)",
                map.labels.len(),
                stats.runtime.as_secs_f64(),
                stats.border_pixels,
                stats.conflict_fallbacks,
                stats.degenerate_fallbacks
            );
        }
        Command::Evaluate {
            pred,
            gt,
            exclude_borders,
            report,
        } => {
            let (width, height, labels) = load_labels(&pred)?;
            let gt = load_ground_truth(&gt)?;
            let pred = LabelMap {
                width,
                height,
                labels,
            };
            let m = confusion_matrix(&pred, &gt, !exclude_borders)?;
            write_json(&m.report(), &report)?;
        }
        Command::Pipeline {
            config,
            out,
            kw,
            per_class,
            bpa_mode,
        } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(kw) = kw {
                cfg.induction.k_w = kw;
            }
            if let Some(n) = per_class {
                cfg.per_class = n;
            }
            if let Some(m) = bpa_mode {
                cfg.bpa_mode = m;
            }
            let report = run_pipeline(&cfg, &out)?;
            for r in &report.runs {
                eprintln!(
                    "seed {:>3}: {:>3} rules  direct {:.4}  evidential {:.4}  improvement {:+.4}",
                    r.seed, r.num_rules, r.direct.error_rate, r.evidential.error_rate, r.improvement
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

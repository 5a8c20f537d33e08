//! Command-line front end covering the full workflow: synthetic data
//! generation, beat/blink detection, feature assembly, feature selection,
//! training, cross-validated evaluation and report rendering.
//!
//! Every stochastic step draws from the single master seed, so a fixed
//! configuration reproduces its outputs byte for byte. Module failures exit
//! with status 1 and a one-line JSON error on stderr; usage errors exit 2.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use errsense::biometrics::BandConfig;
use errsense::classify::{
    cv_by_cycle, loso_cv, train_full, ClassifyError, EvalConfig, EvalReport, FeatureChoice,
    MlpConfig,
};
use errsense::data::{
    load_manifest, load_sensor, write_events, Condition, DataError, SampledSignal, SensorKind,
};
use errsense::peaks::{detect_blinks, detect_rri_sequence, DetectError, DetectorConfig};
use errsense::pipeline::{
    assemble, calm_baseline, calm_step_threshold, read_features_csv, relativize,
    write_features_csv, AssembleConfig, FeatureRegistry, FeatureVector, PipelineError,
    RelativizeMode, SensorGroup, TrialSignals,
};
use errsense::report::{write_report, ReportError};
use errsense::selection::{
    default_fixed_list, fixed_list, greedy_select, sensor_mask, SelectionError, SelectionResult,
};
use errsense::synth::{gen_dataset, SynthConfig, SynthError};

#[derive(Parser)]
#[command(name = "errsense", version, about = "Work-condition classification from wearable sensors")]
struct Cli {
    /// Master random seed; overrides every component seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with ground-truth sidecars.
    Synth {
        /// Output dataset directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Detect beats in an ECG recording and write the interval series.
    Rri {
        /// Input ECG CSV.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Output interval CSV (t,interval).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Detect blinks in an EOG recording and write the event series.
    Blinks {
        /// Input EOG CSV.
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        /// Output event CSV (t,kind).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Assemble per-trial feature vectors from a dataset directory.
    Features {
        /// Dataset directory containing manifest.json.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Output wide-form feature CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Choose a feature subset or projection from a feature file.
    Select {
        /// Input feature CSV.
        #[arg(long, value_name = "FILE")]
        features: PathBuf,
        /// Selection method (defaults to the configured one).
        #[arg(long, value_parser = ["greedy", "pca", "fixed"])]
        method: Option<String>,
        /// Maximum features to keep (greedy) or component count (pca).
        #[arg(long, value_name = "N")]
        n: Option<usize>,
        /// Output selection JSON.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Train a model on every trial in a feature file.
    Train {
        /// Input feature CSV.
        #[arg(long, value_name = "FILE")]
        features: PathBuf,
        /// Selection JSON restricting the feature columns.
        #[arg(long, value_name = "FILE")]
        selection: Option<PathBuf>,
        /// Output model JSON.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Cross-validate on a feature file and write an evaluation report.
    Eval {
        /// Input feature CSV.
        #[arg(long, value_name = "FILE")]
        features: PathBuf,
        /// Selection JSON restricting the feature columns.
        #[arg(long, value_name = "FILE")]
        selection: Option<PathBuf>,
        /// Fold protocol (defaults to the configured one).
        #[arg(long, value_parser = ["cycle3", "loso"])]
        protocol: Option<String>,
        /// Output report JSON.
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
    },
    /// Render a report JSON to accuracy tables and feature plots.
    Report {
        /// Input report JSON.
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
        /// Feature CSV for per-condition distribution plots.
        #[arg(long, value_name = "FILE")]
        features: Option<PathBuf>,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

/// Full run configuration. Every field has a default, so a config file only
/// needs the fields it changes; `seed` is copied into each component before
/// use, making it the sole source of randomness.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    seed: u64,
    synth: SynthConfig,
    ecg_detector: DetectorConfig,
    blink_detector: DetectorConfig,
    bands: BandConfig,
    selection: SelectionSettings,
    model: MlpConfig,
    /// Fold protocol for `eval`: "cycle3" or "loso".
    protocol: String,
    /// Whether features are reported as absolute values or relative to the
    /// subject's calm baseline.
    relativize: RelativizeMode,
    /// Restrict features to these sensor groups (labels as in the registry);
    /// absent means all groups.
    sensor_groups: Option<Vec<String>>,
    /// Subjects excluded from LOSO test folds (they still train).
    exclude_subjects: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            synth: SynthConfig::default(),
            ecg_detector: DetectorConfig::ecg(),
            blink_detector: DetectorConfig::blink(),
            bands: BandConfig::default(),
            selection: SelectionSettings::default(),
            model: MlpConfig::default(),
            protocol: "cycle3".to_string(),
            relativize: RelativizeMode::default(),
            sensor_groups: None,
            exclude_subjects: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct SelectionSettings {
    /// "greedy", "pca" or "fixed".
    method: String,
    /// Subset budget (greedy) or component count (pca).
    n: usize,
    /// Feature names used by the fixed method; empty means the built-in list.
    fixed: Vec<String>,
    /// Surrogate model scoring candidate subsets inside the greedy search;
    /// deliberately smaller than the final model.
    model: MlpConfig,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        SelectionSettings {
            method: "greedy".to_string(),
            n: 10,
            fixed: Vec::new(),
            model: MlpConfig {
                hidden: vec![32, 16],
                initial_lr: 0.1,
                decay_exponent: 0.5,
                epochs: 150,
                batch_size: None,
                seed: 42,
            },
        }
    }
}

impl RunConfig {
    /// Parses the configured sensor-group labels; `None` means no mask.
    fn mask_groups(&self) -> Result<Option<Vec<SensorGroup>>, CliError> {
        let Some(labels) = &self.sensor_groups else {
            return Ok(None);
        };
        let mut groups = Vec::with_capacity(labels.len());
        for label in labels {
            let group = SensorGroup::parse(label).ok_or_else(|| CliError::Config {
                message: format!("unknown sensor group `{label}`"),
            })?;
            groups.push(group);
        }
        Ok(Some(groups))
    }

    fn validate(&self) -> Result<(), CliError> {
        if !matches!(self.protocol.as_str(), "cycle3" | "loso") {
            return Err(CliError::Config {
                message: format!("unknown protocol `{}`", self.protocol),
            });
        }
        if !matches!(self.selection.method.as_str(), "greedy" | "pca" | "fixed") {
            return Err(CliError::Config {
                message: format!("unknown selection method `{}`", self.selection.method),
            });
        }
        if self.selection.n == 0 {
            return Err(CliError::Config {
                message: "selection size must be at least 1".to_string(),
            });
        }
        self.mask_groups()?;
        Ok(())
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{message}")]
    Config { message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Data(_) => "data",
            CliError::Synth(_) => "synth",
            CliError::Detect(_) => "detect",
            CliError::Pipeline(_) => "pipeline",
            CliError::Selection(_) => "selection",
            CliError::Classify(_) => "classify",
            CliError::Report(_) => "report",
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    if let Err(err) = run(&cli) {
        let payload = serde_json::json!({
            "error": { "kind": err.kind(), "message": err.to_string() }
        });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_run_config(cli)?;
    match &cli.command {
        Command::Synth { out } => cmd_synth(&cfg, out),
        Command::Rri { input, out } => cmd_rri(&cfg, input, out),
        Command::Blinks { input, out } => cmd_blinks(&cfg, input, out),
        Command::Features { data, out } => cmd_features(&cfg, data, out),
        Command::Select {
            features,
            method,
            n,
            out,
        } => cmd_select(&cfg, features, method.as_deref(), *n, out),
        Command::Train {
            features,
            selection,
            out,
        } => cmd_train(&cfg, features, selection.as_deref(), out),
        Command::Eval {
            features,
            selection,
            protocol,
            report,
        } => cmd_eval(&cfg, features, selection.as_deref(), protocol.as_deref(), report),
        Command::Report {
            report,
            features,
            out,
        } => cmd_report(report, features.as_deref(), out),
    }
}

fn load_run_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = match &cli.config {
        Some(path) => parse_json(path, "run config")?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    // The master seed wins over any per-component seed in the file.
    cfg.synth.seed = cfg.seed;
    cfg.model.seed = cfg.seed;
    cfg.selection.model.seed = cfg.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let manifest = gen_dataset(&cfg.synth, out)?;
    println!(
        "wrote {} trials and {} calm segments for {} subjects under {}",
        manifest.trials.len(),
        manifest.calm.len(),
        manifest.subjects.len(),
        out.display()
    );
    Ok(())
}

fn cmd_rri(cfg: &RunConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let signal = load_sensor(input, SensorKind::Ecg)?;
    let rri = detect_rri_sequence(&signal, &cfg.ecg_detector)?;
    let mut text = String::from("t,interval\n");
    for (t, dt) in rri.interval_times.iter().zip(&rri.intervals) {
        text.push_str(&format!("{t:.6},{dt:.6}\n"));
    }
    write_text(out, &text)?;
    println!(
        "{} intervals, {} dropouts -> {}",
        rri.len(),
        rri.dropouts.len(),
        out.display()
    );
    Ok(())
}

fn cmd_blinks(cfg: &RunConfig, input: &Path, out: &Path) -> Result<(), CliError> {
    let signal = load_sensor(input, SensorKind::Eog)?;
    let events = detect_blinks(&signal, &cfg.blink_detector)?;
    write_events(out, &events)?;
    println!("{} blinks -> {}", events.times.len(), out.display());
    Ok(())
}

fn cmd_features(cfg: &RunConfig, data_dir: &Path, out: &Path) -> Result<(), CliError> {
    let manifest = load_manifest(&data_dir.join("manifest.json"))?;
    let registry = FeatureRegistry::standard();
    let assemble_cfg = AssembleConfig {
        ecg_detector: cfg.ecg_detector.clone(),
        blink_detector: cfg.blink_detector.clone(),
        bands: cfg.bands,
    };

    // Calm windows first: they fix each subject's gaze threshold and baseline.
    let mut calm_by_subject: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, seg) in manifest.calm.iter().enumerate() {
        calm_by_subject.entry(&seg.subject).or_default().push(i);
    }
    let mut baselines = BTreeMap::new();
    for (subject, segments) in calm_by_subject {
        let loaded = segments
            .iter()
            .map(|&i| TrialSignals::load(&manifest.calm[i].signals))
            .collect::<Result<Vec<_>, _>>()?;
        let gaze: Vec<&SampledSignal> = loaded
            .iter()
            .filter_map(|signals| signals.gaze.as_ref().map(|(signal, _)| signal))
            .collect();
        let threshold = calm_step_threshold(&gaze);
        let windows: Vec<FeatureVector> = segments
            .iter()
            .zip(&loaded)
            .map(|(&i, signals)| {
                assemble(
                    &manifest.calm[i].id,
                    subject,
                    0,
                    Condition::Normal,
                    signals,
                    threshold,
                    &registry,
                    &assemble_cfg,
                )
            })
            .collect();
        let baseline = calm_baseline(&windows, threshold)?;
        baselines.insert(subject.to_string(), baseline);
    }

    let vectors = manifest
        .trials
        .par_iter()
        .map(|trial| {
            let signals = TrialSignals::load(&trial.signals)?;
            let baseline = baselines.get(&trial.subject);
            let threshold = baseline.and_then(|b| b.large_step_threshold);
            let vector = assemble(
                &trial.id,
                &trial.subject,
                trial.cycle,
                trial.condition,
                &signals,
                threshold,
                &registry,
                &assemble_cfg,
            );
            match (cfg.relativize, baseline) {
                (RelativizeMode::Relative, Some(baseline)) => {
                    relativize(&vector, baseline).map_err(CliError::from)
                }
                _ => Ok(vector),
            }
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    write_features_csv(out, &vectors, &registry)?;
    println!(
        "{} trials x {} features -> {}",
        vectors.len(),
        registry.len(),
        out.display()
    );
    Ok(())
}

fn cmd_select(
    cfg: &RunConfig,
    features: &Path,
    method: Option<&str>,
    n: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    let registry = FeatureRegistry::standard();
    let vectors = load_vectors(cfg, features, &registry)?;
    let method = method.unwrap_or(&cfg.selection.method);
    let n = n.unwrap_or(cfg.selection.n);
    if n == 0 {
        return Err(CliError::Config {
            message: "selection size must be at least 1".to_string(),
        });
    }

    let result = match method {
        "greedy" => {
            let candidates: Vec<usize> = (0..registry.len())
                .filter(|&i| vectors.iter().any(|v| !v.missing[i]))
                .collect();
            let surrogate = cfg.selection.model.clone();
            let eval = |subset: &[usize]| {
                let eval_cfg = EvalConfig {
                    model: surrogate.clone(),
                    choice: FeatureChoice::Subset(subset.to_vec()),
                    exclude_subjects: Vec::new(),
                    selection_record: None,
                };
                // A subset that cannot be scored (e.g. a fold without any
                // observed value) loses the comparison instead of aborting.
                cv_by_cycle(&vectors, &eval_cfg)
                    .map(|(report, _)| report.mean_acc3)
                    .unwrap_or(0.0)
            };
            greedy_select(&registry, &candidates, n, eval)?
        }
        "pca" => SelectionResult {
            method: "pca".to_string(),
            selected: Vec::new(),
            step_accuracies: Vec::new(),
            best_accuracy: None,
            pca_k: Some(n),
        },
        "fixed" => {
            let names = if cfg.selection.fixed.is_empty() {
                default_fixed_list()
            } else {
                cfg.selection.fixed.clone()
            };
            fixed_list(&names, &registry)?
        }
        other => {
            return Err(CliError::Config {
                message: format!("unknown selection method `{other}`"),
            })
        }
    };

    write_text(out, &(result.to_json() + "\n"))?;
    match result.best_accuracy {
        Some(acc) => println!(
            "{}: {} features (accuracy {:.3}) -> {}",
            result.method,
            result.selected.len(),
            acc,
            out.display()
        ),
        None => println!(
            "{}: {} features -> {}",
            result.method,
            result.selected.len().max(result.pca_k.unwrap_or(0)),
            out.display()
        ),
    }
    Ok(())
}

fn cmd_train(
    cfg: &RunConfig,
    features: &Path,
    selection: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let registry = FeatureRegistry::standard();
    let vectors = load_vectors(cfg, features, &registry)?;
    let selection = read_selection(selection)?;
    let choice = feature_choice(selection.as_ref(), &registry)?;
    let eval_cfg = EvalConfig {
        model: cfg.model.clone(),
        choice,
        exclude_subjects: cfg.exclude_subjects.clone(),
        selection_record: selection,
    };
    let model = train_full(&vectors, &eval_cfg)?;
    write_text(out, &(model.to_json() + "\n"))?;
    println!("trained on {} trials -> {}", vectors.len(), out.display());
    Ok(())
}

fn cmd_eval(
    cfg: &RunConfig,
    features: &Path,
    selection: Option<&Path>,
    protocol: Option<&str>,
    report_path: &Path,
) -> Result<(), CliError> {
    let registry = FeatureRegistry::standard();
    let vectors = load_vectors(cfg, features, &registry)?;
    let selection = read_selection(selection)?;
    let choice = feature_choice(selection.as_ref(), &registry)?;
    let eval_cfg = EvalConfig {
        model: cfg.model.clone(),
        choice,
        exclude_subjects: cfg.exclude_subjects.clone(),
        selection_record: selection,
    };
    let protocol = protocol.unwrap_or(&cfg.protocol);
    let (report, _artifacts) = match protocol {
        "cycle3" => cv_by_cycle(&vectors, &eval_cfg)?,
        "loso" => loso_cv(&vectors, &eval_cfg)?,
        other => {
            return Err(CliError::Config {
                message: format!("unknown protocol `{other}`"),
            })
        }
    };
    write_text(report_path, &(report.to_json() + "\n"))?;
    println!(
        "{}: acc3 {:.3}, acc2 {:.3} over {} folds -> {}",
        report.protocol,
        report.mean_acc3,
        report.mean_acc2,
        report.folds.len(),
        report_path.display()
    );
    Ok(())
}

fn cmd_report(report_path: &Path, features: Option<&Path>, out_dir: &Path) -> Result<(), CliError> {
    let report: EvalReport = parse_json(report_path, "evaluation report")?;
    let registry = FeatureRegistry::standard();
    let loaded;
    let features_ref = match features {
        Some(path) => {
            loaded = read_features_csv(path, &registry)?;
            Some((loaded.as_slice(), &registry))
        }
        None => None,
    };
    let written = write_report(out_dir, &report, features_ref)?;
    println!("{} files -> {}", written.len(), out_dir.display());
    Ok(())
}

/// Reads a feature file and applies the configured sensor-group mask.
fn load_vectors(
    cfg: &RunConfig,
    path: &Path,
    registry: &FeatureRegistry,
) -> Result<Vec<FeatureVector>, CliError> {
    let vectors = read_features_csv(path, registry)?;
    match cfg.mask_groups()? {
        Some(groups) => Ok(sensor_mask(&vectors, &groups, registry)?),
        None => Ok(vectors),
    }
}

fn read_selection(path: Option<&Path>) -> Result<Option<SelectionResult>, CliError> {
    path.map(|p| parse_json(p, "selection")).transpose()
}

/// Maps a selection record onto the evaluator's feature choice.
fn feature_choice(
    selection: Option<&SelectionResult>,
    registry: &FeatureRegistry,
) -> Result<FeatureChoice, CliError> {
    match selection {
        None => Ok(FeatureChoice::All),
        Some(sel) if sel.method == "pca" => {
            let k = sel.pca_k.ok_or_else(|| CliError::Config {
                message: "pca selection file lacks a component count".to_string(),
            })?;
            Ok(FeatureChoice::Pca { k })
        }
        Some(sel) => Ok(FeatureChoice::Subset(sel.indices(registry)?)),
    }
}

fn parse_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|err| CliError::Config {
        message: format!("{what} {}: {err}", path.display()),
    })
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    fs::write(path, content).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 partial failure (some
//! inputs failed, results for the rest were still written).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::binarize::{ThresholdConfig, ThresholdMode};
use crate::classifier::{self, ClassScheme, TrainConfig};
use crate::features::{self, analyze, extract, flag_anomalies, Combo, Feature, FeatureRecord, DEFAULT_ANOMALY_FACTOR};
use crate::imagegrid::{read_image_file, write_pgm, Polarity};
use crate::phantom::{self, ClassLabel, LabeledItem, SeriesSpec};
use crate::pores::pore_table_csv;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// Environment variable capping the worker count (0 or unset: default).
pub const THREADS_ENV: &str = "GLANCE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "glance", version, about = "Zero-order binary image features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Feature record per input image (PGM or grid CSV)
    Features {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[command(flatten)]
        threshold: ThresholdArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Per-pore area and porosity table, largest pore first
    Pores {
        path: PathBuf,
        #[command(flatten)]
        threshold: ThresholdArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Features of every slice in a directory, with anomaly flags
    Series {
        dir: PathBuf,
        #[command(flatten)]
        threshold: ThresholdArgs,
        /// Flag slices whose average pore area exceeds k times the median
        #[arg(long, default_value_t = DEFAULT_ANOMALY_FACTOR)]
        k: f64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Write synthetic phantoms as PGM files plus a manifest
    Phantom {
        #[arg(long)]
        out: PathBuf,
        /// Class count for a labelled dataset
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
        classes: u8,
        /// Items per class
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write a slice series of this length instead of a labelled dataset
        #[arg(long)]
        series: Option<usize>,
        /// Index of the injected ring-only slice in a series
        #[arg(long, requires = "series")]
        faulty: Option<usize>,
    },
    /// Train, evaluate or run repeated trials of the feature classifier
    Classify {
        #[command(subcommand)]
        action: ClassifyAction,
    },
}

#[derive(Debug, Subcommand)]
enum ClassifyAction {
    /// Train on a phantom manifest and write the model as JSON
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
        classes: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        training: TrainingArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Confusion matrix of a saved model on a manifest
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Repeated split/train/test rounds summarised per trial
    Trials {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(2..=3))]
        classes: u8,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        training: TrainingArgs,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// `auto` for Otsu or a fixed cut in 0..=255
    #[arg(long, default_value = "auto", value_parser = parse_threshold)]
    threshold: ThresholdMode,
    #[arg(long, value_enum, default_value_t = PolarityArg::Dark)]
    polarity: PolarityArg,
}

impl ThresholdArgs {
    fn config(&self) -> ThresholdConfig {
        let polarity = match self.polarity {
            PolarityArg::Dark => Polarity::DarkBackground,
            PolarityArg::Light => Polarity::LightBackground,
        };
        ThresholdConfig { mode: self.threshold, polarity }
    }
}

fn parse_threshold(s: &str) -> std::result::Result<ThresholdMode, String> {
    if s.eq_ignore_ascii_case("auto") || s.eq_ignore_ascii_case("otsu") {
        return Ok(ThresholdMode::Otsu);
    }
    s.parse::<u8>()
        .map(ThresholdMode::Manual)
        .map_err(|_| format!("expected `auto` or an integer in 0..=255, got {s:?}"))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolarityArg {
    Dark,
    Light,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Manifest CSV written by `glance phantom`
    #[arg(long)]
    data: PathBuf,
    /// Preset feature combination C1..C4
    #[arg(long, conflicts_with = "features")]
    combo: Option<String>,
    /// Explicit comma-separated feature list, e.g. `ipf,c,w,p`
    #[arg(long)]
    features: Option<String>,
    #[command(flatten)]
    threshold: ThresholdArgs,
}

impl DataArgs {
    fn feature_list(&self) -> Result<Option<Vec<Feature>>> {
        match (&self.combo, &self.features) {
            (Some(c), _) => Ok(Some(c.parse::<Combo>()?.features().to_vec())),
            (None, Some(list)) => Feature::parse_list(list).map(Some),
            (None, None) => Ok(None),
        }
    }
}

#[derive(Debug, Args)]
struct TrainingArgs {
    #[arg(long, default_value_t = TrainConfig::default().max_epochs)]
    max_epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().patience)]
    patience: usize,
}

impl TrainingArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig { max_epochs: self.max_epochs, patience: self.patience, ..TrainConfig::default() }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Where a subcommand's primary output goes.
struct Sink<'a> {
    stdout: &'a mut dyn Write,
    path: Option<PathBuf>,
}

impl Sink<'_> {
    fn emit(&mut self, text: &str) -> Result<()> {
        match &self.path {
            Some(p) => fs::write(p, text)?,
            None => self.stdout.write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
                EXIT_INPUT
            } else {
                let _ = stdout.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Features { paths, threshold, format, output } => {
            cmd_features(&paths, &threshold.config(), format, Sink { stdout, path: output }, stderr)
        }
        Command::Pores { path, threshold, output } => cmd_pores(&path, &threshold.config(), Sink { stdout, path: output }),
        Command::Series { dir, threshold, k, output } => {
            cmd_series(&dir, &threshold.config(), k, Sink { stdout, path: output }, stderr)
        }
        Command::Phantom { out, classes, n, seed, series, faulty } => match series {
            Some(length) => cmd_phantom_series(&out, SeriesSpec { length, faulty, seed }, stdout),
            None => cmd_phantom_dataset(&out, classes, n, seed, stdout),
        },
        Command::Classify { action } => cmd_classify(action, stdout, stderr),
    }
}

/// Loads and extracts every path concurrently; results keep input order.
fn extract_all(paths: &[(String, PathBuf)], cfg: &ThresholdConfig) -> Result<Vec<Result<FeatureRecord>>> {
    let pool = thread_pool()?;
    Ok(pool.install(|| {
        paths
            .par_iter()
            .map(|(id, path)| read_image_file(path).and_then(|img| extract(&img, cfg, id)))
            .collect()
    }))
}

fn cmd_features(
    paths: &[PathBuf],
    cfg: &ThresholdConfig,
    format: Format,
    mut sink: Sink,
    stderr: &mut dyn Write,
) -> Result<i32> {
    let mut inputs: Vec<(String, PathBuf)> = paths.iter().map(|p| (p.to_string_lossy().into_owned(), p.clone())).collect();
    inputs.sort_by(|a, b| a.0.cmp(&b.0));
    let mut records = Vec::new();
    let mut failures = 0;
    for ((id, _), result) in inputs.iter().zip(extract_all(&inputs, cfg)?) {
        match result {
            Ok(r) => records.push(r),
            Err(e) => {
                failures += 1;
                writeln!(stderr, "error: {id}: {e}")?;
            }
        }
    }
    if records.is_empty() {
        return Ok(EXIT_INPUT);
    }
    let text = match format {
        Format::Csv => features::records_csv(&records),
        Format::Json => features::records_json(&records)?,
    };
    sink.emit(&text)?;
    Ok(if failures > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

fn cmd_pores(path: &Path, cfg: &ThresholdConfig, mut sink: Sink) -> Result<i32> {
    let img = read_image_file(path).map_err(|e| with_path(path, e))?;
    let analysis = analyze(&img, cfg, &path.to_string_lossy()).map_err(|e| with_path(path, e))?;
    sink.emit(&pore_table_csv(&analysis.pores.per_pore_table(analysis.record.u)))?;
    Ok(EXIT_OK)
}

fn with_path(path: &Path, e: Error) -> Error {
    Error::InvalidArgument(format!("{}: {e}", path.display()))
}

fn is_image_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| ["pgm", "pnm", "csv"].iter().any(|x| e.eq_ignore_ascii_case(x)))
}

fn cmd_series(dir: &Path, cfg: &ThresholdConfig, k: f64, mut sink: Sink, stderr: &mut dyn Write) -> Result<i32> {
    let mut inputs: Vec<(String, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| with_path(dir, e.into()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| is_image_file(p) && p.file_name().is_some_and(|n| n != "manifest.csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), p))
        .collect();
    inputs.sort_by(|a, b| a.0.cmp(&b.0));
    let mut records = Vec::new();
    let mut failures = 0;
    for ((id, _), result) in inputs.iter().zip(extract_all(&inputs, cfg)?) {
        match result {
            Ok(r) => records.push(r),
            Err(e) => {
                failures += 1;
                writeln!(stderr, "error: {id}: {e}")?;
            }
        }
    }
    if records.len() < 3 {
        writeln!(stderr, "error: {} usable slices in {}, need at least 3", records.len(), dir.display())?;
        return Ok(EXIT_INPUT);
    }
    let report = flag_anomalies(records, k)?;
    sink.emit(&report.to_csv())?;
    Ok(if failures > 0 { EXIT_PARTIAL } else { EXIT_OK })
}

const MANIFEST_HEADER: &str = "filename,class_label,rows,cols,u,z,y,w,n_p";

fn manifest_line(filename: &str, label: &str, r: &FeatureRecord) -> String {
    format!("{filename},{label},{},{},{},{},{},{},{}\n", r.rows, r.cols, r.u, r.z, r.y, r.w, r.n_p)
}

fn cmd_phantom_dataset(out: &Path, classes: u8, n: usize, seed: u64, stdout: &mut dyn Write) -> Result<i32> {
    let scheme = ClassScheme::from_count(classes as usize)?;
    let entries = phantom::dataset_entries(n, seed)?;
    fs::create_dir_all(out)?;
    let mut manifest = format!("{MANIFEST_HEADER}\n");
    for e in &entries {
        let filename = format!("{}.pgm", e.id);
        let (img, expected) = phantom::generate(&e.spec)?;
        fs::write(out.join(&filename), write_pgm(&img))?;
        let label = match scheme {
            ClassScheme::ThreeClass => e.label.name().to_string(),
            ClassScheme::TwoClass => scheme.class_names()[scheme.class_index(e.label)].clone(),
        };
        manifest.push_str(&manifest_line(&filename, &label, &expected));
    }
    fs::write(out.join("manifest.csv"), &manifest)?;
    writeln!(stdout, "wrote {} phantoms to {}", entries.len(), out.display())?;
    Ok(EXIT_OK)
}

fn cmd_phantom_series(out: &Path, spec: SeriesSpec, stdout: &mut dyn Write) -> Result<i32> {
    let slices = phantom::generate_series(&spec)?;
    fs::create_dir_all(out)?;
    let mut manifest = format!("{MANIFEST_HEADER}\n");
    for s in &slices {
        let filename = format!("{}.pgm", s.id);
        let (img, expected) = phantom::generate(&s.spec)?;
        fs::write(out.join(&filename), write_pgm(&img))?;
        manifest.push_str(&manifest_line(&filename, if s.faulty { "faulty" } else { "normal" }, &expected));
    }
    fs::write(out.join("manifest.csv"), &manifest)?;
    writeln!(stdout, "wrote {} slices to {}", slices.len(), out.display())?;
    Ok(EXIT_OK)
}

/// Reads a phantom manifest and extracts features from every listed image.
/// Two-class labels map onto the three phantom classes' eye/no-eye split.
fn load_manifest(path: &Path, cfg: &ThresholdConfig) -> Result<Vec<LabeledItem>> {
    let text = fs::read_to_string(path).map_err(|e| with_path(path, e.into()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.split(',').take(2).eq(["filename", "class_label"]) => {}
        _ => return Err(with_path(path, Error::MalformedHeader("expected filename,class_label,...".into()))),
    }
    let mut entries = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let mut fields = line.split(',');
        let (Some(file), Some(label)) = (fields.next(), fields.next()) else {
            return Err(with_path(path, Error::ValueOutOfRange(format!("line {}: missing fields", i + 2))));
        };
        let label = match label {
            "with_eyes" => ClassLabel::Eyes,
            "without_eyes" => ClassLabel::BrainNoEyes,
            other => other.parse::<ClassLabel>().map_err(|e| with_path(path, e))?,
        };
        let id = Path::new(file).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        entries.push((id, base.join(file), label));
    }
    let inputs: Vec<(String, PathBuf)> = entries.iter().map(|(id, p, _)| (id.clone(), p.clone())).collect();
    entries
        .iter()
        .zip(extract_all(&inputs, cfg)?)
        .map(|((_, p, label), rec)| Ok(LabeledItem { record: rec.map_err(|e| with_path(p, e))?, label: *label }))
        .collect()
}

fn cmd_classify(action: ClassifyAction, stdout: &mut dyn Write, _stderr: &mut dyn Write) -> Result<i32> {
    match action {
        ClassifyAction::Train { data, classes, seed, training, output } => {
            let scheme = ClassScheme::from_count(classes as usize)?;
            let features = data.feature_list()?.unwrap_or_else(|| Combo::C1.features().to_vec());
            let items = load_manifest(&data.data, &data.threshold.config())?;
            let all = classifier::samples(&items, &features, scheme);
            let parts = classifier::split(&all, seed)?;
            let model = classifier::train(&parts.train, &parts.validation, &features, scheme, seed, &training.config())?;
            Sink { stdout, path: output }.emit(&model.to_json()?)?;
        }
        ClassifyAction::Eval { data, model, output } => {
            let text = fs::read_to_string(&model).map_err(|e| with_path(&model, e.into()))?;
            let model = crate::classifier::NetworkModel::from_json(&text)?;
            let scheme = ClassScheme::from_count(model.class_names.len())?;
            let features = data.feature_list()?.unwrap_or_else(|| model.features.clone());
            let items = load_manifest(&data.data, &data.threshold.config())?;
            let cm = classifier::evaluate(&model, &classifier::samples(&items, &features, scheme))?;
            Sink { stdout, path: output }.emit(&cm.to_csv(&model.class_names))?;
        }
        ClassifyAction::Trials { data, classes, trials, seed, training, output } => {
            let scheme = ClassScheme::from_count(classes as usize)?;
            let features = data.feature_list()?.unwrap_or_else(|| Combo::C1.features().to_vec());
            let items = load_manifest(&data.data, &data.threshold.config())?;
            let pool = thread_pool()?;
            let summary =
                pool.install(|| classifier::run_trials(&items, &features, scheme, trials, seed, &training.config()))?;
            Sink { stdout, path: output }.emit(&summary.to_csv())?;
        }
    }
    Ok(EXIT_OK)
}

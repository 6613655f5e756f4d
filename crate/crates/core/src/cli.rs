//! Command-line front end: `synth`, `fit`, `encode`, `run`, `sweep`.

use std::ffi::OsString;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::classify::eval::render_table;
use crate::config::{parse_range, Method, RunConfig, SynthPreset};
use crate::data::{generate_synthetic, write_dataset, ClipRecord, DatasetManifest};
use crate::error::{Error, Result};
use crate::pipeline::{encode_clips, evaluate, fit_model, usable_clips, EncodedMatrix, FittedModel};
use crate::sensor::WindowMode;
use crate::sweep::run_sweep;

const LOCK_FILE: &str = ".egomfv.lock";

#[derive(Debug, Parser)]
#[command(name = "egomfv", version, about = "Multimodal Fisher vectors for egocentric activity recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset (manifest, sensor CSVs, trajectory CSVs).
    Synth(SynthArgs),
    /// Fit reductions and codebooks on every clip and save the artifact.
    Fit(CommonArgs),
    /// Encode every clip with a frozen codebook artifact.
    Encode(CommonArgs),
    /// Cross-validate one or more methods and write reports.
    Run(CommonArgs),
    /// FVS and TFVS accuracy over window sizes and cluster counts.
    Sweep(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Codebook artifact for `encode` (default: <out>/codebook.json).
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Method, or a comma-separated list / `all` for `run`.
    #[arg(long)]
    pub method: Option<String>,
    /// Window size; `sweep` also accepts ranges such as 1..5.
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub window_mode: Option<WindowMode>,
    /// Sensor GMM clusters; `sweep` also accepts ranges such as 2..6.
    #[arg(long)]
    pub clusters: Option<String>,
    /// Video GMM components.
    #[arg(long)]
    pub gaussians: Option<usize>,
    #[arg(long)]
    pub cost: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Z-score sensor channels with training statistics.
    #[arg(long)]
    pub standardize: bool,
    /// Skip sensor PCA.
    #[arg(long)]
    pub no_sensor_pca: bool,
    /// Fit codebooks once on all clips instead of per training fold.
    #[arg(long)]
    pub pre_encoded: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// order-only, joint-fusion or random.
    #[arg(long)]
    pub preset: Option<SynthPreset>,
    /// Class count for the random preset.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub clips_per_class: Option<usize>,
    #[arg(long)]
    pub shuffle_labels: bool,
}

/// An error tagged with the pipeline stage it came from.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

trait Stage<T> {
    fn stage(self, name: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

type CliResult<T> = std::result::Result<T, StageError>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(StageError { stage, error }) => {
            eprintln!("egomfv: {stage} failed: {error}");
            error.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Encode(a) => cmd_encode(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    }
}

fn single(value: &Option<String>, what: &str) -> Result<Option<usize>> {
    match value {
        None => Ok(None),
        Some(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::validation(format!("--{what} takes a single number here, got {s:?}"))),
    }
}

/// Loads the config file (or defaults) and applies the flags. `window` and
/// `clusters` are left to the caller since `sweep` reads them as ranges.
pub fn base_config(a: &CommonArgs) -> Result<RunConfig> {
    let mut c = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &a.manifest {
        c.manifest = Some(v.clone());
    }
    if let Some(v) = &a.codebook {
        c.codebook = Some(v.clone());
    }
    if let Some(v) = a.seed {
        c.seed = v;
    }
    if let Some(v) = a.stages {
        c.sensor.stages = v;
    }
    if let Some(v) = a.window_mode {
        c.sensor.mode = v;
    }
    if let Some(v) = a.gaussians {
        c.video.gaussians = v;
    }
    if let Some(v) = a.cost {
        c.classifier.cost = v;
    }
    if let Some(v) = a.folds {
        c.classifier.folds = v;
    }
    if let Some(v) = &a.out {
        c.out_dir = v.clone();
    }
    if a.standardize {
        c.sensor.standardize = true;
    }
    if a.no_sensor_pca {
        c.sensor.pca = false;
    }
    if a.pre_encoded {
        c.classifier.refit_per_fold = false;
    }
    Ok(c)
}

fn methods(a: &CommonArgs, default: Method) -> Result<Vec<Method>> {
    match a.method.as_deref() {
        None => Ok(vec![default]),
        Some("all") => Ok(Method::ALL.to_vec()),
        Some(list) => list.split(',').map(|m| m.trim().parse()).collect(),
    }
}

/// Full configuration for the single-method commands.
pub fn resolve_config(a: &CommonArgs) -> Result<RunConfig> {
    let mut c = base_config(a)?;
    if let Some(w) = single(&a.window, "window")? {
        c.sensor.window = w;
    }
    if let Some(k) = single(&a.clusters, "clusters")? {
        c.sensor.clusters = k;
    }
    let m = methods(a, c.method)?;
    if m.len() != 1 {
        return Err(Error::validation("this command takes exactly one method"));
    }
    c.method = m[0];
    c.validate()?;
    Ok(c)
}

/// Removes the lock file when dropped.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::validation(format!(
                "{} is in use by another run (delete {} if that run is gone)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn load_dataset(c: &RunConfig) -> Result<Vec<ClipRecord>> {
    let path = c
        .manifest
        .as_ref()
        .ok_or_else(|| Error::validation("no manifest given (--manifest or \"manifest\" in the config)"))?;
    let clips = DatasetManifest::load(path)?.load_clips()?;
    info!("loaded {} clips from {}", clips.len(), path.display());
    Ok(clips)
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let mut c = resolve_config(&a.common).stage("configuration")?;
    if let Some(p) = a.preset {
        c.synth.preset = p;
    }
    if let Some(n) = a.classes {
        c.synth.classes = n;
    }
    if let Some(n) = a.clips_per_class {
        c.synth.clips_per_class = n;
    }
    if a.shuffle_labels {
        c.synth.shuffle_labels = true;
    }
    let _lock = OutputLock::acquire(&c.out_dir).stage("output")?;
    let spec = c.synth.spec(c.seed);
    let clips = generate_synthetic(&spec, c.seed).stage("synth")?;
    let provenance = format!("seed {}, config hash {}", c.seed, c.config_hash());
    let manifest = write_dataset(&spec, &clips, &c.out_dir, Some(&provenance)).stage("output")?;
    println!(
        "wrote {} clips in {} classes: {n} sensor files, {n} trajectory files, manifest {}",
        clips.len(),
        manifest.categories.len(),
        c.out_dir.join("manifest.json").display(),
        n = clips.len(),
    );
    Ok(())
}

fn training_clips<'a>(c: &RunConfig, clips: &'a [ClipRecord]) -> Vec<&'a ClipRecord> {
    let (usable, excluded) = usable_clips(c.method, clips);
    if !excluded.is_empty() {
        warn!(
            "{}: excluding {} clips without video trajectories: {}",
            c.method,
            excluded.len(),
            excluded.join(", ")
        );
    }
    usable
}

fn cmd_fit(a: &CommonArgs) -> CliResult<()> {
    let c = resolve_config(a).stage("configuration")?;
    let clips = load_dataset(&c).stage("load")?;
    let _lock = OutputLock::acquire(&c.out_dir).stage("output")?;
    let usable = training_clips(&c, &clips);
    let model = fit_model(&c, &usable).stage("fit")?;
    let path = c.out_dir.join("codebook.json");
    write_json(&path, &model).stage("output")?;
    println!(
        "fit {} on {} clips; vectors of length {}; codebook {} ({})",
        c.method,
        usable.len(),
        model.encoded_len(),
        path.display(),
        model.content_hash()
    );
    Ok(())
}

fn cmd_encode(a: &CommonArgs) -> CliResult<()> {
    let c = resolve_config(a).stage("configuration")?;
    let path = c.codebook.clone().unwrap_or_else(|| c.out_dir.join("codebook.json"));
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e)).stage("load")?;
    let model: FittedModel = serde_json::from_str(&text).map_err(Error::from).stage("load")?;
    if model.fit_hash != c.fit_hash() {
        return Err(Error::validation(format!(
            "codebook {} was fit with configuration hash {}, the current configuration hashes to {}; refusing to encode",
            path.display(),
            model.fit_hash,
            c.fit_hash()
        )))
        .stage("configuration");
    }
    let clips = load_dataset(&c).stage("load")?;
    let _lock = OutputLock::acquire(&c.out_dir).stage("output")?;
    let usable = training_clips(&c, &clips);
    let encoded = encode_clips(&model, &usable).stage("encode")?;
    let matrix = EncodedMatrix::new(&model, encoded);
    write_json(&c.out_dir.join("encoded.json"), &matrix).stage("output")?;
    matrix.write_csv(&c.out_dir.join("encoded.csv")).stage("output")?;
    println!(
        "encoded {} clips x {} values with codebook {}",
        matrix.clips.len(),
        matrix.dim,
        matrix.codebook_hash
    );
    Ok(())
}

fn cmd_run(a: &CommonArgs) -> CliResult<()> {
    let base = base_config(a).stage("configuration")?;
    let list = methods(a, base.method).stage("configuration")?;
    let mut probe = a.clone();
    probe.method = Some(list[0].as_str().to_owned());
    let mut c = resolve_config(&probe).stage("configuration")?;
    let clips = load_dataset(&c).stage("load")?;
    let _lock = OutputLock::acquire(&c.out_dir).stage("output")?;
    let mut reports = Vec::with_capacity(list.len());
    for m in list {
        c.method = m;
        info!("evaluating {m} with {} folds", c.classifier.folds);
        let report = evaluate(&c, &clips).stage("evaluate")?;
        let stem = m.as_str();
        write_json(&c.out_dir.join(format!("report-{stem}.json")), &report).stage("output")?;
        write_text(&c.out_dir.join(format!("confusion-{stem}.csv")), &report.confusion_csv()).stage("output")?;
        reports.push(report);
    }
    let table = render_table(&reports);
    write_text(&c.out_dir.join("report.txt"), &table).stage("output")?;
    print!("{table}");
    Ok(())
}

fn cmd_sweep(a: &CommonArgs) -> CliResult<()> {
    let c = base_config(a).stage("configuration")?;
    let windows = match &a.window {
        Some(s) => parse_range(s),
        None => Ok((1..=5).collect()),
    }
    .stage("configuration")?;
    let clusters = match &a.clusters {
        Some(s) => parse_range(s),
        None => Ok((2..=6).collect()),
    }
    .stage("configuration")?;
    let clips = load_dataset(&c).stage("load")?;
    let _lock = OutputLock::acquire(&c.out_dir).stage("output")?;
    info!("sweeping {} windows x {} cluster counts", windows.len(), clusters.len());
    let report = run_sweep(&c, &clips, &windows, &clusters).stage("sweep")?;
    write_json(&c.out_dir.join("sweep.json"), &report).stage("output")?;
    let text = report.render_text();
    write_text(&c.out_dir.join("sweep.txt"), &text).stage("output")?;
    print!("{text}");
    Ok(())
}

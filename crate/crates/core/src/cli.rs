//! Command-line front end. Every subcommand is a thin wrapper over the library.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::detector::{BuiltinDetector, Cascade, DetectorConfig, ExternalConfig, ExternalDetector, FaceDetector, ImageTransport, BUNDLED_NAME};
use crate::evaluation::{evaluate, sweep, Corpus, EvalError, EvalReport, ReportFormat, ScoringMode, ScoringOptions, SweepSpec};
use crate::filters::{apply, FaceContext, FilterSpec};
use crate::imaging::{load_image, save_image, BoundingBox, FaceAnnotation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "faceveil", version, about = "Perturb face images and measure how often a face detector still finds them")]
pub struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply one filter spec to an image.
    Filter(FilterArgs),
    /// Run a detector on an image and print the boxes as JSON.
    Detect(DetectArgs),
    /// Evaluate one filter spec over an annotated corpus.
    Eval(EvalArgs),
    /// Run a parameter sweep described by a JSON file.
    Sweep(SweepArgs),
    /// Re-render a JSON report as CSV, plot data or JSON.
    Report(ReportArgs),
    /// Start the HTTP service.
    #[cfg(feature = "service")]
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
    Plot,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Plot => ReportFormat::Plot,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TransportArg {
    PngBase64,
    Path,
}

#[derive(Debug, Args)]
pub struct DetectorArgs {
    /// Cascade file (OpenCV XML or JSON); the bundled frontal-face cascade by default.
    #[arg(long, value_name = "PATH")]
    pub cascade: Option<PathBuf>,
    /// External detector: an http(s) URL or a command line speaking the JSON line protocol.
    #[arg(long, value_name = "DESCRIPTOR", conflicts_with = "cascade")]
    pub external: Option<String>,
    /// How images are sent to an external detector.
    #[arg(long, value_enum, default_value = "png-base64", requires = "external")]
    pub transport: TransportArg,
    /// External detector timeout in seconds.
    #[arg(long, value_name = "SECS", requires = "external")]
    pub timeout: Option<f64>,
    /// Concurrent requests allowed to the external detector.
    #[arg(long, value_name = "N", requires = "external")]
    pub concurrency: Option<usize>,
    #[arg(long, value_name = "F")]
    pub scale_factor: Option<f64>,
    /// Window step in pixels at scale 1.
    #[arg(long, value_name = "PX")]
    pub step: Option<u32>,
    #[arg(long, value_name = "N")]
    pub min_neighbors: Option<usize>,
    #[arg(long, value_name = "PX")]
    pub min_size: Option<u32>,
    #[arg(long, value_name = "PX")]
    pub max_size: Option<u32>,
}

impl DetectorArgs {
    fn config(&self) -> DetectorConfig {
        let d = DetectorConfig::default();
        DetectorConfig {
            scale_factor: self.scale_factor.unwrap_or(d.scale_factor),
            step: self.step.unwrap_or(d.step),
            min_neighbors: self.min_neighbors.unwrap_or(d.min_neighbors),
            min_size: self.min_size.or(d.min_size),
            max_size: self.max_size.or(d.max_size),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn FaceDetector>, CliError> {
        if let Some(desc) = &self.external {
            let mut cfg = ExternalConfig::from_descriptor(desc).map_err(|e| CliError::Usage(e.to_string()))?;
            cfg.transport = match self.transport {
                TransportArg::PngBase64 => ImageTransport::PngBase64,
                TransportArg::Path => ImageTransport::Path,
            };
            if let Some(t) = self.timeout {
                cfg.timeout_secs = t;
            }
            if let Some(c) = self.concurrency {
                cfg.concurrency = c;
            }
            return Ok(Arc::new(ExternalDetector::new(cfg).map_err(|e| CliError::Usage(e.to_string()))?));
        }
        let config = self.config();
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let detector = match &self.cascade {
            None => BuiltinDetector::bundled(config),
            Some(path) => {
                let cascade = Cascade::load(path).map_err(|e| CliError::Runtime(e.to_string()))?;
                let name = path.file_stem().map_or(BUNDLED_NAME.into(), |s| s.to_string_lossy().into_owned());
                BuiltinDetector::new(Arc::new(cascade), config, name)
            }
        };
        Ok(Arc::new(detector.map_err(|e| CliError::Runtime(e.to_string()))?))
    }
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Filter spec: a JSON file or inline JSON.
    #[arg(long, value_name = "SPEC")]
    pub spec: String,
    /// Override the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Face annotation (JSON file or inline) supplying the geometry for region filters.
    #[arg(long, value_name = "FACE", conflicts_with = "eyes")]
    pub face: Option<String>,
    /// Eye centers as LX,LY,RX,RY; requires --face-box.
    #[arg(long, value_name = "LX,LY,RX,RY", value_delimiter = ',', requires = "face_box")]
    pub eyes: Option<Vec<f64>>,
    /// Face box as X,Y,W,H for --eyes.
    #[arg(long, value_name = "X,Y,W,H", value_delimiter = ',')]
    pub face_box: Option<Vec<f64>>,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub detector: DetectorArgs,
    pub image: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    /// Detections must exceed this IoU with the ground truth.
    #[arg(long, default_value_t = 0.1)]
    pub iou_threshold: f64,
    /// Score only the first annotated face of each image.
    #[arg(long)]
    pub single_face: bool,
}

impl ScoringArgs {
    fn options(&self) -> ScoringOptions {
        let mode = if self.single_face { ScoringMode::SingleFace } else { ScoringMode::PerFace };
        ScoringOptions { iou_threshold: self.iou_threshold, mode }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Record the generation time in the report.
    #[arg(long)]
    pub timestamp: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSONL manifest; repeat to concatenate corpora.
    #[arg(long = "manifest", value_name = "PATH", required = true)]
    pub manifests: Vec<PathBuf>,
    /// Filter spec: a JSON file or inline JSON.
    #[arg(long, value_name = "SPEC")]
    pub spec: String,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep description (JSON).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Manifests to use instead of the config's corpus.
    #[arg(long = "manifest", value_name = "PATH")]
    pub manifests: Vec<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSON report produced by `eval` or `sweep`.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    #[arg(short, long, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[cfg(feature = "service")]
#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: std::net::SocketAddr,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long, default_value_t = crate::service::DEFAULT_MAX_SESSIONS)]
    pub max_sessions: usize,
    /// Sessions idle this long are dropped (e.g. 30m, 90s).
    #[arg(long, default_value = "30m", value_parser = humantime::parse_duration)]
    pub idle_timeout: std::time::Duration,
    /// Request body limit in bytes.
    #[arg(long, default_value_t = crate::service::DEFAULT_BODY_LIMIT)]
    pub body_limit: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::EmptyGrid(_) | EvalError::TooManyCells { .. } | EvalError::Filter(_) | EvalError::InvalidOptions(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Reads `arg` as inline JSON when it starts with `{`, else as a file path.
fn json_arg(arg: &str) -> Result<String, CliError> {
    if arg.trim_start().starts_with('{') {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(arg).map_err(|e| CliError::Runtime(format!("{arg}: {e}")))
}

fn parse_spec(arg: &str) -> Result<FilterSpec, CliError> {
    let spec = FilterSpec::from_json(&json_arg(arg)?).map_err(|e| CliError::Usage(format!("invalid filter spec: {e}")))?;
    spec.resolve().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| if text.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") }).map_err(runtime)
        }
    }
}

fn write_report(mut report: EvalReport, out: &OutputArgs) -> Result<(), CliError> {
    if out.timestamp {
        report.stamp_now();
    }
    emit(&report.render(out.format.into()), out.output.as_deref())
}

fn load_corpus(manifests: &[PathBuf]) -> Result<Corpus, CliError> {
    let corpus = Corpus::load(manifests).map_err(runtime)?;
    for r in &corpus.rejected {
        log::warn!("{}:{}: skipped: {}", r.manifest, r.line, r.reason);
    }
    Ok(corpus)
}

fn face_context(args: &FilterArgs) -> Result<Option<FaceContext>, CliError> {
    if let Some(face) = &args.face {
        let face: FaceAnnotation =
            serde_json::from_str(&json_arg(face)?).map_err(|e| CliError::Usage(format!("invalid face annotation: {e}")))?;
        return FaceContext::from_annotation(&face).map(Some).map_err(|e| CliError::Usage(e.to_string()));
    }
    match (&args.eyes, &args.face_box) {
        (Some(e), Some(b)) => {
            if e.len() != 4 || b.len() != 4 {
                return Err(CliError::Usage("--eyes and --face-box take exactly four comma-separated numbers".into()));
            }
            let bbox = BoundingBox::new(b[0], b[1], b[2], b[3]).map_err(|e| CliError::Usage(e.to_string()))?;
            FaceContext::from_eye_centers(bbox, (e[0], e[1]), (e[2], e[3])).map(Some).map_err(|e| CliError::Usage(e.to_string()))
        }
        _ => Ok(None),
    }
}

fn cmd_filter(args: &FilterArgs) -> Result<(), CliError> {
    let mut spec = parse_spec(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let ctx = face_context(args)?;
    let bytes = std::fs::read(&args.input).map_err(|e| CliError::Runtime(format!("{}: {e}", args.input.display())))?;
    let input = load_image(&args.input).map_err(runtime)?;
    let output = apply(&spec, &input, ctx.as_ref()).map_err(|e| match e {
        crate::filters::FilterError::MissingContext(_) => CliError::Usage(format!("{e}; pass --face or --eyes/--face-box")),
        other => runtime(other),
    })?;
    let is_png = bytes.starts_with(b"\x89PNG\r\n\x1a\n");
    let is_png_out = args.output.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if output == input && is_png && is_png_out {
        std::fs::write(&args.output, &bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", args.output.display())))?;
    } else {
        save_image(&output, &args.output).map_err(runtime)?;
    }
    Ok(())
}

fn cmd_detect(args: &DetectArgs) -> Result<(), CliError> {
    let detector = args.detector.build()?;
    let image = load_image(&args.image).map_err(runtime)?;
    let detections = detector.detect(&image).map_err(runtime)?;
    let out = serde_json::json!({"detector": detector.id(), "detections": detections});
    emit(&serde_json::to_string_pretty(&out).map_err(runtime)?, None)
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let spec = parse_spec(&args.spec)?;
    let detector = args.detector.build()?;
    let corpus = load_corpus(&args.manifests)?;
    let report = evaluate(&corpus, &spec, detector.as_ref(), &args.scoring.options())?;
    write_report(report, &args.out)
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::Runtime(format!("{}: {e}", args.config.display())))?;
    let spec = SweepSpec::from_json(&text).map_err(|e| CliError::Usage(format!("invalid sweep config: {e}")))?;
    spec.specs()?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let manifests: Vec<PathBuf> = if args.manifests.is_empty() {
        spec.corpus.iter().map(|p| if p.is_relative() { base.join(p) } else { p.clone() }).collect()
    } else {
        args.manifests.clone()
    };
    if manifests.is_empty() {
        return Err(CliError::Usage("no corpus: set \"corpus\" in the sweep config or pass --manifest".into()));
    }
    let detector = spec.detector.build(Some(base))?;
    let corpus = load_corpus(&manifests)?;
    let report = sweep(&corpus, &spec, detector.as_ref())?;
    write_report(report, &args.out)
}

fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let report = EvalReport::read(&args.input)?;
    emit(&report.render(args.format.into()), args.output.as_deref())
}

#[cfg(feature = "service")]
fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    use crate::service::{serve, AppState, ServiceConfig};
    let detector = args.detector.build()?;
    let config = ServiceConfig { max_sessions: args.max_sessions, idle_timeout: args.idle_timeout, body_limit: args.body_limit };
    serve(args.bind, AppState::new(detector, config)).map_err(runtime)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Filter(a) => cmd_filter(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
        #[cfg(feature = "service")]
        Command::Serve(a) => cmd_serve(a),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main_with_args(["faceveil", "bogus"]), EXIT_USAGE);
        assert_eq!(main_with_args(["faceveil", "detect", "--no-such-flag", "x.png"]), EXIT_USAGE);
    }

    #[test]
    fn eval_errors_are_classified() {
        assert_eq!(CliError::from(EvalError::EmptyGrid("x".into())).exit_code(), EXIT_USAGE);
        assert_eq!(CliError::from(EvalError::InvalidOptions("x".into())).exit_code(), EXIT_USAGE);
        let io = EvalError::Io { path: "p".into(), source: std::io::Error::other("x") };
        assert_eq!(CliError::from(io).exit_code(), EXIT_RUNTIME);
    }

    #[test]
    fn detector_args_default_to_bundled() {
        let cli = Cli::try_parse_from(["faceveil", "detect", "--min-neighbors", "2", "a.png"]).unwrap();
        let Command::Detect(args) = cli.command else { panic!() };
        assert_eq!(args.detector.config().min_neighbors, 2);
        assert_eq!(args.detector.build().unwrap().id(), format!("builtin:{BUNDLED_NAME}"));
    }
}

//! `uav-vla` command line: `generate`, `evaluate`, `benchmark` and
//! `export-geojson`.
//!
//! Exit codes: 0 success, 2 bad input, 3 model provider failure, 4 empty
//! mission.

pub mod dataset;
pub mod geojson;

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::eval::report::{EvalReport, SampleFailure, SampleResult};
use crate::eval::{compute, trajectory_length_m, Method};
use crate::geo::GeoReference;
use crate::mission::{
    extract_trajectory, parse_wpl_with, serialize_wpl, MissionPlan, ParseOptions,
};
use crate::models::{Instruction, ModelError, ProviderConfig, ProviderKind};
use crate::pipeline::{
    run_pipeline, ActionMode, MissionRequest, PipelineError, Providers, DEFAULT_ALTITUDE_M,
};

use self::dataset::{DatasetLayout, Sample};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;
pub const EXIT_EMPTY_MISSION: i32 = 4;

pub const DEFAULT_OPENAI_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Parser)]
#[command(
    name = "uav-vla",
    version,
    about = "Generate UAV missions from language and satellite imagery, and score them"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn an instruction and a georeferenced image into a waypoint file.
    Generate(GenerateArgs),
    /// Compare a generated plan with a ground-truth plan.
    Evaluate(EvaluateArgs),
    /// Generate and evaluate every sample of a dataset directory.
    Benchmark(BenchmarkArgs),
    /// Export plans as a GeoJSON FeatureCollection.
    ExportGeojson(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderChoice {
    Mock,
    Openai,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ActionModeArg {
    Template,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    All,
    Knn,
    Dtw,
    Sequential,
}

#[derive(Debug, Args)]
struct ProviderArgs {
    /// Model backend.
    #[arg(long, value_enum, default_value_t = ProviderChoice::Mock)]
    provider: ProviderChoice,
    /// Chat-completions URL for goal extraction and action generation.
    #[arg(long, default_value = DEFAULT_OPENAI_ENDPOINT)]
    endpoint: String,
    /// Language model name.
    #[arg(long, default_value = "gpt-4o")]
    model: String,
    /// Chat-completions URL of the pointing model (defaults to --endpoint).
    #[arg(long)]
    vlm_endpoint: Option<String>,
    /// Pointing model name.
    #[arg(long, default_value = "allenai/Molmo-7B-D-0924")]
    vlm_model: String,
    /// Environment variable holding the API token.
    #[arg(long)]
    token_env: Option<String>,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// Retries after transport failures.
    #[arg(long, default_value_t = 3)]
    retries: u32,
    /// Concurrent requests per provider.
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
    /// Flight altitude in meters.
    #[arg(long, default_value_t = DEFAULT_ALTITUDE_M)]
    altitude: f64,
    /// How the waypoint file is produced.
    #[arg(long, value_enum, default_value_t = ActionModeArg::Template)]
    action_mode: ActionModeArg,
}

impl ProviderArgs {
    fn configs(&self) -> (ProviderConfig, ProviderConfig, ProviderConfig) {
        match self.provider {
            ProviderChoice::Mock => (
                ProviderConfig::mock(),
                ProviderConfig::mock(),
                ProviderConfig::mock(),
            ),
            ProviderChoice::Openai => {
                let base = |kind, endpoint: &str, model: &str| ProviderConfig {
                    token_env: self.token_env.clone(),
                    timeout_s: self.timeout,
                    max_retries: self.retries,
                    max_in_flight: self.max_in_flight,
                    ..ProviderConfig::http(kind, endpoint, model)
                };
                let chat = base(ProviderKind::HttpChat, &self.endpoint, &self.model);
                let vlm = base(
                    ProviderKind::HttpVlm,
                    self.vlm_endpoint.as_deref().unwrap_or(&self.endpoint),
                    &self.vlm_model,
                );
                (chat.clone(), vlm, chat)
            }
        }
    }

    fn action_mode(&self) -> ActionMode {
        match self.action_mode {
            ActionModeArg::Template => ActionMode::Template,
            ActionModeArg::Llm => ActionMode::Llm,
        }
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Satellite image (PNG or JPEG).
    #[arg(long)]
    image: PathBuf,
    /// Georeference JSON for the image.
    #[arg(long)]
    meta: PathBuf,
    /// Instruction text.
    #[arg(
        long,
        conflicts_with = "prompt_file",
        required_unless_present = "prompt_file"
    )]
    prompt: Option<String>,
    /// File holding the instruction.
    #[arg(long)]
    prompt_file: Option<PathBuf>,
    /// Output waypoint file.
    #[arg(long)]
    out: PathBuf,
    /// Trace JSON path (default: output path with `.trace.json`).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[command(flatten)]
    providers: ProviderArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Generated waypoint file.
    generated: PathBuf,
    /// Ground-truth waypoint file.
    truth: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::All)]
    metric: MetricArg,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Accept unknown command codes.
    #[arg(long)]
    lenient: bool,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// Dataset directory.
    root: PathBuf,
    /// Report JSON path.
    #[arg(long)]
    report: PathBuf,
    /// Report CSV path (default: report path with `.csv`).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Directory receiving each sample's generated waypoint file.
    #[arg(long)]
    plans_dir: Option<PathBuf>,
    /// Evaluate existing `<stem>.waypoints` files from this directory instead
    /// of running the generator.
    #[arg(long)]
    from_plans: Option<PathBuf>,
    /// Samples processed in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Accept unknown command codes in ground-truth files.
    #[arg(long)]
    lenient: bool,
    #[command(flatten)]
    providers: ProviderArgs,
}

#[derive(Debug, Args)]
struct ExportArgs {
    /// Waypoint files.
    #[arg(required = true)]
    plans: Vec<PathBuf>,
    /// Output GeoJSON file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    lenient: bool,
}

/// Command failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

/// Exit code for a pipeline failure.
pub fn pipeline_exit_code(err: &PipelineError) -> i32 {
    match err {
        PipelineError::Input(_) | PipelineError::Georeference(_) => EXIT_INPUT,
        PipelineError::EmptyMission => EXIT_EMPTY_MISSION,
        PipelineError::Model {
            source: ModelError::EmptyInstruction | ModelError::Config(_),
            ..
        } => EXIT_INPUT,
        PipelineError::Model { .. }
        | PipelineError::ActionGeneration { .. }
        | PipelineError::RejectedPlan { .. } => EXIT_PROVIDER,
    }
}

impl From<PipelineError> for Failure {
    fn from(err: PipelineError) -> Self {
        let mut message = err.to_string();
        match &err {
            PipelineError::ActionGeneration { raw, .. }
            | PipelineError::RejectedPlan { raw, .. } => {
                message.push_str(&format!("\nmodel response:\n{raw}"));
            }
            PipelineError::Model { source, .. } => {
                if let Some(raw) = source.raw_response() {
                    message.push_str(&format!("\nmodel response:\n{raw}"));
                }
            }
            _ => {}
        }
        Self {
            code: pipeline_exit_code(&err),
            message,
        }
    }
}

/// Writes `contents` to a temporary file next to `path`, then renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn write_output(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    write_atomic(path, contents)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn read_text(path: &Path, what: &str) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {what} {}: {e}", path.display())))
}

fn load_reference(path: &Path) -> Result<GeoReference, Failure> {
    GeoReference::from_json(&read_text(path, "georeference")?)
        .map_err(|e| Failure::input(format!("invalid georeference {}: {e}", path.display())))
}

fn load_plan(path: &Path, lenient: bool) -> Result<MissionPlan, Failure> {
    parse_wpl_with(&read_text(path, "waypoint file")?, ParseOptions { lenient })
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn with_extension_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .try_init();

    let result = match cli.command {
        Command::Generate(args) => cmd_generate(&args, stdout),
        Command::Evaluate(args) => cmd_evaluate(&args, stdout),
        Command::Benchmark(args) => cmd_benchmark(&args, stdout, stderr),
        Command::ExportGeojson(args) => cmd_export_geojson(&args, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            let _ = writeln!(stderr, "error: {}", failure.message);
            failure.code
        }
    }
}

fn cmd_generate(args: &GenerateArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let reference = load_reference(&args.meta)?;
    let text = match (&args.prompt, &args.prompt_file) {
        (Some(text), _) => text.clone(),
        (None, Some(path)) => read_text(path, "prompt")?,
        (None, None) => return Err(Failure::input("an instruction is required")),
    };
    let instruction = Instruction::new(text).map_err(|e| Failure::input(e.to_string()))?;
    let (goal_cfg, grounding_cfg, action_cfg) = args.providers.configs();
    let request = MissionRequest {
        instruction,
        image_path: args.image.clone(),
        reference,
        altitude_m: args.providers.altitude,
        goal_provider: goal_cfg,
        grounding_provider: grounding_cfg,
        action_provider: action_cfg,
        action_mode: args.providers.action_mode(),
    };
    let providers = Providers::for_request(&request)?;
    let trace = run_pipeline(&request, &providers)?;

    let trace_path = args
        .trace
        .clone()
        .unwrap_or_else(|| with_extension_suffix(&args.out, ".trace.json"));
    let trace_json = trace
        .to_json()
        .map_err(|e| Failure::input(format!("cannot encode trace: {e}")))?;
    write_output(&args.out, serialize_wpl(&trace.plan).as_bytes())?;
    write_output(&trace_path, trace_json.as_bytes())?;
    let _ = writeln!(
        stdout,
        "wrote {} ({} waypoints for goals: {}) and {}",
        args.out.display(),
        trace.geo_points.len(),
        trace.goals.goals().join(", "),
        trace_path.display()
    );
    Ok(())
}

fn selected_methods(metric: MetricArg) -> Vec<Method> {
    match metric {
        MetricArg::All => Method::ALL.to_vec(),
        MetricArg::Knn => vec![Method::Knn],
        MetricArg::Dtw => vec![Method::Dtw],
        MetricArg::Sequential => vec![Method::Sequential],
    }
}

fn cmd_evaluate(args: &EvaluateArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let generated = extract_trajectory(&load_plan(&args.generated, args.lenient)?);
    let truth = extract_trajectory(&load_plan(&args.truth, args.lenient)?);
    let mut results = Vec::new();
    for method in selected_methods(args.metric) {
        results
            .push(compute(method, &generated, &truth).map_err(|e| Failure::input(e.to_string()))?);
    }
    let generated_length_m = trajectory_length_m(&generated);
    let truth_length_m = trajectory_length_m(&truth);
    if args.json {
        let doc = json!({
            "generated_length_m": generated_length_m,
            "truth_length_m": truth_length_m,
            "generated_points": generated.len(),
            "truth_points": truth.len(),
            "metrics": results,
        });
        let _ = writeln!(
            stdout,
            "{}",
            serde_json::to_string_pretty(&doc).expect("JSON values encode")
        );
        return Ok(());
    }
    let _ = writeln!(
        stdout,
        "generated length: {generated_length_m:.2} m ({} points)",
        generated.len()
    );
    let _ = writeln!(
        stdout,
        "truth length:     {truth_length_m:.2} m ({} points)",
        truth.len()
    );
    for r in &results {
        let note = if r.length_mismatch {
            ", length mismatch"
        } else {
            ""
        };
        let _ = writeln!(
            stdout,
            "{:<11} RMSE: {:.2} m ({} pairs{note})",
            r.method.as_str(),
            r.rmse_m,
            r.matched_pairs
        );
    }
    Ok(())
}

enum SampleOutcome {
    Done(SampleResult, Option<String>),
    Failed(SampleFailure, i32),
}

fn failed(sample: &Sample, stage: &str, error: impl ToString, code: i32) -> SampleOutcome {
    SampleOutcome::Failed(
        SampleFailure {
            name: sample.name.clone(),
            stage: stage.to_string(),
            error: error.to_string(),
        },
        code,
    )
}

struct BenchmarkContext<'a> {
    args: &'a BenchmarkArgs,
    instruction: Option<Instruction>,
    providers: Option<Providers>,
}

fn process_sample(ctx: &BenchmarkContext<'_>, sample: &Sample) -> SampleOutcome {
    let truth_plan = match load_plan(&sample.truth, ctx.args.lenient) {
        Ok(p) => p,
        Err(f) => return failed(sample, "truth", f.message, f.code),
    };
    let (generated_plan, text) = if let Some(dir) = &ctx.args.from_plans {
        let path = dir.join(format!("{}.waypoints", sample.name));
        match load_plan(&path, true) {
            Ok(p) => (p, None),
            Err(f) => return failed(sample, "input", f.message, f.code),
        }
    } else {
        let reference = match load_reference(&sample.meta) {
            Ok(r) => r,
            Err(f) => return failed(sample, "input", f.message, f.code),
        };
        let Some(image) = &sample.image else {
            return failed(sample, "input", "no image file for sample", EXIT_INPUT);
        };
        let (Some(instruction), Some(providers)) = (&ctx.instruction, &ctx.providers) else {
            return failed(sample, "input", "generator is not configured", EXIT_INPUT);
        };
        let request = MissionRequest {
            instruction: instruction.clone(),
            image_path: image.clone(),
            reference,
            altitude_m: ctx.args.providers.altitude,
            goal_provider: ProviderConfig::mock(),
            grounding_provider: ProviderConfig::mock(),
            action_provider: ProviderConfig::mock(),
            action_mode: ctx.args.providers.action_mode(),
        };
        match run_pipeline(&request, providers) {
            Ok(trace) => {
                let text = serialize_wpl(&trace.plan);
                (trace.plan, Some(text))
            }
            Err(e) => {
                let code = pipeline_exit_code(&e);
                return failed(sample, &e.stage().to_string(), e, code);
            }
        }
    };
    match SampleResult::evaluate(
        sample.name.clone(),
        &extract_trajectory(&generated_plan),
        &extract_trajectory(&truth_plan),
    ) {
        Ok(row) => SampleOutcome::Done(row, text),
        Err(e) => failed(sample, "evaluate", e, EXIT_INPUT),
    }
}

fn cmd_benchmark(
    args: &BenchmarkArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    let layout = DatasetLayout::scan(&args.root)
        .map_err(|e| Failure::input(format!("cannot read dataset {}: {e}", args.root.display())))?;
    if layout.samples.is_empty() {
        return Err(Failure::input(format!(
            "no samples (*.meta.json) in {}",
            args.root.display()
        )));
    }
    let (instruction, providers) = if args.from_plans.is_some() {
        (None, None)
    } else {
        let text = read_text(&layout.prompt_path(), "prompt")?;
        let instruction = Instruction::new(text).map_err(|e| Failure::input(e.to_string()))?;
        let (g, p, a) = args.providers.configs();
        (
            Some(instruction),
            Some(Providers::from_configs(&g, &p, &a)?),
        )
    };
    let ctx = BenchmarkContext {
        args,
        instruction,
        providers,
    };

    let jobs = args.jobs.max(1).min(layout.samples.len());
    let next = AtomicUsize::new(0);
    let outcomes: Mutex<Vec<(usize, SampleOutcome)>> =
        Mutex::new(Vec::with_capacity(layout.samples.len()));
    thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(sample) = layout.samples.get(i) else {
                    break;
                };
                let outcome = process_sample(&ctx, sample);
                outcomes
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .push((i, outcome));
            });
        }
    });
    let mut outcomes = outcomes.into_inner().unwrap_or_else(|e| e.into_inner());
    outcomes.sort_by_key(|(i, _)| *i);

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut first_failure_code = None;
    for (i, outcome) in outcomes {
        match outcome {
            SampleOutcome::Done(row, text) => {
                if let (Some(dir), Some(text)) = (&args.plans_dir, text) {
                    fs::create_dir_all(dir).map_err(|e| {
                        Failure::input(format!("cannot create {}: {e}", dir.display()))
                    })?;
                    write_output(
                        &dir.join(format!("{}.waypoints", layout.samples[i].name)),
                        text.as_bytes(),
                    )?;
                }
                rows.push(row);
            }
            SampleOutcome::Failed(failure, code) => {
                let _ = writeln!(
                    stderr,
                    "sample {} failed at {}: {}",
                    failure.name, failure.stage, failure.error
                );
                first_failure_code.get_or_insert(code);
                failures.push(failure);
            }
        }
    }

    let report = EvalReport::new(rows, failures);
    let csv_path = args
        .csv
        .clone()
        .unwrap_or_else(|| args.report.with_extension("csv"));
    let report_json = report
        .to_json()
        .map_err(|e| Failure::input(format!("cannot encode report: {e}")))?;
    write_output(&args.report, report_json.as_bytes())?;
    write_output(&csv_path, report.to_csv().as_bytes())?;
    let _ = write!(stdout, "{}", report.render_table());
    if report.samples.is_empty() {
        return Err(Failure {
            code: first_failure_code.unwrap_or(EXIT_INPUT),
            message: "every sample failed".into(),
        });
    }
    Ok(())
}

fn cmd_export_geojson(args: &ExportArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let mut plans = Vec::with_capacity(args.plans.len());
    for path in &args.plans {
        plans.push((load_plan(path, args.lenient)?, path.display().to_string()));
    }
    let doc = geojson::feature_collection(plans.iter().map(|(p, s)| (p, s.as_str())));
    let mut text = serde_json::to_string_pretty(&doc).expect("JSON values encode");
    text.push('\n');
    write_output(&args.out, text.as_bytes())?;
    let _ = writeln!(
        stdout,
        "wrote {} plan(s) to {}",
        plans.len(),
        args.out.display()
    );
    Ok(())
}

//! Command-line surface for the detection pipeline: corpus simulation,
//! detector training, offline detection, alert explanation, evaluation,
//! latency measurement, and the ingestion service.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 backend or transport error. Failures print one machine-readable JSON
//! object on stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use agentsight::corpus::read_corpus;
use agentsight::detector::{
    train_detector, DetectorConfig, DetectorError, DetectorKind, RunVerdict, TrainedDetector,
};
use agentsight::event::{GroundTruth, RunLog, VulnClass};
use agentsight::explain::{
    explain_run, score_explanation, ChatBackend, ExplainError, MockBackend, OracleBackend,
    RemoteChatBackend, RemoteChatConfig, RubricScore,
};
use agentsight::metrics::{
    compute_metrics, filter_study, measure_latency, render_filter_study_text,
    render_metrics_text, root_cause_accuracy, scores_csv, EvalError,
};
use agentsight::service::{ServiceConfig, ServiceState};
use agentsight::sim::{
    generate_dataset, uniform_mix, DatasetManifest, DatasetSpec, SimConfig, SimError,
};

#[derive(Parser)]
#[command(name = "agentsight", version, about = "Failure detection for multi-agent runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/validation/test corpora with injected failures.
    Simulate(SimulateArgs),
    /// Train a detector and save its bundle.
    Train(TrainArgs),
    /// Score a corpus offline and write per-run verdicts.
    Detect(DetectArgs),
    /// Classify and root-cause detector alerts with a chat backend.
    Explain(ExplainArgs),
    /// Compute detection metrics from a verdict report and labels.
    Evaluate(EvaluateArgs),
    /// Measure per-run scoring latency of a bundle.
    Latency(LatencyArgs),
    /// Run the HTTP ingestion service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Desk,
    Full,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file with {"sim": SimConfig, "dataset": DatasetSpec} overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving train/validation/test JSONL and manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "desk")]
    preset: PresetArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Epi,
    Semantic,
    Combined,
}

impl From<KindArg> for DetectorKind {
    fn from(kind: KindArg) -> Self {
        match kind {
            KindArg::Epi => DetectorKind::Epi,
            KindArg::Semantic => DetectorKind::Semantic,
            KindArg::Combined => DetectorKind::Combined,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Benign training corpus (JSONL).
    #[arg(long)]
    train: PathBuf,
    /// Labeled validation corpus for threshold selection.
    #[arg(long)]
    val: PathBuf,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
    /// Hyperparameter preset; desk fits laptop budgets.
    #[arg(long, value_enum, default_value = "desk")]
    preset: PresetArg,
    /// Full DetectorConfig JSON replacing the preset.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Corpus to score (JSONL).
    #[arg(long = "in")]
    input: PathBuf,
    /// Verdict report path (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Override the bundle's calibrated threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Also export score,label rows for plotting.
    #[arg(long)]
    scores_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Mock,
    Oracle,
    Remote,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Corpus to score and explain (JSONL).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum)]
    backend: BackendArg,
    /// Explanation report path (JSON).
    #[arg(long)]
    out: PathBuf,
    /// RemoteChatConfig JSON; required for --backend remote.
    #[arg(long)]
    remote_config: Option<PathBuf>,
    /// Error rate in [0,1] for the imperfect mock.
    #[arg(long)]
    mock_error_rate: Option<f64>,
    /// Seed for the imperfect mock.
    #[arg(long, default_value_t = 0)]
    mock_seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Verdict report produced by detect.
    #[arg(long)]
    report: PathBuf,
    /// Labels: a manifest.json or a labeled corpus (JSONL).
    #[arg(long)]
    labels: PathBuf,
    /// Explanation report produced by explain; enables RA and the filter study.
    #[arg(long)]
    explained: Option<PathBuf>,
    /// Emit the before/after classifier-filter study (needs --explained).
    #[arg(long)]
    filter_study: bool,
    /// Render aligned text instead of JSON.
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct LatencyArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Corpus to time (JSONL).
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    /// Append-only alerts JSONL file.
    #[arg(long)]
    alerts: Option<PathBuf>,
    /// ServiceConfig JSON; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment variable holding the static bearer token.
    #[arg(long, default_value = "AGENTSIGHT_TOKEN")]
    token_env: String,
}

enum CliError {
    Usage(String),
    Data(String),
    Backend(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Backend(_) => "backend",
        }
    }

    fn detail(&self) -> &str {
        match self {
            CliError::Usage(d) | CliError::Data(d) | CliError::Backend(d) => d,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<DetectorError> for CliError {
    fn from(e: DetectorError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<agentsight::event::EventError> for CliError {
    fn from(e: agentsight::event::EventError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::InvalidSpec(d) => CliError::Usage(d),
            other => CliError::Backend(other.to_string()),
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            fail(&CliError::Usage(e.to_string()));
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Train(args) => train(args),
        Command::Detect(args) => detect(args),
        Command::Explain(args) => explain(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Latency(args) => latency(args),
        Command::Serve(args) => serve(args),
    };
    if let Err(e) = result {
        fail(&e);
    }
}

fn fail(error: &CliError) -> ! {
    eprintln!("{}", json!({ "code": error.name(), "detail": error.detail() }));
    std::process::exit(error.code());
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("cannot parse {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn load_runs(path: &Path) -> Result<Vec<RunLog>, CliError> {
    let result = read_corpus(path)?;
    if !result.issues.is_empty() {
        return Err(CliError::Data(format!(
            "corpus {} has {} issue(s); first: {}",
            path.display(),
            result.issues.len(),
            result.issues[0].problem
        )));
    }
    if result.runs.is_empty() {
        return Err(CliError::Data(format!("corpus {} contains no runs", path.display())));
    }
    Ok(result.runs)
}

#[derive(Default, Deserialize)]
struct SimulateFileConfig {
    #[serde(default)]
    sim: Option<SimConfig>,
    #[serde(default)]
    dataset: Option<DatasetSpec>,
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let file: SimulateFileConfig =
        args.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
    let sim = file.sim.unwrap_or_default();
    let spec = file.dataset.unwrap_or_else(|| match args.preset {
        PresetArg::Desk => DatasetSpec::desk(uniform_mix()),
        PresetArg::Full => DatasetSpec::full(uniform_mix()),
    });

    let dataset = generate_dataset(&sim, &spec)?;
    std::fs::create_dir_all(&args.out)?;
    agentsight::corpus::write_corpus(&dataset.train, &args.out.join("train.jsonl"))?;
    agentsight::corpus::write_corpus(&dataset.validation, &args.out.join("validation.jsonl"))?;
    agentsight::corpus::write_corpus(&dataset.test, &args.out.join("test.jsonl"))?;
    dataset.manifest.write(&args.out.join("manifest.json"))?;

    println!(
        "{}",
        json!({
            "out": args.out,
            "train_runs": dataset.train.len(),
            "validation_runs": dataset.validation.len(),
            "test_runs": dataset.test.len(),
        })
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<(), CliError> {
    let mut config = match args.config.as_deref() {
        Some(path) => read_json::<DetectorConfig>(path)?,
        None => match args.preset {
            PresetArg::Desk => DetectorConfig::desk(args.kind.into()),
            PresetArg::Full => DetectorConfig::defaults(args.kind.into()),
        },
    };
    config.kind = args.kind.into();

    let train_runs = load_runs(&args.train)?;
    let val_runs = load_runs(&args.val)?;
    let detector = train_detector(&config, &train_runs, &val_runs)?;
    std::fs::create_dir_all(&args.out)?;
    detector.save_bundle(&args.out)?;

    let final_losses: BTreeMap<&String, Option<&f64>> = detector
        .metadata
        .loss_curves
        .iter()
        .map(|(name, losses)| (name, losses.last()))
        .collect();
    println!(
        "{}",
        json!({
            "bundle": args.out,
            "kind": detector.kind(),
            "threshold": detector.threshold,
            "validation_f1": detector.metadata.validation.f1,
            "final_loss": final_losses,
        })
    );
    Ok(())
}

/// Verdict report written by `detect` and consumed by `evaluate`.
#[derive(Serialize, Deserialize)]
struct DetectReport {
    kind: DetectorKind,
    threshold: f64,
    runs: Vec<RunVerdict>,
}

fn detect(args: DetectArgs) -> Result<(), CliError> {
    let mut detector = TrainedDetector::load_bundle(&args.bundle)?;
    if let Some(threshold) = args.threshold {
        detector.set_threshold(threshold)?;
    }
    let runs = load_runs(&args.input)?;

    let mut verdicts = Vec::with_capacity(runs.len());
    for run in &runs {
        verdicts.push(detector.classify_run(run)?);
    }
    if let Some(csv_path) = &args.scores_csv {
        let scored: Vec<(f64, bool)> = verdicts
            .iter()
            .zip(&runs)
            .map(|(v, r)| (v.score, r.label.is_anomalous))
            .collect();
        std::fs::write(csv_path, scores_csv(&scored))?;
    }

    let anomalous = verdicts.iter().filter(|v| v.is_anomalous()).count();
    let report =
        DetectReport { kind: detector.kind(), threshold: detector.threshold, runs: verdicts };
    write_json(&args.out, &report)?;
    println!(
        "{}",
        json!({
            "report": args.out,
            "runs": report.runs.len(),
            "anomalous": anomalous,
            "threshold": report.threshold,
        })
    );
    Ok(())
}

/// One explained alert inside the report written by `explain`.
#[derive(Serialize, Deserialize)]
struct ExplainEntry {
    run_id: String,
    score: f64,
    predicted: VulnClass,
    root_cause_agent: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    rubric: Option<RubricScore>,
    analysis_text: String,
    explanation: String,
}

#[derive(Serialize, Deserialize)]
struct ExplainReport {
    backend: String,
    alerts: Vec<ExplainEntry>,
}

fn explain(args: ExplainArgs) -> Result<(), CliError> {
    let detector = TrainedDetector::load_bundle(&args.bundle)?;
    let runs = load_runs(&args.input)?;

    let (backend, backend_name): (Box<dyn ChatBackend>, &str) = match args.backend {
        BackendArg::Mock => {
            let mock = match args.mock_error_rate {
                Some(rate) => MockBackend::with_error_rate(rate, args.mock_seed)?,
                None => MockBackend::new(),
            };
            (Box::new(mock), "mock")
        }
        BackendArg::Oracle => (Box::new(OracleBackend::from_runs(&runs)), "oracle"),
        BackendArg::Remote => {
            let Some(path) = args.remote_config.as_deref() else {
                return Err(CliError::Usage(
                    "--backend remote requires --remote-config".into(),
                ));
            };
            let config: RemoteChatConfig = read_json(path)?;
            (Box::new(RemoteChatBackend::new(config)?), "remote")
        }
    };

    let mut alerts = Vec::new();
    for run in &runs {
        let verdict = detector.classify_run(run)?;
        if !verdict.is_anomalous() {
            continue;
        }
        let explanation = explain_run(run, backend.as_ref())?;
        let rubric = score_explanation(&explanation.combined_text(), run, &run.label);
        alerts.push(ExplainEntry {
            run_id: run.run_id.clone(),
            score: verdict.score,
            predicted: explanation.classification.predicted,
            root_cause_agent: explanation.rca.root_cause_agent,
            rubric: Some(rubric),
            analysis_text: explanation.classification.analysis_text,
            explanation: explanation.rca.explanation,
        });
    }

    let report = ExplainReport { backend: backend_name.into(), alerts };
    write_json(&args.out, &report)?;
    println!(
        "{}",
        json!({ "report": args.out, "alerts": report.alerts.len(), "backend": backend_name })
    );
    Ok(())
}

/// Labels keyed by run id, from a manifest or a labeled corpus.
fn load_labels(path: &Path) -> Result<BTreeMap<String, GroundTruth>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    if let Ok(manifest) = serde_json::from_str::<DatasetManifest>(&text) {
        return Ok(manifest.labels);
    }
    let runs = load_runs(path)?;
    Ok(runs.into_iter().map(|r| (r.run_id, r.label)).collect())
}

fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let report: DetectReport = read_json(&args.report)?;
    let labels = load_labels(&args.labels)?;
    let explained: Option<ExplainReport> =
        args.explained.as_deref().map(read_json).transpose()?;

    let mut predictions = Vec::with_capacity(report.runs.len());
    let mut truths = Vec::with_capacity(report.runs.len());
    for verdict in &report.runs {
        let label = labels.get(&verdict.run_id).ok_or_else(|| {
            CliError::Data(format!("no label for run {} in labels file", verdict.run_id))
        })?;
        predictions.push(verdict.is_anomalous());
        truths.push(label.is_anomalous);
    }

    if args.filter_study {
        let Some(explained) = &explained else {
            return Err(CliError::Usage("--filter-study requires --explained".into()));
        };
        let by_run: BTreeMap<&str, bool> = explained
            .alerts
            .iter()
            .map(|a| (a.run_id.as_str(), a.predicted != VulnClass::Benign))
            .collect();
        let classifier: Vec<Option<bool>> = report
            .runs
            .iter()
            .map(|v| by_run.get(v.run_id.as_str()).copied())
            .collect();
        let study = filter_study(&predictions, &classifier, &truths)?;
        if args.text {
            println!("{}", render_filter_study_text(&study));
        } else {
            println!("{}", serde_json::to_string_pretty(&study)?);
        }
        return Ok(());
    }

    let mut metrics = compute_metrics(&predictions, &truths)?;
    if let Some(explained) = &explained {
        let mut predicted_agents = Vec::new();
        let mut true_agents = Vec::new();
        for alert in &explained.alerts {
            let Some(label) = labels.get(&alert.run_id) else {
                continue;
            };
            if label.is_anomalous {
                predicted_agents.push(alert.root_cause_agent);
                true_agents.push(label.root_cause_agent.unwrap_or(0));
            }
        }
        if !predicted_agents.is_empty() {
            metrics.ra = Some(root_cause_accuracy(&predicted_agents, &true_agents)?);
        }
    }
    if args.text {
        println!("{}", render_metrics_text(&metrics));
    } else {
        println!("{}", serde_json::to_string_pretty(&metrics)?);
    }
    Ok(())
}

fn latency(args: LatencyArgs) -> Result<(), CliError> {
    let detector = TrainedDetector::load_bundle(&args.bundle)?;
    let runs = load_runs(&args.input)?;
    let mut report = measure_latency(&detector, &runs)?;
    // Per-run timings stay in the library result; the CLI prints the summary.
    report.per_run_seconds.clear();
    println!(
        "{}",
        json!({
            "kind": detector.kind(),
            "runs": runs.len(),
            "mean_seconds": report.mean_seconds,
            "std_dev_seconds": report.std_dev_seconds,
            "max_seconds": report.max_seconds,
        })
    );
    Ok(())
}

fn serve(args: ServeArgs) -> Result<(), CliError> {
    let detector = TrainedDetector::load_bundle(&args.bundle)?;
    let mut config: ServiceConfig =
        args.config.as_deref().map(read_json).transpose()?.unwrap_or_default();
    if args.alerts.is_some() {
        config.alerts_path = args.alerts;
    }
    if let Ok(token) = std::env::var(&args.token_env) {
        config.bearer_token = Some(token);
    }

    let state = Arc::new(ServiceState::new(Some(Arc::new(detector)), config));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.addr).await?;
        let addr = listener.local_addr()?;
        println!("{}", json!({ "listening": addr.to_string() }));
        agentsight::service::serve(listener, state).await
    })?;
    Ok(())
}

//! Command-line driver: five subcommands over file-based artifacts, so every
//! stage boundary is a JSON file a user can inspect or hand-edit before the
//! next stage runs.
//!
//! Exit codes: 0 success, 1 internal inconsistency, 2 parse/validation/config
//! error, 3 empty candidate set, 4 infeasible selection, 5 time limit.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use spade_core::{
    single_ffr, solve_baseline, solve_cov, solve_no_examples, solve_sub, ExampleRun, ExampleSet,
    Label, ResultMatrix, SelectionConfig, SelectionMode, SelectionResult, SelectionStatus,
    StopProbe, SubsumptionMatrix,
};

use crate::evaluate::build_result_matrix;
use crate::files::{self, SelectionFile};
use crate::gateway::{Gateway, HttpTransport, Mode};
use crate::generate::{generate_candidates, GenerateError, GenerationReport};
use crate::prompts::DEFAULT_GENERATION_TEMPERATURE;
use crate::report::{audited_metrics, provenance_summary, ModeMetrics, RunReport};
use crate::subsume::{build_subsumption_matrix, AssembleError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_EMPTY_CANDIDATES: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_TIME_LIMIT: i32 = 5;

#[derive(Parser)]
#[command(
    name = "spade",
    about = "Mine data-quality assertions from a prompt version history, \
             evaluate them on labeled runs, and select a minimal subset.",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Mine candidate assertions from the deltas of a prompt history.
    Generate(GenerateArgs),
    /// Run every candidate against labeled examples into a result matrix.
    Evaluate(EvaluateArgs),
    /// Build the assertion-implication matrix K with provenance.
    Subsume(SubsumeArgs),
    /// Pick the final assertion set by exact optimization.
    Select(SelectArgs),
    /// Run generate, evaluate, subsume, and select end to end from a config.
    Run(RunArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Prompt version history (JSON).
    #[arg(long)]
    pub history: PathBuf,
    /// Labeled example runs (JSON); the first good-labeled run seeds
    /// synthesis.
    #[arg(long)]
    pub examples: PathBuf,
    /// Where to write the candidate set.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Candidate set (JSON).
    #[arg(long)]
    pub candidates: PathBuf,
    /// Labeled example runs (JSON).
    #[arg(long)]
    pub examples: PathBuf,
    /// Where to write the result matrix.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SubsumeArgs {
    /// Candidate set (JSON).
    #[arg(long)]
    pub candidates: PathBuf,
    /// Result matrix (JSON).
    #[arg(long)]
    pub matrix: PathBuf,
    /// Labeled example runs (JSON) — labels drive the FFR skip filter and
    /// pair refutation.
    #[arg(long)]
    pub examples: PathBuf,
    /// FFR threshold for skipping candidates in the LLM pass.
    #[arg(long, default_value_t = 0.25)]
    pub tau: f64,
    /// Where to write K.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CliMode {
    Cov,
    Sub,
    Baseline,
    NoExamples,
}

impl From<CliMode> for SelectionMode {
    fn from(mode: CliMode) -> Self {
        match mode {
            CliMode::Cov => SelectionMode::Cov,
            CliMode::Sub => SelectionMode::Sub,
            CliMode::Baseline => SelectionMode::Baseline,
            CliMode::NoExamples => SelectionMode::NoExamples,
        }
    }
}

#[derive(Args)]
pub struct SelectArgs {
    /// Result matrix (JSON). Required except in no-examples mode.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Labeled example runs (JSON). Required except in no-examples mode.
    #[arg(long)]
    pub examples: Option<PathBuf>,
    /// Subsumption matrix K (JSON). Required in sub and no-examples modes.
    #[arg(long)]
    pub subsumption: Option<PathBuf>,
    /// Minimum fraction of bad examples the selection must flag.
    #[arg(long, default_value_t = 0.6)]
    pub alpha: f64,
    /// Maximum fraction of good examples the selection may flag.
    #[arg(long, default_value_t = 0.25)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = CliMode::Sub)]
    pub mode: CliMode,
    /// Search budget in seconds.
    #[arg(long, default_value_t = 60)]
    pub time_limit: u64,
    /// Where to write the selection.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RunArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Where to write the run report (defaults to <out_dir>/report.json).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Wall-clock cancellation for the exact solvers.
pub struct WallClockProbe {
    deadline: Instant,
}

impl WallClockProbe {
    pub fn with_budget(budget: Duration) -> Self {
        WallClockProbe {
            deadline: Instant::now() + budget,
        }
    }
}

impl StopProbe for WallClockProbe {
    fn should_stop(&self) -> bool {
        Instant::now() >= self.deadline
    }
}

/// Parses the process arguments and runs the chosen command, returning the
/// process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    dispatch(cli.command)
}

pub fn dispatch(command: Command) -> i32 {
    match command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
        Command::Subsume(args) => cmd_subsume(&args),
        Command::Select(args) => cmd_select(&args),
        Command::Run(args) => cmd_run(&args),
    }
}

macro_rules! try_or_invalid {
    ($expr:expr) => {
        match $expr {
            Ok(value) => value,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_INVALID;
            }
        }
    };
}

fn synthesis_sample(examples: &ExampleSet) -> Option<&ExampleRun> {
    examples
        .examples()
        .iter()
        .find(|e| e.label.is_good())
        .or_else(|| examples.examples().first())
}

fn print_generation_warnings(report: &GenerationReport) {
    for delta in &report.deltas {
        if let Some(reason) = &delta.skipped {
            eprintln!("warning: delta ->v{} skipped: {reason}", delta.to_version);
        }
        for note in &delta.invalid_specs {
            eprintln!(
                "warning: delta ->v{} produced an invalid spec: {note}",
                delta.to_version
            );
        }
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> i32 {
    let history = try_or_invalid!(files::load_history(&args.history));
    let examples = try_or_invalid!(files::load_examples(&args.examples));
    let Some(sample) = synthesis_sample(&examples) else {
        eprintln!("error: {}: example set is empty", args.examples.display());
        return EXIT_INVALID;
    };
    let gateway = try_or_invalid!(Gateway::from_env());
    match generate_candidates(&history, sample, &gateway, DEFAULT_GENERATION_TEMPERATURE) {
        Ok((set, report)) => {
            print_generation_warnings(&report);
            try_or_invalid!(files::save_candidates(&args.out, &set));
            println!("{} candidates written to {}", set.candidates().len(), args.out.display());
            for (category, count) in set.category_tally() {
                println!("  {:24}{count}", category.as_str());
            }
            EXIT_OK
        }
        Err(GenerateError::EmptyCandidateSet(report)) => {
            print_generation_warnings(&report);
            eprintln!("error: {}", GenerateError::EmptyCandidateSet(report));
            EXIT_EMPTY_CANDIDATES
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> i32 {
    let candidates = try_or_invalid!(files::load_candidates(&args.candidates));
    let examples = try_or_invalid!(files::load_examples(&args.examples));
    if examples.is_empty() {
        eprintln!("error: {}: example set is empty", args.examples.display());
        return EXIT_INVALID;
    }
    let gateway = try_or_invalid!(Gateway::from_env());
    let (matrix, issues) = build_result_matrix(&candidates, &examples, &gateway);
    try_or_invalid!(files::save_matrix(&args.out, &matrix));
    for issue in &issues {
        eprintln!(
            "warning: {} on {}: {}",
            issue.assertion_id, issue.example_id, issue.detail
        );
    }
    let labels = examples.labels();
    println!(
        "evaluated {} assertions on {} examples -> {}",
        matrix.n_assertions(),
        matrix.n_examples(),
        args.out.display()
    );
    println!("per-assertion false-failure rates:");
    for (col, id) in matrix.assertion_ids().iter().enumerate() {
        println!("  {:32}{:.4}", id, single_ffr(&matrix, &labels, col));
    }
    EXIT_OK
}

pub fn cmd_subsume(args: &SubsumeArgs) -> i32 {
    let candidates = try_or_invalid!(files::load_candidates(&args.candidates));
    let matrix = try_or_invalid!(files::load_matrix(&args.matrix));
    let examples = try_or_invalid!(files::load_examples(&args.examples));
    let labels = examples.labels();
    if labels.len() != matrix.n_examples() {
        eprintln!(
            "error: {} examples but the matrix has {} rows",
            labels.len(),
            matrix.n_examples()
        );
        return EXIT_INVALID;
    }
    if !(0.0..=1.0).contains(&args.tau) {
        eprintln!("error: tau must lie in [0, 1], got {}", args.tau);
        return EXIT_INVALID;
    }
    let gateway = try_or_invalid!(Gateway::from_env());
    let (k, report) = match build_subsumption_matrix(
        &candidates,
        &matrix,
        &labels,
        args.tau,
        Some(&gateway),
    ) {
        Ok(pair) => pair,
        Err(AssembleError::Misaligned) => {
            eprintln!("error: {}", AssembleError::Misaligned);
            return EXIT_INVALID;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    try_or_invalid!(files::save_subsumption(&args.out, &k));
    if let Some(reason) = &report.degraded {
        eprintln!("warning: {reason}");
    }
    for alarm in &report.alarms {
        eprintln!("warning: {alarm}");
    }
    for refuted in &report.llm_refuted {
        eprintln!(
            "note: refuted {} => {} (witness {})",
            refuted.subsumer, refuted.subsumed, refuted.witness_example
        );
    }
    println!("K written to {}", args.out.display());
    for (kind, count) in provenance_summary(&k) {
        println!("  {kind:12}{count}");
    }
    EXIT_OK
}

struct SelectInputs {
    matrix: Option<ResultMatrix>,
    labels: Vec<Label>,
    k: Option<SubsumptionMatrix>,
}

fn load_select_inputs(args: &SelectArgs, mode: SelectionMode) -> Result<SelectInputs, String> {
    let needs_matrix = mode != SelectionMode::NoExamples;
    let needs_k = matches!(mode, SelectionMode::Sub | SelectionMode::NoExamples);

    let matrix = match (&args.matrix, needs_matrix) {
        (Some(path), _) => Some(files::load_matrix(path).map_err(|e| e.to_string())?),
        (None, true) => return Err("--matrix is required in this mode".into()),
        (None, false) => None,
    };
    let labels = match (&args.examples, needs_matrix) {
        (Some(path), _) => files::load_examples(path)
            .map_err(|e| e.to_string())?
            .labels(),
        (None, true) => return Err("--examples is required in this mode".into()),
        (None, false) => Vec::new(),
    };
    let k = match (&args.subsumption, needs_k) {
        (Some(path), _) => Some(files::load_subsumption(path).map_err(|e| e.to_string())?),
        (None, true) => return Err("--subsumption is required in this mode".into()),
        (None, false) => None,
    };
    Ok(SelectInputs { matrix, labels, k })
}

/// Prints the four headline metrics for a finished selection.
fn print_metrics(metrics: &ModeMetrics) {
    println!(
        "fraction selected           {:.4}",
        metrics.fraction_selected
    );
    println!(
        "fraction excluded, unsubsumed {:.4}",
        metrics.fraction_excluded_not_subsumed
    );
    println!("false-failure rate          {:.4}", metrics.ffr);
    println!("coverage                    {:.4}", metrics.coverage);
}

fn finish_selection(selection: &SelectionFile, out: &Path, metrics: &ModeMetrics) -> i32 {
    if let Err(e) = files::save_selection(out, selection) {
        eprintln!("error: {e}");
        return EXIT_INVALID;
    }
    match selection.result.status {
        SelectionStatus::Optimal => {
            println!(
                "selected {:?} (objective {}) -> {}",
                selection.result.selected,
                selection.result.objective,
                out.display()
            );
            print_metrics(metrics);
            EXIT_OK
        }
        SelectionStatus::Infeasible => {
            let best = selection
                .result
                .diagnostics
                .max_coverage_at_tau
                .unwrap_or(0.0);
            eprintln!(
                "infeasible: no subset reaches coverage {} at tau {}; \
                 max coverage at this tau is {best}",
                selection.alpha, selection.tau
            );
            eprintln!(
                "hint: binary-search alpha downward from {best} to find the \
                 largest feasible threshold"
            );
            EXIT_INFEASIBLE
        }
        SelectionStatus::TimeLimit => {
            eprintln!("time limit hit before the search finished");
            EXIT_TIME_LIMIT
        }
    }
}

fn solve(
    mode: SelectionMode,
    inputs: &SelectInputs,
    alpha: f64,
    tau: f64,
    time_limit: u64,
) -> Result<SelectionResult, String> {
    let probe = WallClockProbe::with_budget(Duration::from_secs(time_limit));
    let result = match mode {
        SelectionMode::Cov => {
            let matrix = inputs.matrix.as_ref().expect("checked by loader");
            solve_cov(matrix, &inputs.labels, alpha, tau, &probe)
        }
        SelectionMode::Sub => {
            let matrix = inputs.matrix.as_ref().expect("checked by loader");
            let k = inputs.k.as_ref().expect("checked by loader");
            solve_sub(matrix, &inputs.labels, k, alpha, tau, &probe)
        }
        SelectionMode::Baseline => {
            let matrix = inputs.matrix.as_ref().expect("checked by loader");
            solve_baseline(matrix, &inputs.labels, tau)
        }
        SelectionMode::NoExamples => {
            let k = inputs.k.as_ref().expect("checked by loader");
            Ok(solve_no_examples(k))
        }
    };
    result.map_err(|e| e.to_string())
}

pub fn cmd_select(args: &SelectArgs) -> i32 {
    let mode: SelectionMode = args.mode.into();
    let config = SelectionConfig {
        alpha: args.alpha,
        tau: args.tau,
        mode,
        time_limit_secs: args.time_limit,
    };
    try_or_invalid!(config.validated().map_err(|e| e.to_string()));
    let inputs = try_or_invalid!(load_select_inputs(args, mode));
    let result = try_or_invalid!(solve(mode, &inputs, args.alpha, args.tau, args.time_limit));
    let selection = SelectionFile {
        mode,
        alpha: args.alpha,
        tau: args.tau,
        result,
    };
    let metrics = try_or_invalid!(audited_metrics(
        &selection,
        inputs.matrix.as_ref().map(|m| (m, inputs.labels.as_slice())),
        inputs.k.as_ref(),
    ));
    finish_selection(&selection, &args.out, &metrics)
}

// ------------------------------------------------------------------- run

fn default_alpha() -> f64 {
    0.6
}
fn default_tau() -> f64 {
    0.25
}
fn default_mode() -> String {
    "sub".into()
}
fn default_time_limit() -> u64 {
    60
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewaySection {
    pub mode: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
}

/// Configuration for an end-to-end run. Artifact paths default into
/// `out_dir`; set them explicitly to relocate single stages.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub history: PathBuf,
    pub examples: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// One of cov, sub, baseline, no-examples.
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_time_limit")]
    pub time_limit: u64,
    #[serde(default)]
    pub gateway: GatewaySection,
    pub candidates: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub subsumption: Option<PathBuf>,
    pub selection: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

fn parse_mode_token(token: &str) -> Result<SelectionMode, String> {
    match token {
        "cov" => Ok(SelectionMode::Cov),
        "sub" => Ok(SelectionMode::Sub),
        "baseline" => Ok(SelectionMode::Baseline),
        "no-examples" => Ok(SelectionMode::NoExamples),
        other => Err(format!(
            "unknown mode {other:?} (expected cov, sub, baseline, or no-examples)"
        )),
    }
}

fn gateway_from(section: &GatewaySection) -> Result<Gateway, String> {
    let mut gateway = Gateway::from_env().map_err(|e| e.to_string())?;
    if let Some(text) = &section.mode {
        let mode = Mode::parse(text).map_err(|e| e.to_string())?;
        let cache_dir = section.cache_dir.clone().unwrap_or_else(|| {
            std::env::var("SPADE_CACHE_DIR")
                .unwrap_or_else(|_| "spade-cache".into())
                .into()
        });
        gateway = rebuild_gateway(mode, cache_dir, &gateway_env_or(section));
    } else if let Some(cache_dir) = &section.cache_dir {
        gateway = rebuild_gateway(gateway.mode(), cache_dir.clone(), &gateway_env_or(section));
    } else {
        if let Some(endpoint) = &section.endpoint {
            gateway = gateway.with_endpoint(endpoint.clone());
        }
        if let Some(model) = &section.model {
            gateway = gateway.with_model(model.clone());
        }
        if let Some(key) = &section.api_key {
            gateway = gateway.with_api_key(key.clone());
        }
    }
    Ok(gateway)
}

struct GatewayOverrides {
    endpoint: Option<String>,
    model: Option<String>,
    api_key: Option<String>,
}

fn gateway_env_or(section: &GatewaySection) -> GatewayOverrides {
    GatewayOverrides {
        endpoint: section
            .endpoint
            .clone()
            .or_else(|| std::env::var("SPADE_LLM_ENDPOINT").ok()),
        model: section
            .model
            .clone()
            .or_else(|| std::env::var("SPADE_LLM_MODEL").ok()),
        api_key: section
            .api_key
            .clone()
            .or_else(|| std::env::var("SPADE_LLM_API_KEY").ok()),
    }
}

fn rebuild_gateway(mode: Mode, cache_dir: PathBuf, overrides: &GatewayOverrides) -> Gateway {
    let mut gateway = Gateway::new(mode, cache_dir, Box::new(HttpTransport));
    if let Some(endpoint) = &overrides.endpoint {
        gateway = gateway.with_endpoint(endpoint.clone());
    }
    if let Some(model) = &overrides.model {
        gateway = gateway.with_model(model.clone());
    }
    if let Some(key) = &overrides.api_key {
        gateway = gateway.with_api_key(key.clone());
    }
    gateway
}

struct RunPaths {
    candidates: PathBuf,
    matrix: PathBuf,
    subsumption: PathBuf,
    selection: PathBuf,
    report: PathBuf,
}

impl RunPaths {
    fn of(config: &RunConfig, report_override: Option<&Path>) -> Self {
        let in_out = |name: &str| config.out_dir.join(name);
        RunPaths {
            candidates: config
                .candidates
                .clone()
                .unwrap_or_else(|| in_out("candidates.json")),
            matrix: config.matrix.clone().unwrap_or_else(|| in_out("matrix.json")),
            subsumption: config
                .subsumption
                .clone()
                .unwrap_or_else(|| in_out("subsumption.json")),
            selection: config
                .selection
                .clone()
                .unwrap_or_else(|| in_out("selection.json")),
            report: report_override
                .map(Path::to_path_buf)
                .or_else(|| config.report.clone())
                .unwrap_or_else(|| in_out("report.json")),
        }
    }
}

pub fn cmd_run(args: &RunArgs) -> i32 {
    let config: RunConfig = try_or_invalid!(files::read_json(&args.config));
    let mode = try_or_invalid!(parse_mode_token(&config.mode));
    let selection_config = SelectionConfig {
        alpha: config.alpha,
        tau: config.tau,
        mode,
        time_limit_secs: config.time_limit,
    };
    // Thresholds are checked before anything runs: a bad alpha must not
    // cost three stages of LLM spend.
    try_or_invalid!(selection_config.validated().map_err(|e| e.to_string()));
    for (label, path) in [("history", &config.history), ("examples", &config.examples)] {
        if !path.exists() {
            eprintln!("error: {label} file {} does not exist", path.display());
            return EXIT_INVALID;
        }
    }
    let paths = RunPaths::of(&config, args.report.as_deref());
    let gateway = try_or_invalid!(gateway_from(&config.gateway));

    let history = try_or_invalid!(files::load_history(&config.history));
    let examples = try_or_invalid!(files::load_examples(&config.examples));
    if examples.is_empty() {
        eprintln!("error: {}: example set is empty", config.examples.display());
        return EXIT_INVALID;
    }
    let labels = examples.labels();
    let mut report = RunReport::default();

    // Stage 1: generate (resume: reuse an existing candidate file).
    let stage = Instant::now();
    let resumed = paths.candidates.exists();
    let candidates = if resumed {
        try_or_invalid!(files::load_candidates(&paths.candidates))
    } else {
        let sample = synthesis_sample(&examples).expect("checked non-empty above");
        match generate_candidates(&history, sample, &gateway, DEFAULT_GENERATION_TEMPERATURE) {
            Ok((set, generation)) => {
                print_generation_warnings(&generation);
                report.generation = Some(generation);
                try_or_invalid!(files::save_candidates(&paths.candidates, &set));
                set
            }
            Err(GenerateError::EmptyCandidateSet(generation)) => {
                print_generation_warnings(&generation);
                eprintln!("error: {}", GenerateError::EmptyCandidateSet(generation));
                return EXIT_EMPTY_CANDIDATES;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_INVALID;
            }
        }
    };
    report.record_stage("generate", stage.elapsed().as_secs_f64(), resumed);
    println!("generate: {} candidates", candidates.candidates().len());

    // Stage 2: evaluate.
    let stage = Instant::now();
    let resumed = paths.matrix.exists();
    let matrix = if resumed {
        try_or_invalid!(files::load_matrix(&paths.matrix))
    } else {
        let (matrix, issues) = build_result_matrix(&candidates, &examples, &gateway);
        report.evaluation_issues = issues;
        try_or_invalid!(files::save_matrix(&paths.matrix, &matrix));
        matrix
    };
    report.record_stage("evaluate", stage.elapsed().as_secs_f64(), resumed);
    println!(
        "evaluate: {} x {} result matrix ({} issues)",
        matrix.n_examples(),
        matrix.n_assertions(),
        report.evaluation_issues.len()
    );

    // Stage 3: subsume.
    let stage = Instant::now();
    let resumed = paths.subsumption.exists();
    let k = if resumed {
        try_or_invalid!(files::load_subsumption(&paths.subsumption))
    } else {
        let (k, subsume_report) = match build_subsumption_matrix(
            &candidates,
            &matrix,
            &labels,
            config.tau,
            Some(&gateway),
        ) {
            Ok(pair) => pair,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_INVALID;
            }
        };
        if let Some(reason) = &subsume_report.degraded {
            eprintln!("warning: {reason}");
        }
        for alarm in &subsume_report.alarms {
            eprintln!("warning: {alarm}");
        }
        report.subsumption = Some(subsume_report);
        try_or_invalid!(files::save_subsumption(&paths.subsumption, &k));
        k
    };
    report.provenance_summary = provenance_summary(&k);
    report.record_stage("subsume", stage.elapsed().as_secs_f64(), resumed);
    println!(
        "subsume: {} off-diagonal implications",
        report.provenance_summary.values().sum::<usize>()
    );

    // Stage 4: select.
    let stage = Instant::now();
    let resumed = paths.selection.exists();
    if !resumed {
        let inputs = SelectInputs {
            matrix: Some(matrix.clone()),
            labels: labels.clone(),
            k: Some(k.clone()),
        };
        let result = try_or_invalid!(solve(
            mode,
            &inputs,
            config.alpha,
            config.tau,
            config.time_limit
        ));
        let selection = SelectionFile {
            mode,
            alpha: config.alpha,
            tau: config.tau,
            result,
        };
        try_or_invalid!(files::save_selection(&paths.selection, &selection));
    }
    report.record_stage("select", stage.elapsed().as_secs_f64(), resumed);

    // Self-consistency: recompute every reported number from the files on
    // disk, not from in-memory state.
    let matrix_on_disk = try_or_invalid!(files::load_matrix(&paths.matrix));
    let k_on_disk = try_or_invalid!(files::load_subsumption(&paths.subsumption));
    let selection_on_disk = try_or_invalid!(files::load_selection(&paths.selection));
    let metrics = match audited_metrics(
        &selection_on_disk,
        Some((&matrix_on_disk, labels.as_slice())),
        Some(&k_on_disk),
    ) {
        Ok(metrics) => metrics,
        Err(e) => {
            eprintln!("error: report self-consistency check failed: {e}");
            return EXIT_INTERNAL;
        }
    };
    report.metrics.push(metrics.clone());
    try_or_invalid!(files::write_json(&paths.report, &report));

    match selection_on_disk.result.status {
        SelectionStatus::Optimal => {
            println!(
                "select: {:?} (objective {})",
                selection_on_disk.result.selected, selection_on_disk.result.objective
            );
            print_metrics(&metrics);
            println!("report written to {}", paths.report.display());
            EXIT_OK
        }
        SelectionStatus::Infeasible => {
            let best = selection_on_disk
                .result
                .diagnostics
                .max_coverage_at_tau
                .unwrap_or(0.0);
            eprintln!(
                "infeasible: no subset reaches coverage {} at tau {}; \
                 max coverage at this tau is {best}",
                config.alpha, config.tau
            );
            eprintln!(
                "hint: binary-search alpha downward from {best} to find the \
                 largest feasible threshold"
            );
            EXIT_INFEASIBLE
        }
        SelectionStatus::TimeLimit => {
            eprintln!("time limit hit before the search finished");
            EXIT_TIME_LIMIT
        }
    }
}

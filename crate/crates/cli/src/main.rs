//! Command-line pipeline for recovering latent daily stressor frequency.
//!
//! Six subcommands cover the workflow: `budget` solves the prompt-budget
//! identity, `synth` writes a synthetic rated-event cohort, `simulate`
//! replays prompt delivery over an event table, `fit` and `report` estimate
//! saturation curves, and `pipeline` chains the stages end to end.
//!
//! Every run emits exactly one manifest recording the resolved
//! configuration; wall-clock duration lives only there, so rerunning a
//! command with the same inputs reproduces every data artifact byte for
//! byte. No environment variables are consulted.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::exit;
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use stressim_core::budget::{self, BudgetError, BudgetField, BudgetInputs};
use stressim_core::{
    eligible_cohort, filter_window, fit_all_categories, generate, ingest_csv, ingest_json,
    plot_rows, points_to_rows, read_observed, read_points, series_from_rows, simulate,
    write_events_csv, write_events_json, write_plot, write_points, write_report, CategoryReport,
    EventsError, FatigueModel, FitError, FormatsError, PointRow, RatedEvent, SamplingPolicy,
    SimulationConfig, SimulationError, SynthError, SynthSpec, TableFormat, DEFAULT_SEED,
    DEFAULT_TIE_GUARD, DEFAULT_WINDOW,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

const EXIT_USAGE: i32 = 2;
const EXIT_IO: i32 = 3;
const EXIT_SCHEMA: i32 = 4;
const EXIT_BUDGET: i32 = 5;
const EXIT_SIMULATION: i32 = 6;
const EXIT_FIT: i32 = 7;
const EXIT_SYNTH: i32 = 8;

const EXIT_HELP: &str = "Exit codes:
  0  success
  2  usage error: unknown flag, bad value, or wrong flag combination
  3  I/O failure reading or writing a file
  4  schema violation in an input table or spec file
  5  infeasible or degenerate prompt budget
  6  simulation rejected its configuration or cohort
  7  curve fit rejected its input
  8  invalid synthetic cohort spec";

#[derive(Parser)]
#[command(
    name = "stressim",
    version,
    about = "Recover latent daily stressor frequency from sparse prompt/response data",
    after_help = EXIT_HELP
)]
struct Cli {
    /// Cap rayon worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the prompt-budget identity for the one omitted field.
    Budget(BudgetCmd),
    /// Replay prompt delivery over a rated-event table, one point per k.
    Simulate(SimulateCmd),
    /// Fit saturation curves to a points table.
    Fit(FitCmd),
    /// Generate a synthetic rated-event cohort.
    Synth(SynthCmd),
    /// Fit a points table and attach observed weekly extrapolations.
    Report(ReportCmd),
    /// Chain synth/ingest, simulate, fit, and report in one run.
    Pipeline(PipelineCmd),
}

/// Pass exactly four; the fifth is solved from rho*eta*omega = k/alpha.
#[derive(Args)]
struct BudgetCmd {
    /// Fraction of candidate events prompted, in (0, 1].
    #[arg(long)]
    rho: Option<f64>,
    /// Prompts deliverable per waking hour.
    #[arg(long)]
    eta: Option<f64>,
    /// Waking hours per day.
    #[arg(long)]
    omega: Option<f64>,
    /// Probability a delivered prompt is answered, in (0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Target answered prompts per day.
    #[arg(long)]
    k: Option<f64>,
}

/// Simulation knobs shared by `simulate` and `pipeline`.
#[derive(Args)]
struct SimFlags {
    /// Synthetic days per participant.
    #[arg(long, default_value_t = 1000)]
    days: usize,
    /// Response frequencies to sweep, comma separated (default: every
    /// feasible integer under the budget).
    #[arg(long, value_delimiter = ',')]
    k_values: Option<Vec<f64>>,
    /// Waking hours per day.
    #[arg(long, default_value_t = 12.0)]
    omega: f64,
    /// Prompts deliverable per waking hour.
    #[arg(long, default_value_t = 2.5)]
    eta: f64,
    /// Probability a delivered prompt is answered.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Master seed; synthesis and every simulation cell derive from it.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Daily selection rule: debiased or moods-baseline.
    #[arg(long, default_value_t = SamplingPolicy::Debiased)]
    policy: SamplingPolicy,
    /// Delivery-threshold tie guard in percentile points.
    #[arg(long, default_value_t = DEFAULT_TIE_GUARD)]
    tie_guard: f64,
    /// Engagement-trend intercept of the fatigue model.
    #[arg(long, default_value_t = 0.353)]
    fatigue_intercept: f64,
    /// Engagement change per unit response frequency.
    #[arg(long, default_value_t = -0.007, allow_hyphen_values = true)]
    fatigue_slope: f64,
    /// Response frequency at which the fatigue scale is exactly 1.
    #[arg(long, default_value_t = 3.89)]
    fatigue_k_ref: f64,
    /// Keep events at or after this minute of day.
    #[arg(long, default_value_t = DEFAULT_WINDOW.0)]
    window_start: f64,
    /// Drop events at or after this minute of day.
    #[arg(long, default_value_t = DEFAULT_WINDOW.1)]
    window_end: f64,
}

impl SimFlags {
    fn config(&self) -> SimulationConfig {
        let k_values = self.k_values.clone().unwrap_or_else(|| {
            // Default sweep: every integer frequency the budget can feed.
            let cap = (self.alpha * self.eta * self.omega).floor().max(1.0) as u64;
            (1..=cap).map(|k| k as f64).collect()
        });
        SimulationConfig {
            days_per_participant: self.days,
            events_per_day: (self.eta * self.omega).round() as usize,
            k_values,
            omega: self.omega,
            eta: self.eta,
            alpha: self.alpha,
            seed: self.seed,
            policy: self.policy,
            fatigue: FatigueModel {
                intercept: self.fatigue_intercept,
                slope: self.fatigue_slope,
                k_ref: self.fatigue_k_ref,
            },
            tie_guard: self.tie_guard,
        }
    }

    fn window(&self) -> (f64, f64) {
        (self.window_start, self.window_end)
    }
}

#[derive(Args)]
struct SimulateCmd {
    /// Rated-event table (.json reads the structured variant).
    #[arg(long)]
    input: PathBuf,
    /// Points table to write.
    #[arg(long)]
    out: PathBuf,
    /// Output encoding.
    #[arg(long, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    #[command(flatten)]
    sim: SimFlags,
}

#[derive(Args)]
struct FitCmd {
    /// Points table from `simulate` (.json reads the structured variant).
    #[arg(long)]
    input: PathBuf,
    /// Report to write; a sibling with the swapped extension carries the
    /// other encoding, so both delimited and structured forms exist.
    #[arg(long)]
    out: PathBuf,
    /// Encoding for --out itself.
    #[arg(long, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    /// Also write (k, y_model, y_simulated) rows to this path.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args)]
struct ReportCmd {
    /// Points table from `simulate`.
    #[arg(long)]
    input: PathBuf,
    /// Observed daily rates table (category, observed_per_day).
    #[arg(long)]
    observed: Option<PathBuf>,
    /// Average daily sensor-wear hours behind the observed rates.
    #[arg(long, default_value_t = 7.2)]
    wear_hours: f64,
    /// Report to write; a swapped-extension sibling carries the other
    /// encoding.
    #[arg(long)]
    out: PathBuf,
    /// Encoding for --out itself.
    #[arg(long, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    /// Also write (k, y_model, y_simulated) rows to this path.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args)]
struct SynthCmd {
    /// Structured spec file; omitted fields take their defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Override the spec seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the spec participant count.
    #[arg(long)]
    participants: Option<usize>,
    /// Override the spec events per participant.
    #[arg(long)]
    events_per_participant: Option<usize>,
    /// Rated-event table to write.
    #[arg(long)]
    out: PathBuf,
    /// Output encoding.
    #[arg(long, default_value_t = TableFormat::Csv)]
    format: TableFormat,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["synth_default", "input", "spec"])))]
struct PipelineCmd {
    /// Synthesize the default cohort.
    #[arg(long)]
    synth_default: bool,
    /// Ingest an existing rated-event table instead of synthesizing.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Synthesize from a custom spec file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Directory receiving events/points/report/plot plus the manifest.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Observed daily rates to attach to the report.
    #[arg(long)]
    observed: Option<PathBuf>,
    /// Average daily sensor-wear hours behind the observed rates.
    #[arg(long, default_value_t = 7.2)]
    wear_hours: f64,
    /// Encoding for every table written.
    #[arg(long, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    #[command(flatten)]
    sim: SimFlags,
}

/// One error class per exit code; `message` stays single-line on stderr.
struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, message: message.into() }
    }

    fn schema(message: impl Into<String>) -> Self {
        CliError { code: EXIT_SCHEMA, message: message.into() }
    }
}

fn class_name(code: i32) -> &'static str {
    match code {
        EXIT_USAGE => "usage",
        EXIT_IO => "io",
        EXIT_SCHEMA => "schema",
        EXIT_BUDGET => "budget",
        EXIT_SIMULATION => "simulation",
        EXIT_FIT => "fit",
        EXIT_SYNTH => "synth",
        _ => "error",
    }
}

impl From<BudgetError> for CliError {
    fn from(err: BudgetError) -> Self {
        // Leaving the wrong number of fields unknown is a flag mistake, not
        // an infeasible budget.
        let code = match err {
            BudgetError::WrongUnknownCount { .. } => EXIT_USAGE,
            _ => EXIT_BUDGET,
        };
        CliError { code, message: err.to_string() }
    }
}

impl From<EventsError> for CliError {
    fn from(err: EventsError) -> Self {
        let code = match err {
            EventsError::Io(_) => EXIT_IO,
            EventsError::InvalidWindow { .. } => EXIT_USAGE,
            _ => EXIT_SCHEMA,
        };
        CliError { code, message: err.to_string() }
    }
}

impl From<FormatsError> for CliError {
    fn from(err: FormatsError) -> Self {
        let code = match err {
            FormatsError::Io(_) => EXIT_IO,
            _ => EXIT_SCHEMA,
        };
        CliError { code, message: err.to_string() }
    }
}

impl From<SimulationError> for CliError {
    fn from(err: SimulationError) -> Self {
        CliError { code: EXIT_SIMULATION, message: err.to_string() }
    }
}

impl From<FitError> for CliError {
    fn from(err: FitError) -> Self {
        CliError { code: EXIT_FIT, message: err.to_string() }
    }
}

impl From<SynthError> for CliError {
    fn from(err: SynthError) -> Self {
        CliError { code: EXIT_SYNTH, message: err.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::io(err.to_string())
    }
}

/// Provenance record; the only artifact carrying wall-clock time.
#[derive(Serialize)]
struct RunManifest {
    subcommand: &'static str,
    toolkit_version: &'static str,
    seed: Option<u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    config: serde_json::Value,
    duration_seconds: f64,
}

impl RunManifest {
    fn new(subcommand: &'static str, seed: Option<u64>, config: serde_json::Value) -> Self {
        RunManifest {
            subcommand,
            toolkit_version: VERSION,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            config,
            duration_seconds: 0.0,
        }
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let mut writer = create(path)?;
    serde_json::to_writer_pretty(&mut writer, manifest)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Paths ending in .json hold the structured variant; anything else is
/// treated as delimited.
fn format_of(path: &Path) -> TableFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => TableFormat::Json,
        _ => TableFormat::Csv,
    }
}

fn load_events(path: &Path, window: (f64, f64)) -> Result<Vec<RatedEvent>, CliError> {
    let reader = open(path)?;
    let outcome = match format_of(path) {
        TableFormat::Json => ingest_json(reader)?,
        TableFormat::Csv => ingest_csv(reader)?,
    };
    let events = outcome.require_clean()?;
    Ok(filter_window(&events, window.0, window.1)?)
}

fn write_events(path: &Path, events: &[RatedEvent], format: TableFormat) -> Result<(), CliError> {
    match format {
        TableFormat::Csv => write_events_csv(create(path)?, events)?,
        TableFormat::Json => write_events_json(create(path)?, events)?,
    }
    Ok(())
}

fn run_budget(cmd: &BudgetCmd, started: Instant) -> Result<(), CliError> {
    let inputs = BudgetInputs {
        rho: cmd.rho,
        eta: cmd.eta,
        omega: cmd.omega,
        k: cmd.k,
        alpha: cmd.alpha,
    };
    let known =
        [cmd.rho, cmd.eta, cmd.omega, cmd.alpha, cmd.k].iter().filter(|v| v.is_some()).count();
    if known != 4 {
        return Err(CliError::usage(format!(
            "budget needs exactly four of --rho --eta --omega --alpha --k, got {known}"
        )));
    }
    let unknown = if cmd.rho.is_none() {
        BudgetField::Rho
    } else if cmd.eta.is_none() {
        BudgetField::Eta
    } else if cmd.omega.is_none() {
        BudgetField::Omega
    } else if cmd.alpha.is_none() {
        BudgetField::Alpha
    } else {
        BudgetField::K
    };
    let solved = budget::solve(&inputs)?;
    let validation = budget::validate(&solved);
    let value = match unknown {
        BudgetField::Rho => solved.rho,
        BudgetField::Eta => solved.eta,
        BudgetField::Omega => solved.omega,
        BudgetField::Alpha => solved.alpha,
        BudgetField::K => solved.k,
    };
    println!("{} = {}", unknown.name(), value);
    println!(
        "rho * eta * omega = {} delivered/day; k / alpha = {} delivered/day; {}",
        solved.rho * solved.eta * solved.omega,
        solved.k / solved.alpha,
        validation,
    );
    // No file outputs, so the manifest rides in the machine-readable line.
    let mut manifest = RunManifest::new(
        "budget",
        None,
        json!({ "given": inputs, "solved_field": unknown.name() }),
    );
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    let machine = json!({
        "budget": solved,
        "solved_field": unknown.name(),
        "validation": validation,
        "manifest": manifest,
    });
    println!("{machine}");
    Ok(())
}

fn run_simulate(cmd: &SimulateCmd, started: Instant) -> Result<(), CliError> {
    let events = load_events(&cmd.input, cmd.sim.window())?;
    let selection = eligible_cohort(&events);
    if !selection.excluded.is_empty() {
        eprintln!("note: {}", selection.summary());
    }
    let config = cmd.sim.config();
    let output = simulate(&selection.cohort, &config)?;
    let rows = points_to_rows(&output.points);
    write_points(create(&cmd.out)?, &rows, cmd.format)?;

    let mut manifest = RunManifest::new(
        "simulate",
        Some(config.seed),
        json!({
            "simulation": config,
            "window": cmd.sim.window(),
            "cohort": selection.summary(),
            "format": cmd.format,
        }),
    );
    manifest.inputs.push(display(&cmd.input));
    manifest.outputs.push(display(&cmd.out));
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    write_manifest(&manifest_path(&cmd.out), &manifest)?;
    println!("wrote {} point rows to {}", rows.len(), cmd.out.display());
    Ok(())
}

fn fit_points(path: &Path) -> Result<(Vec<PointRow>, CategoryReport), CliError> {
    let rows = read_points(open(path)?, format_of(path))?;
    let series = series_from_rows(&rows);
    Ok((rows, fit_all_categories(&series)))
}

/// Write the report under `--format`, then a swapped-extension sibling in
/// the other encoding so both delimited and structured forms exist.
fn write_report_pair(
    out: &Path,
    format: TableFormat,
    report: &CategoryReport,
) -> Result<Vec<String>, CliError> {
    write_report(create(out)?, report, format)?;
    let mut outputs = vec![display(out)];
    let (sibling_format, sibling_ext) = match format {
        TableFormat::Csv => (TableFormat::Json, "json"),
        TableFormat::Json => (TableFormat::Csv, "csv"),
    };
    let sibling = out.with_extension(sibling_ext);
    if sibling != out {
        write_report(create(&sibling)?, report, sibling_format)?;
        outputs.push(display(&sibling));
    }
    Ok(outputs)
}

fn print_report(report: &CategoryReport) {
    for row in &report.rows {
        match (row.saturation, row.rate, row.weekly_model) {
            (Some(s), Some(a), Some(w)) => {
                let observed = match row.weekly_observed {
                    Some(o) => format!(", weekly observed = {o:.2}"),
                    None => String::new(),
                };
                println!("{}: S = {s:.4}, a = {a:.4}, weekly = {w:.2}{observed}", row.category);
            }
            _ => println!("{}: no fit ({})", row.category, row.note),
        }
    }
}

fn emit_plot(
    path: &Path,
    points: &[PointRow],
    report: &CategoryReport,
    format: TableFormat,
) -> Result<(), CliError> {
    write_plot(create(path)?, &plot_rows(points, report), format)?;
    Ok(())
}

fn run_fit(cmd: &FitCmd, started: Instant) -> Result<(), CliError> {
    let (points, report) = fit_points(&cmd.input)?;
    let mut outputs = write_report_pair(&cmd.out, cmd.format, &report)?;
    if let Some(plot) = &cmd.plot_data {
        emit_plot(plot, &points, &report, cmd.format)?;
        outputs.push(display(plot));
    }
    print_report(&report);

    let mut manifest = RunManifest::new(
        "fit",
        None,
        json!({ "format": cmd.format, "n_points": points.len() }),
    );
    manifest.inputs.push(display(&cmd.input));
    manifest.outputs = outputs;
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    write_manifest(&manifest_path(&cmd.out), &manifest)
}

fn run_report(cmd: &ReportCmd, started: Instant) -> Result<(), CliError> {
    let (points, mut report) = fit_points(&cmd.input)?;
    let mut inputs = vec![display(&cmd.input)];
    if let Some(path) = &cmd.observed {
        let observed = read_observed(open(path)?, format_of(path))?;
        report.attach_observed(&observed, cmd.wear_hours)?;
        inputs.push(display(path));
    }
    let mut outputs = write_report_pair(&cmd.out, cmd.format, &report)?;
    if let Some(plot) = &cmd.plot_data {
        emit_plot(plot, &points, &report, cmd.format)?;
        outputs.push(display(plot));
    }
    print_report(&report);

    let mut manifest = RunManifest::new(
        "report",
        None,
        json!({ "format": cmd.format, "wear_hours": cmd.wear_hours, "n_points": points.len() }),
    );
    manifest.inputs = inputs;
    manifest.outputs = outputs;
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    write_manifest(&manifest_path(&cmd.out), &manifest)
}

fn resolve_spec(cmd: &SynthCmd) -> Result<SynthSpec, CliError> {
    let mut spec: SynthSpec = match &cmd.spec {
        Some(path) => serde_json::from_reader(open(path)?)
            .map_err(|e| CliError::schema(format!("spec {}: {e}", path.display())))?,
        None => SynthSpec::default(),
    };
    if let Some(seed) = cmd.seed {
        spec.seed = seed;
    }
    if let Some(n) = cmd.participants {
        spec.n_participants = n;
    }
    if let Some(n) = cmd.events_per_participant {
        spec.events_per_participant = n;
    }
    Ok(spec)
}

fn run_synth(cmd: &SynthCmd, started: Instant) -> Result<(), CliError> {
    let spec = resolve_spec(cmd)?;
    let events = generate(&spec)?;
    write_events(&cmd.out, &events, cmd.format)?;

    let mut manifest = RunManifest::new(
        "synth",
        Some(spec.seed),
        json!({ "spec": spec, "format": cmd.format }),
    );
    if let Some(path) = &cmd.spec {
        manifest.inputs.push(display(path));
    }
    manifest.outputs.push(display(&cmd.out));
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    write_manifest(&manifest_path(&cmd.out), &manifest)?;
    println!("wrote {} events to {}", events.len(), cmd.out.display());
    Ok(())
}

fn run_pipeline(cmd: &PipelineCmd, started: Instant) -> Result<(), CliError> {
    std::fs::create_dir_all(&cmd.out_dir)?;
    let ext = cmd.format.name();
    let config = cmd.sim.config();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut spec_value = serde_json::Value::Null;

    let events = if let Some(path) = &cmd.input {
        inputs.push(display(path));
        load_events(path, cmd.sim.window())?
    } else {
        let mut spec: SynthSpec = match &cmd.spec {
            Some(path) => {
                inputs.push(display(path));
                serde_json::from_reader(open(path)?)
                    .map_err(|e| CliError::schema(format!("spec {}: {e}", path.display())))?
            }
            None => SynthSpec::default(),
        };
        spec.seed = cmd.sim.seed;
        let generated = generate(&spec)?;
        let events_path = cmd.out_dir.join(format!("events.{ext}"));
        write_events(&events_path, &generated, cmd.format)?;
        outputs.push(display(&events_path));
        spec_value = serde_json::to_value(&spec)
            .map_err(|e| CliError::schema(format!("spec serialization: {e}")))?;
        filter_window(&generated, cmd.sim.window_start, cmd.sim.window_end)?
    };

    let selection = eligible_cohort(&events);
    if !selection.excluded.is_empty() {
        eprintln!("note: {}", selection.summary());
    }
    let output = simulate(&selection.cohort, &config)?;
    let point_rows = points_to_rows(&output.points);
    let points_path = cmd.out_dir.join(format!("points.{ext}"));
    write_points(create(&points_path)?, &point_rows, cmd.format)?;
    outputs.push(display(&points_path));

    let series = series_from_rows(&point_rows);
    let mut report = fit_all_categories(&series);
    if let Some(path) = &cmd.observed {
        inputs.push(display(path));
        let observed = read_observed(open(path)?, format_of(path))?;
        report.attach_observed(&observed, cmd.wear_hours)?;
    }
    let report_path = cmd.out_dir.join(format!("report.{ext}"));
    write_report(create(&report_path)?, &report, cmd.format)?;
    outputs.push(display(&report_path));

    let plot_path = cmd.out_dir.join(format!("plot.{ext}"));
    emit_plot(&plot_path, &point_rows, &report, cmd.format)?;
    outputs.push(display(&plot_path));

    print_report(&report);

    // One manifest covers the whole chained run.
    let mut manifest = RunManifest::new(
        "pipeline",
        Some(cmd.sim.seed),
        json!({
            "spec": spec_value,
            "simulation": config,
            "window": cmd.sim.window(),
            "wear_hours": cmd.wear_hours,
            "cohort": selection.summary(),
            "format": cmd.format,
        }),
    );
    manifest.inputs = inputs;
    manifest.outputs = outputs;
    manifest.duration_seconds = started.elapsed().as_secs_f64();
    write_manifest(&cmd.out_dir.join("pipeline.manifest.json"), &manifest)
}

fn run(cli: &Cli, started: Instant) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::usage(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Budget(cmd) => run_budget(cmd, started),
        Command::Simulate(cmd) => run_simulate(cmd, started),
        Command::Fit(cmd) => run_fit(cmd, started),
        Command::Synth(cmd) => run_synth(cmd, started),
        Command::Report(cmd) => run_report(cmd, started),
        Command::Pipeline(cmd) => run_pipeline(cmd, started),
    }
}

fn main() {
    let cli = Cli::parse();
    let started = Instant::now();
    if let Err(err) = run(&cli, started) {
        // invariant: exactly one line, `error: <class>: <detail>`
        let detail = err.message.replace('\n', "; ");
        eprintln!("error: {}: {detail}", class_name(err.code));
        exit(err.code);
    }
}

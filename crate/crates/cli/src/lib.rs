//! Command-line front end for `teleportsim`.
//!
//! Exit codes: 0 on success, 1 for invalid input or a rejected source table,
//! 2 when a file cannot be read or written.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::Rng;
use teleportsim::experiment::{
    analytic_failure_rate, analytic_postselected_fidelity, run_trials, trial_rng,
    ExperimentConfig, ExperimentReport, QubitSampler, TrialRecord, DEFAULT_FIDELITY_THRESHOLD,
};
use teleportsim::protocol::teleport_ideal;
use teleportsim::qstate::PureState;
use teleportsim::source::{self, validate, SourceModel, SourceTable};

/// Version tag written into every report.
pub const SCHEMA_VERSION: u32 = 1;

/// Header line of the trial log.
pub const TRIAL_LOG_HEADER: &str = "trial_index,channel,consumed,coincidence,outcome,fidelity";

#[derive(Debug, Parser)]
#[command(
    name = "teleportsim",
    version,
    about = "Teleportation over EPR sources with particle-number uncertainty"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Teleport one qubit a|↑⟩ + b|↓⟩ through a perfect singlet.
    #[command(allow_negative_numbers = true)]
    Teleport {
        #[arg(long, default_value_t = 1.0)]
        a_re: f64,
        #[arg(long, default_value_t = 0.0)]
        a_im: f64,
        #[arg(long, default_value_t = 0.0)]
        b_re: f64,
        #[arg(long, default_value_t = 0.0)]
        b_im: f64,
        /// Seed for Alice's measurement outcome.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a Monte Carlo experiment and write a report.
    Experiment(ExperimentArgs),
    /// Inspect source tables.
    #[command(subcommand)]
    Source(SourceCommand),
    /// Print the closed-form failure rate and post-selected fidelity.
    Analytic {
        /// Built-in name (ideal, pion, cascade:c2=<v>,u=<v>) or table path.
        #[arg(long)]
        source: String,
        #[arg(long, default_value_t = DEFAULT_FIDELITY_THRESHOLD)]
        threshold: f64,
    },
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Built-in name (ideal, pion, cascade:c2=<v>,u=<v>) or table path.
    #[arg(long)]
    source: String,
    #[arg(long)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// `haar` or `fixed:<a_re>,<a_im>,<b_re>,<b_im>`.
    #[arg(long, default_value = "haar", allow_hyphen_values = true)]
    input: String,
    /// Fidelity below which a delivered state counts as a failure.
    #[arg(long, default_value_t = DEFAULT_FIDELITY_THRESHOLD)]
    threshold: f64,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial CSV log.
    #[arg(long)]
    trial_log: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum SourceCommand {
    /// Check a source table (file path or built-in name).
    Validate { source: String },
    /// List the built-in sources.
    List,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input or rejected model: exit 1.
    Invalid(String),
    /// File-system failure: exit 2.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Io(m) => m,
        }
    }
}

fn invalid(message: impl std::fmt::Display) -> CliError {
    CliError::Invalid(message.to_string())
}

fn io_error(path: &Path, err: io::Error) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let target: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Teleport {
            a_re,
            a_im,
            b_re,
            b_im,
            seed,
        } => cmd_teleport([a_re, a_im, b_re, b_im], seed, out).map(|_| 0),
        Command::Experiment(args) => cmd_experiment(args, out).map(|_| 0),
        Command::Source(SourceCommand::Validate { source }) => cmd_source_validate(&source, out),
        Command::Source(SourceCommand::List) => cmd_source_list(out).map(|_| 0),
        Command::Analytic { source, threshold } => cmd_analytic(&source, threshold, out).map(|_| 0),
    }
}

fn stdout_error(e: io::Error) -> CliError {
    CliError::Io(format!("stdout: {e}"))
}

fn parse_qubit(parts: [f64; 4]) -> Result<PureState, CliError> {
    let [a_re, a_im, b_re, b_im] = parts;
    PureState::qubit(Complex64::new(a_re, a_im), Complex64::new(b_re, b_im))
        .map_err(|e| invalid(format!("input qubit: {e}")))
}

fn fmt_amp(z: Complex64) -> String {
    format!("{:.12}{:+.12}i", z.re, z.im)
}

fn cmd_teleport(parts: [f64; 4], seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let f = parse_qubit(parts)?;
    let draw: f64 = trial_rng(seed, 0).random();
    let result = teleport_ideal(&f, draw).map_err(invalid)?;
    let fidelity = result.bob_state.fidelity(&f).map_err(invalid)?;
    let [a, b] = [f.amplitudes()[0], f.amplitudes()[1]];
    let [ba, bb] = [result.bob_state.amplitudes()[0], result.bob_state.amplitudes()[1]];
    (|| {
        writeln!(out, "input: ({}, {})", fmt_amp(a), fmt_amp(b))?;
        writeln!(out, "outcome: {}", result.outcome)?;
        writeln!(out, "message: {}", result.outcome.message())?;
        writeln!(out, "outcome_probability: {:.12}", result.outcome_probability)?;
        writeln!(out, "bob: ({}, {})", fmt_amp(ba), fmt_amp(bb))?;
        writeln!(out, "fidelity: {fidelity:.12}")
    })()
    .map_err(stdout_error)
}

/// Resolves a built-in name or reads a table file.
pub fn resolve_source(reference: &str) -> Result<SourceModel, CliError> {
    if let Some(model) = source::builtin(reference) {
        return model.map_err(|e| invalid(format!("source `{reference}`: {e}")));
    }
    validate(read_table(reference)?).map_err(|e| invalid(format!("source `{reference}`: {e}")))
}

fn read_table(reference: &str) -> Result<SourceTable, CliError> {
    let path = Path::new(reference);
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| invalid(format!("source `{reference}`: ParseError: {e}")))
}

fn parse_sampler(spec: &str) -> Result<QubitSampler, CliError> {
    if spec == "haar" {
        return Ok(QubitSampler::Haar);
    }
    let Some(list) = spec.strip_prefix("fixed:") else {
        return Err(invalid(format!(
            "input: expected `haar` or `fixed:<a_re>,<a_im>,<b_re>,<b_im>`, got `{spec}`"
        )));
    };
    let values: Vec<f64> = list
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| invalid(format!("input: {e}")))?;
    let parts: [f64; 4] = values
        .try_into()
        .map_err(|_| invalid("input: fixed qubit needs exactly four numbers"))?;
    Ok(QubitSampler::Fixed(parse_qubit(parts)?))
}

/// Renders a number with 17 significant digits.
pub fn fmt_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_optional(x: Option<f64>) -> String {
    x.map_or_else(|| "null".to_string(), fmt_number)
}

/// The report document. Key order and number formatting are fixed.
pub fn render_report(report: &ExperimentReport) -> String {
    let (low, high) = report.failure_rate_ci95.unzip();
    let fields: [(&str, String); 13] = [
        ("schema_version", SCHEMA_VERSION.to_string()),
        (
            "source_name",
            serde_json::to_string(&report.source_name).expect("string serializes"),
        ),
        ("trials_requested", report.trials_requested.to_string()),
        ("trials_consumed", report.trials_consumed.to_string()),
        ("coincidences", report.coincidences.to_string()),
        ("unconditional_failure_rate", fmt_optional(report.unconditional_failure_rate)),
        ("postselected_mean_fidelity", fmt_optional(report.postselected_mean_fidelity)),
        ("analytic_failure_rate", fmt_optional(report.analytic_failure_rate)),
        ("analytic_postselected_fidelity", fmt_optional(report.analytic_postselected_fidelity)),
        ("failure_rate_ci95_low", fmt_optional(low)),
        ("failure_rate_ci95_high", fmt_optional(high)),
        ("seed", report.seed.to_string()),
        ("fidelity_threshold", fmt_number(report.fidelity_threshold)),
    ];
    let body: Vec<String> = fields
        .iter()
        .map(|(k, v)| format!("  \"{k}\": {v}"))
        .collect();
    format!("{{\n{}\n}}\n", body.join(",\n"))
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

/// One trial-log line, without the newline.
pub fn render_trial(record: &TrialRecord<'_>) -> String {
    format!(
        "{},{},{},{},{},{}",
        record.trial_index,
        csv_field(record.channel_label),
        record.consumed,
        record.coincidence,
        record.outcome.map_or("", |o| o.name()),
        record.fidelity.map_or_else(String::new, fmt_number),
    )
}

fn cmd_experiment(args: ExperimentArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let model = resolve_source(&args.source)?;
    let config = ExperimentConfig {
        trials: args.trials,
        seed: args.seed,
        workers: args.workers,
        fidelity_threshold: args.threshold,
        sampler: parse_sampler(&args.input)?,
    };
    config.validate().map_err(invalid)?;

    let mut log = match &args.trial_log {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_error(path, e))?;
            let mut w = BufWriter::new(file);
            writeln!(w, "{TRIAL_LOG_HEADER}").map_err(|e| io_error(path, e))?;
            Some((path, w))
        }
        None => None,
    };
    let mut log_error = None;
    let report = run_trials(&model, &config, |record| {
        if let Some((_, w)) = log.as_mut() {
            if log_error.is_none() {
                if let Err(e) = writeln!(w, "{}", render_trial(record)) {
                    log_error = Some(e);
                }
            }
        }
    })
    .map_err(invalid)?;
    if let Some((path, mut w)) = log {
        if let Some(e) = log_error {
            return Err(io_error(path, e));
        }
        w.flush().map_err(|e| io_error(path, e))?;
    }

    let document = render_report(&report);
    match &args.out {
        Some(path) => std::fs::write(path, document).map_err(|e| io_error(path, e)),
        None => out.write_all(document.as_bytes()).map_err(stdout_error),
    }
}

fn cmd_source_validate(reference: &str, out: &mut dyn Write) -> Result<i32, CliError> {
    let table = match source::builtin(reference) {
        Some(model) => model.map_err(|e| invalid(format!("source `{reference}`: {e}")))?.to_table(),
        None => read_table(reference)?,
    };
    let raw_sum: f64 = table.channels.iter().map(|c| c.probability).sum();
    let verdict = validate(table.clone());
    (|| -> io::Result<i32> {
        writeln!(out, "source: {}", table.name)?;
        writeln!(out, "{:<20} {:<18} {:>24} {:>24}", "label", "delivery", "raw_probability", "probability")?;
        for (k, c) in table.channels.iter().enumerate() {
            let normalized = verdict
                .as_ref()
                .map(|m| fmt_number(m.channels()[k].probability))
                .unwrap_or_else(|_| "-".into());
            writeln!(
                out,
                "{:<20} {:<18} {:>24} {:>24}",
                c.label,
                c.delivery.name(),
                fmt_number(c.probability),
                normalized
            )?;
        }
        match &verdict {
            Ok(m) if m.renormalized() => {
                writeln!(out, "sum={raw_sum:.7}, renormalized")?;
                Ok(0)
            }
            Ok(_) => {
                writeln!(out, "sum={raw_sum:.7}, valid")?;
                Ok(0)
            }
            Err(e) => {
                writeln!(out, "sum={raw_sum:.7}, rejected: {e}")?;
                Ok(1)
            }
        }
    })()
    .map_err(stdout_error)
}

fn cmd_source_list(out: &mut dyn Write) -> Result<(), CliError> {
    (|| -> io::Result<()> {
        writeln!(out, "ideal                  perfect singlet source")?;
        writeln!(out, "pion                   neutral-pion decay channels")?;
        writeln!(out, "cascade:c2=<v>,u=<v>   atomic cascade, four-photon weight c2, uncorrelated share u (default 0.1)")?;
        writeln!(out, "<path>                 JSON source table")
    })()
    .map_err(stdout_error)
}

fn cmd_analytic(reference: &str, threshold: f64, out: &mut dyn Write) -> Result<(), CliError> {
    let model = resolve_source(reference)?;
    let failure = analytic_failure_rate(&model, threshold).map_err(invalid)?;
    let postselected = analytic_postselected_fidelity(&model).ok();
    (|| -> io::Result<()> {
        writeln!(out, "source: {}", model.name())?;
        writeln!(out, "analytic_failure_rate: {}", fmt_number(failure))?;
        writeln!(out, "analytic_postselected_fidelity: {}", fmt_optional(postselected))
    })()
    .map_err(stdout_error)
}

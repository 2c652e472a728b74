//! Command-line subcommands. Each returns a [`CliError`] whose exit code is
//! 1 for verification failures and 2 for usage or input errors.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use agent_causal::engine::{answer, Model, Query};
use agent_causal::experiments::{
    builtin, builtin_names, diff_tables, reference, render_text, run_experiment, DiffReport, DiffStatus, ExperimentSpec,
    QueryTable, ReferenceKind, ReferenceSet, ToleranceSet, DEFAULT_ROLLOUTS,
};
use agent_causal::gridworld::env_init;
use agent_causal::json::to_canonical_json;
use agent_causal::seed::Seed;
use agent_causal::sim::{intervene, rollout, write_trace, InterventionSpec};

use crate::error::CliError;
use crate::service::{router, Service, DATA_DIR_ENV, DEFAULT_SEED};
use crate::system::build_system;

/// Tolerance applied to every cell of a reference file given without a
/// tolerance file.
pub const DEFAULT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "agent-causal", version, about = "Causal queries over gridworld agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    #[default]
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a built-in experiment, or one described by a spec file, and
    /// print its query table.
    Experiment {
        /// Built-in experiment name; ignored with --spec.
        #[arg(required_unless_present = "spec")]
        name: Option<String>,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ROLLOUTS)]
        rollouts: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Write the table as JSON to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Compare query tables with reference values.
    Verify {
        /// `scripted`, `published`, or a reference-set JSON file.
        #[arg(long, default_value = "scripted")]
        reference: String,
        /// Tolerance file; required to override the packaged tolerances.
        #[arg(long)]
        tolerances: Option<PathBuf>,
        /// Table files to check; without them the experiments are run.
        #[arg(long = "table")]
        tables: Vec<PathBuf>,
        /// Experiments to run when no tables are given; all by default.
        #[arg(long = "experiment")]
        experiments: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_ROLLOUTS)]
        rollouts: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Roll out one episode and write it as a JSON-lines trace.
    Simulate {
        #[arg(long)]
        env: String,
        /// `entity=agent-id` or a bare agent id; repeat for each agent.
        #[arg(long = "agent", required = true)]
        agents: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Steps to record; the environment's step budget by default.
        #[arg(long)]
        steps: Option<u32>,
        /// Intervention (JSON) applied to the rollout; repeat to chain.
        #[arg(long = "intervention")]
        interventions: Vec<String>,
        /// Output file; standard output by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer a query against a model file.
    Query {
        #[arg(long)]
        model: PathBuf,
        /// Query as JSON, or `@file` to read it from a file.
        #[arg(long)]
        query: String,
    },
    /// Serve the session API over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory for the request log; falls back to the environment.
        #[arg(long, env = DATA_DIR_ENV)]
        data: Option<PathBuf>,
    },
}

/// Runs a parsed command line, writing human output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Experiment { name, spec, rollouts, seed, out: file, format } => {
            let spec = match spec {
                Some(path) => read_json::<ExperimentSpec>(&path)?,
                None => builtin(name.as_deref().unwrap_or_default())?,
            };
            let table = run_experiment(&spec.with_rollouts(rollouts), &Seed::new(seed))?;
            if let Some(path) = file {
                write_table(&table, &path)?;
            }
            match format {
                Format::Text => write!(out, "{}", render_text(&table))?,
                Format::Json => writeln!(out, "{}", to_canonical_json(&table)?)?,
            }
            Ok(())
        }
        Command::Verify { reference: which, tolerances, tables, experiments, rollouts, seed, format } => {
            let (set, packaged) = load_reference(&which)?;
            let tolerances = match tolerances {
                Some(path) => read_json::<ToleranceSet>(&path)?,
                None => packaged,
            };
            let tables = if tables.is_empty() {
                let names: Vec<String> =
                    if experiments.is_empty() { builtin_names().iter().map(|s| s.to_string()).collect() } else { experiments };
                names
                    .iter()
                    .map(|n| Ok(run_experiment(&builtin(n)?.with_rollouts(rollouts), &Seed::new(seed))?))
                    .collect::<Result<Vec<_>, CliError>>()?
            } else {
                tables.iter().map(|p| read_json::<QueryTable>(p)).collect::<Result<Vec<_>, _>>()?
            };
            let mut reports = Vec::new();
            for table in &tables {
                let expected = set
                    .tables
                    .get(&table.experiment)
                    .ok_or_else(|| CliError::Usage(format!("no reference for experiment `{}`", table.experiment)))?;
                reports.push(diff_tables(table, expected, &tolerances.for_experiment(&table.experiment))?);
            }
            match format {
                Format::Text => {
                    for report in &reports {
                        write!(out, "{}", render_report(report))?;
                    }
                }
                Format::Json => writeln!(out, "{}", to_canonical_json(&reports)?)?,
            }
            let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.experiment.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Verification(failed.join(", ")))
            }
        }
        Command::Simulate { env, agents, seed, steps, interventions, out: file } => {
            let system = build_system(&env, &agents)?;
            let seed = Seed::new(seed);
            let steps = match steps {
                Some(s) => s,
                None => env_init(&system.env, &seed)?.step_budget,
            };
            let mut trace = rollout(&system, &seed, steps)?;
            for raw in &interventions {
                let spec: InterventionSpec = serde_json::from_str(raw)?;
                trace = intervene(&trace, spec)?;
            }
            match file {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path)?);
                    write_trace(&trace, &mut w)?;
                    w.flush()?;
                }
                None => write_trace(&trace, &mut &mut *out)?,
            }
            Ok(())
        }
        Command::Query { model, query } => {
            let model: Model = read_json(&model)?;
            let query: Query = match query.strip_prefix('@') {
                Some(path) => read_json(Path::new(path))?,
                None => serde_json::from_str(&query)?,
            };
            writeln!(out, "{}", to_canonical_json(&answer(&model, &query)?)?)?;
            Ok(())
        }
        Command::Serve { port, host, data } => {
            let service = match data {
                Some(dir) => Service::open(&dir)?,
                None => Service::in_memory(),
            };
            let addr: SocketAddr =
                format!("{host}:{port}").parse().map_err(|e| CliError::Usage(format!("bad address `{host}:{port}`: {e}")))?;
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                writeln!(out, "listening on http://{}", listener.local_addr()?)?;
                out.flush()?;
                axum::serve(listener, router(Arc::new(service))).await
            })?;
            Ok(())
        }
    }
}

fn load_reference(which: &str) -> Result<(ReferenceSet, ToleranceSet), CliError> {
    match which.parse::<ReferenceKind>() {
        Ok(kind) => Ok(reference(kind)?),
        Err(_) if Path::new(which).exists() => {
            Ok((read_json(Path::new(which))?, ToleranceSet { default: DEFAULT_TOLERANCE, experiments: Default::default() }))
        }
        Err(_) => Err(CliError::Usage(format!("`{which}` is neither `scripted`, `published`, nor a file"))),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a table as canonical JSON so equal tables are equal bytes.
pub fn write_table(table: &QueryTable, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, to_canonical_json(table)? + "\n")?;
    Ok(())
}

/// One status line per experiment followed by its failing cells.
pub fn render_report(report: &DiffReport) -> String {
    let count = |s: DiffStatus| report.cells.iter().filter(|c| c.status == s).count();
    let mut text = format!(
        "{} {}: {} passed, {} failed, {} skipped\n",
        if report.passed() { "PASS" } else { "FAIL" },
        report.experiment,
        count(DiffStatus::Pass),
        count(DiffStatus::Fail),
        count(DiffStatus::Skipped),
    );
    for c in report.failures() {
        text.push_str(&format!(
            "  {} [{}]: got {:.4}, expected {:.4} +/- {:.4}\n",
            c.label,
            c.column,
            c.actual,
            c.expected,
            c.tolerance.unwrap_or(0.0)
        ));
    }
    text
}

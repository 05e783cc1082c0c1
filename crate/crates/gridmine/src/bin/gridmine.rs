//! Command-line entry point: dataset generation, job execution,
//! knowledge-map administration, and report emission.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridmine::error::{Error, Result};
use gridmine::km::{FindQuery, KmRequest, KmResponse, KmRuntime, KnowledgeDraft};
use gridmine::report::{append_row, read_report, ReportRow};
use gridmine::sim::{
    run_job, AlgorithmConfig, GenSpec, JobSpec, MessageTrace, SupportSpec, VarLimitSpec,
};

#[derive(Parser)]
#[command(
    name = "gridmine",
    version,
    about = "Distributed data-mining toolkit with a simulated multi-site runtime"
)]
struct Cli {
    /// Seed for all randomness (overrides GRIDMINE_SEED and file values).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a generator spec file
    Gen {
        /// Generator spec: a Gaussian mixture or a basket spec (JSON)
        #[arg(long)]
        spec: PathBuf,
        /// Output dataset path (CSV for points, text for transactions)
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a mining job described by a job spec file
    Run {
        /// Job spec (JSON)
        #[arg(long)]
        job: PathBuf,
        /// Also run the centralized oracle and report quality metrics
        #[arg(long)]
        oracle: bool,
        /// Report CSV receiving this run's summary row
        #[arg(long, default_value = "report.csv")]
        report: PathBuf,
    },
    /// Administer the knowledge-map registry
    Km {
        #[command(subcommand)]
        command: KmCommand,
    },
    /// Print a report CSV
    Report {
        #[arg(long)]
        file: PathBuf,
        /// Emit rows as JSON instead of a table
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum KmCommand {
    /// Create the daemons: a core host plus one local map per site
    Init {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        sites: usize,
    },
    /// Terminate the daemons; later requests fail until re-init
    Stop {
        #[arg(long)]
        state: PathBuf,
    },
    /// Add a concept node (omit --parent to start a new tree)
    AddConcept {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        parent: Option<u64>,
        #[arg(long)]
        name: String,
    },
    /// Register a knowledge entry at a site from a draft file
    Register {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        site: usize,
        /// Knowledge draft (JSON)
        #[arg(long)]
        entry: PathBuf,
    },
    /// Search meta-knowledge under a concept subtree
    Find {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        concept: u64,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        data_type: Option<String>,
    },
    /// Fetch a full knowledge entry from a site
    Retrieve {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        site: usize,
        #[arg(long)]
        id: u64,
    },
}

/// Prints a line, exiting quietly when the consumer closed the pipe.
fn emit(line: std::fmt::Arguments<'_>) {
    use std::io::Write;
    let mut out = std::io::stdout();
    if writeln!(out, "{line}").is_err() {
        std::process::exit(0);
    }
}

macro_rules! emitln {
    ($($arg:tt)*) => { emit(format_args!($($arg)*)) };
}

fn effective_seed(flag: Option<u64>, file_seed: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("GRIDMINE_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .or(file_seed)
    .unwrap_or(42)
}

fn cmd_gen(seed_flag: Option<u64>, spec_path: &Path, out: &Path) -> Result<()> {
    let spec: GenSpec = serde_json::from_str(&std::fs::read_to_string(spec_path)?)?;
    let seed = effective_seed(seed_flag, spec.seed());
    let (kind, records) = spec.generate_to(out, seed)?;
    emitln!(
        "{}",
        serde_json::json!({
            "kind": kind,
            "records": records,
            "seed": seed,
            "out": out,
        })
    );
    Ok(())
}

/// Compact parameter summary for the report row.
fn params_summary(algorithm: &AlgorithmConfig, seed: u64) -> String {
    let core = match algorithm {
        AlgorithmConfig::Ddbc(cfg) => {
            let eps = match &cfg.eps {
                gridmine::sim::PerSite::Uniform(e) => e.to_string(),
                gridmine::sim::PerSite::Each(es) => es
                    .iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join("/"),
            };
            format!("eps={eps};minpts={}", cfg.minpts)
        }
        AlgorithmConfig::Variance(cfg) => {
            let k = match &cfg.k {
                gridmine::sim::PerSite::Uniform(k) => k.to_string(),
                gridmine::sim::PerSite::Each(ks) => ks
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join("/"),
            };
            let limit = match cfg.var_limit {
                VarLimitSpec::Absolute(v) => format!("abs:{v}"),
                VarLimitSpec::MaxIndividualFactor(f) => format!("max_individual_x{f}"),
            };
            format!("k={k};var_limit={limit}")
        }
        AlgorithmConfig::Apriori(cfg) => {
            let support = match cfg.min_support {
                SupportSpec::Absolute(c) => format!("abs:{c}"),
                SupportSpec::Relative(f) => format!("rel:{f}"),
            };
            format!("k={};min_support={support}", cfg.k)
        }
    };
    format!("{core};seed={seed}")
}

fn cmd_run(seed_flag: Option<u64>, job_path: &Path, oracle: bool, report: &Path) -> Result<()> {
    let spec = JobSpec::from_json(&std::fs::read_to_string(job_path)?)?;
    let base = job_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let seed = effective_seed(seed_flag, spec.seed);
    let outcome = run_job(&spec, &base, seed, oracle)?;
    let row = ReportRow::from_metrics(&outcome.metrics, params_summary(&spec.algorithm, seed));
    append_row(report, &row)?;
    emitln!(
        "{}",
        serde_json::json!({
            "experiment": outcome.metrics.experiment,
            "algorithm": outcome.metrics.algorithm,
            "result_count": outcome.metrics.result_count,
            "passes": outcome.metrics.passes,
            "elements": outcome.metrics.elements,
            "bytes": outcome.metrics.bytes,
            "quality_p": outcome.metrics.quality_p,
            "report": report,
        })
    );
    Ok(())
}

fn cmd_km(command: &KmCommand) -> Result<KmResponse> {
    let (state, request) = match command {
        KmCommand::Init { state, sites } => (state, KmRequest::Init { sites: *sites }),
        KmCommand::Stop { state } => (state, KmRequest::Stop),
        KmCommand::AddConcept {
            state,
            parent,
            name,
        } => (
            state,
            KmRequest::AddConcept {
                parent: *parent,
                name: name.clone(),
            },
        ),
        KmCommand::Register { state, site, entry } => {
            let draft: KnowledgeDraft = serde_json::from_str(&std::fs::read_to_string(entry)?)?;
            (
                state,
                KmRequest::Register {
                    site: *site,
                    draft,
                },
            )
        }
        KmCommand::Find {
            state,
            concept,
            task,
            data_type,
        } => (
            state,
            KmRequest::Find {
                query: FindQuery {
                    concept: *concept,
                    task: task.clone(),
                    data_type: data_type.clone(),
                },
            },
        ),
        KmCommand::Retrieve { state, site, id } => (
            state,
            KmRequest::Retrieve {
                site: *site,
                knowledge_id: *id,
            },
        ),
    };

    let mut runtime = if matches!(request, KmRequest::Init { .. }) {
        KmRuntime::new()
    } else if state.join("state.json").exists() {
        KmRuntime::load(state)?
    } else {
        return Err(Error::NotRunning);
    };
    let trace_path = state.join("trace.json");
    let mut trace: MessageTrace = if trace_path.exists() {
        serde_json::from_slice(&std::fs::read(&trace_path)?)?
    } else {
        MessageTrace::new()
    };
    let response = runtime.handle(&request, &mut trace);
    runtime.save(state)?;
    let mut bytes = serde_json::to_vec_pretty(&trace)?;
    bytes.push(b'\n');
    std::fs::write(&trace_path, bytes)?;
    Ok(response)
}

fn cmd_report(file: &Path, json: bool) -> Result<()> {
    let rows = read_report(file)?;
    if json {
        for row in &rows {
            emitln!("{}", serde_json::to_string(row)?);
        }
        return Ok(());
    }
    emitln!(
        "{:<16} {:<9} {:>2} {:<34} {:>6} {:>9} {:>6} {:>9} {:>8}",
        "experiment", "algorithm", "m", "parameters", "count", "quality_p", "passes", "elements",
        "speedup"
    );
    for r in &rows {
        emitln!(
            "{:<16} {:<9} {:>2} {:<34} {:>6} {:>9} {:>6} {:>9} {:>8}",
            r.experiment,
            r.algorithm,
            r.m,
            r.parameters,
            r.result_count,
            r.quality_p.map(|v| format!("{v:.4}")).unwrap_or_default(),
            r.passes.map(|v| v.to_string()).unwrap_or_default(),
            r.elements,
            r.speedup.map(|v| format!("{v:.2}")).unwrap_or_default(),
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Gen { spec, out } => match cmd_gen(cli.seed, spec, out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Run {
            job,
            oracle,
            report,
        } => match cmd_run(cli.seed, job, *oracle, report) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Km { command } => match cmd_km(command) {
            Ok(response) => {
                emitln!("{}", serde_json::to_string_pretty(&response).unwrap());
                if response.is_error() {
                    ExitCode::FAILURE
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => {
                // Structured error on stdout, mirroring daemon responses.
                emitln!(
                    "{}",
                    serde_json::json!({
                        "kind": "ERROR",
                        "code": e.code(),
                        "message": e.to_string(),
                    })
                );
                ExitCode::FAILURE
            }
        },
        Command::Report { file, json } => match cmd_report(file, *json) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}

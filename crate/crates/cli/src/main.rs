//! `txcheck`: model checking of transactional programs under causal
//! consistency.
//!
//! Exit codes: 0 SAFE, 1 UNSAFE, 2 error (including an oracle disagreement
//! and corpus mismatches), 3 budget exhausted without finding a violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use txcheck::cli::{self, CliError, Emit, RunConfig};
use txcheck::Model;

#[derive(Parser)]
#[command(name = "txcheck", version, about = "Stateless model checking of transactional programs under CCv and CC")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore all weak traces of one program and report assertion failures.
    Check {
        file: PathBuf,
        #[arg(long, default_value = "ccv")]
        model: Model,
        /// Loop unrolling bound.
        #[arg(long, default_value_t = 4)]
        unroll: usize,
        /// Cross-check the explored traces against the brute-force oracle.
        #[arg(long)]
        oracle: bool,
        /// Write one file per weak trace (`dot` or `json`).
        #[arg(long)]
        emit: Option<Emit>,
        /// Directory for emitted traces.
        #[arg(long, default_value = "traces")]
        out_dir: PathBuf,
        /// Also write the JSON report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        max_traces: Option<usize>,
        #[arg(long)]
        max_nodes: Option<u64>,
        /// Stop at the first assertion failure.
        #[arg(long)]
        first: bool,
    },
    /// Check every program of an expectations file under both models.
    Corpus {
        dir: PathBuf,
        #[arg(long)]
        expect: PathBuf,
        #[arg(long, default_value_t = 4)]
        unroll: usize,
    },
    /// Parse a JSON trace document and print its canonical digest.
    Validate { trace: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<u8, CliError> {
    match command {
        Command::Check { file, model, unroll, oracle, emit, out_dir, report, max_traces, max_nodes, first } => {
            let cfg = RunConfig {
                model,
                unroll,
                max_traces,
                max_nodes,
                stop_at_first: first,
                oracle_check: oracle,
                emit: emit.unwrap_or_default(),
            };
            let checked = cli::run(&file, &cfg)?;
            let json = checked.report.to_json();
            println!("{json}");
            if let Some(path) = report {
                std::fs::write(&path, format!("{json}\n")).map_err(|source| CliError::Io { path, source })?;
            }
            for path in cli::emit_traces(&checked, cfg.emit, &out_dir)? {
                eprintln!("wrote {}", path.display());
            }
            let r = &checked.report;
            eprintln!("{}: {} under {} ({} traces)", r.program, r.verdict, r.model, r.traces);
            if r.oracle.as_ref().is_some_and(|o| !o.agrees) {
                eprintln!("error: exploration disagrees with the oracle");
                return Ok(2);
            }
            Ok(r.exit_code() as u8)
        }
        Command::Corpus { dir, expect, unroll } => {
            let cfg = RunConfig { unroll, ..RunConfig::default() };
            let summary = cli::run_corpus(&dir, &expect, &cfg)?;
            print!("{}", summary.table());
            Ok(if summary.all_pass() { 0 } else { 2 })
        }
        Command::Validate { trace } => {
            let weak = cli::validate(&trace)?;
            println!("{}", weak.digest());
            Ok(0)
        }
    }
}

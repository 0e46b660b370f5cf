//! Command-line harness around the `dyncon` library: stream generation,
//! single-algorithm runs and cross-algorithm comparisons.
//!
//! Exit codes: 0 success, 1 divergence or invariant violation, 2 usage or
//! parse errors.

use clap::{Parser, Subcommand};
use dyncon::bench::{self, Algo, BenchError, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dyncon", about = "Dynamic connectivity benchmark harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a staged update stream from a graph file.
    Gen {
        /// Graph file: "n m" header then "u v" edge lines.
        #[arg(long)]
        graph: PathBuf,
        /// Number of insert stages (and delete stages).
        #[arg(long, default_value_t = 10)]
        stages: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output stream file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one algorithm over a stream and write a CSV report.
    Run {
        /// One of cf-root, cf-lca, cf-blocked, cf-blocked-batch, hdt, oracle.
        #[arg(long)]
        algo: String,
        #[arg(long)]
        stream: PathBuf,
        /// Run the structural auditor after every stage.
        #[arg(long)]
        audit: bool,
        /// Check every query against the oracle in lockstep.
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run several algorithms over one stream and require identical query
    /// outcomes.
    Compare {
        #[arg(long)]
        stream: PathBuf,
        /// Comma-separated algorithm list.
        #[arg(long)]
        algos: String,
        #[arg(long)]
        report: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dyncon: {e}");
            match e {
                BenchError::Divergence { .. }
                | BenchError::AuditViolation { .. }
                | BenchError::BudgetExceeded { .. }
                | BenchError::HashMismatch { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn parse_algo(s: &str) -> Result<Algo, BenchError> {
    s.parse::<Algo>().map_err(BenchError::Usage)
}

fn dispatch(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Gen { graph, stages, seed, out } => {
            if stages == 0 {
                return Err(BenchError::Usage("--stages must be at least 1".into()));
            }
            let (n, edges) = bench::load_graph(&graph)?;
            let stream = bench::gen_stream(&edges, n, stages, seed);
            bench::write_stream(&out, &stream)?;
            eprintln!(
                "wrote {} ops over {} stages to {}",
                stream.op_count(),
                2 * stages,
                out.display()
            );
            Ok(())
        }
        Command::Run { algo, stream, audit, verify, report } => {
            let algo = parse_algo(&algo)?;
            let s = bench::load_stream(&stream)?;
            let r = bench::run_stream(algo, &s, RunOptions { audit, verify })?;
            bench::report_csv(std::slice::from_ref(&r), &report)?;
            eprintln!("{}: {} rows, query hash {:016x}", r.algo, r.rows.len(), r.query_hash);
            Ok(())
        }
        Command::Compare { stream, algos, report } => {
            let algos = algos
                .split(',')
                .map(|s| parse_algo(s.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            if algos.len() < 2 {
                return Err(BenchError::Usage("--algos needs at least two entries".into()));
            }
            let s = bench::load_stream(&stream)?;
            let reports = bench::compare(&algos, &s, RunOptions::default())?;
            bench::report_csv(&reports, &report)?;
            eprintln!(
                "agreement across {} algos, query hash {:016x}",
                reports.len(),
                reports[0].query_hash
            );
            Ok(())
        }
    }
}

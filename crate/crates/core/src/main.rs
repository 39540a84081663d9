// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hdlflow::cli::{self, CliError, RunArgs};

#[derive(Parser)]
#[command(name = "hdlflow", version, about = "Classification-driven Verilog generation and evaluation")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline (or the baseline) over a dataset.
    Run {
        /// Task directory or JSONL file.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Output directory for report.json and samples.jsonl.
        #[arg(long)]
        out: PathBuf,
        /// Only run the task ids listed in this file.
        #[arg(long)]
        tasks: Option<PathBuf>,
    },
    /// Print the ids of tasks the baseline never solved.
    FilterHard {
        /// Report of a baseline run.
        report: PathBuf,
        /// Dataset the report was produced from, to flag unreported tasks.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Minimize a JSON truth table and print the SOP and the module.
    Minimize {
        table: PathBuf,
        /// Module header to emit against; derived from the table when omitted.
        #[arg(long)]
        header: Option<String>,
    },
    /// Aggregate pass@k and the error-rate histogram of a report.
    Passk {
        report: PathBuf,
        #[arg(short, long = "k", value_delimiter = ',', default_values_t = [1u64, 5, 10])]
        k: Vec<u64>,
    },
}

fn run(args: Args) -> Result<(), CliError> {
    match args.command {
        Command::Run {
            dataset,
            config,
            out,
            tasks,
        } => {
            let summary = cli::cmd_run(&RunArgs {
                dataset,
                config,
                out,
                tasks,
            })?;
            let agg = &summary.report.aggregate;
            for p in &agg.pass_at_k {
                println!("pass@{}: {:.4}", p.k, p.value);
            }
            println!("report: {}", summary.report_path.display());
            println!("samples: {}", summary.samples_path.display());
        }
        Command::FilterHard { report, dataset } => {
            for id in cli::cmd_filter_hard(&report, dataset.as_deref())? {
                println!("{id}");
            }
        }
        Command::Minimize { table, header } => print!("{}", cli::cmd_minimize(&table, header.as_deref())?),
        Command::Passk { report, k } => print!("{}", cli::cmd_passk(&report, &k)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

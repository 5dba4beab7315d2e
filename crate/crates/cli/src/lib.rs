//! `pqa` command-line front end: file formats, bundled models and the
//! fit / eval / quantize / simulate / sweep pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or shape error,
//! 3 numeric failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod modelspec;
pub mod tensorfile;
pub mod zoo;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::{CliError, CliResult, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "pqa", version, about = "Product-quantized layers and accelerator simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit prototype banks and lookup tables for every PQ layer.
    Fit(RunConfig),
    /// Compare fitted PQ layers with the dense model.
    Eval(RunConfig),
    /// Quantize saved banks and tables.
    Quantize(RunConfig),
    /// Cycle, latency and parameter report for a model.
    Simulate(RunConfig),
    /// Sweep layer sizes and PQ settings.
    Sweep(RunConfig),
    /// List or print bundled models.
    Zoo {
        #[command(subcommand)]
        action: ZooAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum ZooAction {
    List,
    Dump { name: String },
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Fit(c) => {
            let s = c.resolve()?;
            let r = commands::fit::run(&s)?;
            println!("fitted {} PQ layers into {}", r.rows.len(), s.out.display());
        }
        Command::Eval(c) => {
            let s = c.resolve()?;
            let r = commands::eval::run(&s)?;
            for row in &r.layers {
                println!("{}: mse_enc {:.4e} mse_out {:.4e}", row.layer, row.report.mse_enc, row.report.mse_out);
            }
            println!("network: max abs err {:.4e}", r.network.max_abs_err);
        }
        Command::Quantize(c) => {
            let s = c.resolve()?;
            let r = commands::quantize::run(&s)?;
            println!("quantized {} PQ layers into {}", r.layers.len(), s.out.display());
        }
        Command::Simulate(c) => {
            let s = c.resolve()?;
            print!("{}", commands::simulate::run(&s)?.render());
        }
        Command::Sweep(c) => {
            let s = c.resolve()?;
            let r = commands::sweep::run(&s)?;
            println!("{} records written to {}", r.records.len(), r.csv.display());
        }
        Command::Zoo { action: ZooAction::List } => {
            for name in zoo::names() {
                let m = modelspec::ModelSpec::load(name)?;
                println!(
                    "{name}: {} layers ({} PQ), {} params, {} FLOPs",
                    m.layers.len(),
                    m.pq_layer_count(),
                    m.dense_params(),
                    m.dense_flops()
                );
            }
        }
        Command::Zoo { action: ZooAction::Dump { name } } => {
            let text = zoo::get(&name).ok_or_else(|| CliError::Usage(format!("no bundled model '{name}'")))?;
            print!("{text}");
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

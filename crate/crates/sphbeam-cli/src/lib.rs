//! Scenario runner for the sphbeam pipeline: `run`, `compare` and `validate`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod artifacts;
pub mod compare;
pub mod config;
pub mod pipeline;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sphbeam", version, about = "Beam-pattern design for single-user massive MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        config: PathBuf,
        /// Output root; overrides SPHBEAM_OUTPUT_ROOT.
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// Tabulate two or more run manifests against the first.
    Compare {
        /// Manifest files or run directories.
        #[arg(required = true, num_args = 2..)]
        manifests: Vec<PathBuf>,
        /// Method of the first run every ratio is taken against.
        #[arg(long)]
        baseline_method: Option<String>,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a scenario without running it.
    Validate { config: PathBuf },
}

/// Parses `args` (program name first) and runs the verb; returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Validate { config } => match config::Scenario::load(&config) {
            Ok(sc) => {
                println!("{}: ok ({} methods, {} N_UE values)", config.display(), sc.methods.len(), sc.n_ue.len());
                EXIT_OK
            }
            Err(e) => {
                eprintln!("{}: {e}", config.display());
                EXIT_ERROR
            }
        },
        Command::Run { config, output_root } => {
            let sc = match config::Scenario::load(&config) {
                Ok(sc) => sc,
                Err(e) => {
                    eprintln!("{}: {e}", config.display());
                    return EXIT_ERROR;
                }
            };
            let root = output_root.unwrap_or_else(pipeline::output_root);
            match pipeline::run_scenario(&sc, &root) {
                Ok(out) => {
                    println!("{}", out.dir.join("manifest.json").display());
                    if out.manifest.converged {
                        EXIT_OK
                    } else {
                        eprintln!("warning: OBPB did not converge for every stream count");
                        EXIT_NOT_CONVERGED
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    EXIT_ERROR
                }
            }
        }
        Command::Compare { manifests, baseline_method, out } => {
            let res = (|| -> anyhow::Result<()> {
                let runs = manifests
                    .iter()
                    .map(|p| Ok((p.display().to_string(), artifacts::read_manifest(p)?)))
                    .collect::<anyhow::Result<Vec<_>>>()?;
                let rows = compare::compare(&runs, baseline_method.as_deref())?;
                match out {
                    Some(path) => compare::write_csv(fs::File::create(path)?, &rows),
                    None => compare::write_csv(std::io::stdout().lock(), &rows),
                }
            })();
            match res {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    EXIT_ERROR
                }
            }
        }
    }
}

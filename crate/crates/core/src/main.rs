use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dirmh::diagnostics::{move_rate, DiagnosticsReport};
use dirmh::experiment::plot::{acf_svg, trace_svg};
use dirmh::experiment::{load_config, read_chain_csv, run_experiment};
use dirmh::Error;

#[derive(Parser)]
#[command(name = "dirmh", version, about = "Directional Metropolis-Hastings benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every kernel and seed in an experiment config.
    Run { config: PathBuf },
    /// Print diagnostics for a chain CSV as JSON.
    Diagnose {
        chain: PathBuf,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Render trace and ACF plots for a chain CSV.
    Plot {
        chain: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    if e.is_config() {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    }
}

fn run(path: PathBuf) -> ExitCode {
    // Anything that stops the config from loading counts as a config error.
    let config = match load_config(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let outcome = match run_experiment(&config) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let mut failed = false;
    for r in outcome.failures() {
        failed = true;
        eprintln!(
            "error: {} seed {}: {}",
            r.label,
            r.seed,
            r.error.as_deref().unwrap_or("")
        );
    }
    println!("wrote {}", outcome.summary_path.display());
    if failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn diagnose(path: PathBuf, batch_size: Option<usize>) -> Result<(), Error> {
    let rows = read_chain_csv(&path)?;
    let report = DiagnosticsReport::compute(&rows, move_rate(&rows), batch_size)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn plot(path: PathBuf, out: PathBuf) -> Result<(), Error> {
    let rows = read_chain_csv(&path)?;
    if rows.is_empty() {
        return Err(Error::InsufficientData("chain has no rows".into()));
    }
    std::fs::create_dir_all(&out).map_err(|e| Error::Io { path: out.clone(), source: e })?;
    for (name, svg) in [
        ("trace.svg", trace_svg(&rows)),
        ("acf.svg", acf_svg(&rows, 100.min(rows.len() / 2))),
    ] {
        let file = out.join(name);
        std::fs::write(&file, svg).map_err(|e| Error::Io { path: file.clone(), source: e })?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => return run(config),
        Command::Diagnose { chain, batch_size } => diagnose(chain, batch_size),
        Command::Plot { chain, out } => plot(chain, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use dtscatter::config::parse_with_overrides;
use dtscatter::run::{all_flagged, run};
use serde_json::json;

/// Scattering amplitudes for discrete-time quantum walks.
#[derive(Debug, Parser)]
#[command(name = "dtscatter", version)]
struct Cli {
    /// Run configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a setting after the file is read, e.g. `--set chi=0.5` or `--set grid.k=0.1,0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Record the wall-clock time in the metadata (makes output non-reproducible).
    #[arg(long)]
    stamp: bool,
}

const EXIT_USAGE: u8 = 1;
const EXIT_FLAGGED: u8 = 2;
const EXIT_IO: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(EXIT_IO);
            }
        },
        None => String::new(),
    };
    let cfg = match parse_with_overrides(&text, &cli.set) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };

    let mut table = run(&cfg);
    if cli.stamp {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        table.metadata.insert("timestamp".into(), json!(secs));
    }
    if let Err(e) = table.emit(cfg.output.format, cfg.output.path.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_IO);
    }
    if all_flagged(&table) {
        eprintln!("warning: every row is flagged");
        return ExitCode::from(EXIT_FLAGGED);
    }
    ExitCode::SUCCESS
}

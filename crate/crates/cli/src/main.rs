use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use hitlace_cli::{csv_path, run, Cli, EXIT_PARSE};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_PARSE as u8 } else { 0 });
        }
    };
    let outcome = run(&cli);
    if let Some(msg) = &outcome.report.error {
        eprintln!("hitlace {}: {msg}", outcome.report.command);
    }
    let json = outcome.report.to_json();
    let written = match &cli.common.out {
        Some(path) => std::fs::write(path, &json),
        None => std::io::stdout().write_all(json.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("hitlace: cannot write report: {e}");
        return ExitCode::from(EXIT_PARSE as u8);
    }
    if let (Some(table), Some(path)) = (&outcome.csv, csv_path(&cli)) {
        if let Err(e) = std::fs::write(&path, table) {
            eprintln!("hitlace: cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_PARSE as u8);
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}

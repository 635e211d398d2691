use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use sufficiency_cli::args::{Cli, Format};
use sufficiency_cli::error::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests succeed; usage errors sit above the verdict codes.
            return if e.use_stderr() {
                ExitCode::from(CliError::EXIT_CODE as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut out = std::io::stdout().lock();
    match sufficiency_cli::run(&cli) {
        Ok(report) => {
            let body = match cli.format {
                Format::Text => report.text.clone(),
                Format::Json => report.json(),
            };
            let _ = out.write_all(body.as_bytes());
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            if cli.format == Format::Json {
                let doc = serde_json::json!({ "error": e.to_string(), "exit_code": CliError::EXIT_CODE });
                let _ = writeln!(out, "{doc:#}");
            }
            eprintln!("error: {e}");
            ExitCode::from(CliError::EXIT_CODE as u8)
        }
    }
}

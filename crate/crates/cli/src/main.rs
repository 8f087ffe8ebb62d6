use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use dyadic_cli::cli::Cli;
use dyadic_cli::commands::{is_validation, run};

/// The error chain joined with `: `, skipping causes an outer message
/// already quotes.
fn message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let validation = is_validation(&e);
            let payload = serde_json::json!({
                "error": if validation { "validation" } else { "runtime" },
                "message": message(&e),
            });
            eprintln!("{payload}");
            ExitCode::from(if validation { 1 } else { 2 })
        }
    }
}

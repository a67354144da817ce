//! `vocoscope` command-line entry point.
//!
//! Every subcommand prints one JSON document on stdout; diagnostics go to
//! stderr. Exit codes: 0 success, 1 validation error, 2 runtime error.

mod cli;
mod commands;
mod error;

use std::io::Write;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::{json, Value};

use cli::{Cli, Command};
use error::{CliError, CliResult};

fn with_meta(body: Value, config_hash: &str, command: &str, no_meta: bool) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("toolkit_version".into(), json!(env!("CARGO_PKG_VERSION")));
    out.insert("config_hash".into(), json!(config_hash));
    out.insert("command".into(), json!(command));
    if !no_meta {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        out.insert("generated_at_unix".into(), json!(secs));
    }
    match body {
        Value::Object(m) => out.extend(m),
        other => {
            out.insert("result".into(), other);
        }
    }
    Value::Object(out)
}

fn run(cli: &Cli) -> CliResult<Value> {
    let meta = |body: Value, cfg: &vocoscope::VocoderConfig, name: &str| {
        Ok(with_meta(body, &cfg.hash(), name, cli.no_meta))
    };
    match &cli.command {
        Command::Envelope(a) => {
            let cfg = vocoscope::VocoderConfig::config_v1();
            meta(commands::envelope(a)?, &cfg, "envelope")
        }
        Command::Spectrogram(a) => {
            let cfg = commands::config_of(&a.config)?;
            meta(commands::spectrogram(a, &cfg)?, &cfg, "spectrogram")
        }
        Command::Synth(a) => {
            let cfg = commands::config_of(&a.config)?;
            meta(commands::synth(a, &cfg)?, &cfg, "synth")
        }
        Command::Loss(a) => {
            let cfg = commands::config_of(&a.config)?;
            meta(commands::loss(a, &cfg)?, &cfg, "loss")
        }
        Command::Metrics(a) => {
            // A bare array of reports; each carries its own provenance.
            let cfg = commands::config_of(&a.config)?;
            let reports = commands::metrics(a, &cfg)?;
            serde_json::to_value(reports).map_err(|e| CliError::Runtime(e.to_string()))
        }
        Command::Gradcheck(a) => {
            let cfg = commands::config_of(&a.config)?;
            meta(commands::gradcheck_cmd(a)?, &cfg, "gradcheck")
        }
        Command::Paramcount(a) => {
            let cfg = commands::config_of(&a.config)?;
            meta(commands::paramcount(a, &cfg)?, &cfg, "paramcount")
        }
        Command::Lencheck(a) => {
            let cfg = commands::config_of(&a.config)?;
            meta(commands::lencheck(a, &cfg)?, &cfg, "lencheck")
        }
        Command::InitWeights(a) => {
            let cfg = commands::config_of(&a.config)?;
            meta(commands::init_weights(a, &cfg)?, &cfg, "init-weights")
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    // Built explicitly: configuration comes from flags only.
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = writeln!(std::io::stderr(), "{e}");
            return ExitCode::from(1);
        }
    };
    init_logging(cli.verbose);
    match run(&cli) {
        Ok(v) => {
            let text = serde_json::to_string_pretty(&v).expect("json values serialize");
            let mut out = std::io::stdout().lock();
            if writeln!(out, "{text}").is_err() {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

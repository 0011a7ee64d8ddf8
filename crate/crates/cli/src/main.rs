//! `bmguide`: batch front end for the engine. Exit codes: 0 success,
//! 2 usage or validation failure, 1 internal error.

mod args;
mod commands;
mod manifest;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, ServeArgs};
use bmguide_service::ServiceConfig;
use commands::{CliError, Ctx};
use manifest::RunManifest;

fn serve(a: &ServeArgs) -> Result<(), CliError> {
    let mut config = match &a.config {
        Some(p) => ServiceConfig::load(p).map_err(|e| CliError::Validation(e.to_string()))?,
        None => ServiceConfig::default(),
    };
    if let Some(h) = &a.host {
        config.host = h.clone();
    }
    if let Some(p) = a.port {
        config.port = p;
    }
    if let Some(d) = &a.data_dir {
        config.data_dir = d.clone();
    }
    config.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| CliError::Internal(e.to_string()))?;
    rt.block_on(bmguide_service::serve(config)).map_err(|e| match e {
        bmguide_service::ServiceError::Config(c) => CliError::Validation(c.to_string()),
        other => CliError::Internal(other.to_string()),
    })
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let started_at = manifest::unix_now();
    if let Command::Serve(a) = &cli.command {
        return serve(a);
    }
    let mut ctx = Ctx::new(cli.format, cli.taxonomy.as_deref())?;
    let (name, params, bytes) = match &cli.command {
        Command::Encode(a) => ("encode", serde_json::to_value(a), commands::encode(&mut ctx, a)?),
        Command::Cluster(a) => ("cluster", serde_json::to_value(a), commands::cluster(&mut ctx, a)?),
        Command::Archetypes(a) => ("archetypes", serde_json::to_value(a), commands::archetypes(&mut ctx, a)?),
        Command::Train(a) => ("train", serde_json::to_value(a), commands::train(&mut ctx, a)?),
        Command::Importance(a) => ("importance", serde_json::to_value(a), commands::importance(&mut ctx, a)?),
        Command::Evaluate(a) => ("evaluate", serde_json::to_value(a), commands::evaluate(&mut ctx, a)?),
        Command::Qca(a) => ("qca", serde_json::to_value(a), commands::qca(&mut ctx, a)?),
        Command::SimulateCrowd(a) => ("simulate-crowd", serde_json::to_value(a), commands::simulate_crowd(&mut ctx, a)?),
        Command::Synth(a) => ("synth", serde_json::to_value(a), commands::synth(&mut ctx, a)?),
        Command::Serve(_) => unreachable!("handled above"),
    };
    let Some(out) = &cli.output else {
        return std::io::stdout().write_all(&bytes).map_err(|e| CliError::Internal(e.to_string()));
    };
    let mut params = params.map_err(|e| CliError::Internal(e.to_string()))?;
    params["format"] = serde_json::to_value(cli.format).expect("format serializes");
    let write_err = |e: std::io::Error| CliError::Internal(format!("{}: {e}", out.display()));
    bmguide_service::store::atomic_write(out, &bytes).map_err(write_err)?;
    let m = RunManifest {
        command: name.into(),
        params,
        seed: commands::seed_of(&cli.command),
        inputs: ctx.inputs,
        output: out.display().to_string(),
        output_sha256: manifest::sha256_hex(&bytes),
        tool_version: manifest::TOOL.into(),
        started_at,
        finished_at: manifest::unix_now(),
    };
    let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    text.push('\n');
    bmguide_service::store::atomic_write(&manifest::sidecar_path(out), text.as_bytes()).map_err(write_err)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = cli.log_level.parse().unwrap_or(tracing::Level::WARN);
    tracing_subscriber::fmt().with_max_level(level).with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr())).with_writer(std::io::stderr).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bmguide: {e}");
            ExitCode::from(match e {
                CliError::Validation(_) => 2,
                CliError::Internal(_) => 1,
            })
        }
    }
}

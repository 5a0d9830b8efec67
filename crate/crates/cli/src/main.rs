//! Batch front end: read a JSON run configuration, run one command and
//! write CSV or JSON.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 failed validation, 1 anything else (for example an unwritable output).

mod commands;
mod config;
mod validate;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Parser;
use serde_json::{json, Value};

use config::{apply_override, config_error, ConfigError, Format, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "fracaffine",
    version,
    about = "Fractional affine models: simulation, pricing and validation"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `mc.n_paths`.
    #[arg(long)]
    paths: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Suppress the summary line on standard error.
    #[arg(long)]
    quiet: bool,
    /// Extra `key.path=value` overrides applied to the configuration.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let text = fs::read_to_string(&cli.config).with_context(|| format!("reading {}", cli.config.display()))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", cli.config.display())))?;
    if !value.is_object() {
        return Err(config_error("the configuration must be a JSON object"));
    }
    for ov in &cli.overrides {
        let (key, raw) = ov
            .split_once('=')
            .ok_or_else(|| config_error(format!("override `{ov}` is not key=value")))?;
        apply_override(&mut value, key, raw)?;
    }
    if let Some(seed) = cli.seed {
        apply_override(&mut value, "mc.seed", &seed.to_string())?;
    }
    if let Some(paths) = cli.paths {
        apply_override(&mut value, "mc.n_paths", &paths.to_string())?;
    }
    // a partial mc block from the flags gets the remaining defaults
    if let Some(mc) = value.get_mut("mc").and_then(Value::as_object_mut) {
        mc.entry("n_paths").or_insert(json!(config::DEFAULT_PATHS));
        mc.entry("seed").or_insert(json!(0));
    }
    if let Some(out) = &cli.out {
        apply_override(
            &mut value,
            "output.path",
            &Value::String(out.display().to_string()).to_string(),
        )?;
    }
    if let Some(f) = cli.format {
        let name = match f {
            FormatArg::Csv => "csv",
            FormatArg::Json => "json",
        };
        apply_override(&mut value, "output.format", &format!("\"{name}\""))?;
    }
    RunConfig::from_value(value)
}

fn emit(cfg: &RunConfig, outcome: &commands::Outcome) -> Result<()> {
    let text = match (cfg.format(), &outcome.csv) {
        (Format::Csv, Some(csv)) => csv.clone(),
        _ => {
            let doc = json!({ "config": cfg, "result": outcome.json });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    };
    match &cfg.output.path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {p}"))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<fracaffine::Error>() {
        Some(e) if e.is_numerical() => 3,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = load(&cli).and_then(|cfg| {
        let outcome = commands::run(&cfg)?;
        emit(&cfg, &outcome)?;
        Ok((cfg, outcome))
    });
    match result {
        Ok((cfg, outcome)) => {
            if !cli.quiet {
                eprintln!(
                    "{}: n={} in {:.3}s{}",
                    cfg.command.name(),
                    outcome.n,
                    start.elapsed().as_secs_f64(),
                    if outcome.passed { "" } else { " (validation FAILED)" }
                );
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_errors_exit_with_three() {
        let e = anyhow::Error::from(fracaffine::Error::BranchCut("test".into()));
        assert_eq!(exit_code(&e), 3);
        let e = anyhow::Error::from(fracaffine::Error::Quadrature {
            achieved: 1e-3,
            requested: 1e-9,
        });
        assert_eq!(exit_code(&e), 3);
    }

    #[test]
    fn input_errors_exit_with_two() {
        assert_eq!(exit_code(&config_error("grid")), 2);
        let e = anyhow::Error::from(fracaffine::Error::KindMismatch {
            op: "rate",
            kind: "bank account".into(),
        });
        assert_eq!(exit_code(&e), 2);
    }
}

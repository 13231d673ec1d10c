use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info};

use kreinreg::config::{RawConfig, Scenario, ScenarioConfig};
use kreinreg::report::Format;
use kreinreg::scenario::run_scenario;
use kreinreg::Error;

/// Runs the Krein-space regularization checks and writes a report.
#[derive(Parser, Debug)]
#[command(name = "kreinreg", version)]
struct Cli {
    /// TOML scenario configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario to run; repeat for several
    #[arg(long = "scenario", value_parser = parse_scenario)]
    scenarios: Vec<Scenario>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format
    #[arg(long, value_parser = parse_format)]
    format: Option<Format>,
    /// Seed of the random test families
    #[arg(long)]
    seed: Option<u64>,
    /// Truncation order N; repeat for several
    #[arg(long = "truncation")]
    truncations: Vec<usize>,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> Result<Format, String> {
    match s {
        "json" => Ok(Format::Json),
        "csv" => Ok(Format::Csv),
        other => Err(format!("unknown format {other:?}")),
    }
}

fn run(cli: Cli) -> kreinreg::Result<bool> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut raw = RawConfig::parse(&text)?;
    if !cli.scenarios.is_empty() {
        raw.scenarios = Some(cli.scenarios);
    }
    if !cli.truncations.is_empty() {
        raw.truncations = Some(cli.truncations);
    }
    if let Some(seed) = cli.seed {
        raw.seed = Some(seed);
    }
    if let Some(dir) = cli.out {
        raw.output.dir = Some(dir);
    }
    if let Some(format) = cli.format {
        raw.output.format = Some(format);
    }
    let cfg = ScenarioConfig::resolve(&raw)?;
    info!("running {} at N = {:?}", cfg.id(), cfg.truncations);
    let (report, tables) = run_scenario(&cfg)?;
    let path = report.emit(&cfg.out_dir, cfg.format)?;
    for t in &tables {
        t.write_csv(&cfg.out_dir)?;
    }
    let failed: Vec<_> = report.failures().collect();
    println!(
        "{}: {} records, {} failed, {:.2}s -> {}",
        report.scenario,
        report.records().len(),
        failed.len(),
        report.timing.total_seconds,
        path.display()
    );
    for r in &failed {
        println!("FAIL {} measured={:e} bound={:e}{}", r.name, r.measured, r.bound, r.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default());
    }
    Ok(failed.is_empty())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KREINREG_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use weakosc_cli::config::{Fallback, ScenarioConfig, ScenarioKind};
use weakosc_cli::presets::PresetName;
use weakosc_cli::record::ResultRecord;
use weakosc_cli::sweep::parse_values;
use weakosc_cli::{run, sweep, ScenarioError};

/// Overrides the output directory of every config; `--out` still wins.
const OUTPUT_ENV: &str = "WEAKOSC_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "weakosc", version, about = "Oscillating-pure vs mixed state weak-value scenarios")]
struct Cli {
    /// Replace the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Threads for sweep points.
    #[arg(long, global = true, default_value_t = default_workers())]
    workers: usize,
    /// Output directory (overrides the config and the environment).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write results.csv and record.json.
    Run { config: PathBuf },
    /// Run a scenario once per value of a numeric parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. `0.25,0.5,2,4`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Check a config and list every problem found.
    Validate { config: PathBuf },
    /// Describe scenario kinds, their parameters and the source presets.
    ListScenarios,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<ScenarioError>().map(ScenarioError::exit_code).unwrap_or(1);
            ExitCode::from(code)
        }
    }
}

fn load(cli: &Cli, path: &Path) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::from_file(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn output_dir(cli: &Cli, cfg: &ScenarioConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(&cfg.output_path))
}

/// Writes the record, or on failure a record carrying the error, then
/// reports the original error.
fn finish(cfg: &ScenarioConfig, dir: &Path, result: Result<ResultRecord, ScenarioError>) -> Result<()> {
    match result {
        Ok(record) => {
            let (csv, json) = record.write(dir)?;
            println!(
                "{} rows, verdict {}; wrote {} and {}",
                record.rows.len(),
                record.verdict.as_deref().unwrap_or("-"),
                csv.display(),
                json.display()
            );
            Ok(())
        }
        Err(err) => {
            if matches!(err, ScenarioError::Numerical(_)) {
                ResultRecord::failed(cfg, &err).write(dir)?;
            }
            Err(err.into())
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load(cli, config)?;
            finish(&cfg, &output_dir(cli, &cfg), run(&cfg))
        }
        Command::Sweep { config, axis, values } => {
            let cfg = load(cli, config)?;
            let values = parse_values(values)?;
            finish(&cfg, &output_dir(cli, &cfg), sweep(&cfg, axis, &values, cli.workers))
        }
        Command::Validate { config } => {
            let cfg = load(cli, config).with_context(|| format!("validating {}", config.display()))?;
            println!("{}: valid {} config, hash {}", config.display(), cfg.kind.as_str(), cfg.hash());
            Ok(())
        }
        Command::ListScenarios => {
            list_scenarios();
            Ok(())
        }
    }
}

fn list_scenarios() {
    for kind in ScenarioKind::ALL {
        println!("{}: {}", kind.as_str(), kind.summary());
        for spec in kind.parameters() {
            let fallback = match spec.fallback {
                Fallback::Required => "required".to_string(),
                Fallback::Optional => "optional".to_string(),
                Fallback::Num(x) => format!("default {x}"),
                Fallback::Text(t) => format!("default {t}"),
            };
            println!("    {:<14} {fallback}", spec.key);
        }
        println!("    sweepable: {}", kind.sweepable().join(", "));
    }
    println!("source presets (illustrative amplitude laws):");
    for preset in PresetName::ALL {
        println!("    {:<12} {}", preset.as_str(), preset.law());
    }
}

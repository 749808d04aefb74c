use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chordrep_cli::analyze::{run_analysis, Kind};
use chordrep_cli::config::{parse_override, parse_pairs, scenario_from_pairs};
use chordrep_cli::experiment::{run_experiment, simulate, ExperimentSpec};
use chordrep_cli::{selftest, CliError, Result, WORKERS_ENV};

#[derive(Parser)]
#[command(
    name = "chordrep",
    version,
    about = "Replication on a Chord ring: simulations and analyses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; one CSV row per repeat.
    Simulate {
        config: PathBuf,
        /// Override a config entry, `key=value`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sweep one parameter across algorithms; one CSV row per cell.
    Sweep {
        spec: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Overrides the spec's `output` entry.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Tables from the analytical models: fig1, fig2, fig4, fig5, probes, collision.
    Analyze {
        kind: String,
        /// Parameters as `key=value`.
        params: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check closed forms against their oracles.
    Selftest,
}

fn read_pairs(path: &Path, set: &[String]) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut pairs = parse_pairs(&text)?;
    for s in set {
        pairs.push(parse_override(s)?);
    }
    Ok(pairs)
}

fn init_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    init_workers()?;
    match cli.command {
        Command::Simulate { config, set, output } => {
            let cfg = scenario_from_pairs(&read_pairs(&config, &set)?)?;
            simulate(&cfg)?.write(output.as_deref())
        }
        Command::Sweep { spec, set, output } => {
            let spec = ExperimentSpec::from_pairs(&read_pairs(&spec, &set)?)?;
            let (table, failed) = run_experiment(&spec)?;
            table.write(output.as_deref().or(spec.output.as_deref()))?;
            if failed > 0 {
                return Err(CliError::Partial {
                    failed,
                    total: table.rows.len(),
                });
            }
            Ok(())
        }
        Command::Analyze { kind, params, output } => {
            let kind: Kind = kind.parse()?;
            let params = params.iter().map(|p| parse_override(p)).collect::<Result<Vec<_>>>()?;
            run_analysis(kind, &params)?.write(output.as_deref())
        }
        Command::Selftest => {
            let checks = selftest::run();
            for c in &checks {
                println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Selftest(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chordrep: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fedgan::experiment::{exit, exit_code_for, resolve_output_dir, run, ExperimentConfig, Scenario};

/// Runs one experiment scenario and writes its artifacts.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `$FEDGAN_OUT_ROOT/<scenario>-seed<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's scenario; enough on its own to run with defaults.
    #[arg(long, value_parser = parse_scenario)]
    scenario: Option<Scenario>,
    /// List config diagnostics and exit without running.
    #[arg(long)]
    validate: bool,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    Scenario::from_name(s).ok_or_else(|| {
        let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
        format!("unknown scenario {s:?}; expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut config = match (&cli.config, cli.scenario) {
        (Some(path), _) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit::CONFIG_ERROR as u8);
            }
        },
        (None, Some(s)) => ExperimentConfig::new(s),
        (None, None) => {
            eprintln!("error: pass --config or --scenario");
            return ExitCode::from(exit::CONFIG_ERROR as u8);
        }
    };
    if let Some(s) = cli.scenario {
        if s != config.scenario {
            let base = ExperimentConfig::new(s);
            config.scenario = s;
            config.consensus = config.consensus.or(base.consensus);
        }
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    let diagnostics = config.diagnostics();
    if cli.validate || !diagnostics.is_empty() {
        for d in &diagnostics {
            println!("{d}");
        }
        return if diagnostics.is_empty() {
            println!("ok");
            ExitCode::SUCCESS
        } else {
            ExitCode::from(exit::CONFIG_ERROR as u8)
        };
    }

    let out = resolve_output_dir(&config, cli.out.as_deref());
    match run(&config, &out) {
        Ok(report) => {
            for c in &report.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("wrote {} artifacts to {}", report.artifacts.len(), out.display());
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}

//! Runs a scenario from one of the bundled configs, like the `fedgan` binary.
//!
//! `cargo run --example run_scenario -- examples/configs/fedgan-central.json /tmp/out`

use std::path::PathBuf;

use fedgan::experiment::{run, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/verify-theory.json").into());
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("fedgan-example"));
    let config = ExperimentConfig::load(&path)?;
    for d in config.diagnostics() {
        println!("diagnostic {d}");
    }
    let report = run(&config, &out)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for a in &report.artifacts {
        println!("{}", out.join(a).display());
    }
    Ok(())
}

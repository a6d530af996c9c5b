//! Scenario runner: turns an [`ExperimentConfig`] into artifact files under
//! one output directory.
//!
//! | scenario | artifacts |
//! |---|---|
//! | `verify-theory` | `theory.json` |
//! | `bench-consensus` | `latency.csv` |
//! | `standalone`, `fedgan-central`, `fedgan-blockchain` | `losses_<class>.csv`, `quality.csv`, `accuracy.csv`, `metrics.json`, `confusion_<scheme>.csv`, `generator_<class>.ckpt`; blockchain adds `chain.jsonl`, `rounds.csv` |
//! | `sweep-mixing` | `mixing.csv` |
//! | `sweep-epsilon` | `epsilon.csv`, `epsilon_summary.csv` |
//!
//! Every run also writes `manifest.json`. Nothing carries a timestamp, so the
//! same config and seed reproduce every byte.

mod config;
mod studies;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{validate_file, ConsensusSection, DataConfig, Diagnostic, ExperimentConfig, FederationSettings, Scenario, SweepConfig};
pub use studies::{
    compare_fed_standalone, dp_utility, institution_shard, mixing_trial, random_distribution, synthesize, theory_report,
    train_class_generators, ClassRun, ComparisonOutcome, ComparisonSetup, DpSweepSetup, MixingSetup, ModelConfig, TheoryReport,
    UtilityScore,
};

use crate::chain::{export_jsonl, latency_benchmark, write_latency_csv, Blockchain};
use crate::checkpoint;
use crate::data::{blobs, three_class_centers, DatasetPreset};
use crate::divergence::{federated_optimum, DiscreteDistribution, LN_4};
use crate::error::{Error, Result};
use crate::eval::{
    empirical_jsd, evaluate, mixing_sweep, subsample, train_classifier_traced, write_confusion_csv, write_sweep_csv, Evaluation,
    LabeledDataset, MixingConfig,
};
use crate::federation::{build_chain, generate_synthetic, write_history_csv, ChainSetup};
use crate::privacy::{DpConfig, DpScope};
use crate::rng::{self, derive_seed, stream, RngStream};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG_ERROR: i32 = 2;
    pub const RUNTIME_ERROR: i32 = 3;
    pub const CHECK_FAILED: i32 = 4;
}

pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) => exit::CONFIG_ERROR,
        _ => exit::RUNTIME_ERROR,
    }
}

/// Root under which default output directories are created.
pub const OUT_ROOT_ENV: &str = "FEDGAN_OUT_ROOT";

/// `explicit`, else the config's `output_dir`, else
/// `$FEDGAN_OUT_ROOT/<scenario>-seed<seed>` (root defaults to `runs`).
pub fn resolve_output_dir(config: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit.or(config.output_dir.as_deref()) {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{}-seed{}", config.scenario, config.seed))
}

/// A pass/fail assertion a scenario makes about its own output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    /// File names relative to `out_dir`, in write order.
    pub artifacts: Vec<String>,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            exit::SUCCESS
        } else {
            exit::CHECK_FAILED
        }
    }
}

struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.names.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut f = self.create(name)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct DpAccounting {
    per_step_epsilon: f64,
    delta: f64,
    scope: DpScope,
    /// Perturbed steps per client over the whole run.
    steps: usize,
    /// `steps * per_step_epsilon`; sequential composition with no tighter accounting.
    naive_total_epsilon: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    scenario: Scenario,
    seed: u64,
    artifacts: &'a [String],
    checks: &'a [Check],
    #[serde(skip_serializing_if = "Option::is_none")]
    dp_accounting: Option<DpAccounting>,
    config: &'a ExperimentConfig,
}

/// Runs one scenario into `out_dir`.
///
/// Invalid configs fail with [`Error::Config`] before anything is written.
/// Failed checks do not make this an error; see [`RunReport::exit_code`].
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    let diagnostics = config.diagnostics();
    if !diagnostics.is_empty() {
        let lines: Vec<String> = diagnostics.iter().map(ToString::to_string).collect();
        return Err(Error::Config(lines.join("; ")));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("cannot create {}: {e}", out_dir.display()))))?;
    let mut out = Artifacts { dir: out_dir.to_path_buf(), names: Vec::new() };
    let checks = match config.scenario {
        Scenario::VerifyTheory => verify_theory(config, &mut out)?,
        Scenario::BenchConsensus => bench_consensus(config, &mut out)?,
        Scenario::Standalone | Scenario::FedganCentral | Scenario::FedganBlockchain => train_scenario(config, &mut out)?,
        Scenario::SweepMixing => sweep_mixing(config, &mut out)?,
        Scenario::SweepEpsilon => sweep_epsilon(config, &mut out)?,
    };

    let mut names = out.names.clone();
    names.push("manifest.json".into());
    let manifest = Manifest {
        scenario: config.scenario,
        seed: config.seed,
        artifacts: &names,
        checks: &checks,
        dp_accounting: dp_accounting(config),
        config,
    };
    out.json("manifest.json", &manifest)?;
    Ok(RunReport { out_dir: out_dir.to_path_buf(), artifacts: out.names, checks })
}

fn dp_accounting(config: &ExperimentConfig) -> Option<DpAccounting> {
    let dp = config.dp.as_ref()?;
    if !matches!(config.scenario, Scenario::Standalone | Scenario::FedganCentral | Scenario::FedganBlockchain | Scenario::SweepMixing) {
        return None;
    }
    let fed = &config.federation;
    let per_epoch = match dp.scope {
        DpScope::Both => 2,
        DpScope::Discriminator => 1,
    };
    let steps = fed.global_rounds * fed.hp.local_epochs * per_epoch;
    Some(DpAccounting {
        per_step_epsilon: dp.epsilon,
        delta: dp.delta,
        scope: dp.scope,
        steps,
        naive_total_epsilon: dp.naive_total_epsilon(steps),
    })
}

#[derive(Serialize)]
struct TheoryFile {
    report: TheoryReport,
    matched_federated: Vec<MatchedRow>,
}

#[derive(Serialize)]
struct MatchedRow {
    sites: usize,
    value: f64,
    expected: f64,
}

fn verify_theory(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    let report = theory_report(config.seed, 10_000, 8)?;
    let uniform = DiscreteDistribution::uniform(4)?;
    let matched_federated = (1..=10)
        .map(|n| {
            let value = federated_optimum(&vec![(uniform.clone(), uniform.clone()); n])?;
            Ok(MatchedRow { sites: n, value, expected: -(n as f64) * LN_4 })
        })
        .collect::<Result<Vec<_>>>()?;
    let checks = vec![
        Check::new(
            "optimum-equals-jsd-form",
            report.max_optimum_error <= TheoryReport::OPTIMUM_TOLERANCE,
            format!("max error {:e}", report.max_optimum_error),
        ),
        Check::new(
            "matched-pair-minimum",
            report.max_matched_error <= TheoryReport::MATCHED_TOLERANCE,
            format!("max error {:e}", report.max_matched_error),
        ),
        Check::new(
            "federated-minimum",
            report.max_federated_error <= TheoryReport::MATCHED_TOLERANCE,
            format!("max error {:e}", report.max_federated_error),
        ),
    ];
    out.json("theory.json", &TheoryFile { report, matched_federated })?;
    Ok(checks)
}

fn bench_consensus(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    let preset = config
        .consensus
        .as_ref()
        .and_then(ConsensusSection::resolve)
        .ok_or_else(|| Error::Config("consensus: section required by scenario bench-consensus".into()))?;
    let roster = preset.roster(&mut stream(config.seed, rng::ids::ROSTER));
    let rows = latency_benchmark(&roster, &preset.params, &config.sweep.block_kbytes, &config.sweep.committee_sizes)?;
    write_latency_csv(&rows, out.create("latency.csv")?)?;

    let slower: Vec<_> = rows.iter().filter(|r| r.block_kb >= 50.0 && r.por_s >= r.dpos_s).collect();
    let mut shrinking = 0;
    for &m in &config.sweep.committee_sizes {
        let mut by_size: Vec<_> = rows.iter().filter(|r| r.miners == m).collect();
        by_size.sort_by(|a, b| a.block_kb.total_cmp(&b.block_kb));
        shrinking += by_size.windows(2).filter(|w| w[1].dpos_s - w[1].por_s < w[0].dpos_s - w[0].por_s).count();
    }
    Ok(vec![
        Check::new("por-below-dpos", slower.is_empty(), format!("{} of {} rows violate", slower.len(), rows.len())),
        Check::new("gap-grows-with-block", shrinking == 0, format!("{shrinking} decreasing steps")),
    ])
}

struct ToyData {
    preset: DatasetPreset,
    train: LabeledDataset,
    test: LabeledDataset,
}

fn toy_data(config: &ExperimentConfig) -> Result<ToyData> {
    let preset = config.dataset_preset().ok_or_else(|| Error::Config(format!("dataset: unknown preset {:?}", config.dataset)))?;
    let centers = three_class_centers();
    if preset.original_counts.len() != centers.len() {
        return Err(Error::Config(format!("dataset: {} classes, the toy data has {}", preset.original_counts.len(), centers.len())));
    }
    let std = config.data.blob_std;
    let train = blobs(&mut stream(config.seed, rng::ids::DATA), &preset.original_counts, &centers, std)?;
    let test = blobs(&mut stream(config.seed, rng::ids::TEST_DATA), &vec![config.data.test_per_class; centers.len()], &centers, std)?;
    Ok(ToyData { preset, train, test })
}

#[derive(Serialize)]
struct QualityRow {
    class: String,
    round: usize,
    jsd: f64,
}

#[derive(Serialize)]
struct AccuracyRow<'a> {
    epoch: usize,
    scheme: &'a str,
    accuracy: f64,
}

#[derive(Serialize)]
struct RoundRow<'a> {
    class: &'a str,
    round: usize,
    block_height: u64,
    por_latency_s: f64,
    dpos_latency_s: f64,
}

#[derive(Serialize)]
struct SchemeMetrics<'a> {
    train_size: usize,
    accuracy: f64,
    macro_f1: f64,
    per_class: BTreeMap<&'a str, ClassScore>,
}

#[derive(Serialize)]
struct ClassScore {
    precision: f64,
    sensitivity: f64,
    f1: f64,
    undefined: &'static str,
}

fn scheme_metrics<'a>(eval: &Evaluation, train_size: usize, classes: &'a [String]) -> SchemeMetrics<'a> {
    let m = &eval.metrics;
    let per_class = classes
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let score =
                ClassScore { precision: m.precision[c], sensitivity: m.sensitivity[c], f1: m.f1[c], undefined: m.undefined_label(c) };
            (name.as_str(), score)
        })
        .collect();
    SchemeMetrics { train_size, accuracy: eval.accuracy, macro_f1: m.macro_f1(), per_class }
}

/// Per-class GAN training (one institution alone, or the federation with
/// either aggregator), then a classifier for institution 0 trained on its real
/// shard plus synthetic samples, against a real-only baseline.
fn train_scenario(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    let ToyData { preset, train, test } = toy_data(config)?;
    let fed = &config.federation;
    let seed = config.seed;
    let classes = &preset.classes;
    let local = institution_shard(&train, fed.num_clients, 0, seed)?;

    let mut chain: Option<Blockchain<RngStream>> = None;
    let runs = match config.scenario {
        Scenario::Standalone => {
            train_class_generators(&local, 1, fed.global_rounds, &fed.hp, &config.model, config.dp.as_ref(), seed, None)?
        }
        _ => {
            if config.scenario == Scenario::FedganBlockchain {
                let preset = config
                    .consensus
                    .as_ref()
                    .and_then(ConsensusSection::resolve)
                    .ok_or_else(|| Error::Config("consensus: section required by scenario fedgan-blockchain".into()))?;
                let setup = ChainSetup {
                    miners: preset.roster(&mut stream(seed, rng::ids::ROSTER)),
                    params: preset.params,
                    honesty: BTreeMap::new(),
                };
                let ids: Vec<u32> = (0..fed.num_clients as u32).collect();
                chain = Some(build_chain(&setup, &ids, seed)?);
            }
            train_class_generators(
                &train,
                fed.num_clients,
                fed.global_rounds,
                &fed.hp,
                &config.model,
                config.dp.as_ref(),
                seed,
                chain.as_mut(),
            )?
        }
    };

    let mut quality = csv::Writer::from_writer(out.create("quality.csv")?);
    for run in &runs {
        let name = &classes[run.class];
        write_history_csv(&run.history, out.create(&format!("losses_{name}.csv"))?)?;
        let reference = test.class_samples(run.class);
        for rec in &run.history {
            let mut eval_rng = stream(derive_seed(seed, run.class as u64), rng::ids::EVAL);
            let fake = generate_synthetic(&rec.global_gen, &mut eval_rng, config.data.jsd_samples)?;
            quality.serialize(QualityRow {
                class: name.clone(),
                round: rec.round,
                jsd: empirical_jsd(&reference, &fake, config.data.jsd_bins)?,
            })?;
        }
    }
    quality.flush()?;
    drop(quality);
    for run in &runs {
        let name = format!("generator_{}.ckpt", classes[run.class]);
        let mut f = out.create(&name)?;
        f.write_all(&checkpoint::encode(run.generator()))?;
        f.flush()?;
    }

    let synthetic = synthesize(&runs, preset.synthetic_per_class, &mut stream(seed, rng::ids::EVAL))?;
    let augmented = local.concat(&synthetic)?;
    let scheme = config.scenario.name();
    let mut accuracy = csv::Writer::from_writer(out.create("accuracy.csv")?);
    let mut metrics = BTreeMap::new();
    for (name, data) in [("real-only", &local), (scheme, &augmented)] {
        let (net, curve) = train_classifier_traced(data, &config.classifier, &mut stream(seed, rng::ids::CLASSIFIER), Some(&test))?;
        for (i, &acc) in curve.iter().enumerate() {
            accuracy.serialize(AccuracyRow { epoch: i + 1, scheme: name, accuracy: acc })?;
        }
        let eval = evaluate(&net, &test)?;
        write_confusion_csv(&eval.metrics, classes, out.create(&format!("confusion_{name}.csv"))?)?;
        metrics.insert(name, scheme_metrics(&eval, data.len(), classes));
    }
    accuracy.flush()?;
    drop(accuracy);
    out.json("metrics.json", &metrics)?;

    let mut checks = Vec::new();
    if let Some(chain) = &chain {
        export_jsonl(&chain.ledger, out.create("chain.jsonl")?)?;
        let mut rounds = csv::Writer::from_writer(out.create("rounds.csv")?);
        let mut slower = 0;
        for run in &runs {
            for rec in &run.history {
                let (Some(block_height), Some(por), Some(dpos)) = (rec.block_height, rec.por_latency, rec.dpos_latency) else {
                    return Err(Error::arg(format!("round {} carried no block", rec.round)));
                };
                slower += usize::from(por >= dpos);
                rounds.serialize(RoundRow {
                    class: &classes[run.class],
                    round: rec.round,
                    block_height,
                    por_latency_s: por,
                    dpos_latency_s: dpos,
                })?;
            }
        }
        rounds.flush()?;
        let verified = chain.ledger.verify_chain();
        checks.push(Check::new(
            "ledger-verifies",
            verified.is_ok(),
            verified.map_or_else(|e| e.to_string(), |()| format!("{} blocks", chain.ledger.len())),
        ));
        checks.push(Check::new("por-below-dpos", slower == 0, format!("{slower} rounds where partitioned verification was not faster")));
    }
    Ok(checks)
}

fn sweep_mixing(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    let ToyData { preset, train, test } = toy_data(config)?;
    let fed = &config.federation;
    let seed = config.seed;
    let runs = train_class_generators(&train, fed.num_clients, fed.global_rounds, &fed.hp, &config.model, config.dp.as_ref(), seed, None)?;
    let gens: Vec<_> = runs.iter().map(|r| r.generator().clone()).collect();
    let ratios: Vec<MixingConfig> =
        config.sweep.ratios.iter().map(|&ratio| MixingConfig { ratio, per_class: config.sweep.per_class }).collect();

    let mut rows = Vec::new();
    if config.sweep.real_sizes.is_empty() {
        rows = mixing_sweep(&train, &test, &gens, &ratios, &config.classifier, seed)?;
    } else {
        for &size in &config.sweep.real_sizes {
            let real = subsample(&train, size, &mut stream(derive_seed(seed, size as u64), rng::ids::DATA))?;
            rows.extend(mixing_sweep(&real, &test, &gens, &ratios, &config.classifier, seed)?);
        }
    }
    write_sweep_csv(&rows, &preset.classes, out.create("mixing.csv")?)?;
    Ok(Vec::new())
}

#[derive(Serialize)]
struct EpsilonRow {
    epsilon: f64,
    seed: u64,
    macro_f1: f64,
    accuracy: f64,
}

#[derive(Serialize)]
struct EpsilonSummary {
    epsilon: f64,
    seeds: usize,
    median_macro_f1: f64,
    median_accuracy: f64,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Utility of DP-trained generators over the budget grid, with the same seeds
/// at every budget. The config's `dp` section, when present, supplies delta,
/// clip norm and scope.
fn sweep_epsilon(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Check>> {
    let setup = &config.sweep.epsilon_setup;
    let base = config.dp.clone().map_or_else(|| DpConfig::new(1.0), Ok)?;
    let mut epsilons = config.sweep.epsilons.clone();
    epsilons.sort_by(f64::total_cmp);

    let mut detail = csv::Writer::from_writer(out.create("epsilon.csv")?);
    let mut summary = Vec::new();
    for &epsilon in &epsilons {
        let dp = DpConfig { epsilon, explicit_noise_std: None, ..base.clone() };
        let mut f1s = Vec::new();
        let mut accs = Vec::new();
        for s in 0..config.sweep.seeds as u64 {
            let score = dp_utility(config.seed + s, Some(&dp), setup)?;
            detail.serialize(EpsilonRow { epsilon, seed: config.seed + s, macro_f1: score.macro_f1, accuracy: score.accuracy })?;
            f1s.push(score.macro_f1);
            accs.push(score.accuracy);
        }
        summary.push(EpsilonSummary { epsilon, seeds: f1s.len(), median_macro_f1: median(&f1s), median_accuracy: median(&accs) });
    }
    detail.flush()?;
    drop(detail);
    let mut w = csv::Writer::from_writer(out.create("epsilon_summary.csv")?);
    for row in &summary {
        w.serialize(row)?;
    }
    w.flush()?;

    let drops = summary.windows(2).filter(|w| w[1].median_macro_f1 < w[0].median_macro_f1).count();
    Ok(vec![Check::new("utility-non-decreasing-in-epsilon", drops == 0, format!("{drops} decreasing steps"))])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tempdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn verify_theory_passes_and_lists_artifacts() {
        let dir = tempdir();
        let report = run(&ExperimentConfig::new(Scenario::VerifyTheory), dir.path()).unwrap();
        assert!(report.passed());
        assert_eq!(report.exit_code(), exit::SUCCESS);
        assert_eq!(report.artifacts, vec!["theory.json", "manifest.json"]);
        let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["scenario"], "verify-theory");
    }

    #[test]
    fn bench_consensus_is_byte_identical_across_runs() {
        let (a, b) = (tempdir(), tempdir());
        let cfg = ExperimentConfig::new(Scenario::BenchConsensus);
        assert!(run(&cfg, a.path()).unwrap().passed());
        run(&cfg, b.path()).unwrap();
        for f in ["latency.csv", "manifest.json"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let csv = std::fs::read_to_string(a.path().join("latency.csv")).unwrap();
        assert!(csv.starts_with("block_kb,miners,por_s,dpos_s\n"));
        assert_eq!(csv.lines().count(), 11);
    }

    #[test]
    fn invalid_config_writes_nothing() {
        let dir = tempdir();
        let target = dir.path().join("out");
        let mut cfg = ExperimentConfig::new(Scenario::BenchConsensus);
        cfg.consensus = None;
        let err = run(&cfg, &target).unwrap_err();
        assert_eq!(exit_code_for(&err), exit::CONFIG_ERROR);
        assert!(!target.exists());
    }

    #[test]
    fn output_dir_precedence() {
        let mut cfg = ExperimentConfig::new(Scenario::VerifyTheory);
        cfg.seed = 7;
        assert!(resolve_output_dir(&cfg, None).ends_with("verify-theory-seed7"));
        cfg.output_dir = Some("cfg-dir".into());
        assert_eq!(resolve_output_dir(&cfg, None), PathBuf::from("cfg-dir"));
        assert_eq!(resolve_output_dir(&cfg, Some(Path::new("flag"))), PathBuf::from("flag"));
    }

    fn tiny(scenario: Scenario) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(scenario);
        cfg.federation.num_clients = 3;
        cfg.federation.global_rounds = 2;
        cfg.federation.hp.local_epochs = 2;
        cfg.model = ModelConfig { disc_hidden: vec![4], gen_hidden: vec![4] };
        cfg.classifier.epochs = 3;
        cfg.data.jsd_samples = 50;
        if let Some(c) = cfg.consensus.as_mut() {
            c.partition_count = Some(3);
            c.committee_size = Some(3);
        }
        cfg
    }

    #[test]
    fn blockchain_scenario_writes_a_verified_chain() {
        let dir = tempdir();
        let report = run(&tiny(Scenario::FedganBlockchain), dir.path()).unwrap();
        assert!(report.passed(), "{:?}", report.checks);
        let chain = std::fs::read_to_string(dir.path().join("chain.jsonl")).unwrap();
        // genesis plus one block per class per round
        assert_eq!(chain.lines().count(), 1 + 3 * 2);
        for f in ["rounds.csv", "quality.csv", "accuracy.csv", "metrics.json", "confusion_real-only.csv", "generator_covid-19.ckpt"] {
            assert!(report.artifacts.iter().any(|a| a == f), "{f}");
        }
        let acc = std::fs::read_to_string(dir.path().join("accuracy.csv")).unwrap();
        assert_eq!(acc.lines().next(), Some("epoch,scheme,accuracy"));
        assert_eq!(acc.lines().count(), 1 + 2 * 3);
    }

    #[test]
    fn training_scenarios_are_deterministic() {
        for scenario in [Scenario::Standalone, Scenario::FedganCentral] {
            let (a, b) = (tempdir(), tempdir());
            let mut cfg = tiny(scenario);
            cfg.dp = Some(DpConfig::new(0.5).unwrap());
            let ra = run(&cfg, a.path()).unwrap();
            run(&cfg, b.path()).unwrap();
            for f in &ra.artifacts {
                assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{scenario} {f}");
            }
            let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.path().join("manifest.json")).unwrap()).unwrap();
            assert_eq!(manifest["dp_accounting"]["steps"], 2 * 2 * 2);
        }
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}

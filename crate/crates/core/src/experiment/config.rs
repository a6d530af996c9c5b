use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain::{ChainError, ConsensusPreset};
use crate::data::DatasetPreset;
use crate::error::{Error, Result};
use crate::eval::ClassifierConfig;
use crate::gan::TrainingHyperparams;
use crate::privacy::DpConfig;

use super::studies::{DpSweepSetup, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// One institution trains on its own shard only.
    Standalone,
    FedganCentral,
    FedganBlockchain,
    VerifyTheory,
    BenchConsensus,
    SweepMixing,
    SweepEpsilon,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Standalone,
        Scenario::FedganCentral,
        Scenario::FedganBlockchain,
        Scenario::VerifyTheory,
        Scenario::BenchConsensus,
        Scenario::SweepMixing,
        Scenario::SweepEpsilon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Standalone => "standalone",
            Scenario::FedganCentral => "fedgan-central",
            Scenario::FedganBlockchain => "fedgan-blockchain",
            Scenario::VerifyTheory => "verify-theory",
            Scenario::BenchConsensus => "bench-consensus",
            Scenario::SweepMixing => "sweep-mixing",
            Scenario::SweepEpsilon => "sweep-epsilon",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    fn needs_consensus(self) -> bool {
        matches!(self, Scenario::FedganBlockchain | Scenario::BenchConsensus)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A scenario run, read from JSON. Every section except `scenario` has defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Class-count preset: `toy-imbalanced`, `dark-covid` or `chest-covid`.
    #[serde(default = "default_dataset")]
    pub dataset: String,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub federation: FederationSettings,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dp: Option<DpConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus: Option<ConsensusSection>,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_dataset() -> String {
    "toy-imbalanced".into()
}

/// Toy blob data standing in for the X-ray classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Multiplies the preset's class counts.
    pub scale: f64,
    pub blob_std: f64,
    pub test_per_class: usize,
    /// Bins per dimension for the histogram divergence.
    pub jsd_bins: usize,
    /// Generated samples per divergence estimate.
    pub jsd_samples: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { scale: 1.0, blob_std: 0.5, test_per_class: 100, jsd_bins: 16, jsd_samples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationSettings {
    pub num_clients: usize,
    pub global_rounds: usize,
    pub hp: TrainingHyperparams,
}

impl Default for FederationSettings {
    fn default() -> Self {
        Self { num_clients: 5, global_rounds: 50, hp: TrainingHyperparams::default() }
    }
}

/// Consensus parameters: a named preset, a full parameter set, or a preset
/// with a few fields overridden.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsensusSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom: Option<ConsensusPreset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub committee_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_miners: Option<usize>,
}

impl ConsensusSection {
    pub fn preset(name: &str) -> Self {
        Self { preset: Some(name.into()), ..Default::default() }
    }

    /// The effective preset after overrides; `None` for an unknown preset name.
    pub fn resolve(&self) -> Option<ConsensusPreset> {
        let mut p = match (&self.custom, self.preset.as_deref()) {
            (Some(custom), _) => custom.clone(),
            (None, None | Some("edge-default")) => ConsensusPreset::edge_default(),
            (None, Some(_)) => return None,
        };
        if let Some(tau) = self.latency_threshold {
            p.params.latency_threshold = tau;
        }
        if let Some(k) = self.partition_count {
            p.params = crate::chain::ConsensusParams::balanced(
                p.params.latency_threshold,
                p.params.broadcast_coeff,
                p.params.block_kb,
                p.params.block_result_kb,
                p.params.block_cycles,
                k,
                p.params.committee_size,
            );
        }
        if let Some(m) = self.committee_size {
            p.params.committee_size = m;
        }
        if let Some(n) = self.num_miners {
            p.num_miners = n;
        }
        Some(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Synthetic-to-real ratios for `sweep-mixing`.
    pub ratios: Vec<f64>,
    pub per_class: bool,
    /// Real training-set sizes for `sweep-mixing`, drawn by random
    /// subsampling; empty means the full training set only.
    pub real_sizes: Vec<usize>,
    /// Budgets for `sweep-epsilon`.
    pub epsilons: Vec<f64>,
    /// Seeds per `sweep-epsilon` cell, starting at the run seed.
    pub seeds: usize,
    pub epsilon_setup: DpSweepSetup,
    /// Block sizes in kilobytes for `bench-consensus`.
    pub block_kbytes: Vec<f64>,
    /// Committee sizes for `bench-consensus`.
    pub committee_sizes: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ratios: vec![0.0, 0.5, 1.0, 2.0, 3.0],
            per_class: false,
            real_sizes: Vec::new(),
            epsilons: vec![0.01, 0.05, 0.1, 0.3, 0.5],
            seeds: 10,
            epsilon_setup: DpSweepSetup::default(),
            block_kbytes: (1..=10).map(|i| 50.0 * i as f64).collect(),
            committee_sizes: vec![10],
        }
    }
}

/// One violated invariant, located by a dotted path into the config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: 0,
            output_dir: None,
            dataset: default_dataset(),
            data: DataConfig::default(),
            federation: FederationSettings::default(),
            model: ModelConfig::default(),
            dp: None,
            consensus: match scenario {
                // one transaction per client per block, so K cannot exceed the client count
                Scenario::FedganBlockchain => Some(ConsensusSection {
                    partition_count: Some(FederationSettings::default().num_clients),
                    committee_size: Some(FederationSettings::default().num_clients),
                    ..ConsensusSection::preset("edge-default")
                }),
                Scenario::BenchConsensus => Some(ConsensusSection::preset("edge-default")),
                _ => None,
            },
            classifier: ClassifierConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn dataset_preset(&self) -> Option<DatasetPreset> {
        DatasetPreset::by_name(&self.dataset).map(|p| p.scaled(self.data.scale))
    }

    /// Every violated invariant; empty when the config can run.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |path: &str, message: String| out.push(Diagnostic { path: path.into(), message });

        if DatasetPreset::by_name(&self.dataset).is_none() {
            push("dataset", format!("unknown preset {:?}", self.dataset));
        }
        if !(self.data.scale > 0.0 && self.data.scale.is_finite()) {
            push("data.scale", "must be positive".into());
        }
        if !(self.data.blob_std > 0.0 && self.data.blob_std.is_finite()) {
            push("data.blob_std", "must be positive".into());
        }
        if self.data.test_per_class == 0 {
            push("data.test_per_class", "must be at least 1".into());
        }
        if self.data.jsd_bins < 2 {
            push("data.jsd_bins", "must be at least 2".into());
        }
        if self.data.jsd_samples == 0 {
            push("data.jsd_samples", "must be at least 1".into());
        }

        let fed = &self.federation;
        if fed.num_clients == 0 {
            push("federation.num_clients", "a federation needs at least one client".into());
        }
        if fed.global_rounds == 0 {
            push("federation.global_rounds", "at least one round is required".into());
        }
        hp_diagnostics("federation.hp", &fed.hp, &mut push);
        if let Some(preset) = self.dataset_preset() {
            if let Some(&smallest) = preset.original_counts.iter().min() {
                if smallest < fed.num_clients {
                    push(
                        "federation.num_clients",
                        format!("{} clients but the smallest class has only {smallest} samples", fed.num_clients),
                    );
                }
            }
        }
        if self.model.disc_hidden.contains(&0) {
            push("model.disc_hidden", "layer widths must be positive".into());
        }
        if self.model.gen_hidden.contains(&0) {
            push("model.gen_hidden", "layer widths must be positive".into());
        }
        if let Some(dp) = &self.dp {
            if let Err(e) = dp.validate() {
                push("dp", e.to_string());
            }
        }
        classifier_diagnostics("classifier", &self.classifier, &mut push);

        match (&self.consensus, self.scenario.needs_consensus()) {
            (None, true) => push("consensus", format!("section required by scenario {}", self.scenario)),
            (Some(section), _) => match section.resolve() {
                None => push("consensus.preset", format!("unknown preset {:?}", section.preset.as_deref().unwrap_or(""))),
                Some(p) => {
                    if let Err(ChainError::InvalidParams(msg)) = p.params.validate() {
                        push("consensus.params", format!("ConsensusParams invariant violated: {msg}"));
                    }
                    if p.params.committee_size > p.num_miners {
                        push(
                            "consensus.committee_size",
                            format!("committee of {} exceeds the {} miners", p.params.committee_size, p.num_miners),
                        );
                    }
                    if p.params.committee_size < 2 {
                        push("consensus.committee_size", "cross-checking needs at least 2 members".into());
                    }
                    if self.scenario == Scenario::FedganBlockchain && p.params.partition_count > fed.num_clients {
                        push(
                            "consensus.partition_count",
                            format!(
                                "K = {} exceeds the {} transactions each block carries (one per client)",
                                p.params.partition_count, fed.num_clients
                            ),
                        );
                    }
                    let (lo, hi) = p.compute_range;
                    if !(lo > 0.0 && lo <= hi) {
                        push("consensus.custom.compute_range", "needs 0 < low <= high".into());
                    }
                    let (lo, hi) = p.rate_range;
                    if !(lo > 0.0 && lo <= hi) {
                        push("consensus.custom.rate_range", "needs 0 < low <= high".into());
                    }
                }
            },
            (None, false) => {}
        }

        let sweep = &self.sweep;
        match self.scenario {
            Scenario::SweepMixing => {
                if sweep.ratios.is_empty() {
                    push("sweep.ratios", "at least one ratio is required".into());
                }
                if sweep.ratios.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
                    push("sweep.ratios", "ratios must be non-negative".into());
                }
                if sweep.real_sizes.contains(&0) {
                    push("sweep.real_sizes", "sizes must be positive".into());
                }
                if let Some(preset) = self.dataset_preset() {
                    let total = preset.original_total();
                    if let Some(big) = sweep.real_sizes.iter().find(|&&s| s > total) {
                        push("sweep.real_sizes", format!("{big} exceeds the {total} training samples"));
                    }
                }
            }
            Scenario::SweepEpsilon => {
                if sweep.epsilons.is_empty() {
                    push("sweep.epsilons", "at least one budget is required".into());
                }
                if sweep.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                    push("sweep.epsilons", "budgets must be positive".into());
                }
                if sweep.seeds == 0 {
                    push("sweep.seeds", "at least one seed is required".into());
                }
                let s = &sweep.epsilon_setup;
                if s.num_clients == 0 || s.global_rounds == 0 {
                    push("sweep.epsilon_setup", "clients and rounds must be positive".into());
                }
                if s.train_per_class < s.num_clients {
                    push("sweep.epsilon_setup.train_per_class", "every client needs at least one sample".into());
                }
                hp_diagnostics("sweep.epsilon_setup.hp", &s.hp, &mut push);
                classifier_diagnostics("sweep.epsilon_setup.classifier", &s.classifier, &mut push);
            }
            Scenario::BenchConsensus => {
                if sweep.block_kbytes.is_empty() || sweep.block_kbytes.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
                    push("sweep.block_kbytes", "needs positive block sizes".into());
                }
                if sweep.committee_sizes.is_empty() || sweep.committee_sizes.iter().any(|&m| m < 2) {
                    push("sweep.committee_sizes", "committees need at least 2 members".into());
                }
                if let Some(p) = self.consensus.as_ref().and_then(ConsensusSection::resolve) {
                    if let Some(&m) = sweep.committee_sizes.iter().find(|&&m| m > p.num_miners) {
                        push("sweep.committee_sizes", format!("committee of {m} exceeds the {} miners", p.num_miners));
                    }
                }
            }
            _ => {}
        }
        out
    }
}

fn hp_diagnostics(path: &str, hp: &TrainingHyperparams, push: &mut impl FnMut(&str, String)) {
    if hp.batch_size == 0 {
        push(&format!("{path}.batch_size"), "must be at least 1".into());
    }
    if !(hp.learning_rate > 0.0 && hp.learning_rate.is_finite()) {
        push(&format!("{path}.learning_rate"), "must be positive".into());
    }
    if hp.noise_dim == 0 {
        push(&format!("{path}.noise_dim"), "must be at least 1".into());
    }
    if !(0.0..1.0).contains(&hp.dropout) {
        push(&format!("{path}.dropout"), "must lie in [0, 1)".into());
    }
}

fn classifier_diagnostics(path: &str, c: &ClassifierConfig, push: &mut impl FnMut(&str, String)) {
    if c.batch_size == 0 {
        push(&format!("{path}.batch_size"), "must be at least 1".into());
    }
    if !(c.learning_rate > 0.0 && c.learning_rate.is_finite()) {
        push(&format!("{path}.learning_rate"), "must be positive".into());
    }
    if c.hidden.contains(&0) {
        push(&format!("{path}.hidden"), "layer widths must be positive".into());
    }
}

/// Parses `path` and lists its diagnostics. Fails only if the file cannot be
/// read or parsed.
pub fn validate_file(path: impl AsRef<Path>) -> Result<Vec<Diagnostic>> {
    Ok(ExperimentConfig::load(path)?.diagnostics())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_clean() {
        let c = ExperimentConfig::from_json(r#"{"scenario": "verify-theory"}"#).unwrap();
        assert!(c.diagnostics().is_empty(), "{:?}", c.diagnostics());
        for s in Scenario::ALL {
            assert!(ExperimentConfig::new(s).diagnostics().is_empty(), "{s}");
            assert_eq!(Scenario::from_name(s.name()), Some(s));
        }
    }

    #[test]
    fn bench_without_consensus_names_the_path() {
        let c = ExperimentConfig::from_json(r#"{"scenario": "bench-consensus"}"#).unwrap();
        let d = c.diagnostics();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].path, "consensus");
    }

    #[test]
    fn non_positive_tau_cites_the_params_invariant() {
        let c = ExperimentConfig::from_json(
            r#"{"scenario": "bench-consensus", "consensus": {"preset": "edge-default", "latency_threshold": 0}}"#,
        )
        .unwrap();
        let d = c.diagnostics();
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].path, "consensus.params");
        assert!(d[0].message.contains("ConsensusParams") && d[0].message.contains("tau"));
    }

    #[test]
    fn blockchain_partition_must_fit_the_block() {
        let mut c = ExperimentConfig::new(Scenario::FedganBlockchain);
        assert!(c.diagnostics().is_empty());
        c.consensus = Some(ConsensusSection::preset("edge-default"));
        assert_eq!(c.diagnostics()[0].path, "consensus.partition_count");
    }

    #[test]
    fn rejects_unknown_fields_and_presets() {
        assert!(ExperimentConfig::from_json(r#"{"scenario": "verify-theory", "sed": 1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"scenario": "nope"}"#).is_err());
        let c = ExperimentConfig::from_json(r#"{"scenario": "standalone", "dataset": "mnist"}"#).unwrap();
        assert_eq!(c.diagnostics()[0].path, "dataset");
    }

    #[test]
    fn collects_several_diagnostics() {
        let c = ExperimentConfig::from_json(
            r#"{"scenario": "sweep-epsilon", "federation": {"num_clients": 0}, "dp": {"epsilon": -1}, "sweep": {"epsilons": []}}"#,
        )
        .unwrap();
        let paths: Vec<String> = c.diagnostics().into_iter().map(|d| d.path).collect();
        assert!(paths.contains(&"federation.num_clients".to_string()));
        assert!(paths.contains(&"dp".to_string()));
        assert!(paths.contains(&"sweep.epsilons".to_string()));
    }
}

//! Reusable experiment building blocks: per-class generator training, the
//! federated-versus-standalone comparison, the privacy utility probe, the
//! mixing trial, and the closed-form theory checks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::Blockchain;
use crate::data::{blobs, gaussian_mixture, three_class_centers};
use crate::divergence::{federated_optimum, optimal_discriminator, standalone_optimum, value_function, DiscreteDistribution, LN_4};
use crate::error::{Error, Result};
use crate::eval::{empirical_jsd, evaluate, mixing_sweep, train_classifier, ClassifierConfig, LabeledDataset, MixingConfig, SweepRow};
use crate::federation::{
    generate_synthetic, make_clients, partition_iid, run_training, run_training_on, Aggregator, FederationConfig, RoundRecord,
};
use crate::gan::TrainingHyperparams;
use crate::nn::{Activation, Architecture, Matrix, Network};
use crate::privacy::DpConfig;
use crate::rng::{self, derive_seed, stream, RngStream};

/// Hidden-layer widths of the discriminator and generator MLPs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub disc_hidden: Vec<usize>,
    pub gen_hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { disc_hidden: vec![32, 32], gen_hidden: vec![32, 32] }
    }
}

impl ModelConfig {
    /// Widths of the full-scale image networks (five 128-unit discriminator
    /// layers; generator 256, 256, 256, 128, 128; noise 64, batch 32). For
    /// reference only; nothing here trains at that size.
    pub fn full_scale() -> (Self, TrainingHyperparams) {
        let model = Self { disc_hidden: vec![128; 5], gen_hidden: vec![256, 256, 256, 128, 128] };
        let hp = TrainingHyperparams { noise_dim: 64, batch_size: 32, ..TrainingHyperparams::default() };
        (model, hp)
    }

    /// Fresh discriminator (leaky-relu hidden, sigmoid out) and generator
    /// (leaky-relu hidden, identity out) for `data_dim`-wide samples.
    pub fn build<R: Rng + ?Sized>(&self, data_dim: usize, noise_dim: usize, rng: &mut R) -> Result<(Network, Network)> {
        let disc = Architecture::mlp(data_dim, &self.disc_hidden, 1, Activation::Sigmoid).init(rng)?;
        let gen = Architecture::mlp(noise_dim, &self.gen_hidden, data_dim, Activation::Identity).init(rng)?;
        Ok((disc, gen))
    }
}

/// One class's federated GAN run.
#[derive(Debug, Clone)]
pub struct ClassRun {
    pub class: usize,
    pub history: Vec<RoundRecord>,
}

impl ClassRun {
    pub fn generator(&self) -> &Network {
        &self.history.last().expect("at least one round").global_gen
    }
}

/// Trains one GAN per class, each class's samples split iid over
/// `num_clients` institutions that keep ids `0..num_clients` across classes.
///
/// Each class draws its models, shards and client streams from
/// `derive_seed(seed, class)`. With a chain, every round of every class
/// appends one block to it.
#[allow(clippy::too_many_arguments)]
pub fn train_class_generators(
    train: &LabeledDataset,
    num_clients: usize,
    global_rounds: usize,
    hp: &TrainingHyperparams,
    model: &ModelConfig,
    dp: Option<&DpConfig>,
    seed: u64,
    mut chain: Option<&mut Blockchain<RngStream>>,
) -> Result<Vec<ClassRun>> {
    let config = FederationConfig { num_clients, global_rounds, hp: hp.clone(), aggregator: Aggregator::CentralCloud };
    (0..train.num_classes())
        .map(|class| {
            let class_seed = derive_seed(seed, class as u64);
            let (disc, gen) = model.build(train.samples().cols(), hp.noise_dim, &mut stream(class_seed, rng::ids::INIT))?;
            let mut clients = make_clients(&train.class_samples(class), num_clients, &disc, &gen, class_seed, dp.cloned())?;
            let history = run_training_on(&config, &mut clients, &disc, &gen, chain.as_deref_mut())?;
            Ok(ClassRun { class, history })
        })
        .collect()
}

/// Institution `index`'s share of every class, split exactly as
/// [`train_class_generators`] splits it among `num_clients` institutions.
pub fn institution_shard(train: &LabeledDataset, num_clients: usize, index: usize, seed: u64) -> Result<LabeledDataset> {
    if index >= num_clients {
        return Err(Error::arg(format!("institution {index} of {num_clients}")));
    }
    let mut out: Option<LabeledDataset> = None;
    for class in 0..train.num_classes() {
        let class_seed = derive_seed(seed, class as u64);
        let shard =
            partition_iid(&train.class_samples(class), num_clients, &mut stream(class_seed, rng::ids::PARTITION))?.swap_remove(index);
        let part = LabeledDataset::new(shard.clone(), vec![class; shard.rows()], train.num_classes())?;
        out = Some(match out {
            None => part,
            Some(acc) => acc.concat(&part)?,
        });
    }
    out.ok_or(Error::Empty("classes"))
}

/// The federated-versus-standalone comparison on a 2-D Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComparisonSetup {
    pub num_clients: usize,
    pub global_rounds: usize,
    /// Samples held by each institution.
    pub shard_size: usize,
    pub centers: Vec<Vec<f64>>,
    pub std: f64,
    pub hp: TrainingHyperparams,
    pub model: ModelConfig,
    /// Fresh mixture samples (and as many generated ones) per divergence estimate.
    pub eval_samples: usize,
    pub bins: usize,
}

impl Default for ComparisonSetup {
    fn default() -> Self {
        Self {
            num_clients: 5,
            global_rounds: 50,
            shard_size: 10,
            centers: vec![vec![-1.0, 0.0], vec![1.0, 0.0]],
            std: 0.6,
            hp: TrainingHyperparams::default(),
            model: ModelConfig::default(),
            eval_samples: 4000,
            bins: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonOutcome {
    pub federated_jsd: f64,
    /// One entry per institution, each trained alone on its shard.
    pub standalone_jsd: Vec<f64>,
}

impl ComparisonOutcome {
    pub fn best_standalone(&self) -> f64 {
        self.standalone_jsd.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn federated_wins(&self) -> bool {
        self.federated_jsd <= self.best_standalone()
    }
}

/// Trains the federation once and every institution alone (the same number of
/// local epochs on its own shard, from the same initial models and client
/// streams), then scores each final generator by histogram JSD against fresh
/// mixture samples.
pub fn compare_fed_standalone(seed: u64, setup: &ComparisonSetup) -> Result<ComparisonOutcome> {
    let n = setup.num_clients;
    let data = gaussian_mixture(&mut stream(seed, rng::ids::DATA), setup.shard_size * n, &setup.centers, setup.std)?;
    let truth = gaussian_mixture(&mut stream(seed, rng::ids::TEST_DATA), setup.eval_samples, &setup.centers, setup.std)?;
    let dim = data.cols();
    let (disc, gen) = setup.model.build(dim, setup.hp.noise_dim, &mut stream(seed, rng::ids::INIT))?;
    let score = |g: &Network| -> Result<f64> {
        let fake = generate_synthetic(g, &mut stream(seed, rng::ids::EVAL), setup.eval_samples)?;
        empirical_jsd(&truth, &fake, setup.bins)
    };

    let config =
        FederationConfig { num_clients: n, global_rounds: setup.global_rounds, hp: setup.hp.clone(), aggregator: Aggregator::CentralCloud };
    let mut clients = make_clients(&data, n, &disc, &gen, seed, None)?;
    let history = run_training(&config, &mut clients, &disc, &gen, seed)?;
    let federated_jsd = score(&history.last().expect("rounds >= 1").global_gen)?;

    let solo = FederationConfig { num_clients: 1, ..config };
    let standalone_jsd = make_clients(&data, n, &disc, &gen, seed, None)?
        .into_iter()
        .map(|client| {
            let history = run_training(&solo, &mut [client], &disc, &gen, seed)?;
            score(&history.last().expect("rounds >= 1").global_gen)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonOutcome { federated_jsd, standalone_jsd })
}

/// The privacy utility probe: per-class DP FedGAN on 3-class blobs, a
/// classifier trained on synthetic samples only, scored on real test data.
///
/// The defaults use linear generators and logistic discriminators with a
/// small rate and many local epochs. The calibrated noise at budgets below 1
/// dwarfs a clipped gradient, and only a few parameters with many averaged
/// steps leave any signal to measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpSweepSetup {
    pub num_clients: usize,
    pub global_rounds: usize,
    pub hp: TrainingHyperparams,
    pub model: ModelConfig,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub blob_std: f64,
    pub synthetic_per_class: usize,
    pub classifier: ClassifierConfig,
}

impl Default for DpSweepSetup {
    fn default() -> Self {
        Self {
            num_clients: 5,
            global_rounds: 50,
            hp: TrainingHyperparams { local_epochs: 340, batch_size: 32, learning_rate: 3e-4, ..TrainingHyperparams::default() },
            model: ModelConfig { disc_hidden: vec![], gen_hidden: vec![] },
            train_per_class: 50,
            test_per_class: 100,
            blob_std: 0.35,
            synthetic_per_class: 100,
            classifier: ClassifierConfig { hidden: vec![8], epochs: 30, learning_rate: 0.05, batch_size: 16 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityScore {
    pub macro_f1: f64,
    pub accuracy: f64,
}

/// Utility of DP-trained generators; `dp = None` trains without noise.
///
/// Every budget sees the same data, initial models and client streams, so a
/// sweep over budgets compares like with like.
pub fn dp_utility(seed: u64, dp: Option<&DpConfig>, setup: &DpSweepSetup) -> Result<UtilityScore> {
    let centers = three_class_centers();
    let counts = vec![setup.train_per_class; centers.len()];
    let train = blobs(&mut stream(seed, rng::ids::DATA), &counts, &centers, setup.blob_std)?;
    let test = blobs(&mut stream(seed, rng::ids::TEST_DATA), &vec![setup.test_per_class; centers.len()], &centers, setup.blob_std)?;
    let runs = train_class_generators(&train, setup.num_clients, setup.global_rounds, &setup.hp, &setup.model, dp, seed, None)?;
    let synthetic = synthesize(&runs, setup.synthetic_per_class, &mut stream(seed, rng::ids::EVAL))?;
    let net = train_classifier(&synthetic, &setup.classifier, &mut stream(seed, rng::ids::CLASSIFIER))?;
    let eval = evaluate(&net, &test)?;
    Ok(UtilityScore { macro_f1: eval.metrics.macro_f1(), accuracy: eval.accuracy })
}

/// `per_class` generated samples from each class's final generator, labeled by class.
pub fn synthesize<R: Rng + ?Sized>(runs: &[ClassRun], per_class: usize, rng: &mut R) -> Result<LabeledDataset> {
    let dim = runs.first().ok_or(Error::Empty("class runs"))?.generator().output_dim();
    let mut samples = Matrix::zeros(0, dim);
    let mut labels = Vec::new();
    for run in runs {
        samples = samples.vstack(&generate_synthetic(run.generator(), rng, per_class)?)?;
        labels.extend(std::iter::repeat_n(run.class, per_class));
    }
    LabeledDataset::new(samples, labels, runs.len())
}

/// The mixing-ratio trial on an imbalanced 3-class blob set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixingSetup {
    pub counts: Vec<usize>,
    pub test_per_class: usize,
    pub blob_std: f64,
    pub num_clients: usize,
    pub global_rounds: usize,
    pub hp: TrainingHyperparams,
    pub model: ModelConfig,
    pub classifier: ClassifierConfig,
    pub ratios: Vec<MixingConfig>,
}

impl Default for MixingSetup {
    fn default() -> Self {
        Self {
            counts: vec![15, 50, 50],
            test_per_class: 100,
            blob_std: 0.5,
            num_clients: 3,
            global_rounds: 50,
            hp: TrainingHyperparams::default(),
            model: ModelConfig::default(),
            classifier: ClassifierConfig::default(),
            ratios: [0.0, 0.5, 1.0, 2.0, 3.0].into_iter().map(MixingConfig::new).collect(),
        }
    }
}

/// Trains per-class FedGAN generators on the real training set, then runs
/// the mixing sweep against a balanced real test set.
pub fn mixing_trial(seed: u64, setup: &MixingSetup) -> Result<Vec<SweepRow>> {
    let centers = three_class_centers();
    let train = blobs(&mut stream(seed, rng::ids::DATA), &setup.counts, &centers, setup.blob_std)?;
    let test = blobs(&mut stream(seed, rng::ids::TEST_DATA), &vec![setup.test_per_class; centers.len()], &centers, setup.blob_std)?;
    let runs = train_class_generators(&train, setup.num_clients, setup.global_rounds, &setup.hp, &setup.model, None, seed, None)?;
    let gens: Vec<Network> = runs.iter().map(|r| r.generator().clone()).collect();
    mixing_sweep(&train, &test, &gens, &setup.ratios, &setup.classifier, seed)
}

/// Closed-form identities of the value function, checked on random pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub pairs: usize,
    /// Largest `|V(p_d, p_g, D*) - (-ln 4 + 2 JSD)|`.
    pub max_optimum_error: f64,
    /// Largest `|V(p, p, D*) + ln 4|`.
    pub max_matched_error: f64,
    /// Largest `|federated_optimum(N matched pairs) + N ln 4|` over `N = 1..=10`.
    pub max_federated_error: f64,
}

impl TheoryReport {
    pub const OPTIMUM_TOLERANCE: f64 = 1e-10;
    pub const MATCHED_TOLERANCE: f64 = 1e-12;

    pub fn passed(&self) -> bool {
        self.max_optimum_error <= Self::OPTIMUM_TOLERANCE
            && self.max_matched_error <= Self::MATCHED_TOLERANCE
            && self.max_federated_error <= Self::MATCHED_TOLERANCE
    }
}

/// A random distribution on `2..=max_support` points; some masses may be zero.
pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, size: usize) -> Result<DiscreteDistribution> {
    loop {
        let weights: Vec<f64> = (0..size).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random::<f64>() }).collect();
        if weights.iter().any(|&w| w > 0.0) {
            return DiscreteDistribution::from_weights(&weights);
        }
    }
}

pub fn theory_report(seed: u64, pairs: usize, max_support: usize) -> Result<TheoryReport> {
    if max_support < 2 {
        return Err(Error::arg("support must allow at least two points"));
    }
    let mut rng = stream(seed, rng::ids::DATA);
    let mut report = TheoryReport { pairs, max_optimum_error: 0.0, max_matched_error: 0.0, max_federated_error: 0.0 };
    for _ in 0..pairs {
        let size = rng.random_range(2..=max_support);
        let pd = random_distribution(&mut rng, size)?;
        let pg = random_distribution(&mut rng, size)?;
        let at_opt = value_function(&pd, &pg, &optimal_discriminator(&pd, &pg)?)?;
        report.max_optimum_error = report.max_optimum_error.max((at_opt - standalone_optimum(&pd, &pg)?).abs());
        let matched = value_function(&pd, &pd, &optimal_discriminator(&pd, &pd)?)?;
        report.max_matched_error = report.max_matched_error.max((matched + LN_4).abs());
    }
    for n in 1..=10 {
        let sites: Vec<_> = (0..n)
            .map(|_| {
                let size = rng.random_range(2..=max_support);
                random_distribution(&mut rng, size).map(|p| (p.clone(), p))
            })
            .collect::<Result<_>>()?;
        let err = (federated_optimum(&sites)? + n as f64 * LN_4).abs();
        report.max_federated_error = report.max_federated_error.max(err);
    }
    Ok(report)
}

//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! Oracles here are written independently of the library wherever the library
//! computes the quantity under test.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use fedgan::chain::{
    dpos_latency, latency_benchmark, majority_approves, por_latency, por_verify, reputation_score, select_miners, Block, BlockReceipt,
    ConsensusParams, ConsensusPreset, KeyRegistry, Ledger, MinerProfile, Transaction, VotePolicy, KB_TO_KBIT,
};
use fedgan::data::gaussian_mixture;
use fedgan::divergence::{federated_optimum, optimal_discriminator, value_function, DiscreteDistribution};
use fedgan::experiment::{
    compare_fed_standalone, dp_utility, median, mixing_trial, ComparisonSetup, DpSweepSetup, MixingSetup, ModelConfig,
};
use fedgan::federation::{make_clients, run_training, Aggregator, ChainSetup, FederationConfig};
use fedgan::gan::{backward, GeneratorLoss, Objective, TrainingHyperparams};
use fedgan::nn::{Activation, Architecture, Matrix, Network};
use fedgan::privacy::{dp_step, DpConfig};
use fedgan::rng::{ids, stream};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const LN4: f64 = 1.386_294_361_119_890_6;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn random_dist(rng: &mut impl Rng, size: usize) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..size).map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random::<f64>() }).collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 {
            return w.iter().map(|x| x / s).collect();
        }
    }
}

fn oracle_jsd(p: &[f64], q: &[f64]) -> f64 {
    let kl_to_mid =
        |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * (x / (0.5 * (x + y))).ln()).sum() };
    0.5 * kl_to_mid(p, q) + 0.5 * kl_to_mid(q, p)
}

fn c1_standalone_optimum() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(101, 0);
    let (mut worst_opt, mut worst_matched) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let size = rng.random_range(2..=8);
        let p = random_dist(&mut rng, size);
        let q = random_dist(&mut rng, size);
        let pd = DiscreteDistribution::new(p.clone()).unwrap();
        let pg = DiscreteDistribution::new(q.clone()).unwrap();
        let v = value_function(&pd, &pg, &optimal_discriminator(&pd, &pg).unwrap()).unwrap();
        worst_opt = worst_opt.max((v - (-LN4 + 2.0 * oracle_jsd(&p, &q))).abs());
        let same = value_function(&pd, &pd, &optimal_discriminator(&pd, &pd).unwrap()).unwrap();
        worst_matched = worst_matched.max((same + LN4).abs());
    }
    let t = start.elapsed();
    outcome(
        worst_opt <= 1e-10 && worst_matched <= 1e-12 && within(t, 5.0),
        format!("max |V - (-ln4 + 2JSD)| = {worst_opt:.2e}, max |V(p,p) + ln4| = {worst_matched:.2e}, {:.2}s", t.as_secs_f64()),
    )
}

fn c2_federated_optimum() -> Outcome {
    let mut rng = stream(102, 0);
    let mut worst = 0.0f64;
    for n in 1..=10 {
        let pairs: Vec<_> = (0..n)
            .map(|_| {
                let size = rng.random_range(2..=8);
                let p = DiscreteDistribution::new(random_dist(&mut rng, size)).unwrap();
                (p.clone(), p)
            })
            .collect();
        worst = worst.max((federated_optimum(&pairs).unwrap() + n as f64 * LN4).abs());
    }
    outcome(worst <= 1e-12, format!("max |V_fed + N ln4| over N = 1..10: {worst:.2e}"))
}

/// Rows of `x` whose hidden pre-activations in `net` all sit at least `margin` from 0.
fn away_from_kinks(net: &Network, x: &Matrix, margin: f64) -> Vec<usize> {
    let trace = net.forward_trace(x).unwrap();
    let hidden = net.layers().len() - 1;
    (0..x.rows())
        .filter(|&r| {
            (0..hidden).all(|l| {
                let layer = &net.layers()[l];
                let input = trace.outputs[l].row(r);
                (0..layer.weights.rows()).all(|o| {
                    let z: f64 = layer.weights.row(o).iter().zip(input).map(|(w, v)| w * v).sum::<f64>() + layer.bias[o];
                    z.abs() >= margin
                })
            })
        })
        .collect()
}

/// Up to `batch` rows of `x` that stay clear of kinks; panics if none do.
fn smooth_rows(net: &Network, x: &Matrix, batch: usize, margin: f64) -> Matrix {
    let keep = away_from_kinks(net, x, margin);
    assert!(!keep.is_empty(), "every candidate row sits on a kink");
    x.select_rows(&keep[..batch.min(keep.len())])
}

fn random_rows(rng: &mut impl Rng, n: usize, dim: usize) -> Matrix {
    Matrix::from_vec(n, dim, (0..n * dim).map(|_| StandardNormal.sample(&mut *rng)).collect()).unwrap()
}

fn hidden_widths(rng: &mut impl Rng) -> Vec<usize> {
    (0..rng.random_range(0..=2)).map(|_| rng.random_range(1..=16)).collect()
}

type Scorer = Box<dyn Fn(&Network) -> (f64, Vec<f64>)>;

fn c3_gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let h = 1e-5;
    let margin = 1e-2;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut rng = stream(103, 0);
    for case in 0..50 {
        let dim = rng.random_range(1..=4);
        let batch = 6;
        // logistic discriminator for the generator case keeps kinks out of the chain
        let (net, score): (Network, Scorer) = match case % 3 {
            0 => {
                let net = Architecture::mlp(dim, &hidden_widths(&mut rng), 1, Activation::Sigmoid).init(&mut rng).unwrap();
                let real = random_rows(&mut rng, batch * 4, dim);
                let fake = random_rows(&mut rng, batch * 4, dim);
                let real = smooth_rows(&net, &real, batch, margin);
                let fake = smooth_rows(&net, &fake, batch, margin);
                (net, Box::new(move |n: &Network| flatten(backward(n, &real, Objective::Discriminator { fake: &fake }).unwrap())))
            }
            1 => {
                let noise_dim = rng.random_range(1..=3);
                let net = Architecture::mlp(noise_dim, &hidden_widths(&mut rng), dim, Activation::Identity).init(&mut rng).unwrap();
                let disc = Architecture::mlp(dim, &[], 1, Activation::Sigmoid).init(&mut rng).unwrap();
                let z = random_rows(&mut rng, batch * 4, noise_dim);
                let z = smooth_rows(&net, &z, batch, margin);
                let kind = if rng.random_bool(0.5) { GeneratorLoss::Saturating } else { GeneratorLoss::NonSaturating };
                (net, Box::new(move |n: &Network| flatten(backward(n, &z, Objective::Generator { disc: &disc, kind }).unwrap())))
            }
            _ => {
                let classes = rng.random_range(2..=4);
                let net = Architecture::mlp(dim, &hidden_widths(&mut rng), classes, Activation::Softmax).init(&mut rng).unwrap();
                let x = random_rows(&mut rng, batch * 4, dim);
                let x = smooth_rows(&net, &x, batch, margin);
                let labels: Vec<usize> = (0..x.rows()).map(|_| rng.random_range(0..classes)).collect();
                (net, Box::new(move |n: &Network| flatten(backward(n, &x, Objective::ClassifierCe { labels: &labels }).unwrap())))
            }
        };
        let (_, analytic) = score(&net);
        for (i, &a) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            *plus.params_mut().nth(i).unwrap() += h;
            let mut minus = net.clone();
            *minus.params_mut().nth(i).unwrap() -= h;
            let numeric = (score(&plus).0 - score(&minus).0) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-4 && within(t, 30.0),
        format!("50 nets, {checked} parameters, max relative error {worst:.2e}, {:.2}s", t.as_secs_f64()),
    )
}

fn flatten((loss, g): (f64, fedgan::nn::Gradients)) -> (f64, Vec<f64>) {
    (loss, g.values().collect())
}

fn c4_fed_beats_standalone() -> Outcome {
    let start = Instant::now();
    let setup = ComparisonSetup::default();
    let mut wins = 0;
    let mut cells = Vec::new();
    for seed in 0..10 {
        let o = compare_fed_standalone(seed, &setup).unwrap();
        wins += usize::from(o.federated_jsd <= o.best_standalone());
        cells.push(format!("{:.3}/{:.3}", o.federated_jsd, o.best_standalone()));
    }
    let t = start.elapsed();
    outcome(
        wins >= 7 && within(t, 300.0),
        format!("federated <= best standalone in {wins}/10 seeds (fed/best: {}), {:.1}s", cells.join(" "), t.as_secs_f64()),
    )
}

fn c5_latency_grid() -> Outcome {
    let start = Instant::now();
    let preset = ConsensusPreset::edge_default();
    let roster = preset.roster(&mut stream(105, 0));
    let sizes: Vec<f64> = (1..=10).map(|i| 50.0 * i as f64).collect();
    let rows = latency_benchmark(&roster, &preset.params, &sizes, &[10]).unwrap();
    let faster = rows.iter().all(|r| r.por_s < r.dpos_s);
    let gaps: Vec<f64> = rows.iter().map(|r| r.dpos_s - r.por_s).collect();
    let growing = gaps.windows(2).all(|w| w[1] >= w[0]);
    let t = start.elapsed();
    outcome(
        rows.len() == 10 && faster && growing && preset.transactions_per_block == 10 && within(t, 1.0),
        format!(
            "{} grid points, por < dpos: {faster}, gap non-decreasing: {growing} ({:.1}s .. {:.1}s), {:.3}s",
            rows.len(),
            gaps[0],
            gaps[gaps.len() - 1],
            t.as_secs_f64()
        ),
    )
}

fn c6_por_dominance() -> Outcome {
    let mut rng = stream(106, 0);
    let mut violations = 0;
    for _ in 0..10_000 {
        let k = rng.random_range(2..=20);
        let n = rng.random_range(3..=30);
        let block = rng.random_range(50.0..=500.0) * KB_TO_KBIT;
        let result = rng.random_range(5.0..=50.0) * KB_TO_KBIT;
        let cycles = rng.random_range(1e3..=1e7);
        let xi = rng.random_range(0.0..=1.0);
        let params = ConsensusParams::balanced(1.0, xi, block, result, cycles, k, n);
        let rate = rng.random_range(100.0..=250.0);
        let miner = MinerProfile::new(0, rng.random_range(1e3..=1e6), rate, rate, 1.0);
        if por_latency(&miner, &params) >= dpos_latency(&miner, &params, n) {
            violations += 1;
        }
    }
    let params = ConsensusParams::balanced(1.0, 0.5, 4000.0, 400.0, 2e5, 1, 2);
    let miner = MinerProfile::new(0, 5e5, 180.0, 180.0, 1.0);
    let gap = (por_latency(&miner, &params) - dpos_latency(&miner, &params, 2)).abs();
    outcome(violations == 0 && gap <= 1e-12, format!("{violations} violations in 10^4 draws; K=1, N=2 gap {gap:.1e}"))
}

fn c7_reputation() -> Outcome {
    let zero = reputation_score(1.0, 1.0).unwrap() == 0.0 && reputation_score(0.37, 0.37).unwrap() == 0.0;
    let tau = 2.0;
    let grid: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01).collect();
    let scores: Vec<f64> = grid.iter().map(|&t| reputation_score(t, tau).unwrap()).collect();
    let decreasing = scores.windows(2).all(|w| w[1] < w[0]);
    let formula = grid.iter().zip(&scores).all(|(&t, &s)| (s - ((1.0 - t / tau).exp() - 1.0)).abs() < 1e-15);

    let mut rng = stream(107, 0);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let size = rng.random_range(1..=30);
        let tau = rng.random_range(0.1..=5.0);
        let roster: Vec<MinerProfile> = (0..size)
            .map(|id| {
                let mut m = MinerProfile::new(id, 1e5, 150.0, 150.0, tau);
                // coarse latencies force ties
                m.measured_latency = rng.random_range(0..8) as f64 * tau / 4.0;
                m
            })
            .collect();
        let m = rng.random_range(1..=size as usize);
        let mut oracle: Vec<(f64, u32)> = roster.iter().map(|r| ((1.0 - r.measured_latency / tau).exp() - 1.0, r.id)).collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let expected: Vec<u32> = oracle.iter().take(m).map(|x| x.1).collect();
        let got: Vec<u32> = select_miners(&roster, m, tau).unwrap().iter().map(|p| p.id).collect();
        mismatches += usize::from(got != expected);
    }
    outcome(
        zero && decreasing && formula && mismatches == 0,
        format!("psi(tau,tau)=0: {zero}; strictly decreasing on 1000 points: {decreasing}; top-M mismatches: {mismatches}/1000"),
    )
}

fn c8_majority_rule() -> Outcome {
    let mut rule_errors = 0;
    let mut cases = 0;
    for m in 1..=20usize {
        for f in 0..=m {
            cases += 1;
            let expected = 100 * (m - f) >= 51 * m;
            rule_errors += usize::from(majority_approves(m - f, m, 0.51) != expected);
        }
    }

    // the same table through full committee verification with f rejecting members
    let mut rng = stream(108, 0);
    let mut registry = KeyRegistry::new();
    for s in 0..4 {
        registry.register(s, &mut rng);
    }
    let txs: Vec<Transaction> = (0..4).map(|s| Transaction::signed(&registry, s, 1, vec![s as u8; 8]).unwrap()).collect();
    let block = Block::new(1, Block::genesis().hash, txs, 0, 2);
    let mut verify_errors = 0;
    for m in 2..=20usize {
        let committee: Vec<MinerProfile> = (0..m as u32).map(|id| MinerProfile::new(id, 1e5, 150.0, 150.0, 1.0)).collect();
        let params = ConsensusParams::balanced(1.0, 0.5, 4000.0, 400.0, 2e5, 2, m);
        for f in 0..=m {
            let honesty: BTreeMap<u32, VotePolicy> = (0..f as u32).map(|id| (id, VotePolicy::AlwaysReject)).collect();
            let verdict = por_verify(&block, &committee, &params, &mut rng, &honesty, &registry).unwrap();
            verify_errors += usize::from(verdict.approved != (100 * (m - f) >= 51 * m));
        }
    }
    outcome(
        rule_errors == 0 && verify_errors == 0,
        format!("{cases} (M, f) cases: {rule_errors} rule errors, {verify_errors} committee-verification errors"),
    )
}

fn c9_dp() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(109, 0);
    let net = Architecture::mlp(3, &[5], 2, Activation::Sigmoid).init(&mut rng).unwrap();
    let mut g = net.zero_gradients();
    for v in g.values_mut() {
        *v = rng.random_range(-0.1..0.1);
    }
    let quiet = DpConfig::new(0.3).unwrap().with_noise_std(0.0);
    let bit_equal = dp_step(&net, &g, 0.05, &quiet, &mut rng).unwrap() == net.sgd_step(&g, 0.05).unwrap();

    let cfg = DpConfig::new(0.3).unwrap();
    let target = cfg.clip_norm * (2.0 * (1.25f64 / cfg.delta).ln()).sqrt() / cfg.epsilon;
    let wide =
        Network::new(vec![fedgan::nn::Layer::new(Matrix::zeros(1000, 100), vec![0.0; 1000], Activation::Identity).unwrap()]).unwrap();
    let noisy = dp_step(&wide, &wide.zero_gradients(), 1.0, &cfg, &mut rng).unwrap();
    let draws: Vec<f64> = noisy.params().collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let std = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
    let std_ok = draws.len() >= 100_000 && (std / target - 1.0).abs() <= 0.02;

    let setup = DpSweepSetup::default();
    let epsilons = [0.01, 0.05, 0.1, 0.3, 0.5];
    let medians: Vec<f64> = epsilons
        .iter()
        .map(|&eps| {
            let dp = DpConfig::new(eps).unwrap();
            let f1: Vec<f64> = (0..10).map(|s| dp_utility(s, Some(&dp), &setup).unwrap().macro_f1).collect();
            median(&f1)
        })
        .collect();
    let monotone = medians.windows(2).all(|w| w[1] >= w[0]);
    let t = start.elapsed();
    let shown: Vec<String> = epsilons.iter().zip(&medians).map(|(e, m)| format!("{e}:{m:.3}")).collect();
    outcome(
        bit_equal && std_ok && monotone && within(t, 300.0),
        format!(
            "zero-noise == SGD: {bit_equal}; noise std {std:.4} vs {target:.4} ({} draws); median macro F1 {}; {:.1}s",
            draws.len(),
            shown.join(" "),
            t.as_secs_f64()
        ),
    )
}

fn c10_aggregator_equivalence() -> Outcome {
    let seed = 110;
    let n = 5;
    let data = gaussian_mixture(&mut stream(seed, ids::DATA), 100, &[vec![-1.0, 0.0], vec![1.0, 0.0]], 0.6).unwrap();
    let hp = TrainingHyperparams::default();
    let (disc, gen) = ModelConfig::default().build(2, hp.noise_dim, &mut stream(seed, ids::INIT)).unwrap();
    let preset = ConsensusPreset::edge_default();
    let p = &preset.params;
    let params = ConsensusParams::balanced(p.latency_threshold, p.broadcast_coeff, p.block_kb, p.block_result_kb, p.block_cycles, n, n);
    let setup = ChainSetup { params, miners: preset.roster(&mut stream(seed, ids::ROSTER)), honesty: BTreeMap::new() };
    let central_cfg = FederationConfig { num_clients: n, global_rounds: 5, hp: hp.clone(), aggregator: Aggregator::CentralCloud };
    let chain_cfg = FederationConfig { aggregator: Aggregator::Blockchain(setup), ..central_cfg.clone() };
    let central = run_training(&central_cfg, &mut make_clients(&data, n, &disc, &gen, seed, None).unwrap(), &disc, &gen, seed).unwrap();
    let chained = run_training(&chain_cfg, &mut make_clients(&data, n, &disc, &gen, seed, None).unwrap(), &disc, &gen, seed).unwrap();
    let identical =
        central.len() == 5 && central.iter().zip(&chained).all(|(a, b)| a.global_disc == b.global_disc && a.global_gen == b.global_gen);
    let heights: Vec<u64> = chained.iter().filter_map(|r| r.block_height).collect();
    outcome(
        identical && heights == vec![1, 2, 3, 4, 5],
        format!("T=5, N=5: every round bit-identical: {identical}; block heights {heights:?}"),
    )
}

fn c11_ledger_integrity() -> Outcome {
    let mut rng = stream(111, 0);
    let mut registry = KeyRegistry::new();
    for s in 0..5 {
        registry.register(s, &mut rng);
    }
    let mut ledger = Ledger::new();
    for round in 1..=8u64 {
        let txs = (0..5)
            .map(|s| {
                let len = rng.random_range(1..64);
                Transaction::signed(&registry, s, round, (0..len).map(|_| rng.random()).collect()).unwrap()
            })
            .collect();
        let block = Block::new(ledger.head().height + 1, ledger.head().hash, txs, (round % 5) as u32, 5);
        ledger.append_block(block, true, BlockReceipt::default()).unwrap();
    }
    let clean = ledger.encode_blocks();
    let intact = fedgan::chain::verify_encoded_chain(&clean).is_ok();
    let mut undetected = 0;
    for _ in 0..1000 {
        let mut bytes = clean.clone();
        let b = rng.random_range(1..bytes.len());
        let pos = rng.random_range(0..bytes[b].len());
        bytes[b][pos] ^= rng.random_range(1..=255u8);
        undetected += usize::from(fedgan::chain::verify_encoded_chain(&bytes).is_ok());
    }
    outcome(intact && undetected == 0, format!("clean chain verifies: {intact}; undetected mutations: {undetected}/1000"))
}

fn c12_mixing_trend() -> Outcome {
    let start = Instant::now();
    let setup = MixingSetup::default();
    let trials: Vec<_> = (0..10).map(|s| mixing_trial(s, &setup).unwrap()).collect();
    let medians: Vec<(f64, f64)> = (0..setup.ratios.len())
        .map(|i| (setup.ratios[i].ratio, median(&trials.iter().map(|t| t[i].accuracy).collect::<Vec<_>>())))
        .collect();
    let base = medians[0];
    let beats = base.0 == 0.0 && medians[1..].iter().any(|&(r, m)| r > 0.0 && m > base.1);
    let shown: Vec<String> = medians.iter().map(|(r, m)| format!("{r}:{m:.3}")).collect();
    outcome(beats, format!("median accuracy by ratio {}; {:.1}s", shown.join(" "), start.elapsed().as_secs_f64()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("standalone optimum identity", c1_standalone_optimum),
        ("federated optimum identity", c2_federated_optimum),
        ("gradient fidelity", c3_gradient_fidelity),
        ("federated beats standalone", c4_fed_beats_standalone),
        ("consensus latency grid", c5_latency_grid),
        ("partitioned verification dominance", c6_por_dominance),
        ("reputation law", c7_reputation),
        ("majority rule", c8_majority_rule),
        ("private training", c9_dp),
        ("aggregator equivalence", c10_aggregator_equivalence),
        ("ledger integrity", c11_ledger_integrity),
        ("mixing-ratio trend", c12_mixing_trend),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let o = check();
        failed += usize::from(!o.passed);
        println!("{} criterion {:>2} ({name}): {}", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

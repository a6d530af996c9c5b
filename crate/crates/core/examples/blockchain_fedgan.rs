//! FedGAN whose averaging runs through the reputation-elected committee, then
//! the same run through the central aggregator for comparison.

use fedgan::chain::{ConsensusParams, ConsensusPreset};
use fedgan::data::gaussian_mixture;
use fedgan::experiment::ModelConfig;
use fedgan::federation::{make_clients, run_training, Aggregator, ChainSetup, FederationConfig};
use fedgan::gan::TrainingHyperparams;
use fedgan::rng::{ids, stream};

fn main() -> fedgan::Result<()> {
    let seed = 3;
    let n = 5;
    let data = gaussian_mixture(&mut stream(seed, ids::DATA), 100, &[vec![-1.0, 0.0], vec![1.0, 0.0]], 0.6)?;
    let hp = TrainingHyperparams::default();
    let (disc, gen) = ModelConfig::default().build(2, hp.noise_dim, &mut stream(seed, ids::INIT))?;

    let preset = ConsensusPreset::edge_default();
    let p = &preset.params;
    // one transaction per client, so at most n parts
    let params = ConsensusParams::balanced(p.latency_threshold, p.broadcast_coeff, p.block_kb, p.block_result_kb, p.block_cycles, n, n);
    let setup = ChainSetup { params, miners: preset.roster(&mut stream(seed, ids::ROSTER)), honesty: Default::default() };

    let mut config = FederationConfig { num_clients: n, global_rounds: 5, hp, aggregator: Aggregator::Blockchain(setup) };
    let chained = run_training(&config, &mut make_clients(&data, n, &disc, &gen, seed, None)?, &disc, &gen, seed)?;
    for rec in &chained {
        println!(
            "round {} -> block {} (por {:.2} s, dpos {:.2} s)",
            rec.round,
            rec.block_height.unwrap_or(0),
            rec.por_latency.unwrap_or(f64::NAN),
            rec.dpos_latency.unwrap_or(f64::NAN)
        );
    }

    config.aggregator = Aggregator::CentralCloud;
    let central = run_training(&config, &mut make_clients(&data, n, &disc, &gen, seed, None)?, &disc, &gen, seed)?;
    let same = chained.last().map(|r| &r.global_gen) == central.last().map(|r| &r.global_gen);
    println!("blockchain and central generators identical: {same}");
    Ok(())
}

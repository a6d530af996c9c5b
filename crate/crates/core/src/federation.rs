//! Federated training rounds: iid sharding, local updates at every client,
//! model averaging and broadcast, with either a central aggregator or the
//! blockchain in [`crate::chain`] carrying the updates.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{Blockchain, ConsensusParams, KeyRegistry, MinerProfile, Transaction, VotePolicy};
use crate::checkpoint;
use crate::error::{Error, Result};
use crate::gan::{local_update, sample_noise, EpochLoss, TrainingHyperparams};
use crate::nn::{Matrix, Network};
use crate::privacy::DpConfig;
use crate::rng::{self, RngStream};

/// One institution: its private shard, local models and random stream.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub id: u32,
    pub shard: Matrix,
    pub disc: Network,
    pub gen: Network,
    pub rng: RngStream,
    pub dp: Option<DpConfig>,
}

impl ClientState {
    pub fn new(id: u32, shard: Matrix, disc: Network, gen: Network, rng: RngStream) -> Self {
        Self { id, shard, disc, gen, rng, dp: None }
    }

    pub fn with_dp(mut self, dp: DpConfig) -> Self {
        self.dp = Some(dp);
        self
    }
}

/// Where the round's updates are averaged.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Aggregator {
    CentralCloud,
    Blockchain(ChainSetup),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainSetup {
    pub params: ConsensusParams,
    pub miners: Vec<MinerProfile>,
    #[serde(default)]
    pub honesty: BTreeMap<u32, VotePolicy>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FederationConfig {
    pub num_clients: usize,
    pub global_rounds: usize,
    pub hp: TrainingHyperparams,
    pub aggregator: Aggregator,
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 {
            return Err(Error::arg("federation needs at least one client"));
        }
        if self.global_rounds == 0 {
            return Err(Error::arg("federation needs at least one round"));
        }
        self.hp.validate()
    }
}

#[derive(Debug, Clone)]
pub struct RoundRecord {
    /// 1-based round index.
    pub round: usize,
    pub global_disc: Network,
    pub global_gen: Network,
    pub client_losses: BTreeMap<u32, Vec<EpochLoss>>,
    /// Height of the block that carried this round's updates.
    pub block_height: Option<u64>,
    pub por_latency: Option<f64>,
    pub dpos_latency: Option<f64>,
}

/// Random permutation split into `n` shards whose sizes differ by at most one.
pub fn partition_iid<R: Rng + ?Sized>(dataset: &Matrix, n: usize, rng: &mut R) -> Result<Vec<Matrix>> {
    if n == 0 {
        return Err(Error::arg("cannot split into zero shards"));
    }
    if dataset.rows() < n {
        return Err(Error::arg(format!("{} samples cannot fill {n} shards", dataset.rows())));
    }
    let mut order: Vec<usize> = (0..dataset.rows()).collect();
    order.shuffle(rng);
    let (base, extra) = (dataset.rows() / n, dataset.rows() % n);
    let mut start = 0;
    Ok((0..n)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let shard = dataset.select_rows(&order[start..start + len]);
            start += len;
            shard
        })
        .collect())
}

/// Elementwise mean `(1/N) sum_n theta_n`, summed in list order.
pub fn aggregate(params: &[Network]) -> Result<Network> {
    let first = params.first().ok_or(Error::Empty("parameter list"))?;
    if let Some(bad) = params.iter().position(|p| !p.same_shape(first)) {
        return Err(Error::dim(format!("parameter set {bad} differs in shape")));
    }
    let n = params.len() as f64;
    let mut out = first.clone();
    for v in out.params_mut() {
        *v = 0.0;
    }
    for p in params {
        for (acc, v) in out.params_mut().zip(p.params()) {
            *acc += v;
        }
    }
    for v in out.params_mut() {
        *v /= n;
    }
    Ok(out)
}

/// Pushes `count` fresh noise rows through the generator.
pub fn generate_synthetic<R: Rng + ?Sized>(gen: &Network, rng: &mut R, count: usize) -> Result<Matrix> {
    if count == 0 {
        return Ok(Matrix::zeros(0, gen.output_dim()));
    }
    gen.forward(&sample_noise(rng, count, gen.input_dim())?)
}

/// Runs `T` global rounds of local updates and averaging.
///
/// Every client starts each round from the current globals. With the
/// blockchain aggregator the clients' updates travel as signed transactions;
/// once the block is appended the globals are rebuilt from the block's
/// payloads, so the averaged values are the same as the central path.
pub fn run_training(
    config: &FederationConfig,
    clients: &mut [ClientState],
    init_disc: &Network,
    init_gen: &Network,
    chain_seed: u64,
) -> Result<Vec<RoundRecord>> {
    let mut chain = match &config.aggregator {
        Aggregator::CentralCloud => None,
        Aggregator::Blockchain(setup) => {
            let ids: Vec<u32> = clients.iter().map(|c| c.id).collect();
            Some(build_chain(setup, &ids, chain_seed)?)
        }
    };
    run_training_on(config, clients, init_disc, init_gen, chain.as_mut())
}

/// A chain whose key registry holds one key per client id.
pub fn build_chain(setup: &ChainSetup, client_ids: &[u32], chain_seed: u64) -> Result<Blockchain<RngStream>> {
    let mut key_rng = rng::stream(chain_seed, rng::ids::CONSENSUS);
    let mut registry = KeyRegistry::new();
    for &id in client_ids {
        registry.register(id, &mut key_rng);
    }
    let chain = Blockchain::new(setup.params.clone(), setup.miners.clone(), registry, key_rng)?;
    Ok(chain.with_honesty(setup.honesty.clone()))
}

/// [`run_training`] against an existing chain, or the central aggregator when
/// `chain` is `None`; `config.aggregator` is not consulted. Sharing one chain
/// across several trainings appends all their blocks to the same ledger.
pub fn run_training_on(
    config: &FederationConfig,
    clients: &mut [ClientState],
    init_disc: &Network,
    init_gen: &Network,
    mut chain: Option<&mut Blockchain<RngStream>>,
) -> Result<Vec<RoundRecord>> {
    config.validate()?;
    if clients.len() != config.num_clients {
        return Err(Error::arg(format!("{} clients for a federation of {}", clients.len(), config.num_clients)));
    }
    let mut ids: Vec<u32> = clients.iter().map(|c| c.id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != clients.len() {
        return Err(Error::arg("client ids must be unique"));
    }
    for c in clients.iter() {
        if !c.disc.same_shape(init_disc) || !c.gen.same_shape(init_gen) {
            return Err(Error::dim(format!("client {} architecture differs from the global model", c.id)));
        }
    }

    let mut global_disc = init_disc.clone();
    let mut global_gen = init_gen.clone();
    let mut history = Vec::with_capacity(config.global_rounds);
    for round in 1..=config.global_rounds {
        let fail = |e: Error| Error::RoundFailed { round, source: Box::new(e) };
        let updates = clients
            .par_iter_mut()
            .map(|c| local_update(c, &global_disc, &global_gen, &config.hp))
            .collect::<Result<Vec<_>>>()
            .map_err(fail)?;
        let mut client_losses = BTreeMap::new();
        for (c, u) in clients.iter_mut().zip(&updates) {
            c.disc = u.disc.clone();
            c.gen = u.gen.clone();
            client_losses.insert(c.id, u.trace.clone());
        }

        let (mut block_height, mut por, mut dpos) = (None, None, None);
        let (discs, gens): (Vec<Network>, Vec<Network>) = match chain.as_deref_mut() {
            None => updates.into_iter().map(|u| (u.disc, u.gen)).unzip(),
            Some(chain) => {
                let pending = clients
                    .iter()
                    .map(|c| Transaction::signed(&chain.registry, c.id, round as u64, checkpoint::encode_pair(&c.disc, &c.gen)))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| fail(e.into()))?;
                let receipt = chain.run_consensus_round(pending).map_err(|e| fail(e.into()))?;
                block_height = Some(receipt.height);
                por = Some(receipt.por_latency);
                dpos = Some(receipt.dpos_latency);
                let block = chain.ledger.head();
                block
                    .transactions
                    .iter()
                    .map(|tx| checkpoint::decode_pair(&tx.payload))
                    .collect::<Result<Vec<_>>>()
                    .map_err(fail)?
                    .into_iter()
                    .unzip()
            }
        };
        global_disc = aggregate(&discs).map_err(fail)?;
        global_gen = aggregate(&gens).map_err(fail)?;
        history.push(RoundRecord {
            round,
            global_disc: global_disc.clone(),
            global_gen: global_gen.clone(),
            client_losses,
            block_height,
            por_latency: por,
            dpos_latency: dpos,
        });
    }
    Ok(history)
}

/// Builds `n` clients over iid shards of `dataset`, all starting from the same models.
pub fn make_clients(
    dataset: &Matrix,
    n: usize,
    disc: &Network,
    gen: &Network,
    seed: u64,
    dp: Option<DpConfig>,
) -> Result<Vec<ClientState>> {
    let shards = partition_iid(dataset, n, &mut rng::stream(seed, rng::ids::PARTITION))?;
    Ok(shards
        .into_iter()
        .enumerate()
        .map(|(i, shard)| ClientState {
            id: i as u32,
            shard,
            disc: disc.clone(),
            gen: gen.clone(),
            rng: rng::client_stream(seed, i),
            dp: dp.clone(),
        })
        .collect())
}

#[derive(Serialize)]
struct LossRow {
    round: usize,
    client_id: u32,
    disc_loss: f64,
    gen_loss: f64,
}

/// Writes `round,client_id,disc_loss,gen_loss`, one row per client per round.
///
/// Losses are averaged over the round's local epochs; `disc_loss` is the
/// negated discriminator objective (so it sits near `ln 4` at equilibrium).
pub fn write_history_csv<W: Write>(history: &[RoundRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for rec in history {
        for (&client_id, trace) in &rec.client_losses {
            let n = trace.len().max(1) as f64;
            w.serialize(LossRow {
                round: rec.round,
                client_id,
                disc_loss: -trace.iter().map(|l| l.disc_objective).sum::<f64>() / n,
                gen_loss: trace.iter().map(|l| l.gen_loss).sum::<f64>() / n,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

//! Proof-of-Reputation consensus and its latency model, with the delegated
//! proof-of-stake latency as the comparison baseline.
//!
//! Units: sizes in kilobits, rates in kbps, work in CPU cycles and compute in
//! cycles/s, so every latency term is in seconds. Latencies are evaluated on a
//! logical clock; nothing sleeps.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ledger::{Block, BlockReceipt, KeyRegistry, Ledger, Transaction};
use super::ChainError;

/// Kilobits per kilobyte.
pub const KB_TO_KBIT: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerProfile {
    pub id: u32,
    /// `c_m`, CPU cycles per second.
    pub compute: f64,
    pub uplink_kbps: f64,
    pub downlink_kbps: f64,
    /// Last measured mining latency `T_m`, seconds.
    pub measured_latency: f64,
    /// Reputation from the last selection.
    #[serde(default)]
    pub reputation: f64,
}

impl MinerProfile {
    /// A miner with no latency history; `T_m` starts at `tau` so its reputation is 0.
    pub fn new(id: u32, compute: f64, uplink_kbps: f64, downlink_kbps: f64, tau: f64) -> Self {
        Self { id, compute, uplink_kbps, downlink_kbps, measured_latency: tau, reputation: 0.0 }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        let ok = self.compute > 0.0
            && self.uplink_kbps > 0.0
            && self.downlink_kbps > 0.0
            && self.measured_latency >= 0.0
            && self.measured_latency.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ChainError::InvalidParams(format!("miner {} has non-positive resources", self.id)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusParams {
    /// `tau`, seconds.
    pub latency_threshold: f64,
    /// `xi`, seconds per kilobit per participating miner.
    pub broadcast_coeff: f64,
    /// `B`, kilobits.
    pub block_kb: f64,
    /// `B^re`, kilobits.
    pub block_result_kb: f64,
    /// `Tr_k`, kilobits.
    pub part_kb: f64,
    /// `Tr_k^re`, kilobits.
    pub part_result_kb: f64,
    /// `Phi_m`, cycles to verify one part.
    pub part_cycles: f64,
    /// `Phi_m^B`, cycles to verify a whole block.
    pub block_cycles: f64,
    /// `K`.
    pub partition_count: usize,
    /// `M`.
    pub committee_size: usize,
    #[serde(default = "default_threshold")]
    pub approval_threshold: f64,
}

fn default_threshold() -> f64 {
    0.51
}

impl ConsensusParams {
    /// Block-level sizes with every part an equal `1/K` share of the block.
    #[allow(clippy::too_many_arguments)]
    pub fn balanced(
        latency_threshold: f64,
        broadcast_coeff: f64,
        block_kb: f64,
        block_result_kb: f64,
        block_cycles: f64,
        partition_count: usize,
        committee_size: usize,
    ) -> Self {
        let k = partition_count.max(1) as f64;
        Self {
            latency_threshold,
            broadcast_coeff,
            block_kb,
            block_result_kb,
            part_kb: block_kb / k,
            part_result_kb: block_result_kb / k,
            part_cycles: block_cycles / k,
            block_cycles,
            partition_count,
            committee_size,
            approval_threshold: default_threshold(),
        }
    }

    /// The same parameters re-derived for a block of `block_kb` kilobits.
    pub fn for_block(&self, block_kb: f64) -> Self {
        let mut p = Self::balanced(
            self.latency_threshold,
            self.broadcast_coeff,
            block_kb,
            self.block_result_kb,
            self.block_cycles,
            self.partition_count,
            self.committee_size,
        );
        p.approval_threshold = self.approval_threshold;
        p
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        let bad = |m: &str| Err(ChainError::InvalidParams(m.to_string()));
        if self.latency_threshold.is_nan() || self.latency_threshold <= 0.0 {
            return bad("latency threshold tau must be positive");
        }
        if self.broadcast_coeff.is_nan() || self.broadcast_coeff < 0.0 {
            return bad("broadcast coefficient xi must be non-negative");
        }
        if self.partition_count == 0 {
            return bad("partition count K must be at least 1");
        }
        if self.committee_size == 0 {
            return bad("committee size M must be at least 1");
        }
        if !(self.approval_threshold > 0.5 && self.approval_threshold <= 1.0) {
            return bad("approval threshold must lie in (0.5, 1]");
        }
        let sizes = [self.block_kb, self.block_result_kb, self.part_kb, self.part_result_kb, self.part_cycles, self.block_cycles];
        if sizes.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("sizes and cycle counts must be finite and non-negative");
        }
        Ok(())
    }
}

/// `Psi = e^(1 - T/tau) - 1`.
pub fn reputation_score(latency: f64, tau: f64) -> Result<f64, ChainError> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(ChainError::InvalidParams("latency threshold tau must be positive".into()));
    }
    if latency.is_nan() || latency < 0.0 {
        return Err(ChainError::InvalidParams("latency must be non-negative".into()));
    }
    Ok((1.0 - latency / tau).exp() - 1.0)
}

/// Top-`m` candidates by reputation, highest first; ties go to the lower id.
///
/// Reputations are recomputed from each candidate's measured latency and
/// written back into the returned profiles.
pub fn select_miners(candidates: &[MinerProfile], m: usize, tau: f64) -> Result<Vec<MinerProfile>, ChainError> {
    if m > candidates.len() {
        return Err(ChainError::NotEnoughMiners { wanted: m, available: candidates.len() });
    }
    let mut ranked = candidates
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.reputation = reputation_score(c.measured_latency, tau)?;
            Ok(c)
        })
        .collect::<Result<Vec<_>, ChainError>>()?;
    ranked.sort_by(|a, b| b.reputation.total_cmp(&a.reputation).then(a.id.cmp(&b.id)));
    ranked.truncate(m);
    Ok(ranked)
}

/// Block manager for a consensus slot: committee members take turns.
pub fn block_manager(committee: &[MinerProfile], slot: usize) -> Option<&MinerProfile> {
    (!committee.is_empty()).then(|| &committee[slot % committee.len()])
}

/// A contiguous run of a block's transactions assigned to one verifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionPart {
    pub index: usize,
    pub range: Range<usize>,
    /// Unique random tag `R_m`.
    pub tag: u64,
}

/// Splits a block's transactions into `k` contiguous parts whose sizes differ by at most one.
pub fn partition_block<R: Rng + ?Sized>(block: &Block, k: usize, rng: &mut R) -> Result<Vec<TransactionPart>, ChainError> {
    let n = block.transactions.len();
    if k == 0 {
        return Err(ChainError::InvalidParams("partition count K must be at least 1".into()));
    }
    if k > n {
        return Err(ChainError::OverPartition { parts: k, transactions: n });
    }
    let (base, extra) = (n / k, n % k);
    let mut tags = BTreeSet::new();
    let mut start = 0;
    Ok((0..k)
        .map(|index| {
            let len = base + usize::from(index < extra);
            let range = start..start + len;
            start += len;
            let tag = loop {
                let t: u64 = rng.random();
                if tags.insert(t) {
                    break t;
                }
            };
            TransactionPart { index, range, tag }
        })
        .collect())
}

/// How a committee member votes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VotePolicy {
    /// Votes with the outcome of its own check and its partner's cross-check.
    #[default]
    Honest,
    AlwaysReject,
    AlwaysApprove,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub approved: bool,
    /// `(miner id, positive)` in committee order.
    pub votes: Vec<(u32, bool)>,
    /// Round latency: the slowest member, since members verify in parallel.
    pub latency: f64,
}

impl Verdict {
    pub fn positive(&self) -> usize {
        self.votes.iter().filter(|(_, v)| *v).count()
    }
}

/// `positive / committee >= threshold`.
pub fn majority_approves(positive: usize, committee: usize, threshold: f64) -> bool {
    committee > 0 && positive as f64 / committee as f64 >= threshold
}

fn part_is_valid(block: &Block, part: &TransactionPart, registry: &KeyRegistry) -> bool {
    block.transactions[part.range.clone()].iter().all(|tx| registry.verify(tx))
}

/// Lightweight verification: each member checks its assigned part, asks one
/// other uniformly chosen member to cross-check it, and votes.
pub fn por_verify<R: Rng + ?Sized>(
    block: &Block,
    committee: &[MinerProfile],
    params: &ConsensusParams,
    rng: &mut R,
    honesty: &BTreeMap<u32, VotePolicy>,
    registry: &KeyRegistry,
) -> Result<Verdict, ChainError> {
    let m = committee.len();
    if m < 2 {
        return Err(ChainError::CommitteeTooSmall(m));
    }
    let parts = partition_block(block, params.partition_count, rng)?;
    let sealed = block.compute_hash() == block.hash;
    let part_ok: Vec<bool> = parts.iter().map(|p| sealed && part_is_valid(block, p, registry)).collect();

    let mut votes = Vec::with_capacity(m);
    let mut latency: f64 = 0.0;
    for (i, miner) in committee.iter().enumerate() {
        let part = i % parts.len();
        // partner s != i, uniform over the rest of the committee
        let mut partner = rng.random_range(0..m - 1);
        if partner >= i {
            partner += 1;
        }
        let own = part_ok[part];
        let cross = part_ok[part] && committee[partner].id != miner.id;
        let vote = match honesty.get(&miner.id).copied().unwrap_or_default() {
            VotePolicy::Honest => own && cross,
            VotePolicy::AlwaysReject => false,
            VotePolicy::AlwaysApprove => true,
        };
        votes.push((miner.id, vote));
        latency = latency.max(por_latency(miner, params));
    }
    let positive = votes.iter().filter(|(_, v)| *v).count();
    Ok(Verdict { approved: majority_approves(positive, m, params.approval_threshold), votes, latency })
}

/// Verification latency of one member under the partitioned scheme:
/// `Tr_k / r^d + Phi_m / c_m + xi * Tr_k * 2 + Tr_k^re / r^u`.
///
/// The broadcast term counts the two miners of one cross-check.
pub fn por_latency(miner: &MinerProfile, params: &ConsensusParams) -> f64 {
    params.part_kb / miner.downlink_kbps
        + params.part_cycles / miner.compute
        + params.broadcast_coeff * params.part_kb * 2.0
        + params.part_result_kb / miner.uplink_kbps
}

/// Verification latency of one miner when all `n` miners re-verify the whole block:
/// `B / r^d + Phi^B / c_m + xi * B * n + B^re / r^u`.
pub fn dpos_latency(miner: &MinerProfile, params: &ConsensusParams, n: usize) -> f64 {
    params.block_kb / miner.downlink_kbps
        + params.block_cycles / miner.compute
        + params.broadcast_coeff * params.block_kb * n as f64
        + params.block_result_kb / miner.uplink_kbps
}

/// Outcome of one approved consensus round.
#[derive(Debug, Clone)]
pub struct ConsensusReceipt {
    pub height: u64,
    pub block_hash: [u8; 32],
    pub verdict: Verdict,
    pub por_latency: f64,
    /// What the same committee would have spent re-verifying the whole block.
    pub dpos_latency: f64,
}

/// Miner roster, committee policy and ledger of the decentralized aggregator.
#[derive(Debug, Clone)]
pub struct Blockchain<R> {
    pub params: ConsensusParams,
    pub miners: Vec<MinerProfile>,
    pub honesty: BTreeMap<u32, VotePolicy>,
    pub registry: KeyRegistry,
    pub ledger: Ledger,
    rng: R,
    slot: usize,
}

impl<R: Rng> Blockchain<R> {
    pub fn new(params: ConsensusParams, miners: Vec<MinerProfile>, registry: KeyRegistry, rng: R) -> Result<Self, ChainError> {
        params.validate()?;
        for m in &miners {
            m.validate()?;
        }
        let ids: BTreeSet<u32> = miners.iter().map(|m| m.id).collect();
        if ids.len() != miners.len() {
            return Err(ChainError::InvalidParams("miner ids must be unique".into()));
        }
        if params.committee_size > miners.len() {
            return Err(ChainError::NotEnoughMiners { wanted: params.committee_size, available: miners.len() });
        }
        Ok(Self { params, miners, honesty: BTreeMap::new(), registry, ledger: Ledger::new(), rng, slot: 0 })
    }

    pub fn with_honesty(mut self, honesty: BTreeMap<u32, VotePolicy>) -> Self {
        self.honesty = honesty;
        self
    }

    /// Builds a block from `pending`, elects a committee, verifies and appends.
    ///
    /// Committee members' measured latencies are replaced with the latency
    /// they realized, which drives the next election. A rejected block leaves
    /// the ledger untouched and reports the tally.
    pub fn run_consensus_round(&mut self, pending: Vec<Transaction>) -> Result<ConsensusReceipt, ChainError> {
        if pending.is_empty() {
            return Err(ChainError::NoTransactions);
        }
        let tau = self.params.latency_threshold;
        let committee = select_miners(&self.miners, self.params.committee_size, tau)?;
        for member in &committee {
            if let Some(m) = self.miners.iter_mut().find(|m| m.id == member.id) {
                m.reputation = member.reputation;
            }
        }
        let manager = block_manager(&committee, self.slot).expect("committee is non-empty").id;
        self.slot += 1;

        let head = self.ledger.head();
        let block = Block::new(head.height + 1, head.hash, pending, manager, self.params.partition_count as u32);
        let sized = self.params.for_block(block.size_kb());
        let verdict = por_verify(&block, &committee, &sized, &mut self.rng, &self.honesty, &self.registry)?;

        let n = committee.len();
        let dpos = committee.iter().map(|m| dpos_latency(m, &sized, n)).fold(0.0, f64::max);
        for member in &committee {
            if let Some(m) = self.miners.iter_mut().find(|m| m.id == member.id) {
                m.measured_latency = por_latency(member, &sized);
            }
        }
        if !verdict.approved {
            return Err(ChainError::Rejected { positive: verdict.positive(), committee: n });
        }
        let receipt = ConsensusReceipt {
            height: block.height,
            block_hash: block.hash,
            por_latency: verdict.latency,
            dpos_latency: dpos,
            verdict: verdict.clone(),
        };
        self.ledger.append_block(
            block,
            true,
            BlockReceipt { votes: verdict.votes, por_latency_s: receipt.por_latency, dpos_latency_s: dpos },
        )?;
        Ok(receipt)
    }
}

/// One row of the latency benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyRow {
    /// Block size in kilobytes.
    pub block_kb: f64,
    pub miners: usize,
    pub por_s: f64,
    pub dpos_s: f64,
}

/// Committee-level latencies (slowest member) over a grid of block sizes (in
/// kilobytes) and committee sizes. The committee is the reputation top-`m` of
/// `roster`.
pub fn latency_benchmark(
    roster: &[MinerProfile],
    params: &ConsensusParams,
    block_kbytes: &[f64],
    committee_sizes: &[usize],
) -> Result<Vec<LatencyRow>, ChainError> {
    let mut rows = Vec::new();
    for &m in committee_sizes {
        let committee = select_miners(roster, m, params.latency_threshold)?;
        for &kbytes in block_kbytes {
            let sized = params.for_block(kbytes * KB_TO_KBIT);
            let por = committee.iter().map(|c| por_latency(c, &sized)).fold(0.0, f64::max);
            let dpos = committee.iter().map(|c| dpos_latency(c, &sized, m)).fold(0.0, f64::max);
            rows.push(LatencyRow { block_kb: kbytes, miners: m, por_s: por, dpos_s: dpos });
        }
    }
    Ok(rows)
}

/// Edge-resource ranges used by the latency experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusPreset {
    pub params: ConsensusParams,
    pub compute_range: (f64, f64),
    pub rate_range: (f64, f64),
    pub transactions_per_block: usize,
    pub num_miners: usize,
}

impl ConsensusPreset {
    /// `c_m` in `[1e3, 1e6]` cycles/s, rates in `[100, 250]` kbps, `xi = 0.5`,
    /// `tau = 1 s`, `B = 500 KB`, `B^re = 50 KB`, ten transactions per block and
    /// ten miners. `Phi^B = 2e5` cycles is an assumed value.
    pub fn edge_default() -> Self {
        let params = ConsensusParams::balanced(1.0, 0.5, 500.0 * KB_TO_KBIT, 50.0 * KB_TO_KBIT, 2e5, 10, 10);
        Self { params, compute_range: (1e3, 1e6), rate_range: (100.0, 250.0), transactions_per_block: 10, num_miners: 10 }
    }

    /// Draws a roster uniformly from the preset ranges; ids are `0..num_miners`.
    pub fn roster<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<MinerProfile> {
        (0..self.num_miners as u32)
            .map(|id| {
                let c = rng.random_range(self.compute_range.0..=self.compute_range.1);
                let up = rng.random_range(self.rate_range.0..=self.rate_range.1);
                let down = rng.random_range(self.rate_range.0..=self.rate_range.1);
                MinerProfile::new(id, c, up, down, self.params.latency_threshold)
            })
            .collect()
    }
}

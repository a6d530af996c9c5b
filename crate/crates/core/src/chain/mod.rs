//! Simulated blockchain aggregator.
//!
//! Clients publish their parameter updates as signed transactions, a
//! reputation-elected committee verifies the block in parts, and on approval
//! the block joins a hash-linked ledger from which every client rebuilds the
//! global model.

mod consensus;
mod ledger;

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

pub use consensus::{
    block_manager, dpos_latency, latency_benchmark, majority_approves, partition_block, por_latency, por_verify, reputation_score,
    select_miners, Blockchain, ConsensusParams, ConsensusPreset, ConsensusReceipt, LatencyRow, MinerProfile, TransactionPart, Verdict,
    VotePolicy, KB_TO_KBIT,
};
pub use ledger::{verify_blocks, verify_encoded_chain, Block, BlockReceipt, Digest, KeyRegistry, Ledger, Transaction};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ChainError {
    #[error("invalid consensus parameters: {0}")]
    InvalidParams(String),
    #[error("need {wanted} miners, only {available} available")]
    NotEnoughMiners { wanted: usize, available: usize },
    #[error("committee of {0} cannot cross-check; need at least 2")]
    CommitteeTooSmall(usize),
    #[error("cannot split {transactions} transactions into {parts} parts")]
    OverPartition { parts: usize, transactions: usize },
    #[error("no pending transactions")]
    NoTransactions,
    #[error("block rejected: {positive} of {committee} votes positive")]
    Rejected { positive: usize, committee: usize },
    #[error("block was not approved by consensus")]
    Unapproved,
    #[error("hash link broken at height {height}")]
    BrokenLink { height: u64 },
    #[error("block seal mismatch at height {height}")]
    BadSeal { height: u64 },
    #[error("expected height {expected}, found {found}")]
    BadHeight { expected: u64, found: u64 },
    #[error("unknown sender {0}")]
    UnknownSender(u32),
    #[error("malformed block: {0}")]
    Malformed(String),
}

#[derive(Serialize)]
struct ExportedBlock<'a> {
    height: u64,
    prev_hash: String,
    hash: String,
    tx_digests: Vec<String>,
    proposer: u32,
    votes: &'a [(u32, bool)],
    por_latency_s: f64,
    dpos_latency_s: f64,
}

/// Writes the chain as JSON lines, one block per line, genesis first.
pub fn export_jsonl<W: Write>(ledger: &Ledger, mut out: W) -> std::io::Result<()> {
    for (block, receipt) in ledger.blocks().iter().zip(ledger.receipts()) {
        let row = ExportedBlock {
            height: block.height,
            prev_hash: hex::encode(block.prev_hash),
            hash: hex::encode(block.hash),
            tx_digests: block.transactions.iter().map(|t| hex::encode(t.digest())).collect(),
            proposer: block.proposer,
            votes: &receipt.votes,
            por_latency_s: receipt.por_latency_s,
            dpos_latency_s: receipt.dpos_latency_s,
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes latency rows as CSV with header `block_kb,miners,por_s,dpos_s`.
pub fn write_latency_csv<W: Write>(rows: &[LatencyRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

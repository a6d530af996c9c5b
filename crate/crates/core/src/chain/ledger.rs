//! Hash-linked ledger of blocks carrying signed model-update transactions.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;
use sha2::{Digest as _, Sha256};

use super::ChainError;

pub type Digest = [u8; 32];

fn sha256(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Simulated wallet keys: a per-sender secret used in a keyed hash.
#[derive(Debug, Clone, Default)]
pub struct KeyRegistry {
    keys: BTreeMap<u32, Digest>,
}

impl KeyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `sender` with a fresh random key and returns it.
    pub fn register<R: Rng + ?Sized>(&mut self, sender: u32, rng: &mut R) -> Digest {
        let mut key = [0u8; 32];
        rng.fill(&mut key);
        self.keys.insert(sender, key);
        key
    }

    pub fn key(&self, sender: u32) -> Option<&Digest> {
        self.keys.get(&sender)
    }

    pub fn sign(&self, sender: u32, round: u64, payload: &[u8]) -> Result<Digest, ChainError> {
        let key = self.key(sender).ok_or(ChainError::UnknownSender(sender))?;
        Ok(signature(key, sender, round, payload))
    }

    pub fn verify(&self, tx: &Transaction) -> bool {
        self.key(tx.sender).is_some_and(|key| signature(key, tx.sender, tx.round, &tx.payload) == tx.signature)
    }
}

fn signature(key: &Digest, sender: u32, round: u64, payload: &[u8]) -> Digest {
    let payload_hash = sha256(&[payload]);
    sha256(&[key, &sender.to_le_bytes(), &round.to_le_bytes(), &payload_hash])
}

/// A signed model update submitted by one client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub sender: u32,
    pub round: u64,
    pub payload: Vec<u8>,
    pub signature: Digest,
}

impl Transaction {
    pub fn signed(registry: &KeyRegistry, sender: u32, round: u64, payload: Vec<u8>) -> Result<Self, ChainError> {
        let signature = registry.sign(sender, round, &payload)?;
        Ok(Self { sender, round, payload, signature })
    }

    /// Payload size in kilobits.
    pub fn payload_kb(&self) -> f64 {
        self.payload.len() as f64 * 8.0 / 1000.0
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.sender.to_le_bytes());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.signature);
    }

    pub fn digest(&self) -> Digest {
        let mut buf = Vec::new();
        self.encode_into(&mut buf);
        sha256(&[&buf])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub prev_hash: Digest,
    pub transactions: Vec<Transaction>,
    pub proposer: u32,
    pub partition_count: u32,
    pub hash: Digest,
}

impl Block {
    /// Builds a block and seals it with its hash.
    pub fn new(height: u64, prev_hash: Digest, transactions: Vec<Transaction>, proposer: u32, partition_count: u32) -> Self {
        let mut block = Self { height, prev_hash, transactions, proposer, partition_count, hash: [0; 32] };
        block.hash = block.compute_hash();
        block
    }

    pub fn genesis() -> Self {
        Self::new(0, [0; 32], Vec::new(), 0, 1)
    }

    fn encode_body(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.prev_hash);
        out.extend_from_slice(&self.proposer.to_le_bytes());
        out.extend_from_slice(&self.partition_count.to_le_bytes());
        out.extend_from_slice(&(self.transactions.len() as u32).to_le_bytes());
        for tx in &self.transactions {
            tx.encode_into(&mut out);
        }
        out
    }

    /// Digest over every field except the stored hash.
    pub fn compute_hash(&self) -> Digest {
        sha256(&[&self.encode_body()])
    }

    pub fn size_kb(&self) -> f64 {
        self.transactions.iter().map(Transaction::payload_kb).sum()
    }

    /// Canonical byte form: the hashed body followed by the stored hash.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.encode_body();
        out.extend_from_slice(&self.hash);
        out
    }

    /// Strict inverse of [`Block::encode`]; trailing or missing bytes are errors.
    pub fn decode(bytes: &[u8]) -> Result<Self, ChainError> {
        let mut r = Reader { bytes, pos: 0 };
        let height = r.u64()?;
        let prev_hash = r.digest()?;
        let proposer = r.u32()?;
        let partition_count = r.u32()?;
        let n = r.u32()? as usize;
        let mut transactions = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            let sender = r.u32()?;
            let round = r.u64()?;
            let len = r.u32()? as usize;
            let payload = r.take(len)?.to_vec();
            let signature = r.digest()?;
            transactions.push(Transaction { sender, round, payload, signature });
        }
        let hash = r.digest()?;
        if r.pos != bytes.len() {
            return Err(ChainError::Malformed("trailing bytes".into()));
        }
        Ok(Self { height, prev_hash, transactions, proposer, partition_count, hash })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ChainError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ChainError::Malformed("truncated block".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ChainError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, ChainError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn digest(&mut self) -> Result<Digest, ChainError> {
        Ok(self.take(32)?.try_into().expect("32 bytes"))
    }
}

/// Consensus facts recorded next to a block; not covered by its hash.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BlockReceipt {
    pub votes: Vec<(u32, bool)>,
    pub por_latency_s: f64,
    pub dpos_latency_s: f64,
}

/// Append-only chain starting at a genesis block.
#[derive(Debug, Clone)]
pub struct Ledger {
    blocks: Vec<Block>,
    receipts: Vec<BlockReceipt>,
}

impl Default for Ledger {
    fn default() -> Self {
        Self::new()
    }
}

impl Ledger {
    pub fn new() -> Self {
        Self { blocks: vec![Block::genesis()], receipts: vec![BlockReceipt::default()] }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn receipts(&self) -> &[BlockReceipt] {
        &self.receipts
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn head(&self) -> &Block {
        self.blocks.last().expect("ledger always holds genesis")
    }

    /// Appends an approved block whose link and seal match the current head.
    pub fn append_block(&mut self, block: Block, approved: bool, receipt: BlockReceipt) -> Result<(), ChainError> {
        if !approved {
            return Err(ChainError::Unapproved);
        }
        let head = self.head();
        if block.prev_hash != head.hash {
            return Err(ChainError::BrokenLink { height: block.height });
        }
        if block.height != head.height + 1 {
            return Err(ChainError::BadHeight { expected: head.height + 1, found: block.height });
        }
        if block.compute_hash() != block.hash {
            return Err(ChainError::BadSeal { height: block.height });
        }
        self.blocks.push(block);
        self.receipts.push(receipt);
        self.verify_chain()
    }

    /// Walks genesis to head re-checking every seal and link.
    pub fn verify_chain(&self) -> Result<(), ChainError> {
        verify_blocks(&self.blocks)
    }

    /// Canonical encodings of every block, genesis first.
    pub fn encode_blocks(&self) -> Vec<Vec<u8>> {
        self.blocks.iter().map(Block::encode).collect()
    }

    /// Mutable access to stored blocks, bypassing every check. Exists so
    /// tamper-detection can be exercised.
    #[doc(hidden)]
    pub fn blocks_mut_unchecked(&mut self) -> &mut Vec<Block> {
        &mut self.blocks
    }
}

/// Hash walk over decoded blocks.
pub fn verify_blocks(blocks: &[Block]) -> Result<(), ChainError> {
    let genesis = blocks.first().ok_or(ChainError::Malformed("empty chain".into()))?;
    if genesis.height != 0 || genesis.prev_hash != [0; 32] {
        return Err(ChainError::BrokenLink { height: genesis.height });
    }
    for (i, block) in blocks.iter().enumerate() {
        if block.height != i as u64 {
            return Err(ChainError::BadHeight { expected: i as u64, found: block.height });
        }
        if block.compute_hash() != block.hash {
            return Err(ChainError::BadSeal { height: block.height });
        }
        if i > 0 && block.prev_hash != blocks[i - 1].hash {
            return Err(ChainError::BrokenLink { height: block.height });
        }
    }
    Ok(())
}

/// Hash walk over stored block bytes; undecodable bytes count as tampering.
pub fn verify_encoded_chain(encoded: &[Vec<u8>]) -> Result<(), ChainError> {
    let blocks = encoded.iter().map(|b| Block::decode(b)).collect::<Result<Vec<_>, _>>()?;
    verify_blocks(&blocks)
}

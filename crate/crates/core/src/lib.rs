//! Federated GAN training with a simulated blockchain aggregator.
//!
//! The crate is organised bottom-up:
//!
//! - [`divergence`]: discrete KL/JSD, the optimal discriminator and GAN value function.
//! - [`nn`]: a small dense network with reverse-mode gradients.
//! - [`gan`]: discriminator ascent and generator descent steps, local epochs.
//! - [`privacy`]: clipped, Gaussian-noised parameter updates.
//! - [`federation`]: client shards, parameter averaging, the round loop.
//! - [`chain`]: ledger, reputation-elected committees and latency models.
//! - [`eval`]: histogram divergence, a classifier and per-class metrics.
//! - [`experiment`]: JSON-configured scenarios writing reproducible artifacts.

pub mod chain;
pub mod checkpoint;
pub mod data;
pub mod divergence;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod federation;
pub mod gan;
pub mod nn;
pub mod privacy;
pub mod rng;

pub use error::{Error, Result};

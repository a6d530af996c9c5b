//! Partitioned versus whole-block verification latency over block sizes.

use fedgan::chain::{latency_benchmark, ConsensusPreset};
use fedgan::rng::{ids, stream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let preset = ConsensusPreset::edge_default();
    let roster = preset.roster(&mut stream(0, ids::ROSTER));
    let sizes: Vec<f64> = (1..=10).map(|i| 50.0 * i as f64).collect();
    let rows = latency_benchmark(&roster, &preset.params, &sizes, &[4, 7, 10])?;
    println!("{:>8} {:>6} {:>12} {:>12} {:>8}", "block_kb", "miners", "por_s", "dpos_s", "ratio");
    for r in rows {
        println!("{:>8} {:>6} {:>12.3} {:>12.3} {:>8.2}", r.block_kb, r.miners, r.por_s, r.dpos_s, r.dpos_s / r.por_s);
    }
    Ok(())
}

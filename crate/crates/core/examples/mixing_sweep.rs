//! Classifier accuracy as generated samples are mixed into an imbalanced real set.

use fedgan::experiment::{mixing_trial, MixingSetup};

fn main() -> fedgan::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    for row in mixing_trial(seed, &MixingSetup::default())? {
        println!("ratio {:<4} train {:>4}  accuracy {:.3}  minority F1 {:.3}", row.ratio, row.train_size, row.accuracy, row.metrics.f1[0]);
    }
    Ok(())
}

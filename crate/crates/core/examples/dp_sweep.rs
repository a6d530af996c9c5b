//! Synthetic-only classifier utility across privacy budgets.

use fedgan::experiment::{dp_utility, DpSweepSetup};
use fedgan::privacy::{noise_std_from_epsilon, DpConfig};

fn main() -> fedgan::Result<()> {
    let setup = DpSweepSetup::default();
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let clean = dp_utility(seed, None, &setup)?;
    println!("no noise: macro F1 {:.3}", clean.macro_f1);
    for eps in [0.01, 0.05, 0.1, 0.3, 0.5] {
        let dp = DpConfig::new(eps)?;
        let u = dp_utility(seed, Some(&dp), &setup)?;
        println!("eps {eps:<5} noise std {:>7.2}  macro F1 {:.3}  accuracy {:.3}", noise_std_from_epsilon(&dp), u.macro_f1, u.accuracy);
    }
    Ok(())
}

//! Five institutions with ten samples each: the federated generator against
//! each institution training alone.

use fedgan::experiment::{compare_fed_standalone, ComparisonSetup};

fn main() -> fedgan::Result<()> {
    let setup = ComparisonSetup::default();
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let mut wins = 0;
    for seed in 0..seeds {
        let o = compare_fed_standalone(seed, &setup)?;
        wins += usize::from(o.federated_wins());
        let solo: Vec<String> = o.standalone_jsd.iter().map(|j| format!("{j:.3}")).collect();
        println!("seed {seed}: federated {:.3}  standalone [{}]", o.federated_jsd, solo.join(", "));
    }
    println!("federated at least as good as the best standalone in {wins}/{seeds} seeds");
    Ok(())
}

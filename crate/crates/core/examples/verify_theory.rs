//! Closed-form value-function identities on random discrete pairs.

use fedgan::divergence::{federated_optimum, jsd, optimal_discriminator, standalone_optimum, value_function, DiscreteDistribution, LN_4};
use fedgan::experiment::theory_report;

fn main() -> fedgan::Result<()> {
    let pd = DiscreteDistribution::new(vec![0.5, 0.5])?;
    let pg = DiscreteDistribution::new(vec![0.25, 0.75])?;
    let d = optimal_discriminator(&pd, &pg)?;
    println!("D* = {:?}", d.values());
    println!("V(pd, pg, D*) = {:.6}", value_function(&pd, &pg, &d)?);
    println!("-ln4 + 2 JSD  = {:.6}  (JSD = {:.6})", standalone_optimum(&pd, &pg)?, jsd(&pd, &pg)?);

    let matched = vec![(pd.clone(), pd); 3];
    println!("three matched sites: {:.6} (expected {:.6})", federated_optimum(&matched)?, -3.0 * LN_4);

    let report = theory_report(0, 10_000, 8)?;
    println!("{report:#?}\npassed: {}", report.passed());
    Ok(())
}

//! Exact divergence and value-function arithmetic over finite supports.
//!
//! Everything here works in nats. A GAN value function evaluated at the
//! optimal discriminator reduces to `-ln 4 + 2 * JSD(p_data || p_gen)`, and the
//! federated objective is the per-site sum of those values. These functions
//! are the reference that the training code is measured against.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Absolute tolerance for "masses sum to one".
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Discriminator outputs are clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]` before logs.
pub const LOG_CLAMP: f64 = 1e-12;

/// `ln 4`, the magnitude of the value function at equilibrium.
pub const LN_4: f64 = 2.0 * LN_2;

/// A probability vector over a finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    masses: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some(m) = masses.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::InvalidDistribution(format!("mass {m} is not a probability")));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}")));
        }
        Ok(Self { masses })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(size: usize) -> Result<Self> {
        Self::from_weights(&vec![1.0; size])
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
}

/// `D(x_i)` for every support point.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorVector {
    values: Vec<f64>,
}

impl DiscriminatorVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidDistribution(format!("discriminator value {v} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One institution's real distribution, generator distribution and discriminator.
#[derive(Debug, Clone)]
pub struct SiteTriple {
    real: DiscreteDistribution,
    gen: DiscreteDistribution,
    disc: DiscriminatorVector,
}

impl SiteTriple {
    pub fn new(real: DiscreteDistribution, gen: DiscreteDistribution, disc: DiscriminatorVector) -> Result<Self> {
        check_support(real.len(), gen.len())?;
        check_support(real.len(), disc.len())?;
        Ok(Self { real, gen, disc })
    }

    /// The triple with the discriminator set to its optimum for `(real, gen)`.
    pub fn optimal(real: DiscreteDistribution, gen: DiscreteDistribution) -> Result<Self> {
        let disc = optimal_discriminator(&real, &gen)?;
        Self::new(real, gen, disc)
    }

    pub fn real(&self) -> &DiscreteDistribution {
        &self.real
    }

    pub fn gen(&self) -> &DiscreteDistribution {
        &self.gen
    }

    pub fn disc(&self) -> &DiscriminatorVector {
        &self.disc
    }
}

/// Result of a KL evaluation; absolute-continuity violations are tagged rather than raised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kl {
    Finite(f64),
    /// Some `q_i = 0` where `p_i > 0`; the divergence is `+inf`.
    Undefined,
}

impl Kl {
    /// Numeric value, with `Undefined` mapped to `f64::INFINITY`.
    pub fn value(self) -> f64 {
        match self {
            Kl::Finite(v) => v,
            Kl::Undefined => f64::INFINITY,
        }
    }

    pub fn is_undefined(self) -> bool {
        matches!(self, Kl::Undefined)
    }
}

fn check_support(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::SupportMismatch { left, right });
    }
    Ok(())
}

/// `sum_i p_i ln(p_i / q_i)` with `0 ln(0/q) = 0`.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<Kl> {
    check_support(p.len(), q.len())?;
    Ok(kl_slices(p.masses(), q.masses()))
}

fn kl_slices(p: &[f64], q: &[f64]) -> Kl {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Kl::Undefined;
        }
        total += pi * (pi / qi).ln();
    }
    // rounding can leave a tiny negative residue for p == q
    Kl::Finite(total.max(0.0))
}

/// Jensen-Shannon divergence in nats, bounded by `ln 2`.
pub fn jsd(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_support(p.len(), q.len())?;
    Ok(jsd_slices(p.masses(), q.masses()))
}

pub(crate) fn jsd_slices(p: &[f64], q: &[f64]) -> f64 {
    // Each support point contributes a term that is symmetric in (p_i, q_i)
    // once the pair is ordered, so jsd(p, q) and jsd(q, p) are bit-identical.
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mid = 0.5 * (lo + hi);
        if lo > 0.0 {
            total += lo * (lo / mid).ln();
        }
        if hi > 0.0 {
            total += hi * (hi / mid).ln();
        }
    }
    (0.5 * total).clamp(0.0, LN_2)
}

/// `D*(x) = p_d(x) / (p_d(x) + p_g(x))`; points where both masses vanish get 0.5.
pub fn optimal_discriminator(p_data: &DiscreteDistribution, p_gen: &DiscreteDistribution) -> Result<DiscriminatorVector> {
    check_support(p_data.len(), p_gen.len())?;
    let values = p_data.masses().iter().zip(p_gen.masses()).map(|(&d, &g)| if d + g > 0.0 { d / (d + g) } else { 0.5 }).collect();
    DiscriminatorVector::new(values)
}

/// `sum_i [p_d,i ln D_i + p_g,i ln(1 - D_i)]` with `D` clamped away from 0 and 1.
///
/// A zero mass contributes nothing regardless of `D_i`.
pub fn value_function(p_data: &DiscreteDistribution, p_gen: &DiscreteDistribution, disc: &DiscriminatorVector) -> Result<f64> {
    check_support(p_data.len(), p_gen.len())?;
    check_support(p_data.len(), disc.len())?;
    let mut total = 0.0;
    for ((&d, &g), &v) in p_data.masses().iter().zip(p_gen.masses()).zip(disc.values()) {
        let v = v.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
        if d > 0.0 {
            total += d * v.ln();
        }
        if g > 0.0 {
            total += g * (1.0 - v).ln();
        }
    }
    Ok(total)
}

/// Closed-form optimum of a standalone GAN: `-ln 4 + 2 JSD(p_d || p_g)`.
pub fn standalone_optimum(p_data: &DiscreteDistribution, p_gen: &DiscreteDistribution) -> Result<f64> {
    Ok(-LN_4 + 2.0 * jsd(p_data, p_gen)?)
}

/// Federated value function: the sum of per-site value functions.
pub fn federated_value(sites: &[SiteTriple]) -> Result<f64> {
    if sites.is_empty() {
        return Err(Error::Empty("site list"));
    }
    sites.iter().map(|s| value_function(&s.real, &s.gen, &s.disc)).sum()
}

/// Federated optimum: `-N ln 4 + 2 sum_n JSD(p_d,n || p_g,n)`.
///
/// Accumulated per site so that it equals the sum of `standalone_optimum` exactly.
pub fn federated_optimum(pairs: &[(DiscreteDistribution, DiscreteDistribution)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("distribution pair list"));
    }
    let mut total = 0.0;
    for (d, g) in pairs {
        total += standalone_optimum(d, g)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(m: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(m.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(DiscreteDistribution::new(vec![]).is_err());
        assert!(DiscreteDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(DiscreteDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(DiscriminatorVector::new(vec![1.2]).is_err());
    }

    #[test]
    fn kl_examples() {
        let half = dist(&[0.5, 0.5]);
        let point = dist(&[1.0, 0.0]);
        assert_eq!(kl_divergence(&half, &half).unwrap(), Kl::Finite(0.0));
        let v = kl_divergence(&point, &half).unwrap().value();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        let undefined = kl_divergence(&half, &point).unwrap();
        assert!(undefined.is_undefined());
        assert_eq!(undefined.value(), f64::INFINITY);
        assert!(matches!(kl_divergence(&half, &dist(&[1.0])), Err(Error::SupportMismatch { left: 2, right: 1 })));
    }

    #[test]
    fn jsd_examples() {
        let half = dist(&[0.5, 0.5]);
        assert_eq!(jsd(&half, &half).unwrap(), 0.0);
        let disjoint = jsd(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap();
        assert!((disjoint - LN_2).abs() < 1e-15);
        // two-KL oracle: m = [0.75, 0.25]
        // KL(p||m) = 0.5 ln(2/3) + 0.5 ln 2, KL(q||m) = ln(4/3)
        let oracle = 0.5 * ((0.5f64 * (2.0f64 / 3.0).ln() + 0.5 * 2.0f64.ln()) + (4.0f64 / 3.0).ln());
        let v = jsd(&half, &dist(&[1.0, 0.0])).unwrap();
        assert!((v - oracle).abs() < 1e-15);
        assert!((v - 0.215_760_6).abs() < 1e-6);
    }

    #[test]
    fn optimal_discriminator_examples() {
        let p = dist(&[0.3, 0.7]);
        assert_eq!(optimal_discriminator(&p, &p).unwrap().values(), &[0.5, 0.5]);
        let d = optimal_discriminator(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap();
        assert_eq!(d.values(), &[1.0, 0.0]);
        let d = optimal_discriminator(&dist(&[0.75, 0.25]), &dist(&[0.25, 0.75])).unwrap();
        assert_eq!(d.values(), &[0.75, 0.25]);
        // both masses zero on the middle point
        let d = optimal_discriminator(&dist(&[0.5, 0.0, 0.5]), &dist(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(d.values()[1], 0.5);
    }

    #[test]
    fn value_function_examples() {
        let pd = dist(&[0.75, 0.25]);
        let pg = dist(&[0.25, 0.75]);
        let half = DiscriminatorVector::constant(2, 0.5).unwrap();
        assert!((value_function(&pd, &pg, &half).unwrap() + LN_4).abs() < 1e-15);

        let dstar = optimal_discriminator(&pd, &pd).unwrap();
        assert!((value_function(&pd, &pd, &dstar).unwrap() + LN_4).abs() < 1e-15);

        let dstar = optimal_discriminator(&pd, &pg).unwrap();
        let at_opt = value_function(&pd, &pg, &dstar).unwrap();
        let closed = -LN_4 + 2.0 * jsd(&pd, &pg).unwrap();
        assert!((at_opt - closed).abs() < 1e-12);

        // grid search over D on the two-point support
        let mut best = f64::NEG_INFINITY;
        for i in 1..1000 {
            for j in 1..1000 {
                let d = DiscriminatorVector::new(vec![i as f64 / 1000.0, j as f64 / 1000.0]).unwrap();
                best = best.max(value_function(&pd, &pg, &d).unwrap());
            }
        }
        assert!(best <= at_opt + 1e-12);
        assert!(at_opt - best < 1e-9, "grid contains D* = [0.75, 0.25]");
    }

    #[test]
    fn clamps_extreme_discriminators() {
        let pd = dist(&[0.5, 0.5]);
        let d = DiscriminatorVector::new(vec![0.0, 1.0]).unwrap();
        let v = value_function(&pd, &pd, &d).unwrap();
        assert!(v.is_finite());
        // Both sites hit a clamp: 0.5 ln(eps) + 0.5 ln(1 - (1 - eps)), where 1 - eps rounds in f64.
        let oracle = 0.5 * LOG_CLAMP.ln() + 0.5 * (1.0 - (1.0 - LOG_CLAMP)).ln();
        assert!((v - oracle).abs() < 1e-12);
    }

    #[test]
    fn standalone_optimum_examples() {
        let p = dist(&[0.2, 0.8]);
        assert!((standalone_optimum(&p, &p).unwrap() + LN_4).abs() < 1e-15);
        let disjoint = standalone_optimum(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap();
        assert!(disjoint.abs() < 1e-15);
        let v = standalone_optimum(&dist(&[0.5, 0.5]), &dist(&[1.0, 0.0])).unwrap();
        // JSD = 0.5 * (0.5 ln(2/3) + 0.5 ln 2) + 0.5 ln(4/3)
        let j = 0.5 * (0.5 * (2.0f64 / 3.0).ln() + 0.5 * 2f64.ln()) + 0.5 * (4.0f64 / 3.0).ln();
        assert!((v - (-LN_4 + 2.0 * j)).abs() < 1e-12);
        assert!((v + 0.954_771).abs() < 1e-6);
    }

    #[test]
    fn federated_examples() {
        let pd = dist(&[0.75, 0.25]);
        let pg = dist(&[0.25, 0.75]);
        let one = SiteTriple::optimal(pd.clone(), pg.clone()).unwrap();
        assert_eq!(federated_value(std::slice::from_ref(&one)).unwrap(), value_function(&pd, &pg, one.disc()).unwrap());

        let half = DiscriminatorVector::constant(2, 0.5).unwrap();
        let sites: Vec<_> = (0..4).map(|_| SiteTriple::new(pd.clone(), pg.clone(), half.clone()).unwrap()).collect();
        assert!((federated_value(&sites).unwrap() + 4.0 * LN_4).abs() < 1e-12);

        let other = SiteTriple::optimal(dist(&[0.1, 0.9]), dist(&[0.6, 0.4])).unwrap();
        let fed = federated_value(&[one.clone(), other.clone()]).unwrap();
        let per_site = standalone_optimum(one.real(), one.gen()).unwrap() + standalone_optimum(other.real(), other.gen()).unwrap();
        assert!((fed - per_site).abs() < 1e-12);

        assert!(federated_value(&[]).is_err());
        assert!(federated_optimum(&[]).is_err());

        let matched = (pd.clone(), pd.clone());
        let v = federated_optimum(&[matched.clone(), matched.clone(), matched.clone()]).unwrap();
        assert!((v + 3.0 * LN_4).abs() < 1e-12);
        assert!((v + 4.158_883).abs() < 1e-6);

        let disjoint = (dist(&[1.0, 0.0]), dist(&[0.0, 1.0]));
        let v = federated_optimum(&[matched.clone(), disjoint]).unwrap();
        assert!((v - (-2.0 * LN_4 + 2.0 * LN_2)).abs() < 1e-12);
        assert_eq!(federated_optimum(std::slice::from_ref(&matched)).unwrap(), standalone_optimum(&pd, &pd).unwrap());
    }

    #[test]
    fn site_triple_checks_support() {
        let err = SiteTriple::new(dist(&[1.0]), dist(&[0.5, 0.5]), DiscriminatorVector::constant(1, 0.5).unwrap());
        assert!(err.is_err());
    }
}

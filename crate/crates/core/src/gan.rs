//! One institution's GAN: the discriminator ascent step, the generator descent
//! step, and the local update loop run between two aggregation rounds.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::ClientState;
use crate::nn::{Dropout, ForwardTrace, Gradients, Matrix, Minibatch, Network};
use crate::privacy::{dp_step, DpScope};

/// Discriminator outputs are clamped to `[OUTPUT_CLAMP, 1 - OUTPUT_CLAMP]` inside losses.
pub const OUTPUT_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHyperparams {
    /// Local epochs `L`; each epoch is one discriminator step then one generator step.
    pub local_epochs: usize,
    /// Minibatch size `k`.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub noise_dim: usize,
    #[serde(default)]
    pub generator_loss: GeneratorLoss,
    /// Inverted-dropout rate on discriminator hidden layers; 0 disables it.
    #[serde(default)]
    pub dropout: f64,
}

impl Default for TrainingHyperparams {
    fn default() -> Self {
        Self {
            local_epochs: 20,
            batch_size: 32,
            learning_rate: 0.05,
            noise_dim: 2,
            generator_loss: GeneratorLoss::Saturating,
            dropout: 0.0,
        }
    }
}

impl TrainingHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::arg("batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::arg("learning rate must be positive"));
        }
        if self.noise_dim == 0 {
            return Err(Error::arg("noise dimension must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::arg("dropout rate must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Which generator objective is descended.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorLoss {
    /// `(1/k) sum ln(1 - D(G(z)))`, the minimax form.
    #[default]
    Saturating,
    /// `-(1/k) sum ln D(G(z))`. Not part of the minimax game; offered for comparison.
    NonSaturating,
}

/// `k` i.i.d. standard-normal rows of width `dim`.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R, k: usize, dim: usize) -> Result<Minibatch> {
    if k == 0 {
        return Err(Error::arg("noise batch must have at least one row"));
    }
    let data = (0..k * dim).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::from_vec(k, dim, data)
}

/// `k` rows drawn uniformly with replacement from `shard`.
pub fn sample_real<R: Rng + ?Sized>(rng: &mut R, shard: &Matrix, k: usize) -> Result<Minibatch> {
    if shard.rows() == 0 {
        return Err(Error::Empty("client shard"));
    }
    let idx: Vec<usize> = (0..k).map(|_| rng.random_range(0..shard.rows())).collect();
    Ok(shard.select_rows(&idx))
}

fn clamp_d(d: f64) -> f64 {
    d.clamp(OUTPUT_CLAMP, 1.0 - OUTPUT_CLAMP)
}

fn check_disc(disc: &Network) -> Result<()> {
    if disc.output_dim() != 1 {
        return Err(Error::dim("discriminator must have a single output"));
    }
    Ok(())
}

fn check_pair(disc: &Network, gen: &Network) -> Result<()> {
    check_disc(disc)?;
    if gen.output_dim() != disc.input_dim() {
        return Err(Error::dim(format!("generator emits {} features, discriminator reads {}", gen.output_dim(), disc.input_dim())));
    }
    Ok(())
}

fn disc_trace(disc: &Network, batch: &Matrix, dropout: Option<(&mut dyn rand::RngCore, f64)>) -> Result<ForwardTrace> {
    match dropout {
        Some((rng, rate)) => disc.forward_trace_dropout(batch, Dropout { rate, rng }),
        None => disc.forward_trace(batch),
    }
}

/// Discriminator objective `(1/k) sum_j [ln D(x_j) + ln(1 - D(fake_j))]` and its gradient.
///
/// The gradient points uphill; the discriminator ascends it.
pub fn discriminator_objective(disc: &Network, real: &Matrix, fake: &Matrix) -> Result<(f64, Gradients)> {
    discriminator_objective_with(disc, real, fake, None)
}

fn discriminator_objective_with(
    disc: &Network,
    real: &Matrix,
    fake: &Matrix,
    dropout: Option<(&mut dyn rand::RngCore, f64)>,
) -> Result<(f64, Gradients)> {
    check_disc(disc)?;
    if real.rows() != fake.rows() {
        return Err(Error::dim("real and generated batches differ in size"));
    }
    if real.rows() == 0 {
        return Err(Error::Empty("minibatch"));
    }
    let k = real.rows() as f64;
    let (real_trace, fake_trace) = match dropout {
        Some((rng, rate)) => (disc_trace(disc, real, Some((&mut *rng, rate)))?, disc_trace(disc, fake, Some((rng, rate)))?),
        None => (disc.forward_trace(real)?, disc.forward_trace(fake)?),
    };
    let mut objective = 0.0;
    let upstream: Vec<f64> = real_trace
        .output()
        .as_slice()
        .iter()
        .map(|&d| {
            let d = clamp_d(d);
            objective += d.ln() / k;
            1.0 / (k * d)
        })
        .collect();
    let (mut grads, _) = disc.backward(&real_trace, &Matrix::from_vec(real.rows(), 1, upstream)?)?;

    let upstream: Vec<f64> = fake_trace
        .output()
        .as_slice()
        .iter()
        .map(|&d| {
            let d = clamp_d(d);
            objective += (1.0 - d).ln() / k;
            -1.0 / (k * (1.0 - d))
        })
        .collect();
    let (fake_grads, _) = disc.backward(&fake_trace, &Matrix::from_vec(fake.rows(), 1, upstream)?)?;
    grads.add_assign(&fake_grads);
    Ok((objective, grads))
}

/// Generator loss and its gradient with respect to the generator's parameters.
///
/// The discriminator is only read; the gradient flows through it into `gen`.
pub fn generator_loss(disc: &Network, gen: &Network, noise: &Matrix, kind: GeneratorLoss) -> Result<(f64, Gradients)> {
    check_pair(disc, gen)?;
    if noise.rows() == 0 {
        return Err(Error::Empty("noise batch"));
    }
    let k = noise.rows() as f64;
    let gen_trace = gen.forward_trace(noise)?;
    let disc_trace = disc.forward_trace(gen_trace.output())?;
    let mut loss = 0.0;
    let upstream: Vec<f64> = disc_trace
        .output()
        .as_slice()
        .iter()
        .map(|&d| {
            let d = clamp_d(d);
            match kind {
                GeneratorLoss::Saturating => {
                    loss += (1.0 - d).ln() / k;
                    -1.0 / (k * (1.0 - d))
                }
                GeneratorLoss::NonSaturating => {
                    loss -= d.ln() / k;
                    -1.0 / (k * d)
                }
            }
        })
        .collect();
    let (_, into_disc) = disc.backward(&disc_trace, &Matrix::from_vec(noise.rows(), 1, upstream)?)?;
    let (grads, _) = gen.backward(&gen_trace, &into_disc)?;
    Ok((loss, grads))
}

/// Which gradient [`backward`] computes.
pub enum Objective<'a> {
    /// Discriminator objective; the batch holds real samples, `fake` holds `G(z)`.
    Discriminator { fake: &'a Matrix },
    /// Generator loss; the batch holds noise and `disc` scores the generator's output.
    Generator { disc: &'a Network, kind: GeneratorLoss },
    /// Softmax cross-entropy against `labels`.
    ClassifierCe { labels: &'a [usize] },
}

/// Objective value and exact gradient of `net` for the given objective.
pub fn backward(net: &Network, batch: &Matrix, objective: Objective<'_>) -> Result<(f64, Gradients)> {
    match objective {
        Objective::Discriminator { fake } => discriminator_objective(net, batch, fake),
        Objective::Generator { disc, kind } => generator_loss(disc, net, batch, kind),
        Objective::ClassifierCe { labels } => crate::nn::cross_entropy_grad(net, batch, labels),
    }
}

/// One ascent step on the discriminator objective.
///
/// Returns the updated discriminator and the objective before the step.
pub fn discriminator_step(disc: &Network, gen: &Network, real: &Minibatch, noise: &Minibatch, rate: f64) -> Result<(Network, f64)> {
    check_pair(disc, gen)?;
    if real.rows() != noise.rows() {
        return Err(Error::dim("real and noise batches differ in size"));
    }
    let fake = gen.forward(noise)?;
    let (objective, grads) = discriminator_objective(disc, real, &fake)?;
    let mut descent = grads;
    descent.scale(-1.0);
    Ok((disc.sgd_step(&descent, rate)?, objective))
}

/// One descent step on the generator loss with the discriminator frozen.
pub fn generator_step(disc: &Network, gen: &Network, noise: &Minibatch, rate: f64) -> Result<(Network, f64)> {
    generator_step_with(disc, gen, noise, rate, GeneratorLoss::Saturating)
}

pub fn generator_step_with(disc: &Network, gen: &Network, noise: &Minibatch, rate: f64, kind: GeneratorLoss) -> Result<(Network, f64)> {
    let (loss, grads) = generator_loss(disc, gen, noise, kind)?;
    Ok((gen.sgd_step(&grads, rate)?, loss))
}

/// Losses recorded at one local epoch, measured before that epoch's updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub disc_objective: f64,
    pub gen_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub disc: Network,
    pub gen: Network,
    pub trace: Vec<EpochLoss>,
}

/// Runs `L` local epochs at one client starting from the broadcast globals.
///
/// Each epoch draws `k` real rows and `k` noise rows from the client's stream,
/// takes one discriminator ascent step and then one generator descent step on
/// the same noise. With a [`DpConfig`](crate::privacy::DpConfig) on the client both updates go through
/// the clipped, noised rule in [`dp_step`].
pub fn local_update(
    client: &mut ClientState,
    global_disc: &Network,
    global_gen: &Network,
    hp: &TrainingHyperparams,
) -> Result<LocalUpdate> {
    hp.validate()?;
    check_pair(global_disc, global_gen)?;
    if global_gen.input_dim() != hp.noise_dim {
        return Err(Error::dim("generator input does not match the noise dimension"));
    }
    if global_disc.input_dim() != client.shard.cols() {
        return Err(Error::dim("discriminator input does not match the shard width"));
    }
    if client.shard.rows() == 0 {
        return Err(Error::Empty("client shard"));
    }
    let mut disc = global_disc.clone();
    let mut gen = global_gen.clone();
    let mut trace = Vec::with_capacity(hp.local_epochs);
    let rng = &mut client.rng;
    for _ in 0..hp.local_epochs {
        let noise = sample_noise(rng, hp.batch_size, hp.noise_dim)?;
        let real = sample_real(rng, &client.shard, hp.batch_size)?;

        let fake = gen.forward(&noise)?;
        let dropout = (hp.dropout > 0.0).then_some(hp.dropout);
        let (disc_objective, mut descent) = match dropout {
            Some(rate) => discriminator_objective_with(&disc, &real, &fake, Some((&mut *rng, rate)))?,
            None => discriminator_objective(&disc, &real, &fake)?,
        };
        descent.scale(-1.0);
        disc = match &client.dp {
            Some(dp) => dp_step(&disc, &descent, hp.learning_rate, dp, rng)?,
            None => disc.sgd_step(&descent, hp.learning_rate)?,
        };

        let (gen_loss, grads) = generator_loss(&disc, &gen, &noise, hp.generator_loss)?;
        gen = match &client.dp {
            Some(dp) if dp.scope == DpScope::Both => dp_step(&gen, &grads, hp.learning_rate, dp, rng)?,
            _ => gen.sgd_step(&grads, hp.learning_rate)?,
        };
        trace.push(EpochLoss { disc_objective, gen_loss });
    }
    Ok(LocalUpdate { disc, gen, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::LN_4;
    use crate::nn::{Activation, Architecture, Layer};
    use crate::rng::stream;

    fn constant_half_disc(dim: usize) -> Network {
        Network::new(vec![Layer::new(Matrix::zeros(1, dim), vec![0.0], Activation::Sigmoid).unwrap()]).unwrap()
    }

    fn toy_pair(seed: u64) -> (Network, Network) {
        let mut rng = stream(seed, 0);
        let disc = Architecture::mlp(1, &[8], 1, Activation::Sigmoid).init(&mut rng).unwrap();
        let gen = Architecture::mlp(1, &[8], 1, Activation::Identity).init(&mut rng).unwrap();
        (disc, gen)
    }

    #[test]
    fn noise_is_deterministic_and_rejects_empty() {
        let a = sample_noise(&mut stream(1, 0), 5, 3).unwrap();
        let b = sample_noise(&mut stream(1, 0), 5, 3).unwrap();
        assert_eq!(a, b);
        assert!(sample_noise(&mut stream(1, 0), 0, 3).is_err());
    }

    #[test]
    fn noise_moments() {
        // std error of the mean is 1/sqrt(1e5) ~ 0.0032, of the std ~ 0.0022
        let z = sample_noise(&mut stream(11, 0), 100_000, 1).unwrap();
        let n = z.rows() as f64;
        let mean = z.as_slice().iter().sum::<f64>() / n;
        let var = z.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.02);
        assert!((var.sqrt() - 1.0).abs() < 0.02);
    }

    #[test]
    fn half_discriminator_objective_is_minus_ln4() {
        let disc = constant_half_disc(1);
        let (_, gen) = toy_pair(1);
        let real = Matrix::from_rows(&[vec![0.3], vec![-1.0]]).unwrap();
        let noise = Matrix::from_rows(&[vec![0.1], vec![2.0]]).unwrap();
        let (_, obj) = discriminator_step(&disc, &gen, &real, &noise, 0.1).unwrap();
        assert!((obj + LN_4).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_leaves_parameters() {
        let (disc, gen) = toy_pair(2);
        let real = Matrix::from_rows(&[vec![0.3], vec![-1.0]]).unwrap();
        let noise = Matrix::from_rows(&[vec![0.1], vec![2.0]]).unwrap();
        let (d2, obj) = discriminator_step(&disc, &gen, &real, &noise, 0.0).unwrap();
        assert_eq!(d2, disc);
        assert!(obj.is_finite());
        let (g2, _) = generator_step(&disc, &gen, &noise, 0.0).unwrap();
        assert_eq!(g2, gen);
    }

    #[test]
    fn constant_discriminator_gives_zero_generator_gradient() {
        let disc = constant_half_disc(1);
        let (_, gen) = toy_pair(3);
        let noise = sample_noise(&mut stream(3, 1), 16, 1).unwrap();
        let (_, g) = generator_loss(&disc, &gen, &noise, GeneratorLoss::Saturating).unwrap();
        assert_eq!(g.l2_norm(), 0.0);
    }

    #[test]
    fn step_shapes_are_preserved() {
        let (disc, gen) = toy_pair(4);
        let noise = sample_noise(&mut stream(4, 1), 8, 1).unwrap();
        let real = sample_noise(&mut stream(4, 2), 8, 1).unwrap();
        let (d2, _) = discriminator_step(&disc, &gen, &real, &noise, 0.01).unwrap();
        let (g2, _) = generator_step(&d2, &gen, &noise, 0.01).unwrap();
        assert!(d2.same_shape(&disc));
        assert!(g2.same_shape(&gen));
    }

    #[test]
    fn mismatched_batches_are_rejected() {
        let (disc, gen) = toy_pair(5);
        let real = Matrix::zeros(3, 1);
        let noise = Matrix::zeros(2, 1);
        assert!(discriminator_step(&disc, &gen, &real, &noise, 0.1).is_err());
        let wide_noise = Matrix::zeros(2, 3);
        assert!(generator_step(&disc, &gen, &wide_noise, 0.1).is_err());
    }

    /// Fraction of seeded one-step trials where a small step moves the objective the right way.
    fn step_success_rate(ascend: bool) -> usize {
        (0..100u64)
            .filter(|&seed| {
                let (disc, gen) = toy_pair(100 + seed);
                let mut rng = stream(seed, 9);
                let real =
                    Matrix::from_vec(32, 1, (0..32).map(|_| 2.0 + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect())
                        .unwrap();
                let noise = sample_noise(&mut rng, 32, 1).unwrap();
                if ascend {
                    let (d2, before) = discriminator_step(&disc, &gen, &real, &noise, 1e-3).unwrap();
                    let (_, after) = discriminator_step(&d2, &gen, &real, &noise, 0.0).unwrap();
                    after >= before
                } else {
                    let (g2, before) = generator_step(&disc, &gen, &noise, 1e-3).unwrap();
                    let (_, after) = generator_step(&disc, &g2, &noise, 0.0).unwrap();
                    after <= before
                }
            })
            .count()
    }

    #[test]
    fn small_steps_ascend_and_descend() {
        assert!(step_success_rate(true) >= 95);
        assert!(step_success_rate(false) >= 95);
    }
}

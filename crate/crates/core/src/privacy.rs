//! Gradient perturbation for differentially private training.
//!
//! An update is `theta - rate * (clip(g, C) + zeta)` with `zeta` i.i.d. Gaussian.
//! The noise scale comes from the Gaussian mechanism,
//! `std = C * sqrt(2 ln(1.25 / delta)) / epsilon`, calibrated per step for
//! replace-one adjacency with L2 sensitivity `C`. Composition over steps is not
//! accounted here; the run manifest reports the naive `steps * epsilon` total.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Gradients, Network};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    /// Per-step privacy budget.
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
    /// Overrides the calibrated standard deviation when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_noise_std: Option<f64>,
    #[serde(default)]
    pub scope: DpScope,
}

/// Which networks' updates are perturbed.
///
/// The generator only sees real data through the discriminator, so perturbing
/// the discriminator alone already makes the generator's updates
/// post-processing of private outputs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DpScope {
    #[default]
    Both,
    Discriminator,
}

fn default_delta() -> f64 {
    1e-5
}

fn default_clip() -> f64 {
    1.0
}

impl DpConfig {
    pub fn new(epsilon: f64) -> Result<Self> {
        let cfg = Self { epsilon, delta: default_delta(), clip_norm: default_clip(), explicit_noise_std: None, scope: DpScope::Both };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_scope(mut self, scope: DpScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn with_noise_std(mut self, std: f64) -> Self {
        self.explicit_noise_std = Some(std);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::arg("epsilon must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::arg("delta must lie in (0, 1)"));
        }
        if !(self.clip_norm > 0.0 && self.clip_norm.is_finite()) {
            return Err(Error::arg("clip norm must be positive"));
        }
        if let Some(std) = self.explicit_noise_std {
            if !(std >= 0.0 && std.is_finite()) {
                return Err(Error::arg("explicit noise std must be non-negative"));
            }
        }
        Ok(())
    }

    /// Naive sequential composition, `steps * epsilon`.
    pub fn naive_total_epsilon(&self, steps: usize) -> f64 {
        steps as f64 * self.epsilon
    }
}

/// Per-coordinate standard deviation of the injected noise.
pub fn noise_std_from_epsilon(cfg: &DpConfig) -> f64 {
    if let Some(std) = cfg.explicit_noise_std {
        return std;
    }
    cfg.clip_norm * (2.0 * (1.25 / cfg.delta).ln()).sqrt() / cfg.epsilon
}

/// Scales `g` onto the L2 ball of radius `clip_norm` if it lies outside.
pub fn clip_gradient(g: &Gradients, clip_norm: f64) -> Gradients {
    let norm = g.l2_norm();
    let mut out = g.clone();
    if norm > clip_norm {
        out.scale(clip_norm / norm);
    }
    out
}

/// One perturbed descent step: `params - rate * (clip(g) + zeta)`.
pub fn dp_step<R: Rng + ?Sized>(params: &Network, g: &Gradients, rate: f64, cfg: &DpConfig, rng: &mut R) -> Result<Network> {
    params.check_gradients(g)?;
    cfg.validate()?;
    let std = noise_std_from_epsilon(cfg);
    let mut noisy = clip_gradient(g, cfg.clip_norm);
    if std > 0.0 {
        let normal = Normal::new(0.0, std).map_err(|e| Error::arg(e.to_string()))?;
        for v in noisy.values_mut() {
            *v += normal.sample(rng);
        }
    }
    params.sgd_step(&noisy, rate)
}

//! Toy datasets standing in for the three-class X-ray corpora.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::LabeledDataset;
use crate::nn::Matrix;

/// `n` draws from an equal-weight isotropic Gaussian mixture.
pub fn gaussian_mixture<R: Rng + ?Sized>(rng: &mut R, n: usize, centers: &[Vec<f64>], std: f64) -> Result<Matrix> {
    let dim = centers.first().map(Vec::len).ok_or(Error::Empty("mixture centers"))?;
    if centers.iter().any(|c| c.len() != dim) {
        return Err(Error::dim("mixture centers differ in dimension"));
    }
    let mut data = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let c = &centers[rng.random_range(0..centers.len())];
        for &mu in c {
            let z: f64 = StandardNormal.sample(rng);
            data.push(mu + std * z);
        }
    }
    Matrix::from_vec(n, dim, data)
}

/// Isotropic Gaussian blobs: `counts[c]` samples around `centers[c]`, grouped by class.
pub fn blobs<R: Rng + ?Sized>(rng: &mut R, counts: &[usize], centers: &[Vec<f64>], std: f64) -> Result<LabeledDataset> {
    if counts.len() != centers.len() {
        return Err(Error::arg("one center per class required"));
    }
    let dim = centers.first().map(Vec::len).ok_or(Error::Empty("blob centers"))?;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (class, (&count, center)) in counts.iter().zip(centers).enumerate() {
        for _ in 0..count {
            for &mu in center {
                let z: f64 = StandardNormal.sample(rng);
                data.push(mu + std * z);
            }
            labels.push(class);
        }
    }
    LabeledDataset::new(Matrix::from_vec(labels.len(), dim, data)?, labels, counts.len())
}

/// `n` draws from a distribution over the listed 1-D support points.
pub fn discrete_points<R: Rng + ?Sized>(rng: &mut R, n: usize, points: &[f64], weights: &[f64]) -> Result<Matrix> {
    if points.len() != weights.len() || points.is_empty() {
        return Err(Error::arg("need one weight per support point"));
    }
    let dist = rand::distr::weighted::WeightedIndex::new(weights).map_err(|e| Error::arg(e.to_string()))?;
    Matrix::from_vec(n, 1, (0..n).map(|_| points[dist.sample(rng)]).collect())
}

/// Per-class original and synthetic counts of the two X-ray corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPreset {
    pub name: String,
    pub classes: Vec<String>,
    pub original_counts: Vec<usize>,
    pub synthetic_per_class: usize,
}

impl DatasetPreset {
    pub fn dark_covid() -> Self {
        Self {
            name: "dark-covid".into(),
            classes: vec!["covid-19".into(), "normal".into(), "pneumonia".into()],
            original_counts: vec![150, 232, 238],
            synthetic_per_class: 500,
        }
    }

    pub fn chest_covid() -> Self {
        Self {
            name: "chest-covid".into(),
            classes: vec!["covid-19".into(), "normal".into(), "pneumonia".into()],
            original_counts: vec![223, 421, 306],
            synthetic_per_class: 800,
        }
    }

    /// Imbalanced toy set: 15 minority samples against 50 and 50.
    pub fn toy_imbalanced() -> Self {
        Self {
            name: "toy-imbalanced".into(),
            classes: vec!["covid-19".into(), "normal".into(), "pneumonia".into()],
            original_counts: vec![15, 50, 50],
            synthetic_per_class: 50,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "dark-covid" => Some(Self::dark_covid()),
            "chest-covid" => Some(Self::chest_covid()),
            "toy-imbalanced" => Some(Self::toy_imbalanced()),
            _ => None,
        }
    }

    /// Counts scaled by `factor`, each kept at least 1.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.original_counts = self.original_counts.iter().map(|&c| ((c as f64 * factor).round() as usize).max(1)).collect();
        out.synthetic_per_class = ((self.synthetic_per_class as f64 * factor).round() as usize).max(1);
        out
    }

    pub fn original_total(&self) -> usize {
        self.original_counts.iter().sum()
    }

    pub fn synthetic_total(&self) -> usize {
        self.synthetic_per_class * self.classes.len()
    }
}

/// Three well-spread 2-D blob centers, one per class.
pub fn three_class_centers() -> Vec<Vec<f64>> {
    vec![vec![-1.0, -0.6], vec![1.0, -0.6], vec![0.0, 1.0]]
}

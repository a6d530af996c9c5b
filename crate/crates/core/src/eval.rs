//! Downstream evaluation: histogram divergence between sample sets, a softmax
//! classifier, per-class metrics, and the real/synthetic mixing sweep.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::divergence::jsd_slices;
use crate::error::{Error, Result};
use crate::federation::generate_synthetic;
use crate::nn::{cross_entropy_grad, Activation, Architecture, Matrix, Network};
use crate::rng;

/// Samples with class labels in `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    samples: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(samples: Matrix, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if samples.rows() != labels.len() {
            return Err(Error::dim("sample and label counts differ"));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::arg(format!("label {l} outside 0..{num_classes}")));
        }
        Ok(Self { samples, labels, num_classes })
    }

    pub fn samples(&self) -> &Matrix {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Samples of one class.
    pub fn class_samples(&self, class: usize) -> Matrix {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == class).collect();
        self.samples.select_rows(&idx)
    }

    pub fn concat(&self, other: &LabeledDataset) -> Result<LabeledDataset> {
        if self.num_classes != other.num_classes {
            return Err(Error::arg("datasets disagree on the number of classes"));
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        LabeledDataset::new(self.samples.vstack(&other.samples)?, labels, self.num_classes)
    }

    /// Random split; `fraction` of each class goes to the first set.
    pub fn stratified_split<R: Rng + ?Sized>(&self, fraction: f64, rng: &mut R) -> Result<(LabeledDataset, LabeledDataset)> {
        let mut first = Vec::new();
        let mut second = Vec::new();
        for class in 0..self.num_classes {
            let mut idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == class).collect();
            idx.shuffle(rng);
            let cut = (idx.len() as f64 * fraction).round() as usize;
            first.extend_from_slice(&idx[..cut]);
            second.extend_from_slice(&idx[cut..]);
        }
        let pick = |idx: &[usize]| {
            LabeledDataset::new(self.samples.select_rows(idx), idx.iter().map(|&i| self.labels[i]).collect(), self.num_classes)
        };
        Ok((pick(&first)?, pick(&second)?))
    }
}

/// Histogram JSD between two sample sets on a shared equal-width grid.
///
/// Each dimension is cut into `bins` cells spanning the joint range of both
/// sets; the `bins^dim` cell counts get add-one smoothing before the divergence.
pub fn empirical_jsd(real: &Matrix, generated: &Matrix, bins: usize) -> Result<f64> {
    if real.rows() == 0 || generated.rows() == 0 {
        return Err(Error::Empty("sample set"));
    }
    if bins < 2 {
        return Err(Error::arg("need at least two bins"));
    }
    if real.cols() != generated.cols() {
        return Err(Error::dim("sample sets differ in dimension"));
    }
    let dim = real.cols();
    let cells = (0..dim)
        .try_fold(1usize, |acc, _| acc.checked_mul(bins))
        .filter(|&c| c <= 1 << 24)
        .ok_or_else(|| Error::arg("histogram grid too large"))?;
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for row in real.iter_rows().chain(generated.iter_rows()) {
        for (d, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::arg("non-finite sample"));
            }
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    let histogram = |m: &Matrix| {
        let mut counts = vec![1.0; cells];
        for row in m.iter_rows() {
            let mut cell = 0;
            for (d, &v) in row.iter().enumerate() {
                let width = hi[d] - lo[d];
                let b = if width > 0.0 { (((v - lo[d]) / width) * bins as f64) as usize } else { 0 };
                cell = cell * bins + b.min(bins - 1);
            }
            counts[cell] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        counts.iter_mut().for_each(|c| *c /= total);
        counts
    };
    Ok(jsd_slices(&histogram(real), &histogram(generated)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { hidden: vec![16], epochs: 100, learning_rate: 0.001, batch_size: 8 }
    }
}

/// Minibatch SGD on softmax cross-entropy. Same rng state, same parameters.
pub fn train_classifier<R: Rng + ?Sized>(train: &LabeledDataset, config: &ClassifierConfig, rng: &mut R) -> Result<Network> {
    Ok(train_classifier_traced(train, config, rng, None)?.0)
}

/// [`train_classifier`], also returning the accuracy on `monitor` after every
/// epoch (empty when `monitor` is `None`). Monitoring does not touch the rng.
pub fn train_classifier_traced<R: Rng + ?Sized>(
    train: &LabeledDataset,
    config: &ClassifierConfig,
    rng: &mut R,
    monitor: Option<&LabeledDataset>,
) -> Result<(Network, Vec<f64>)> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if train.num_classes() < 2 {
        return Err(Error::arg("classifier needs at least two classes"));
    }
    if config.batch_size == 0 || config.learning_rate.is_nan() || config.learning_rate <= 0.0 {
        return Err(Error::arg("batch size and learning rate must be positive"));
    }
    let arch = Architecture::mlp(train.samples().cols(), &config.hidden, train.num_classes(), Activation::Softmax);
    let mut net = arch.init(rng)?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curve = Vec::new();
    for _ in 0..config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(config.batch_size) {
            let x = train.samples().select_rows(chunk);
            let y: Vec<usize> = chunk.iter().map(|&i| train.labels()[i]).collect();
            let (_, grads) = cross_entropy_grad(&net, &x, &y)?;
            net = net.sgd_step(&grads, config.learning_rate)?;
        }
        if let Some(m) = monitor {
            curve.push(evaluate(&net, m)?.accuracy);
        }
    }
    Ok((net, curve))
}

/// `size` rows drawn without replacement, kept in their original order.
pub fn subsample<R: Rng + ?Sized>(data: &LabeledDataset, size: usize, rng: &mut R) -> Result<LabeledDataset> {
    if size > data.len() {
        return Err(Error::arg(format!("cannot draw {size} of {} samples", data.len())));
    }
    let mut idx = rand::seq::index::sample(rng, data.len(), size).into_vec();
    idx.sort_unstable();
    LabeledDataset::new(data.samples.select_rows(&idx), idx.iter().map(|&i| data.labels[i]).collect(), data.num_classes)
}

pub fn predict(classifier: &Network, samples: &Matrix) -> Result<Vec<usize>> {
    let probs = classifier.forward(samples)?;
    Ok(probs
        .iter_rows()
        .take(samples.rows())
        .map(|row| row.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best }).0)
        .collect())
}

/// Per-class precision, sensitivity and F1 from a confusion matrix.
///
/// `confusion[t][p]` counts samples of true class `t` predicted as `p`. A zero
/// denominator yields 0 with the matching `*_undefined` flag set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: Vec<f64>,
    pub sensitivity: Vec<f64>,
    pub f1: Vec<f64>,
    pub precision_undefined: Vec<bool>,
    pub sensitivity_undefined: Vec<bool>,
    pub confusion: Vec<Vec<usize>>,
}

impl ClassMetrics {
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Result<Self> {
        let n = confusion.len();
        if confusion.iter().any(|r| r.len() != n) {
            return Err(Error::dim("confusion matrix must be square"));
        }
        let mut m = Self {
            precision: vec![0.0; n],
            sensitivity: vec![0.0; n],
            f1: vec![0.0; n],
            precision_undefined: vec![false; n],
            sensitivity_undefined: vec![false; n],
            confusion,
        };
        for c in 0..n {
            let tp = m.confusion[c][c] as f64;
            let predicted: usize = m.confusion.iter().map(|r| r[c]).sum();
            let actual: usize = m.confusion[c].iter().sum();
            if predicted == 0 {
                m.precision_undefined[c] = true;
            } else {
                m.precision[c] = tp / predicted as f64;
            }
            if actual == 0 {
                m.sensitivity_undefined[c] = true;
            } else {
                m.sensitivity[c] = tp / actual as f64;
            }
            let (p, r) = (m.precision[c], m.sensitivity[c]);
            if p + r > 0.0 {
                m.f1[c] = 2.0 * p * r / (p + r);
            }
        }
        Ok(m)
    }

    /// `""`, `"precision"`, `"sensitivity"` or `"both"`, naming the zero-denominator metrics of `class`.
    pub fn undefined_label(&self, class: usize) -> &'static str {
        match (self.precision_undefined[class], self.sensitivity_undefined[class]) {
            (false, false) => "",
            (true, false) => "precision",
            (false, true) => "sensitivity",
            (true, true) => "both",
        }
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (0..self.confusion.len()).map(|c| self.confusion[c][c]).sum::<usize>() as f64 / total as f64
    }

    pub fn macro_f1(&self) -> f64 {
        self.f1.iter().sum::<f64>() / self.f1.len().max(1) as f64
    }

    /// Pooled `TP / (TP + FP)` over all classes.
    pub fn micro_precision(&self) -> f64 {
        let tp: usize = (0..self.confusion.len()).map(|c| self.confusion[c][c]).sum();
        let predicted = self.total();
        if predicted == 0 {
            0.0
        } else {
            tp as f64 / predicted as f64
        }
    }

    /// Pooled `TP / (TP + FN)` over all classes.
    pub fn micro_sensitivity(&self) -> f64 {
        let tp: usize = (0..self.confusion.len()).map(|c| self.confusion[c][c]).sum();
        let actual: usize = self.confusion.iter().map(|r| r.iter().sum::<usize>()).sum();
        if actual == 0 {
            0.0
        } else {
            tp as f64 / actual as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub metrics: ClassMetrics,
    pub accuracy: f64,
}

/// Argmax predictions on `test`, tallied into a confusion matrix.
pub fn evaluate(classifier: &Network, test: &LabeledDataset) -> Result<Evaluation> {
    if classifier.output_dim() != test.num_classes() {
        return Err(Error::dim("classifier outputs do not match the class count"));
    }
    let predictions = predict(classifier, test.samples())?;
    let n = test.num_classes();
    let mut confusion = vec![vec![0; n]; n];
    for (&truth, &pred) in test.labels().iter().zip(&predictions) {
        confusion[truth][pred] += 1;
    }
    let metrics = ClassMetrics::from_confusion(confusion)?;
    let accuracy = metrics.accuracy();
    Ok(Evaluation { metrics, accuracy })
}

/// Synthetic-to-real count ratio for augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingConfig {
    pub ratio: f64,
    /// Add `ratio * n_c` samples to each class `c` when set; otherwise add
    /// `ratio * n` samples split evenly across classes.
    #[serde(default)]
    pub per_class: bool,
}

impl MixingConfig {
    pub fn new(ratio: f64) -> Self {
        Self { ratio, per_class: false }
    }

    /// Synthetic samples to draw for each class given the real class counts.
    pub fn synthetic_counts(&self, real_counts: &[usize]) -> Vec<usize> {
        if self.per_class {
            real_counts.iter().map(|&c| (self.ratio * c as f64).round() as usize).collect()
        } else {
            let total: usize = real_counts.iter().sum();
            let per = (self.ratio * total as f64 / real_counts.len().max(1) as f64).round() as usize;
            vec![per; real_counts.len()]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub ratio: f64,
    /// Real samples in the training set.
    pub real_size: usize,
    /// Real plus synthetic samples.
    pub train_size: usize,
    pub accuracy: f64,
    pub metrics: ClassMetrics,
}

/// Trains one classifier per mixing ratio on real plus generated data and
/// scores it on the real test set.
///
/// Every cell uses the same classifier initialization and shuffling stream, so
/// ratio 0 is exactly real-only training.
pub fn mixing_sweep(
    real: &LabeledDataset,
    test: &LabeledDataset,
    generators: &[Network],
    ratios: &[MixingConfig],
    trainer: &ClassifierConfig,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if ratios.is_empty() {
        return Err(Error::Empty("ratio list"));
    }
    if generators.len() != real.num_classes() {
        return Err(Error::arg("one generator per class required"));
    }
    if let Some(r) = ratios.iter().find(|r| r.ratio.is_nan() || r.ratio < 0.0) {
        return Err(Error::arg(format!("mixing ratio {} is negative", r.ratio)));
    }
    let counts = real.class_counts();
    ratios
        .iter()
        .map(|mix| {
            let mut gen_rng = rng::stream(seed, rng::ids::EVAL);
            let mut train = real.clone();
            for (class, (&n, gen)) in mix.synthetic_counts(&counts).iter().zip(generators).enumerate() {
                let samples = generate_synthetic(gen, &mut gen_rng, n)?;
                train = train.concat(&LabeledDataset::new(samples, vec![class; n], real.num_classes())?)?;
            }
            let net = train_classifier(&train, trainer, &mut rng::stream(seed, rng::ids::CLASSIFIER))?;
            let eval = evaluate(&net, test)?;
            Ok(SweepRow {
                ratio: mix.ratio,
                real_size: real.len(),
                train_size: train.len(),
                accuracy: eval.accuracy,
                metrics: eval.metrics,
            })
        })
        .collect()
}

/// `ratio,real_size,train_size,accuracy` then `precision,sensitivity,f1,undefined` per class.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], class_names: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["ratio".to_string(), "real_size".into(), "train_size".into(), "accuracy".into()];
    for c in class_names {
        header.extend([format!("precision_{c}"), format!("sensitivity_{c}"), format!("f1_{c}"), format!("undefined_{c}")]);
    }
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.ratio.to_string(), row.real_size.to_string(), row.train_size.to_string(), row.accuracy.to_string()];
        for c in 0..class_names.len() {
            rec.extend([
                row.metrics.precision[c].to_string(),
                row.metrics.sensitivity[c].to_string(),
                row.metrics.f1[c].to_string(),
                row.metrics.undefined_label(c).to_string(),
            ]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Confusion matrix as `true_class,<pred columns...>` rows.
pub fn write_confusion_csv<W: Write>(metrics: &ClassMetrics, class_names: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["true_class".to_string()];
    header.extend(class_names.iter().map(|c| format!("pred_{c}")));
    w.write_record(&header)?;
    for (name, row) in class_names.iter().zip(&metrics.confusion) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(usize::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

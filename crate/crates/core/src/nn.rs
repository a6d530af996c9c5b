//! Small dense feed-forward networks with exact reverse-mode gradients.
//!
//! Layers are stored as `(weights [out x in], bias [out], activation)`. A batch
//! is a row-major matrix with one sample per row. The engine is deliberately
//! plain: `f64` everywhere, no BLAS, so that gradient checks and bit-exact
//! determinism tests are meaningful.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `rows x cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("ragged rows"));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    /// New matrix holding the given rows of `self`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: indices.len(), cols: self.cols, data }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows == 0 {
            return Ok(other.clone());
        }
        if other.rows == 0 {
            return Ok(self.clone());
        }
        if self.cols != other.cols {
            return Err(Error::dim(format!("cannot stack {} and {} columns", self.cols, other.cols)));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix { rows: self.rows + other.rows, cols: self.cols, data })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A batch of samples, one per row.
pub type Minibatch = Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Sigmoid,
    Tanh,
    Identity,
    Softmax,
}

impl Activation {
    pub const fn leaky_relu() -> Self {
        Activation::LeakyRelu { slope: 0.2 }
    }

    fn apply_row(self, row: &mut [f64]) {
        match self {
            Activation::LeakyRelu { slope } => {
                for v in row {
                    if *v < 0.0 {
                        *v *= slope;
                    }
                }
            }
            Activation::Sigmoid => {
                for v in row {
                    *v = sigmoid(*v);
                }
            }
            Activation::Tanh => {
                for v in row {
                    *v = v.tanh();
                }
            }
            Activation::Identity => {}
            Activation::Softmax => {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for v in row {
                    *v /= sum;
                }
            }
        }
    }

    /// Maps `dL/da` (gradient w.r.t. the activated output `a`) to `dL/dz` in place.
    fn backprop_row(self, activated: &[f64], grad: &mut [f64]) {
        match self {
            Activation::LeakyRelu { slope } => {
                for (g, &a) in grad.iter_mut().zip(activated) {
                    // a and z share a sign for positive slopes
                    if a <= 0.0 {
                        *g *= slope;
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &a) in grad.iter_mut().zip(activated) {
                    *g *= a * (1.0 - a);
                }
            }
            Activation::Tanh => {
                for (g, &a) in grad.iter_mut().zip(activated) {
                    *g *= 1.0 - a * a;
                }
            }
            Activation::Identity => {}
            Activation::Softmax => {
                let dot: f64 = grad.iter().zip(activated).map(|(g, a)| g * a).sum();
                for (g, &a) in grad.iter_mut().zip(activated) {
                    *g = a * (*g - dot);
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::dim(format!("bias of {} for {} outputs", bias.len(), weights.rows())));
        }
        Ok(Self { weights, bias, activation })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// Layer sizes and activations of a multilayer perceptron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_dim: usize,
    pub output_activation: Activation,
}

impl Architecture {
    pub fn mlp(input_dim: usize, hidden: &[usize], output_dim: usize, output_activation: Activation) -> Self {
        Self { input_dim, hidden: hidden.to_vec(), hidden_activation: Activation::leaky_relu(), output_dim, output_activation }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::dim("layer widths must be positive"));
        }
        Ok(())
    }

    /// Random initialization: weights ~ N(0, 1/fan_in), zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Network> {
        self.validate()?;
        let mut widths = vec![self.input_dim];
        widths.extend(&self.hidden);
        widths.push(self.output_dim);
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = (1.0 / fan_in as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        scale * z
                    })
                    .collect();
                let act = if i == last { self.output_activation } else { self.hidden_activation };
                Layer::new(Matrix::from_vec(fan_out, fan_in, data)?, vec![0.0; fan_out], act)
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(layers)
    }
}

/// Weights and biases of a feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Per-parameter gradients, shape-congruent with a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Per-layer state retained by a training forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `outputs[0]` is the input, `outputs[i + 1]` the activated output of layer `i`.
    pub outputs: Vec<Matrix>,
    /// Inverted-dropout multipliers applied to each layer's output, if any.
    masks: Vec<Option<Vec<f64>>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        self.outputs.last().expect("trace always holds the input")
    }
}

/// Inverted dropout applied to hidden-layer outputs during training.
pub struct Dropout<'a, R: Rng + ?Sized> {
    pub rate: f64,
    pub rng: &'a mut R,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("layer list"));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::dim(format!("layer output {} does not feed input {}", pair[0].output_dim(), pair[1].input_dim())));
            }
        }
        if layers.iter().any(|l| !l.weights.is_finite() || l.bias.iter().any(|b| !b.is_finite())) {
            return Err(Error::arg("non-finite parameter"));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }

    /// All parameters in layer order, weights (row-major) before biases.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.as_slice().iter().chain(&l.bias).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers.iter_mut().flat_map(|l| l.weights.as_mut_slice().iter_mut().chain(l.bias.iter_mut()))
    }

    /// True when every layer has the same dimensions and activation as `other`'s.
    pub fn same_shape(&self, other: &Network) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() && a.activation == b.activation)
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self.layers.iter().map(|l| Matrix::zeros(l.weights.rows(), l.weights.cols())).collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::dim(format!("batch has {} features, network expects {}", batch.cols(), self.input_dim())));
        }
        Ok(())
    }

    /// Evaluates the network on every row of `batch`.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut current = batch.clone();
        for layer in &self.layers {
            current = affine(layer, &current);
        }
        Ok(current)
    }

    /// Forward pass that keeps every intermediate output for [`Network::backward`].
    pub fn forward_trace(&self, batch: &Matrix) -> Result<ForwardTrace> {
        self.forward_trace_inner::<rand_chacha::ChaCha8Rng>(batch, None)
    }

    pub fn forward_trace_dropout<R: Rng + ?Sized>(&self, batch: &Matrix, dropout: Dropout<'_, R>) -> Result<ForwardTrace> {
        self.forward_trace_inner(batch, Some(dropout))
    }

    fn forward_trace_inner<R: Rng + ?Sized>(&self, batch: &Matrix, mut dropout: Option<Dropout<'_, R>>) -> Result<ForwardTrace> {
        self.check_input(batch)?;
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        let mut masks = Vec::with_capacity(self.layers.len());
        outputs.push(batch.clone());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = affine(layer, outputs.last().expect("non-empty"));
            let mask = match dropout.as_mut() {
                Some(d) if i < last && d.rate > 0.0 => {
                    let keep = 1.0 - d.rate;
                    let mask: Vec<f64> =
                        (0..out.as_slice().len()).map(|_| if d.rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
                    for (v, m) in out.as_mut_slice().iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    Some(mask)
                }
                _ => None,
            };
            masks.push(mask);
            outputs.push(out);
        }
        Ok(ForwardTrace { outputs, masks })
    }

    /// Reverse-mode pass.
    ///
    /// `output_grad` is `dL/d(output)` for every row of the traced batch. Returns
    /// the parameter gradients and `dL/d(input)`, the latter being what chains a
    /// generator's gradient through a discriminator.
    pub fn backward(&self, trace: &ForwardTrace, output_grad: &Matrix) -> Result<(Gradients, Matrix)> {
        let out = trace.output();
        if output_grad.rows() != out.rows() || output_grad.cols() != out.cols() {
            return Err(Error::dim("output gradient does not match traced output"));
        }
        let mut grads = self.zero_gradients();
        let mut delta = output_grad.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let activated = &trace.outputs[i + 1];
            if let Some(mask) = &trace.masks[i] {
                for (g, m) in delta.as_mut_slice().iter_mut().zip(mask) {
                    *g *= m;
                }
            }
            let mut scratch = Vec::new();
            for r in 0..delta.rows() {
                match &trace.masks[i] {
                    // the activation derivative needs the pre-dropout output; the
                    // mask is either 0 (gradient already zeroed) or a positive scale
                    Some(mask) => {
                        scratch.clear();
                        scratch.extend(
                            activated.row(r).iter().zip(&mask[r * activated.cols()..(r + 1) * activated.cols()]).map(|(a, m)| {
                                if *m > 0.0 {
                                    a / m
                                } else {
                                    0.0
                                }
                            }),
                        );
                        layer.activation.backprop_row(&scratch, delta.row_mut(r));
                    }
                    None => layer.activation.backprop_row(activated.row(r), delta.row_mut(r)),
                }
            }
            let input = &trace.outputs[i];
            let gw = &mut grads.weights[i];
            let gb = &mut grads.biases[i];
            let (n_out, n_in) = (layer.output_dim(), layer.input_dim());
            for r in 0..delta.rows() {
                let d = delta.row(r);
                let x = input.row(r);
                for o in 0..n_out {
                    let dv = d[o];
                    if dv == 0.0 {
                        continue;
                    }
                    gb[o] += dv;
                    let gw_row = &mut gw.as_mut_slice()[o * n_in..(o + 1) * n_in];
                    for (g, xv) in gw_row.iter_mut().zip(x) {
                        *g += dv * xv;
                    }
                }
            }
            let mut next = Matrix::zeros(delta.rows(), n_in);
            let w = layer.weights.as_slice();
            for r in 0..delta.rows() {
                let d = delta.row(r);
                let nr = next.row_mut(r);
                for (o, dv) in d.iter().enumerate() {
                    if *dv == 0.0 {
                        continue;
                    }
                    for (n, wv) in nr.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *n += dv * wv;
                    }
                }
            }
            delta = next;
        }
        Ok((grads, delta))
    }

    /// `self - rate * grads`.
    pub fn sgd_step(&self, grads: &Gradients, rate: f64) -> Result<Network> {
        self.check_gradients(grads)?;
        let mut next = self.clone();
        for (p, g) in next.params_mut().zip(grads.values()) {
            *p -= rate * g;
        }
        Ok(next)
    }

    pub fn check_gradients(&self, grads: &Gradients) -> Result<()> {
        let ok = grads.weights.len() == self.layers.len()
            && self
                .layers
                .iter()
                .zip(&grads.weights)
                .zip(&grads.biases)
                .all(|((l, w), b)| l.weights.rows() == w.rows() && l.weights.cols() == w.cols() && l.bias.len() == b.len());
        if ok {
            Ok(())
        } else {
            Err(Error::dim("gradient set is not congruent with the network"))
        }
    }
}

fn affine(layer: &Layer, input: &Matrix) -> Matrix {
    let (n_out, n_in) = (layer.output_dim(), layer.input_dim());
    let w = layer.weights.as_slice();
    let mut out = Matrix::zeros(input.rows(), n_out);
    for r in 0..input.rows() {
        let x = input.row(r);
        let o_row = out.row_mut(r);
        for (o, slot) in o_row.iter_mut().enumerate() {
            let w_row = &w[o * n_in..(o + 1) * n_in];
            *slot = layer.bias[o] + w_row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
        layer.activation.apply_row(o_row);
    }
    out
}

impl Gradients {
    /// Values in the same order as [`Network::params`].
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights.iter().zip(&self.biases).flat_map(|(w, b)| w.as_slice().iter().chain(b).copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.weights.iter_mut().zip(self.biases.iter_mut()).flat_map(|(w, b)| w.as_mut_slice().iter_mut().chain(b.iter_mut()))
    }

    /// Global L2 norm across all layers.
    pub fn l2_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.values_mut() {
            *v *= factor;
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }
}

/// Mean softmax cross-entropy `-(1/k) sum ln y[label]` and its gradients.
///
/// The network's last layer must use [`Activation::Softmax`].
pub fn cross_entropy_grad(net: &Network, samples: &Matrix, labels: &[usize]) -> Result<(f64, Gradients)> {
    if samples.rows() != labels.len() {
        return Err(Error::dim("sample and label counts differ"));
    }
    if samples.rows() == 0 {
        return Err(Error::Empty("classifier batch"));
    }
    if net.layers.last().map(|l| l.activation) != Some(Activation::Softmax) {
        return Err(Error::arg("cross-entropy needs a softmax output layer"));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= net.output_dim()) {
        return Err(Error::arg(format!("label {l} out of range")));
    }
    let trace = net.forward_trace(samples)?;
    let probs = trace.output();
    let k = samples.rows() as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    for (r, &label) in labels.iter().enumerate() {
        let p = probs.get(r, label).max(1e-300);
        loss -= p.ln() / k;
        grad.row_mut(r)[label] = -1.0 / (k * p);
    }
    let (grads, _) = net.backward(&trace, &grad)?;
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let net = Network::new(vec![Layer::new(Matrix::identity(2), vec![0.0; 2], Activation::Identity).unwrap()]).unwrap();
        let out = net.forward(&Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn zero_sigmoid_layer_outputs_half() {
        let net = Network::new(vec![Layer::new(Matrix::zeros(3, 2), vec![0.0; 3], Activation::Sigmoid).unwrap()]).unwrap();
        let out = net.forward(&Matrix::from_rows(&[vec![5.0, -7.0], vec![0.1, 100.0]]).unwrap()).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn two_layer_net_matches_hand_evaluation() {
        let l1 = Layer::new(
            Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]]).unwrap(),
            vec![0.1, -0.3],
            Activation::LeakyRelu { slope: 0.2 },
        )
        .unwrap();
        let l2 = Layer::new(Matrix::from_rows(&[vec![1.5, -0.5]]).unwrap(), vec![0.2], Activation::Sigmoid).unwrap();
        let net = Network::new(vec![l1, l2]).unwrap();
        let x = [0.4, 0.9];
        // hidden pre-activations by hand
        let h0: f64 = 0.5 * 0.4 - 1.0 * 0.9 + 0.1; // -0.6 -> leaky -0.12
        let h1: f64 = 2.0 * 0.4 + 0.25 * 0.9 - 0.3; // 0.725
        let h0 = if h0 < 0.0 { 0.2 * h0 } else { h0 };
        let z = 1.5 * h0 - 0.5 * h1 + 0.2;
        let expected = 1.0 / (1.0 + (-z).exp());
        let out = net.forward(&Matrix::from_rows(&[x.to_vec()]).unwrap()).unwrap();
        assert!((out.get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatched_layers_and_inputs() {
        let a = Layer::new(Matrix::zeros(3, 2), vec![0.0; 3], Activation::Tanh).unwrap();
        let b = Layer::new(Matrix::zeros(1, 2), vec![0.0], Activation::Sigmoid).unwrap();
        assert!(Network::new(vec![a.clone(), b]).is_err());
        assert!(Layer::new(Matrix::zeros(3, 2), vec![0.0; 2], Activation::Tanh).is_err());
        let net = Network::new(vec![a]).unwrap();
        assert!(net.forward(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn bias_gradient_of_zero_net_has_closed_form() {
        // one sigmoid unit, zero weights: D = 0.5 everywhere, so d/db of
        // sum_j ln D = k * (1 - D) = k / 2 and the weight gradient is (1/2) sum_j x_j
        let net = Network::new(vec![Layer::new(Matrix::zeros(1, 2), vec![0.0], Activation::Sigmoid).unwrap()]).unwrap();
        let batch = Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0], vec![2.0, 0.5], vec![-2.0, -0.5]]).unwrap();
        let trace = net.forward_trace(&batch).unwrap();
        let upstream = Matrix::from_vec(4, 1, trace.output().as_slice().iter().map(|d| 1.0 / d).collect()).unwrap();
        let (g, _) = net.backward(&trace, &upstream).unwrap();
        assert!((g.biases[0][0] - 2.0).abs() < 1e-15);
        assert!(g.weights[0].as_slice().iter().all(|w| w.abs() < 1e-15), "symmetric batch");
    }

    #[test]
    fn cross_entropy_is_stationary_at_fitted_logits() {
        // a bias-only softmax layer fitted to label frequencies is a strict minimum
        let net = Network::new(vec![Layer::new(Matrix::zeros(2, 1), vec![0.0, (3.0f64).ln()], Activation::Softmax).unwrap()]).unwrap();
        let samples = Matrix::zeros(4, 1);
        let (_, g) = cross_entropy_grad(&net, &samples, &[0, 1, 1, 1]).unwrap();
        assert!(g.l2_norm() < 1e-8);
    }

    #[test]
    fn dropout_zero_rate_matches_plain_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Architecture::mlp(2, &[4], 1, Activation::Sigmoid).init(&mut rng).unwrap();
        let x = Matrix::from_rows(&[vec![0.3, -0.2]]).unwrap();
        let plain = net.forward_trace(&x).unwrap();
        let dropped = net.forward_trace_dropout(&x, Dropout { rate: 0.0, rng: &mut rng }).unwrap();
        assert_eq!(plain.output(), dropped.output());
    }

    #[test]
    fn params_round_trip_through_iterators() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Architecture::mlp(3, &[5, 4], 2, Activation::Identity).init(&mut rng).unwrap();
        assert_eq!(net.params().count(), net.num_params());
        assert_eq!(net.num_params(), 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
        let g = net.zero_gradients();
        assert_eq!(g.values().count(), net.num_params());
    }
}

//! Binarized networks: loading, batch-norm folding, neuron stabilization and
//! forward evaluation.
//!
//! A network with `L` hidden layers has widths `n = (n0, n1, ..., nL, n_{L+1})`.
//! Hidden layer `i` computes `x_i = sign(W^[i] x_{i-1} + b^[i])` with ternary
//! weights; the output layer produces logits `W^[L+1] x_L + b^[L+1]`.
//!
//! Indices are 0-based throughout the library. Layer `0` is the input layer,
//! so `layers()[i - 1]` holds the affine map feeding layer `i`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BN_EPSILON: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-ternary weight {value} at layer {layer}, row {row}, column {col}")]
    NonTernaryWeight {
        layer: usize,
        row: usize,
        col: usize,
        value: i64,
    },
    #[error("negative batch-norm variance at layer {layer}, neuron {neuron}")]
    NegativeVariance { layer: usize, neuron: usize },
    #[error("degenerate batch-norm scale (gamma = 0) at layer {layer}, neuron {neuron}")]
    DegenerateBatchNorm { layer: usize, neuron: usize },
    #[error("layer {layer} fully stabilized: every neuron is constant")]
    LayerFullyStabilized { layer: usize },
    #[error("input has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Dense row-major matrix with entries in `{-1, 0, 1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TernaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i8>,
}

impl TernaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<i8>]) -> Result<Self, ModelError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(ModelError::Shape(format!(
                    "row {r} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (c, &w) in row.iter().enumerate() {
                if !(-1..=1).contains(&w) {
                    return Err(ModelError::NonTernaryWeight {
                        layer: 0,
                        row: r,
                        col: c,
                        value: w as i64,
                    });
                }
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[i8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, w: i8) {
        debug_assert!((-1..=1).contains(&w));
        self.data[r * self.cols + c] = w;
    }

    pub fn negate_row(&mut self, r: usize) {
        for w in &mut self.data[r * self.cols..(r + 1) * self.cols] {
            *w = -*w;
        }
    }

    /// `W x` for a real vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&w| w != 0).count()
    }

    fn without_column(&self, col: usize) -> Self {
        let mut data = Vec::with_capacity(self.rows * (self.cols - 1));
        for r in 0..self.rows {
            for (c, &w) in self.row(r).iter().enumerate() {
                if c != col {
                    data.push(w);
                }
            }
        }
        Self {
            rows: self.rows,
            cols: self.cols - 1,
            data,
        }
    }

    fn without_row(&self, row: usize) -> Self {
        let mut data = Vec::with_capacity((self.rows - 1) * self.cols);
        for r in (0..self.rows).filter(|&r| r != row) {
            data.extend_from_slice(self.row(r));
        }
        Self {
            rows: self.rows - 1,
            cols: self.cols,
            data,
        }
    }
}

pub(crate) fn dot(w: &[i8], x: &[f64]) -> f64 {
    w.iter()
        .zip(x)
        .filter(|(&w, _)| w != 0)
        .map(|(&w, &x)| w as f64 * x)
        .sum()
}

/// Row 1-norms: `nv(W)_k = ||W_(k,:)||_1`.
pub fn nv(matrix: &TernaryMatrix) -> Vec<f64> {
    (0..matrix.rows())
        .map(|r| matrix.row(r).iter().map(|w| w.unsigned_abs() as f64).sum())
        .collect()
}

/// `sign` with the `sign(0) = +1` convention.
#[inline]
pub fn sign(z: f64) -> i8 {
    if z >= 0.0 {
        1
    } else {
        -1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawLayer {
    pub weights: TernaryMatrix,
    pub bias: Vec<f64>,
    pub bn: Option<BatchNorm>,
}

/// A network as stored on disk, with optional batch normalization per hidden layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RawBnn {
    pub widths: Vec<usize>,
    pub layers: Vec<RawLayer>,
    pub bn_epsilon: f64,
}

#[derive(Deserialize, Serialize)]
struct LayerFile {
    weights: Vec<Vec<i64>>,
    bias: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bn: Option<BatchNorm>,
}

#[derive(Deserialize, Serialize)]
struct ModelFile {
    widths: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bn_epsilon: Option<f64>,
    layers: Vec<LayerFile>,
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RawBnn, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RawBnn::from_json(&text)
}

impl RawBnn {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (li, layer) in file.layers.into_iter().enumerate() {
            let mut rows = Vec::with_capacity(layer.weights.len());
            for (r, row) in layer.weights.iter().enumerate() {
                let mut out = Vec::with_capacity(row.len());
                for (c, &w) in row.iter().enumerate() {
                    if !(-1..=1).contains(&w) {
                        return Err(ModelError::NonTernaryWeight {
                            layer: li + 1,
                            row: r,
                            col: c,
                            value: w,
                        });
                    }
                    out.push(w as i8);
                }
                rows.push(out);
            }
            let weights = TernaryMatrix::from_rows(&rows).map_err(|e| match e {
                ModelError::Shape(msg) => ModelError::Shape(format!("layer {}: {msg}", li + 1)),
                other => other,
            })?;
            layers.push(RawLayer {
                weights,
                bias: layer.bias,
                bn: layer.bn,
            });
        }
        let net = RawBnn {
            widths: file.widths,
            layers,
            bn_epsilon: file.bn_epsilon.unwrap_or(DEFAULT_BN_EPSILON),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            widths: self.widths.clone(),
            bn_epsilon: Some(self.bn_epsilon),
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: (0..l.weights.rows())
                        .map(|r| l.weights.row(r).iter().map(|&w| w as i64).collect())
                        .collect(),
                    bias: l.bias.clone(),
                    bn: l.bn.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization")
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.widths.len() < 3 {
            return Err(ModelError::Shape(
                "need at least one hidden layer (widths has fewer than 3 entries)".into(),
            ));
        }
        if self.layers.len() + 1 != self.widths.len() {
            return Err(ModelError::Shape(format!(
                "{} layers for {} widths",
                self.layers.len(),
                self.widths.len()
            )));
        }
        if !(self.bn_epsilon > 0.0) {
            return Err(ModelError::Shape("bn_epsilon must be positive".into()));
        }
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let (inp, out) = (self.widths[li], self.widths[li + 1]);
            if layer.weights.rows() != out || (out > 0 && layer.weights.cols() != inp) {
                return Err(ModelError::Shape(format!(
                    "layer {}: weights are {}x{}, expected {out}x{inp}",
                    li + 1,
                    layer.weights.rows(),
                    layer.weights.cols()
                )));
            }
            if layer.bias.len() != out {
                return Err(ModelError::Shape(format!(
                    "layer {}: bias has {} entries, expected {out}",
                    li + 1,
                    layer.bias.len()
                )));
            }
            if let Some(bn) = &layer.bn {
                if li == last {
                    return Err(ModelError::Shape("output layer must not carry bn".into()));
                }
                for v in [&bn.gamma, &bn.beta, &bn.mu, &bn.var] {
                    if v.len() != out {
                        return Err(ModelError::Shape(format!(
                            "layer {}: bn vectors must have {out} entries",
                            li + 1
                        )));
                    }
                }
                if let Some(k) = bn.var.iter().position(|&v| !(v >= 0.0)) {
                    return Err(ModelError::NegativeVariance {
                        layer: li + 1,
                        neuron: k,
                    });
                }
            }
        }
        Ok(())
    }

    /// Forward pass applying batch normalization literally:
    /// `x = sign(gamma * (W x + b - mu) / sqrt(var + eps) - beta)`.
    pub fn forward_reference(&self, x0: &[f64]) -> Result<ForwardTrace, ModelError> {
        if x0.len() != self.widths[0] {
            return Err(ModelError::Dimension {
                expected: self.widths[0],
                got: x0.len(),
            });
        }
        let mut x: Vec<f64> = x0.to_vec();
        let mut activations = Vec::new();
        let mut flags = Vec::new();
        for layer in &self.layers[..self.layers.len() - 1] {
            let mut z = layer.weights.apply(&x);
            for (zk, bk) in z.iter_mut().zip(&layer.bias) {
                *zk += bk;
            }
            if let Some(bn) = &layer.bn {
                for k in 0..z.len() {
                    let s = (bn.var[k] + self.bn_epsilon).sqrt();
                    z[k] = bn.gamma[k] * (z[k] - bn.mu[k]) / s - bn.beta[k];
                }
            }
            flags.push(z.iter().map(|&v| v == 0.0).collect());
            let act: Vec<i8> = z.iter().map(|&v| sign(v)).collect();
            x = act.iter().map(|&a| a as f64).collect();
            activations.push(act);
        }
        let out = self.layers.last().expect("validated");
        let mut logits = out.weights.apply(&x);
        for (l, b) in logits.iter_mut().zip(&out.bias) {
            *l += b;
        }
        Ok(ForwardTrace::new(x0.to_vec(), activations, logits, flags))
    }
}

/// Affine layer with ternary weights and real bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weights: TernaryMatrix,
    pub bias: Vec<f64>,
}

/// Ternary network without batch normalization. Produced by
/// [`fold_batchnorm`]; not yet checked against the stabilization invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineBnn {
    widths: Vec<usize>,
    layers: Vec<Layer>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Provenance {
    /// Batch norm folded into the bias; `negated` when gamma < 0 flipped the row.
    FoldedBatchNorm {
        layer: usize,
        neuron: usize,
        negated: bool,
    },
    /// Neuron proven constant and removed; `original` indexes the unpruned layer.
    Stabilized {
        layer: usize,
        original: usize,
        value: i8,
    },
}

impl AffineBnn {
    pub fn new(widths: Vec<usize>, layers: Vec<Layer>) -> Result<Self, ModelError> {
        let net = Self { widths, layers };
        net.check_shapes()?;
        Ok(net)
    }

    fn check_shapes(&self) -> Result<(), ModelError> {
        if self.widths.len() < 3 || self.layers.len() + 1 != self.widths.len() {
            return Err(ModelError::Shape(format!(
                "{} layers for widths {:?}",
                self.layers.len(),
                self.widths
            )));
        }
        for (li, l) in self.layers.iter().enumerate() {
            if l.weights.rows() != self.widths[li + 1]
                || (l.weights.rows() > 0 && l.weights.cols() != self.widths[li])
                || l.bias.len() != self.widths[li + 1]
            {
                return Err(ModelError::Shape(format!("layer {} shape", li + 1)));
            }
        }
        Ok(())
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn forward(&self, x0: &[f64]) -> Result<ForwardTrace, ModelError> {
        forward_layers(&self.widths, &self.layers, x0)
    }
}

fn forward_layers(
    widths: &[usize],
    layers: &[Layer],
    x0: &[f64],
) -> Result<ForwardTrace, ModelError> {
    if x0.len() != widths[0] {
        return Err(ModelError::Dimension {
            expected: widths[0],
            got: x0.len(),
        });
    }
    let mut x: Vec<f64> = x0.to_vec();
    let mut activations = Vec::with_capacity(layers.len() - 1);
    let mut flags = Vec::with_capacity(layers.len() - 1);
    for layer in &layers[..layers.len() - 1] {
        let z: Vec<f64> = layer
            .weights
            .apply(&x)
            .into_iter()
            .zip(&layer.bias)
            .map(|(a, b)| a + b)
            .collect();
        flags.push(z.iter().map(|&v| v == 0.0).collect::<Vec<_>>());
        let act: Vec<i8> = z.iter().map(|&v| sign(v)).collect();
        x = act.iter().map(|&a| a as f64).collect();
        activations.push(act);
    }
    let out = layers.last().expect("at least one layer");
    let logits = out
        .weights
        .apply(&x)
        .into_iter()
        .zip(&out.bias)
        .map(|(a, b)| a + b)
        .collect();
    Ok(ForwardTrace::new(x0.to_vec(), activations, logits, flags))
}

/// Folds batch normalization into effective biases.
///
/// With `s = sqrt(var + eps)`: for `gamma > 0` the bias becomes
/// `b - mu - beta * s / gamma`; for `gamma < 0` the weight row is negated and the
/// bias becomes `mu - b - beta * s / |gamma|`.
pub fn fold_batchnorm(raw: &RawBnn) -> Result<(AffineBnn, Vec<Provenance>), ModelError> {
    raw.validate()?;
    let mut layers = Vec::with_capacity(raw.layers.len());
    let mut log = Vec::new();
    for (li, layer) in raw.layers.iter().enumerate() {
        let mut weights = layer.weights.clone();
        let mut bias = layer.bias.clone();
        if let Some(bn) = &layer.bn {
            for k in 0..bias.len() {
                let gamma = bn.gamma[k];
                if gamma == 0.0 || !gamma.is_finite() {
                    return Err(ModelError::DegenerateBatchNorm {
                        layer: li + 1,
                        neuron: k,
                    });
                }
                let s = (bn.var[k] + raw.bn_epsilon).sqrt();
                if gamma > 0.0 {
                    bias[k] = layer.bias[k] - bn.mu[k] - bn.beta[k] * s / gamma;
                } else {
                    weights.negate_row(k);
                    bias[k] = bn.mu[k] - layer.bias[k] - bn.beta[k] * s / gamma.abs();
                }
                log.push(Provenance::FoldedBatchNorm {
                    layer: li + 1,
                    neuron: k,
                    negated: gamma < 0.0,
                });
            }
        }
        layers.push(Layer { weights, bias });
    }
    Ok((AffineBnn::new(raw.widths.clone(), layers)?, log))
}

/// Validated ternary network: every hidden neuron satisfies
/// `|b_k| < nv(W)_k` and has a nonzero weight row.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldedBnn {
    net: AffineBnn,
    log: Vec<Provenance>,
}

impl FoldedBnn {
    pub fn widths(&self) -> &[usize] {
        self.net.widths()
    }

    pub fn layers(&self) -> &[Layer] {
        self.net.layers()
    }

    /// Affine map feeding layer `i` (1-based, `1..=L+1`).
    pub fn layer(&self, i: usize) -> &Layer {
        &self.net.layers()[i - 1]
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.net.depth()
    }

    pub fn input_dim(&self) -> usize {
        self.widths()[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths().last().expect("widths")
    }

    pub fn hidden_neurons(&self) -> usize {
        self.widths()[1..=self.depth()].iter().sum()
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.log
    }

    pub fn as_affine(&self) -> &AffineBnn {
        &self.net
    }

    pub fn forward(&self, x0: &[f64]) -> Result<ForwardTrace, ModelError> {
        self.net.forward(x0)
    }

    pub fn check_invariants(&self) -> Result<(), ModelError> {
        for (li, layer) in self.layers()[..self.depth()].iter().enumerate() {
            let norms = nv(&layer.weights);
            for (k, (&n, &b)) in norms.iter().zip(&layer.bias).enumerate() {
                if n == 0.0 || b.abs() >= n {
                    return Err(ModelError::Invariant(format!(
                        "hidden neuron ({}, {k}) has |b| = {} >= nv = {n}",
                        li + 1,
                        b.abs()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Replaces every constant hidden neuron by its value and removes it, using
/// `nv` bounds (inputs assumed in `[-1, 1]`). Iterates to a fixpoint.
pub fn stabilize(net: AffineBnn) -> Result<FoldedBnn, ModelError> {
    let n0 = net.widths()[0];
    stabilize_with_log(net, Vec::new(), &vec![-1.0; n0], &vec![1.0; n0])
}

/// Like [`stabilize`] but also fixes first-layer neurons whose pre-activation
/// keeps one sign over the input box `[lower, upper]`.
pub fn stabilize_over_box(
    net: &FoldedBnn,
    lower: &[f64],
    upper: &[f64],
) -> Result<FoldedBnn, ModelError> {
    stabilize_with_log(net.net.clone(), net.log.clone(), lower, upper)
}

pub(crate) fn stabilize_with_log(
    mut net: AffineBnn,
    mut log: Vec<Provenance>,
    lower: &[f64],
    upper: &[f64],
) -> Result<FoldedBnn, ModelError> {
    net.check_shapes()?;
    let n0 = net.widths[0];
    if lower.len() != n0 || upper.len() != n0 {
        return Err(ModelError::Dimension {
            expected: n0,
            got: lower.len(),
        });
    }
    let depth = net.depth();
    // original indices of surviving neurons, per hidden layer
    let mut origin: Vec<Vec<usize>> = (1..=depth).map(|i| (0..net.widths[i]).collect()).collect();
    loop {
        let mut found = None;
        'scan: for li in 0..depth {
            let layer = &net.layers[li];
            for k in 0..layer.bias.len() {
                let (lo, hi) = if li == 0 {
                    preactivation_range(layer.weights.row(k), layer.bias[k], lower, upper)
                } else {
                    let n = layer
                        .weights
                        .row(k)
                        .iter()
                        .map(|w| w.unsigned_abs() as f64)
                        .sum::<f64>();
                    (layer.bias[k] - n, layer.bias[k] + n)
                };
                let value = if lo >= 0.0 {
                    Some(1)
                } else if hi <= 0.0 {
                    Some(-1)
                } else {
                    None
                };
                if let Some(v) = value {
                    found = Some((li, k, v));
                    break 'scan;
                }
            }
        }
        let Some((li, k, value)) = found else { break };
        if net.widths[li + 1] == 1 {
            return Err(ModelError::LayerFullyStabilized { layer: li + 1 });
        }
        log.push(Provenance::Stabilized {
            layer: li + 1,
            original: origin[li][k],
            value,
        });
        origin[li].remove(k);
        let layer = &mut net.layers[li];
        layer.weights = layer.weights.without_row(k);
        layer.bias.remove(k);
        let next = &mut net.layers[li + 1];
        for r in 0..next.weights.rows() {
            next.bias[r] += next.weights.get(r, k) as f64 * value as f64;
        }
        next.weights = next.weights.without_column(k);
        net.widths[li + 1] -= 1;
    }
    let folded = FoldedBnn { net, log };
    folded.check_invariants_over(lower, upper)?;
    Ok(folded)
}

impl FoldedBnn {
    fn check_invariants_over(&self, lower: &[f64], upper: &[f64]) -> Result<(), ModelError> {
        self.check_invariants()?;
        let first = self.layer(1);
        for k in 0..first.bias.len() {
            let (lo, hi) = preactivation_range(first.weights.row(k), first.bias[k], lower, upper);
            if lo >= 0.0 || hi <= 0.0 {
                return Err(ModelError::Invariant(format!(
                    "first-layer neuron {k} is constant over the input box"
                )));
            }
        }
        for layer in self.layers() {
            if layer.weights.data.iter().any(|w| !(-1..=1).contains(w)) {
                return Err(ModelError::Invariant("non-ternary folded weight".into()));
            }
        }
        Ok(())
    }
}

/// Range of `<w, x> + b` over the box `[lower, upper]`.
pub fn preactivation_range(w: &[i8], b: f64, lower: &[f64], upper: &[f64]) -> (f64, f64) {
    let mut lo = b;
    let mut hi = b;
    for ((&wk, &l), &u) in w.iter().zip(lower).zip(upper) {
        match wk {
            1 => {
                lo += l;
                hi += u;
            }
            -1 => {
                lo -= u;
                hi -= l;
            }
            _ => {}
        }
    }
    (lo, hi)
}

/// Load, fold and stabilize in one step.
pub fn prepare(raw: &RawBnn) -> Result<FoldedBnn, ModelError> {
    let (net, log) = fold_batchnorm(raw)?;
    let n0 = net.widths()[0];
    stabilize_with_log(net, log, &vec![-1.0; n0], &vec![1.0; n0])
}

/// Fraction of zero entries across all weight matrices.
pub fn weight_sparsity(net: &FoldedBnn) -> f64 {
    let (mut nonzero, mut total) = (0usize, 0usize);
    for layer in net.layers() {
        nonzero += layer.weights.count_nonzero();
        total += layer.weights.rows() * layer.weights.cols();
    }
    if total == 0 {
        return 1.0;
    }
    1.0 - nonzero as f64 / total as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    /// Hidden activations, exactly +-1.
    pub activations: Vec<Vec<i8>>,
    pub logits: Vec<f64>,
    /// Predicted class, 0-based; ties resolve to the lowest index.
    pub label: usize,
    pub zero_preactivation: Vec<Vec<bool>>,
}

impl ForwardTrace {
    fn new(
        input: Vec<f64>,
        activations: Vec<Vec<i8>>,
        logits: Vec<f64>,
        flags: Vec<Vec<bool>>,
    ) -> Self {
        let label = argmax(&logits);
        Self {
            input,
            activations,
            logits,
            label,
            zero_preactivation: flags,
        }
    }

    pub fn any_zero_preactivation(&self) -> bool {
        self.zero_preactivation.iter().flatten().any(|&f| f)
    }
}

/// Index of the largest entry; lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Reads input vectors: one line of whitespace/comma separated reals, or a CSV
/// of such rows. Blank lines and `#` comments are skipped.
pub fn parse_inputs(text: &str) -> Result<Vec<Vec<f64>>, ModelError> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| ModelError::Parse(format!("line {}: {t:?}: {e}", ln + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ModelError::Parse("no input rows".into()));
    }
    Ok(rows)
}

pub fn load_inputs(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_inputs(&text)
}

impl fmt::Display for FoldedBnn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BNN{:?} (L = {})", self.widths(), self.depth())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXAMPLE1: &str = r#"{
        "widths": [3, 2, 2, 2],
        "layers": [
            {"weights": [[-1, 1, 1], [-1, -1, 1]], "bias": [1.5, 2.0]},
            {"weights": [[-1, -1], [-1, 1]], "bias": [1.0, -0.5]},
            {"weights": [[-1, 1], [-1, -1]], "bias": [-2.0, -1.0]}
        ]
    }"#;

    fn example1() -> FoldedBnn {
        prepare(&RawBnn::from_json(EXAMPLE1).unwrap()).unwrap()
    }

    #[test]
    fn loads_example1() {
        let raw = RawBnn::from_json(EXAMPLE1).unwrap();
        assert_eq!(raw.widths, vec![3, 2, 2, 2]);
        assert_eq!(raw.bn_epsilon, DEFAULT_BN_EPSILON);
        assert_eq!(raw.depth(), 2);
    }

    #[test]
    fn rejects_non_ternary() {
        let bad = EXAMPLE1.replacen("[-1, 1, 1]", "[-1, 2, 1]", 1);
        let err = RawBnn::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("non-ternary weight"), "{err}");
    }

    #[test]
    fn rejects_shape_mismatch() {
        let bad = EXAMPLE1.replacen("[1.5, 2.0]", "[1.5]", 1);
        assert!(matches!(RawBnn::from_json(&bad), Err(ModelError::Shape(_))));
    }

    #[test]
    fn keeps_bn_parameters() {
        let text = r#"{"widths":[2,2,2],"layers":[
            {"weights":[[1,-1],[1,1]],"bias":[0.1,0.2],
             "bn":{"gamma":[1.0,2.0],"beta":[0.0,0.5],"mu":[0.1,0.0],"var":[1.0,4.0]}},
            {"weights":[[1,0],[0,1]],"bias":[0.0,0.0]}]}"#;
        let raw = RawBnn::from_json(text).unwrap();
        let bn = raw.layers[0].bn.as_ref().unwrap();
        assert_eq!(bn.gamma, vec![1.0, 2.0]);
        assert_eq!(bn.var, vec![1.0, 4.0]);
    }

    #[test]
    fn identity_bn_keeps_bias() {
        let eps = DEFAULT_BN_EPSILON;
        let raw = RawBnn {
            widths: vec![3, 1, 2],
            layers: vec![
                RawLayer {
                    weights: TernaryMatrix::from_rows(&[vec![1, -1, 0]]).unwrap(),
                    bias: vec![0.5],
                    bn: Some(BatchNorm {
                        gamma: vec![1.0],
                        beta: vec![0.0],
                        mu: vec![0.0],
                        var: vec![1.0 - eps],
                    }),
                },
                RawLayer {
                    weights: TernaryMatrix::from_rows(&[vec![1], vec![-1]]).unwrap(),
                    bias: vec![0.0, 0.0],
                    bn: None,
                },
            ],
            bn_epsilon: eps,
        };
        let (folded, log) = fold_batchnorm(&raw).unwrap();
        assert!((folded.layers()[0].bias[0] - 0.5).abs() < 1e-15);
        assert_eq!(folded.layers()[0].weights.row(0), &[1, -1, 0]);
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn negative_gamma_negates_row() {
        let eps = DEFAULT_BN_EPSILON;
        let mut raw = RawBnn {
            widths: vec![3, 1, 2],
            layers: vec![
                RawLayer {
                    weights: TernaryMatrix::from_rows(&[vec![1, -1, 0]]).unwrap(),
                    bias: vec![0.5],
                    bn: Some(BatchNorm {
                        gamma: vec![-1.0],
                        beta: vec![0.0],
                        mu: vec![0.0],
                        var: vec![1.0 - eps],
                    }),
                },
                RawLayer {
                    weights: TernaryMatrix::from_rows(&[vec![1], vec![-1]]).unwrap(),
                    bias: vec![0.0, 0.0],
                    bn: None,
                },
            ],
            bn_epsilon: eps,
        };
        let (folded, _) = fold_batchnorm(&raw).unwrap();
        assert_eq!(folded.layers()[0].weights.row(0), &[-1, 1, 0]);
        assert!((folded.layers()[0].bias[0] + 0.5).abs() < 1e-15);

        raw.layers[0].bn.as_mut().unwrap().gamma[0] = 0.0;
        assert!(matches!(
            fold_batchnorm(&raw),
            Err(ModelError::DegenerateBatchNorm {
                layer: 1,
                neuron: 0
            })
        ));
    }

    #[test]
    fn nv_of_example1() {
        let net = example1();
        assert_eq!(nv(&net.layer(1).weights), vec![3.0, 3.0]);
        assert_eq!(nv(&net.layer(2).weights), vec![2.0, 2.0]);
        assert_eq!(nv(&TernaryMatrix::zeros(2, 3)), vec![0.0, 0.0]);
    }

    #[test]
    fn example1_forward() {
        let net = example1();
        assert_eq!(net.widths(), &[3, 2, 2, 2]);
        let t = net.forward(&[0.0, 0.5, 0.0]).unwrap();
        assert_eq!(t.activations, vec![vec![1, 1], vec![-1, -1]]);
        assert_eq!(t.logits, vec![-2.0, 1.0]);
        assert_eq!(t.label, 1);
        assert!(!t.any_zero_preactivation());
        assert!(matches!(
            net.forward(&[0.0; 2]),
            Err(ModelError::Dimension { .. })
        ));
    }

    #[test]
    fn zero_preactivation_is_flagged_positive() {
        // neuron 2 of layer 1: -x1 - x2 + x3 + 2 = 0 at (1, 1, 0)
        let net = example1();
        let t = net.forward(&[1.0, 1.0, 0.0]).unwrap();
        assert!(t.zero_preactivation[0][1]);
        assert_eq!(t.activations[0][1], 1);
    }

    #[test]
    fn constant_neuron_is_removed() {
        let net = AffineBnn::new(
            vec![3, 2, 2],
            vec![
                Layer {
                    weights: TernaryMatrix::from_rows(&[vec![1, 1, 1], vec![1, -1, 0]]).unwrap(),
                    bias: vec![5.0, 0.3],
                },
                Layer {
                    weights: TernaryMatrix::from_rows(&[vec![1, -1], vec![-1, 1]]).unwrap(),
                    bias: vec![0.0, 0.25],
                },
            ],
        )
        .unwrap();
        let s = stabilize(net).unwrap();
        assert_eq!(s.widths(), &[3, 1, 2]);
        // successor biases absorb column 0 times +1
        assert_eq!(s.layer(2).bias, vec![1.0, -0.75]);
        assert_eq!(s.layer(2).weights.row(0), &[-1]);
        assert!(matches!(
            s.provenance()[0],
            Provenance::Stabilized {
                layer: 1,
                original: 0,
                value: 1
            }
        ));
    }

    #[test]
    fn zero_row_is_constant_plus_one() {
        let net = AffineBnn::new(
            vec![2, 2, 1],
            vec![
                Layer {
                    weights: TernaryMatrix::from_rows(&[vec![0, 0], vec![1, 1]]).unwrap(),
                    bias: vec![0.0, 0.5],
                },
                Layer {
                    weights: TernaryMatrix::from_rows(&[vec![1, 1]]).unwrap(),
                    bias: vec![0.0],
                },
            ],
        )
        .unwrap();
        let s = stabilize(net).unwrap();
        assert_eq!(s.widths(), &[2, 1, 1]);
        assert_eq!(s.layer(2).bias, vec![1.0]);
    }

    #[test]
    fn fully_stabilized_layer_errors() {
        let net = AffineBnn::new(
            vec![2, 1, 1],
            vec![
                Layer {
                    weights: TernaryMatrix::from_rows(&[vec![1, 1]]).unwrap(),
                    bias: vec![-3.0],
                },
                Layer {
                    weights: TernaryMatrix::from_rows(&[vec![1]]).unwrap(),
                    bias: vec![0.0],
                },
            ],
        )
        .unwrap();
        assert!(matches!(
            stabilize(net),
            Err(ModelError::LayerFullyStabilized { layer: 1 })
        ));
    }

    #[test]
    fn example1_is_already_stable() {
        let net = example1();
        assert!(net.provenance().is_empty());
    }

    #[test]
    fn sparsity_counts() {
        let mk = |rows: &[Vec<i8>]| TernaryMatrix::from_rows(rows).unwrap();
        let net = AffineBnn::new(
            vec![2, 2, 2, 2],
            vec![
                Layer {
                    weights: mk(&[vec![1, 0], vec![1, 1]]),
                    bias: vec![0.1, 0.1],
                },
                Layer {
                    weights: mk(&[vec![0, 1], vec![-1, 1]]),
                    bias: vec![0.1, 0.1],
                },
                Layer {
                    weights: mk(&[vec![1, 0], vec![1, 1]]),
                    bias: vec![0.0, 0.0],
                },
            ],
        )
        .unwrap();
        let net = stabilize(net).unwrap();
        assert!((weight_sparsity(&net) - 0.25).abs() < 1e-15);
        assert_eq!(weight_sparsity(&example1()), 0.0);
    }

    #[test]
    fn parses_input_lines() {
        assert_eq!(
            parse_inputs("0, 0.5 0\n").unwrap(),
            vec![vec![0.0, 0.5, 0.0]]
        );
        assert_eq!(parse_inputs("1,2\n# c\n3,4\n").unwrap().len(), 2);
        assert!(parse_inputs("a b").is_err());
    }
}

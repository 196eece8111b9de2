//! Dense ReLU networks: representation, exact evaluation and sparsity accounting.
//!
//! A network is an ordered list of [`Layer`]s. Every hidden layer uses ReLU and
//! the final layer is an identity (logit) layer; the predicted class is the
//! arg-max of the logits. Weights are stored row-major (`out_dim x in_dim`)
//! together with a per-row list of non-zero columns so sparse networks skip
//! zero multiplications during evaluation.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};

mod io;

pub use io::{load, save, MODEL_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Relu => {
                if v > T::zero() {
                    v
                } else {
                    T::zero()
                }
            }
            Activation::Identity => v,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One affine map followed by an activation.
#[derive(Debug, Clone)]
pub struct Layer<T: Scalar = f64> {
    out_dim: usize,
    in_dim: usize,
    weights: Vec<T>,
    biases: Vec<T>,
    activation: Activation,
    // CSR-style index of non-zero weight columns per row
    nz_start: Vec<usize>,
    nz_cols: Vec<usize>,
}

impl<T: Scalar> PartialEq for Layer<T> {
    fn eq(&self, other: &Self) -> bool {
        self.out_dim == other.out_dim
            && self.in_dim == other.in_dim
            && self.activation == other.activation
            && self.weights == other.weights
            && self.biases == other.biases
    }
}

impl<T: Scalar> Layer<T> {
    /// Builds a layer from a row-major weight buffer.
    pub fn new(
        out_dim: usize,
        in_dim: usize,
        weights: Vec<T>,
        biases: Vec<T>,
        activation: Activation,
    ) -> Result<Self> {
        if out_dim == 0 || in_dim == 0 {
            return Err(Error::Validation(format!(
                "layer dimensions must be positive, got {out_dim}x{in_dim}"
            )));
        }
        if weights.len() != out_dim * in_dim {
            return Err(Error::Validation(format!(
                "weight buffer has {} entries, expected {}x{}",
                weights.len(),
                out_dim,
                in_dim
            )));
        }
        if biases.len() != out_dim {
            return Err(Error::Validation(format!(
                "bias vector has {} entries, expected {out_dim}",
                biases.len()
            )));
        }
        if let Some(pos) = weights.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite weight at row {}, column {}",
                pos / in_dim,
                pos % in_dim
            )));
        }
        if let Some(pos) = biases.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite bias at row {pos}")));
        }
        let mut nz_start = Vec::with_capacity(out_dim + 1);
        let mut nz_cols = Vec::new();
        nz_start.push(0);
        for row in weights.chunks_exact(in_dim) {
            nz_cols.extend(
                row.iter()
                    .enumerate()
                    .filter(|(_, w)| **w != T::zero())
                    .map(|(j, _)| j),
            );
            nz_start.push(nz_cols.len());
        }
        Ok(Self {
            out_dim,
            in_dim,
            weights,
            biases,
            activation,
            nz_start,
            nz_cols,
        })
    }

    /// Builds a layer from nested rows.
    pub fn from_rows(rows: &[Vec<T>], biases: Vec<T>, activation: Activation) -> Result<Self> {
        let out_dim = rows.len();
        let in_dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != in_dim) {
            return Err(Error::Validation("ragged weight rows".into()));
        }
        let weights = rows.iter().flatten().copied().collect();
        Self::new(out_dim, in_dim, weights, biases, activation)
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Row-major weights.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn biases(&self) -> &[T] {
        &self.biases
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> T {
        self.weights[row * self.in_dim + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.weights[row * self.in_dim..(row + 1) * self.in_dim]
    }

    /// Columns of `row` holding a non-zero weight, ascending.
    #[inline]
    pub fn row_nonzeros(&self, row: usize) -> &[usize] {
        &self.nz_cols[self.nz_start[row]..self.nz_start[row + 1]]
    }

    /// `W x + b`, skipping stored zeros.
    pub fn pre_activation(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.in_dim);
        (0..self.out_dim)
            .map(|i| {
                let row = self.row(i);
                let mut acc = T::zero();
                for &j in self.row_nonzeros(i) {
                    acc += row[j] * x[j];
                }
                acc + self.biases[i]
            })
            .collect()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut z = self.pre_activation(x);
        for v in &mut z {
            *v = self.activation.apply(*v);
        }
        z
    }

    /// Entries of the weight matrix and bias vector with `|v| > tol`.
    pub fn nnz(&self, tol: T) -> usize {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .filter(|v| v.abs() > tol)
            .count()
    }

    /// `||W||_{1,1} + ||b||_1`.
    pub fn l1_mass(&self) -> T {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .map(|v| v.abs())
            .sum()
    }

    /// Same shape and activation, new parameters.
    pub fn with_params(&self, weights: Vec<T>, biases: Vec<T>) -> Result<Self> {
        Self::new(self.out_dim, self.in_dim, weights, biases, self.activation)
    }

    pub fn cast<U: Scalar>(&self) -> Layer<U> {
        let conv = |v: &T| U::of(v.to_f64_lossy());
        Layer::new(
            self.out_dim,
            self.in_dim,
            self.weights.iter().map(conv).collect(),
            self.biases.iter().map(conv).collect(),
            self.activation,
        )
        .expect("casting a valid layer keeps it valid")
    }
}

/// Per-layer and total non-zero counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NnzCount {
    pub per_layer: Vec<usize>,
    pub total: usize,
}

/// Per hidden layer, `true` where the pre-activation is strictly positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationPattern(pub Vec<Vec<bool>>);

impl ActivationPattern {
    pub fn layers(&self) -> &[Vec<bool>] {
        &self.0
    }

    pub fn layer(&self, k: usize) -> &[bool] {
        &self.0[k]
    }
}

/// Values recorded during one forward pass.
#[derive(Debug, Clone)]
pub struct Trace<T: Scalar = f64> {
    /// Pre-activations `W(k) x(k-1) + b(k)` for `k = 1..=N`.
    pub pre: Vec<Vec<T>>,
    /// Post-activations `x(0) ..= x(N)`; `post[0]` is the input.
    pub post: Vec<Vec<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn logits(&self) -> &[T] {
        self.post.last().expect("trace holds at least the input")
    }
}

/// A feed-forward ReLU classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Scalar = f64> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("network has no layers".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Validation(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    k + 1,
                    pair[0].out_dim(),
                    k + 2,
                    pair[1].in_dim()
                )));
            }
        }
        let last = layers.len() - 1;
        for (k, layer) in layers.iter().enumerate() {
            let expected = if k == last {
                Activation::Identity
            } else {
                Activation::Relu
            };
            if layer.activation() != expected {
                return Err(Error::Validation(format!(
                    "layer {} must use {expected} activation, found {}",
                    k + 1,
                    layer.activation()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layer(&self, k: usize) -> &Layer<T> {
        &self.layers[k]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Widths of the hidden layers.
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::out_dim)
            .collect()
    }

    pub fn hidden_neurons(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::InputShape {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Pre- and post-activation values of every layer.
    pub fn trace(&self, x: &[T]) -> Result<Trace<T>> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        post.push(x.to_vec());
        for layer in &self.layers {
            let z = layer.pre_activation(post.last().expect("non-empty"));
            let a = z.iter().map(|&v| layer.activation().apply(v)).collect();
            pre.push(z);
            post.push(a);
        }
        Ok(Trace { pre, post })
    }

    /// Post-activation values `x(0) ..= x(N)`, input and logits included.
    pub fn forward(&self, x: &[T]) -> Result<Vec<Vec<T>>> {
        self.check_input(x)?;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.to_vec());
        for layer in &self.layers {
            let next = layer.apply(values.last().expect("non-empty"));
            values.push(next);
        }
        Ok(values)
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer.apply(&cur);
        }
        Ok(cur)
    }

    /// Arg-max class; ties resolve to the lowest index.
    pub fn predict(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    /// Exact-zero pre-activations count as inactive.
    pub fn activation_pattern(&self, x: &[T]) -> Result<ActivationPattern> {
        let trace = self.trace(x)?;
        Ok(pattern_of(&trace))
    }

    pub fn count_nonzeros(&self, tol: T) -> NnzCount {
        let per_layer: Vec<usize> = self.layers.iter().map(|l| l.nnz(tol)).collect();
        let total = per_layer.iter().sum();
        NnzCount { per_layer, total }
    }

    /// Total number of weights and biases.
    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.out_dim() * (l.in_dim() + 1))
            .sum()
    }

    /// Copy with layer `k` replaced; the shape chain is re-validated.
    pub fn with_layer(&self, k: usize, layer: Layer<T>) -> Result<Self> {
        let mut layers = self.layers.clone();
        if k >= layers.len() {
            return Err(Error::Validation(format!("no layer at index {k}")));
        }
        layers[k] = layer;
        Self::new(layers)
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            layers: self.layers.iter().map(Layer::cast).collect(),
        }
    }
}

/// Activation pattern of the hidden layers of a recorded pass.
pub fn pattern_of<T: Scalar>(trace: &Trace<T>) -> ActivationPattern {
    let hidden = trace.pre.len().saturating_sub(1);
    ActivationPattern(
        trace.pre[..hidden]
            .iter()
            .map(|z| z.iter().map(|&v| v > T::zero()).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::net_a;

    #[test]
    fn identity_network_passes_input_through() {
        let net = Network::new(vec![Layer::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let values = net.forward(&[3.0, -1.0]).unwrap();
        assert_eq!(values.last().unwrap(), &vec![3.0, -1.0]);
    }

    #[test]
    fn relu_clamps_negative_pre_activation() {
        let net = Network::new(vec![
            Layer::from_rows(&[vec![1.0]], vec![-2.0], Activation::Relu).unwrap(),
            Layer::from_rows(&[vec![1.0]], vec![0.0], Activation::Identity).unwrap(),
        ])
        .unwrap();
        assert_eq!(net.forward(&[1.0]).unwrap()[1], vec![0.0]);
    }

    #[test]
    fn net_a_forward_by_hand() {
        // hidden: relu(1 - 2) = 0, relu(0 + 4 - 1) = 3
        let net = net_a();
        let values = net.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(values[1], vec![0.0, 3.0]);
        assert_eq!(values[2], vec![0.0, 3.0]);
        assert_eq!(net.predict(&[1.0, 2.0]).unwrap(), 1);
    }

    #[test]
    fn wrong_input_length_is_shape_error() {
        let err = net_a().forward(&[1.0]).unwrap_err();
        assert!(matches!(err, Error::InputShape { expected: 2, got: 1 }));
    }

    #[test]
    fn patterns() {
        let p = net_a().activation_pattern(&[1.0, 2.0]).unwrap();
        assert_eq!(p.layers(), &[vec![false, true]]);

        let zero = Network::new(vec![
            Layer::new(3, 2, vec![0.0; 6], vec![0.0; 3], Activation::Relu).unwrap(),
            Layer::new(1, 3, vec![0.0; 3], vec![0.0], Activation::Identity).unwrap(),
        ])
        .unwrap();
        let p = zero.activation_pattern(&[5.0, -7.0]).unwrap();
        assert_eq!(p.layers(), &[vec![false, false, false]]);

        let one = Network::new(vec![
            Layer::from_rows(&[vec![1.0]], vec![0.5], Activation::Relu).unwrap(),
            Layer::from_rows(&[vec![1.0]], vec![0.0], Activation::Identity).unwrap(),
        ])
        .unwrap();
        assert_eq!(one.activation_pattern(&[1.0]).unwrap().layers(), &[vec![true]]);
    }

    #[test]
    fn nonzero_counting() {
        let l = Layer::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.5]], vec![0.0, 0.0], Activation::Identity)
            .unwrap();
        assert_eq!(l.nnz(0.0), 1);
        let z = Layer::new(2, 2, vec![0.0; 4], vec![0.0; 2], Activation::Identity).unwrap();
        assert_eq!(z.nnz(0.0), 0);
        let t = Layer::from_rows(&[vec![1e-9, 2.0]], vec![0.0], Activation::Identity).unwrap();
        assert_eq!(t.nnz(1e-6), 1);
        let net = Network::new(vec![l]).unwrap();
        assert_eq!(net.count_nonzeros(0.0), NnzCount { per_layer: vec![1], total: 1 });
    }

    #[test]
    fn shape_chain_is_validated() {
        let err = Network::new(vec![
            Layer::new(3, 2, vec![0.0; 6], vec![0.0; 3], Activation::Relu).unwrap(),
            Layer::new(1, 2, vec![0.0; 2], vec![0.0], Activation::Identity).unwrap(),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn final_layer_must_be_identity() {
        let err = Network::new(vec![
            Layer::new(1, 2, vec![1.0; 2], vec![0.0], Activation::Relu).unwrap(),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn non_finite_weights_rejected() {
        assert!(Layer::new(1, 1, vec![f64::NAN], vec![0.0], Activation::Relu).is_err());
        assert!(Layer::new(1, 1, vec![0.0], vec![f64::INFINITY], Activation::Relu).is_err());
    }

    #[test]
    fn skip_zero_matvec_matches_dense() {
        let l = Layer::from_rows(
            &[vec![0.0, 2.0, 0.0], vec![1.0, 0.0, -3.0]],
            vec![0.5, 0.0],
            Activation::Identity,
        )
        .unwrap();
        assert_eq!(l.row_nonzeros(0), &[1]);
        assert_eq!(l.row_nonzeros(1), &[0, 2]);
        assert_eq!(l.pre_activation(&[1.0, 1.0, 1.0]), vec![2.5, -2.0]);
    }
}

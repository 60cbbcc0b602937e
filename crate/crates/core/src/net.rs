//! In-memory model of fully-connected ReLU networks and exact forward inference.
//!
//! A [`Network`] is an ordered list of affine layers. Every hidden layer is
//! followed by an elementwise ReLU; the final layer is affine only. All
//! arithmetic is 64-bit binary floating point.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Identifies a hidden neuron by (hidden-layer index, position within layer).
/// Layer 0 is the first hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronId {
    pub layer: usize,
    pub pos: usize,
}

impl NeuronId {
    pub fn new(layer: usize, pos: usize) -> Self {
        NeuronId { layer, pos }
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}_{}", self.layer, self.pos)
    }
}

/// One dense affine transformation: `out = weights * in + biases`.
/// Weight rows correspond to output neurons, columns to inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineLayer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl AffineLayer {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Self {
        AffineLayer { weights, biases }
    }

    pub fn out_dim(&self) -> usize {
        self.biases.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Applies the affine map. Accumulation starts from the bias and adds
    /// weighted terms in input order; bound computations mirror this order so
    /// that f64 rounding monotonicity keeps them sound for `infer` outputs.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(row, &b)| {
                let mut acc = b;
                for (&w, &x) in row.iter().zip(input) {
                    acc += w * x;
                }
                acc
            })
            .collect()
    }
}

/// A fully-connected feed-forward ReLU network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_dim: usize,
    pub layers: Vec<AffineLayer>,
}

#[derive(Debug, Error, PartialEq)]
pub enum InferError {
    #[error("input has {got} components, network expects {expected}")]
    InputShape { expected: usize, got: usize },
}

/// A structural defect reported by [`Network::validate`].
#[derive(Debug, Error, PartialEq)]
pub enum StructuralIssue {
    #[error("network has no layers")]
    NoLayers,
    #[error("layer {layer} is empty")]
    EmptyLayer { layer: usize },
    #[error("layer {layer} weight row {neuron} has {got} columns, expected {expected}")]
    DimensionMismatch {
        layer: usize,
        neuron: usize,
        expected: usize,
        got: usize,
    },
    #[error("layer {layer} has {rows} weight rows but {biases} biases")]
    RowBiasMismatch {
        layer: usize,
        rows: usize,
        biases: usize,
    },
    #[error("non-finite {what} in layer {layer}, neuron {neuron}")]
    NonFinite {
        layer: usize,
        neuron: usize,
        what: &'static str,
    },
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<AffineLayer>) -> Self {
        Network { input_dim, layers }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, AffineLayer::out_dim)
    }

    /// All layers except the last are hidden (affine followed by ReLU).
    pub fn hidden_layers(&self) -> &[AffineLayer] {
        let n = self.layers.len();
        &self.layers[..n.saturating_sub(1)]
    }

    pub fn num_hidden_neurons(&self) -> usize {
        self.hidden_layers().iter().map(AffineLayer::out_dim).sum()
    }

    /// Hidden neuron ids in layer-major order.
    pub fn neuron_ids(&self) -> impl Iterator<Item = NeuronId> + '_ {
        self.hidden_layers()
            .iter()
            .enumerate()
            .flat_map(|(i, l)| (0..l.out_dim()).map(move |j| NeuronId::new(i, j)))
    }

    /// Widths of the hidden layers.
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.hidden_layers().iter().map(AffineLayer::out_dim).collect()
    }

    /// Layer-major flat index of a hidden neuron.
    pub fn flat_index(&self, id: NeuronId) -> usize {
        self.hidden_layers()[..id.layer]
            .iter()
            .map(AffineLayer::out_dim)
            .sum::<usize>()
            + id.pos
    }

    /// Inverse of [`Network::flat_index`].
    pub fn neuron_at(&self, flat: usize) -> NeuronId {
        let mut rest = flat;
        for (layer, l) in self.hidden_layers().iter().enumerate() {
            if rest < l.out_dim() {
                return NeuronId::new(layer, rest);
            }
            rest -= l.out_dim();
        }
        panic!("flat neuron index {flat} out of range");
    }

    /// Exact forward inference: affine + ReLU on hidden layers, affine only on
    /// the output layer. Pure: identical (net, x) gives bitwise-identical output.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>, InferError> {
        if x.len() != self.input_dim {
            return Err(InferError::InputShape {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let last = self.layers.len().saturating_sub(1);
        let mut cur = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.apply(&cur);
            if i != last {
                for v in &mut cur {
                    *v = v.max(0.0);
                }
            }
        }
        Ok(cur)
    }

    /// Pre-activation values of every hidden neuron plus the final outputs,
    /// in one pass. Used by sampling oracles in tests.
    pub fn infer_with_preactivations(&self, x: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>), InferError> {
        if x.len() != self.input_dim {
            return Err(InferError::InputShape {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        let mut pres = Vec::with_capacity(self.hidden_layers().len());
        let mut cur = x.to_vec();
        for layer in self.hidden_layers() {
            let pre = layer.apply(&cur);
            pres.push(pre.clone());
            cur = pre.into_iter().map(|v| v.max(0.0)).collect();
        }
        let out = self.layers.last().map_or(cur.clone(), |l| l.apply(&cur));
        Ok((pres, out))
    }

    /// Reports every structural defect; an empty list means the network is
    /// well-formed.
    pub fn validate(&self) -> Vec<StructuralIssue> {
        let mut issues = Vec::new();
        if self.layers.is_empty() {
            issues.push(StructuralIssue::NoLayers);
            return issues;
        }
        let mut prev_dim = self.input_dim;
        for (li, layer) in self.layers.iter().enumerate() {
            if layer.weights.is_empty() || layer.biases.is_empty() {
                issues.push(StructuralIssue::EmptyLayer { layer: li });
                continue;
            }
            if layer.weights.len() != layer.biases.len() {
                issues.push(StructuralIssue::RowBiasMismatch {
                    layer: li,
                    rows: layer.weights.len(),
                    biases: layer.biases.len(),
                });
            }
            for (ni, row) in layer.weights.iter().enumerate() {
                if row.len() != prev_dim {
                    issues.push(StructuralIssue::DimensionMismatch {
                        layer: li,
                        neuron: ni,
                        expected: prev_dim,
                        got: row.len(),
                    });
                }
                if row.iter().any(|w| !w.is_finite()) {
                    issues.push(StructuralIssue::NonFinite {
                        layer: li,
                        neuron: ni,
                        what: "weight",
                    });
                }
            }
            for (ni, b) in layer.biases.iter().enumerate() {
                if !b.is_finite() {
                    issues.push(StructuralIssue::NonFinite {
                        layer: li,
                        neuron: ni,
                        what: "bias",
                    });
                }
            }
            prev_dim = layer.out_dim();
        }
        issues
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{axpy, dot};
use crate::{Error, Result};

/// Activation applied to the output layer. Hidden layers are always ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

/// Dense feed-forward network. Weights are stored row-major per layer:
/// `weights[l][i * n_in + j]` connects input `j` to output `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    output_activation: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Activations cached by [`Mlp::forward_trace`] for backpropagation.
/// `activations[0]` is the input; `activations[l + 1]` the (post-activation)
/// output of layer `l`.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub(crate) activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace has layers")
    }
}

/// Per-layer parameter gradients, shaped like the model.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub(crate) weights: Vec<Vec<f64>>,
    pub(crate) biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn zeros_like(model: &Mlp) -> Self {
        Self {
            weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for v in w.iter_mut() {
                *v *= factor;
            }
        }
        for b in &mut self.biases {
            for v in b.iter_mut() {
                *v *= factor;
            }
        }
    }
}

impl Mlp {
    /// He-uniform initialization: weights from U(-sqrt(6/fan_in), +),
    /// biases zero.
    pub fn new_seeded<R: Rng + ?Sized>(
        widths: &[usize],
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        Self::validate_widths(widths)?;
        let mut weights = Vec::with_capacity(widths.len() - 1);
        let mut biases = Vec::with_capacity(widths.len() - 1);
        for l in 0..widths.len() - 1 {
            let (n_in, n_out) = (widths[l], widths[l + 1]);
            let limit = (6.0 / n_in as f64).sqrt();
            let w: Vec<f64> = (0..n_in * n_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            weights.push(w);
            biases.push(vec![0.0; n_out]);
        }
        Ok(Self {
            widths: widths.to_vec(),
            output_activation,
            weights,
            biases,
        })
    }

    /// All-zero parameters; useful for tests and as a deliberate blank slate.
    pub fn zeros(widths: &[usize], output_activation: Activation) -> Result<Self> {
        Self::validate_widths(widths)?;
        let weights = (0..widths.len() - 1)
            .map(|l| vec![0.0; widths[l] * widths[l + 1]])
            .collect();
        let biases = (1..widths.len()).map(|l| vec![0.0; widths[l]]).collect();
        Ok(Self {
            widths: widths.to_vec(),
            output_activation,
            weights,
            biases,
        })
    }

    fn validate_widths(widths: &[usize]) -> Result<()> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "layer widths must list at least input and output sizes, all positive, got {widths:?}"
            )));
        }
        Ok(())
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn input_len(&self) -> usize {
        self.widths[0]
    }

    pub fn output_len(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::ShapeMismatch(format!(
                "input length {} does not match first layer width {}",
                input.len(),
                self.input_len()
            )));
        }
        Ok(())
    }

    /// Forward pass. Deterministic and side-effect free.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut current = input.to_vec();
        for l in 0..self.weights.len() {
            current = self.apply_layer(l, &current);
        }
        Ok(current)
    }

    /// Forward pass that keeps per-layer activations for backpropagation.
    pub fn forward_trace(&self, input: &[f64]) -> Result<ForwardTrace> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(input.to_vec());
        for l in 0..self.weights.len() {
            let next = self.apply_layer(l, activations.last().unwrap());
            activations.push(next);
        }
        Ok(ForwardTrace { activations })
    }

    fn apply_layer(&self, l: usize, input: &[f64]) -> Vec<f64> {
        let n_in = self.widths[l];
        let n_out = self.widths[l + 1];
        let relu = l + 1 < self.weights.len() || self.output_activation == Activation::Relu;
        let mut out = Vec::with_capacity(n_out);
        for i in 0..n_out {
            let z = self.biases[l][i] + dot(&self.weights[l][i * n_in..(i + 1) * n_in], input);
            out.push(if relu { z.max(0.0) } else { z });
        }
        out
    }

    /// Backpropagate `output_grad` through the cached trace, accumulating
    /// parameter gradients into `grads` and returning the gradient with
    /// respect to the input. The ReLU subgradient at 0 is taken as 0.
    pub fn backprop(
        &self,
        trace: &ForwardTrace,
        output_grad: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<Vec<f64>> {
        if output_grad.len() != self.output_len() {
            return Err(Error::ShapeMismatch(format!(
                "output gradient length {} does not match output width {}",
                output_grad.len(),
                self.output_len()
            )));
        }
        if trace.activations.len() != self.weights.len() + 1 {
            return Err(Error::ShapeMismatch(
                "forward trace does not match model depth".into(),
            ));
        }

        // Delta at the output layer: mask by ReLU support if the output is
        // ReLU-activated (post-activation > 0 iff pre-activation > 0).
        let mut delta: Vec<f64> = match self.output_activation {
            Activation::Linear => output_grad.to_vec(),
            Activation::Relu => {
                let out = trace.output();
                output_grad
                    .iter()
                    .zip(out)
                    .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
                    .collect()
            }
        };

        for l in (0..self.weights.len()).rev() {
            let n_in = self.widths[l];
            let input = &trace.activations[l];

            // Parameter gradients for this layer.
            for (i, &d) in delta.iter().enumerate() {
                grads.biases[l][i] += d;
                if d != 0.0 {
                    axpy(d, input, &mut grads.weights[l][i * n_in..(i + 1) * n_in]);
                }
            }

            if l == 0 {
                // Gradient w.r.t. the raw input: no activation mask.
                let mut input_grad = vec![0.0; n_in];
                for (i, &d) in delta.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, &self.weights[l][i * n_in..(i + 1) * n_in], &mut input_grad);
                    }
                }
                return Ok(input_grad);
            }

            // Delta for the previous (hidden, ReLU) layer.
            let mut prev = vec![0.0; n_in];
            for (i, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, &self.weights[l][i * n_in..(i + 1) * n_in], &mut prev);
                }
            }
            for (p, a) in prev.iter_mut().zip(&trace.activations[l]) {
                if *a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        unreachable!("loop returns at l == 0");
    }

    /// Number of scalar parameters (weights then biases, layer-major).
    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Flat parameter vector in checkpoint order:
    /// `W0 (row-major), b0, W1, b1, ...`.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.weights.len() {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    /// Restore parameters from the flat checkpoint order.
    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "flat parameter vector has {} entries, model needs {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for l in 0..self.weights.len() {
            let wn = self.weights[l].len();
            self.weights[l].copy_from_slice(&params[offset..offset + wn]);
            offset += wn;
            let bn = self.biases[l].len();
            self.biases[l].copy_from_slice(&params[offset..offset + bn]);
            offset += bn;
        }
        Ok(())
    }

    /// Read one parameter by flat index (test/probing helper).
    pub fn get_param(&self, index: usize) -> f64 {
        self.flat_slot(index).0
    }

    /// Overwrite one parameter by flat index (test/probing helper).
    pub fn set_param(&mut self, index: usize, value: f64) {
        let (l, in_weights, k) = self.locate(index);
        if in_weights {
            self.weights[l][k] = value;
        } else {
            self.biases[l][k] = value;
        }
    }

    fn flat_slot(&self, index: usize) -> (f64, usize) {
        let (l, in_weights, k) = self.locate(index);
        if in_weights {
            (self.weights[l][k], index)
        } else {
            (self.biases[l][k], index)
        }
    }

    fn locate(&self, mut index: usize) -> (usize, bool, usize) {
        for l in 0..self.weights.len() {
            if index < self.weights[l].len() {
                return (l, true, index);
            }
            index -= self.weights[l].len();
            if index < self.biases[l].len() {
                return (l, false, index);
            }
            index -= self.biases[l].len();
        }
        panic!("parameter index out of bounds");
    }

    /// Gradient value for a flat parameter index, from [`MlpGrads`].
    pub fn grad_at(&self, grads: &MlpGrads, index: usize) -> f64 {
        let (l, in_weights, k) = self.locate(index);
        if in_weights {
            grads.weights[l][k]
        } else {
            grads.biases[l][k]
        }
    }

    /// FNV-1a over parameter bit patterns; changes iff some parameter does.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: f64| {
            for byte in v.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for l in 0..self.weights.len() {
            self.weights[l].iter().copied().for_each(&mut mix);
            self.biases[l].iter().copied().for_each(&mut mix);
        }
        h
    }

    pub(crate) fn weights_mut(&mut self) -> (&mut Vec<Vec<f64>>, &mut Vec<Vec<f64>>) {
        (&mut self.weights, &mut self.biases)
    }

    pub(crate) fn layer_shapes(&self) -> Vec<(usize, usize)> {
        (0..self.weights.len())
            .map(|l| (self.widths[l + 1], self.widths[l]))
            .collect()
    }
}

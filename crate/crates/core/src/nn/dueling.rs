use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::mlp::{Activation, ForwardTrace, Mlp, MlpGrads};
use crate::{Error, Result};

/// Q-network with a shared ReLU trunk and separate value/advantage streams:
/// `Q(s, a) = V(s) + A(s, a) - mean_a A(s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelingHead {
    trunk: Mlp,
    value: Mlp,
    advantage: Mlp,
}

/// Cached activations from one [`DuelingHead::forward_trace`] call.
#[derive(Debug, Clone)]
pub struct DuelingTrace {
    trunk: ForwardTrace,
    value: ForwardTrace,
    advantage: ForwardTrace,
    q_values: Vec<f64>,
}

impl DuelingTrace {
    pub fn q_values(&self) -> &[f64] {
        &self.q_values
    }
}

/// Gradients for all three component networks.
#[derive(Debug, Clone)]
pub struct DuelingGrads {
    pub trunk: MlpGrads,
    pub value: MlpGrads,
    pub advantage: MlpGrads,
}

impl DuelingGrads {
    pub fn zeros_like(head: &DuelingHead) -> Self {
        Self {
            trunk: MlpGrads::zeros_like(&head.trunk),
            value: MlpGrads::zeros_like(&head.value),
            advantage: MlpGrads::zeros_like(&head.advantage),
        }
    }
}

/// Adam state for all three component networks, stepped together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuelingOptimizer {
    trunk: AdamState,
    value: AdamState,
    advantage: AdamState,
}

impl DuelingOptimizer {
    pub fn new(head: &DuelingHead, learning_rate: f64) -> Self {
        Self {
            trunk: AdamState::new(&head.trunk, learning_rate),
            value: AdamState::new(&head.value, learning_rate),
            advantage: AdamState::new(&head.advantage, learning_rate),
        }
    }
}

impl DuelingHead {
    /// `state_len -> hidden... -> (value 1, advantage n_actions)` with ReLU
    /// throughout the trunk and linear heads.
    pub fn new_seeded<R: Rng + ?Sized>(
        state_len: usize,
        hidden: &[usize],
        n_actions: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if hidden.is_empty() {
            return Err(Error::InvalidArgument(
                "dueling head needs at least one hidden layer".into(),
            ));
        }
        if n_actions == 0 {
            return Err(Error::InvalidArgument("action count must be positive".into()));
        }
        let mut trunk_widths = vec![state_len];
        trunk_widths.extend_from_slice(hidden);
        let feature_len = *hidden.last().unwrap();
        let trunk = Mlp::new_seeded(&trunk_widths, Activation::Relu, rng)?;
        let value = Mlp::new_seeded(&[feature_len, 1], Activation::Linear, rng)?;
        let advantage = Mlp::new_seeded(&[feature_len, n_actions], Activation::Linear, rng)?;
        Ok(Self {
            trunk,
            value,
            advantage,
        })
    }

    /// Reassemble from component networks, validating the stream shapes.
    pub fn from_parts(trunk: Mlp, value: Mlp, advantage: Mlp) -> Result<Self> {
        let feature_len = trunk.output_len();
        if value.input_len() != feature_len || advantage.input_len() != feature_len {
            return Err(Error::ShapeMismatch(
                "value/advantage input widths must match the trunk output".into(),
            ));
        }
        if value.output_len() != 1 {
            return Err(Error::ShapeMismatch("value stream must have one output".into()));
        }
        Ok(Self {
            trunk,
            value,
            advantage,
        })
    }

    /// Component networks: trunk, value stream, advantage stream.
    pub fn parts(&self) -> (&Mlp, &Mlp, &Mlp) {
        (&self.trunk, &self.value, &self.advantage)
    }

    /// Zero-parameter head (all Q-values identically zero).
    pub fn zeros(state_len: usize, hidden: &[usize], n_actions: usize) -> Result<Self> {
        let mut trunk_widths = vec![state_len];
        trunk_widths.extend_from_slice(hidden);
        let feature_len = *hidden.last().unwrap();
        Ok(Self {
            trunk: Mlp::zeros(&trunk_widths, Activation::Relu)?,
            value: Mlp::zeros(&[feature_len, 1], Activation::Linear)?,
            advantage: Mlp::zeros(&[feature_len, n_actions], Activation::Linear)?,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.advantage.output_len()
    }

    pub fn state_len(&self) -> usize {
        self.trunk.input_len()
    }

    /// Q-values for all actions; satisfies `mean_a (Q - V) = 0` by
    /// construction.
    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        let features = self.trunk.forward(state)?;
        let v = self.value.forward(&features)?[0];
        let adv = self.advantage.forward(&features)?;
        Ok(combine(v, &adv))
    }

    pub fn forward_trace(&self, state: &[f64]) -> Result<DuelingTrace> {
        let trunk = self.trunk.forward_trace(state)?;
        let value = self.value.forward_trace(trunk.output())?;
        let advantage = self.advantage.forward_trace(trunk.output())?;
        let q_values = combine(value.output()[0], advantage.output());
        Ok(DuelingTrace {
            trunk,
            value,
            advantage,
            q_values,
        })
    }

    /// Backpropagate a gradient on the Q-vector through both streams and the
    /// shared trunk, accumulating into `grads`.
    pub fn backprop(
        &self,
        trace: &DuelingTrace,
        q_grad: &[f64],
        grads: &mut DuelingGrads,
    ) -> Result<()> {
        let n = self.n_actions();
        if q_grad.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "q gradient length {} does not match action count {n}",
                q_grad.len()
            )));
        }
        // Q_a = V + A_a - mean(A): dL/dV = sum(g), dL/dA_c = g_c - mean(g).
        let g_sum: f64 = q_grad.iter().sum();
        let g_mean = g_sum / n as f64;
        let adv_grad: Vec<f64> = q_grad.iter().map(|g| g - g_mean).collect();

        let value_in = self.value.backprop(&trace.value, &[g_sum], &mut grads.value)?;
        let adv_in = self
            .advantage
            .backprop(&trace.advantage, &adv_grad, &mut grads.advantage)?;
        let feature_grad: Vec<f64> = value_in.iter().zip(&adv_in).map(|(a, b)| a + b).collect();
        self.trunk
            .backprop(&trace.trunk, &feature_grad, &mut grads.trunk)?;
        Ok(())
    }

    /// One Adam step on all three component networks.
    pub fn apply(&mut self, optimizer: &mut DuelingOptimizer, grads: &DuelingGrads) -> Result<()> {
        adam_step(&mut self.trunk, &mut optimizer.trunk, &grads.trunk)?;
        adam_step(&mut self.value, &mut optimizer.value, &grads.value)?;
        adam_step(&mut self.advantage, &mut optimizer.advantage, &grads.advantage)?;
        Ok(())
    }

    /// Total scalar parameter count across trunk and both streams.
    pub fn param_count(&self) -> usize {
        self.trunk.param_count() + self.value.param_count() + self.advantage.param_count()
    }

    /// Read one parameter by global flat index (trunk, value, advantage).
    pub fn get_param(&self, index: usize) -> f64 {
        let (part, k) = self.locate(index);
        match part {
            0 => self.trunk.get_param(k),
            1 => self.value.get_param(k),
            _ => self.advantage.get_param(k),
        }
    }

    /// Overwrite one parameter by global flat index.
    pub fn set_param(&mut self, index: usize, value: f64) {
        let (part, k) = self.locate(index);
        match part {
            0 => self.trunk.set_param(k, value),
            1 => self.value.set_param(k, value),
            _ => self.advantage.set_param(k, value),
        }
    }

    /// Gradient value at a global flat index.
    pub fn grad_at(&self, grads: &DuelingGrads, index: usize) -> f64 {
        let (part, k) = self.locate(index);
        match part {
            0 => self.trunk.grad_at(&grads.trunk, k),
            1 => self.value.grad_at(&grads.value, k),
            _ => self.advantage.grad_at(&grads.advantage, k),
        }
    }

    fn locate(&self, index: usize) -> (u8, usize) {
        let t = self.trunk.param_count();
        let v = self.value.param_count();
        if index < t {
            (0, index)
        } else if index < t + v {
            (1, index - t)
        } else {
            (2, index - t - v)
        }
    }

    pub fn fingerprint(&self) -> u64 {
        self.trunk
            .fingerprint()
            .rotate_left(1)
            .wrapping_add(self.value.fingerprint())
            .rotate_left(1)
            .wrapping_add(self.advantage.fingerprint())
    }
}

fn combine(v: f64, advantages: &[f64]) -> Vec<f64> {
    let mean = advantages.iter().sum::<f64>() / advantages.len() as f64;
    advantages.iter().map(|a| v + a - mean).collect()
}

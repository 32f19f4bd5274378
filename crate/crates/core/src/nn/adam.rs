use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpGrads};
use crate::{Error, Result};

/// Adam optimizer state aligned with one [`Mlp`]'s parameter tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(model: &Mlp, learning_rate: f64) -> Self {
        let shapes = model.layer_shapes();
        let m_weights: Vec<Vec<f64>> = shapes.iter().map(|(o, i)| vec![0.0; o * i]).collect();
        let m_biases: Vec<Vec<f64>> = shapes.iter().map(|(o, _)| vec![0.0; *o]).collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            v_weights: m_weights.clone(),
            m_weights,
            v_biases: m_biases.clone(),
            m_biases,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }
}

/// One Adam update with bias correction. Errors on non-finite gradients,
/// naming the offending layer.
pub fn adam_step(model: &mut Mlp, state: &mut AdamState, grads: &MlpGrads) -> Result<()> {
    for (layer, (wg, bg)) in grads.weights.iter().zip(&grads.biases).enumerate() {
        if wg.iter().chain(bg.iter()).any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                layer,
                message: "gradient".into(),
            });
        }
    }
    if grads.weights.len() != state.m_weights.len() {
        return Err(Error::ShapeMismatch(
            "gradient layout does not match optimizer state".into(),
        ));
    }

    state.step += 1;
    let t = state.step as i32;
    let corr1 = 1.0 - state.beta1.powi(t);
    let corr2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, eps, lr) = (state.beta1, state.beta2, state.epsilon, state.learning_rate);

    let (weights, biases) = model.weights_mut();
    for l in 0..weights.len() {
        update_tensor(
            &mut weights[l],
            &grads.weights[l],
            &mut state.m_weights[l],
            &mut state.v_weights[l],
            b1,
            b2,
            eps,
            lr,
            corr1,
            corr2,
        );
        update_tensor(
            &mut biases[l],
            &grads.biases[l],
            &mut state.m_biases[l],
            &mut state.v_biases[l],
            b1,
            b2,
            eps,
            lr,
            corr1,
            corr2,
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn update_tensor(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    b1: f64,
    b2: f64,
    eps: f64,
    lr: f64,
    corr1: f64,
    corr2: f64,
) {
    for k in 0..params.len() {
        let g = grads[k];
        m[k] = b1 * m[k] + (1.0 - b1) * g;
        v[k] = b2 * v[k] + (1.0 - b2) * g * g;
        let m_hat = m[k] / corr1;
        let v_hat = v[k] / corr2;
        params[k] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

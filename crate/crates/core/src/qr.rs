//! Bank of quantile-regression networks: one model per proportion for the
//! lower and upper bounds, each with its own replay buffer and Adam state,
//! trained online with the pinball loss.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureVector;
use crate::nn::{adam_step, Activation, AdamState, Mlp, MlpGrads};
use crate::replay::ReplayBuffer;
use crate::{Error, Result};

/// Lower/upper quantile proportions of one interval with nominal coverage
/// `ncp = 1 - beta`; always `upper = lower + ncp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProportionPair {
    pub lower: f64,
    pub upper: f64,
    pub ncp: f64,
}

impl ProportionPair {
    /// Build from the lower proportion and the miscoverage level `beta`.
    pub fn new(lower: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be in (0, 1), got {beta}"
            )));
        }
        if !(lower > 0.0 && lower < beta) {
            return Err(Error::InvalidArgument(format!(
                "lower proportion must be in (0, beta = {beta}), got {lower}"
            )));
        }
        let ncp = 1.0 - beta;
        Ok(Self {
            lower,
            upper: lower + ncp,
            ncp,
        })
    }
}

/// Interval bounds in MW plus the proportions that produced them. After
/// [`QrBank::predict_interval`]'s post-processing,
/// `0 <= lower <= upper <= capacity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    pub proportions: ProportionPair,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// Pinball (quantile) loss `max(alpha (y - x), (alpha - 1)(y - x))`;
/// zero iff prediction equals realization.
pub fn pinball_loss(alpha: f64, prediction: f64, realization: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let diff = realization - prediction;
    Ok((alpha * diff).max((alpha - 1.0) * diff))
}

/// Derivative of the pinball loss in the prediction; the subgradient at
/// `prediction == realization` is taken as 0.
pub fn pinball_grad(alpha: f64, prediction: f64, realization: f64) -> f64 {
    if prediction < realization {
        -alpha
    } else if prediction > realization {
        1.0 - alpha
    } else {
        0.0
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile proportion must be in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// One quantile network with its replay buffer and optimizer state.
#[derive(Debug, Clone)]
pub struct QrModel {
    proportion: f64,
    net: Mlp,
    optimizer: AdamState,
    buffer: ReplayBuffer<(FeatureVector, f64)>,
}

impl QrModel {
    pub fn new<R: Rng + ?Sized>(
        proportion: f64,
        hidden: &[usize],
        buffer_capacity: usize,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_alpha(proportion)?;
        let mut widths = vec![crate::data::FEATURE_DIM];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let net = Mlp::new_seeded(&widths, Activation::Linear, rng)?;
        let optimizer = AdamState::new(&net, learning_rate);
        Ok(Self {
            proportion,
            net,
            optimizer,
            buffer: ReplayBuffer::new(buffer_capacity),
        })
    }

    pub fn proportion(&self) -> f64 {
        self.proportion
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// Raw quantile estimate, MW (unclamped).
    pub fn predict(&self, features: &FeatureVector) -> f64 {
        self.net.forward(features).expect("feature dim fixed")[0]
    }

    pub fn observe(&mut self, features: FeatureVector, power: f64) {
        self.buffer.push((features, power));
    }

    /// One Adam step on a uniform batch of `min(batch_size, buffer len)`
    /// stored pairs; returns the average pinball loss over the batch.
    pub fn train_step<R: Rng + ?Sized>(&mut self, batch_size: usize, rng: &mut R) -> Result<f64> {
        if self.buffer.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot train a quantile model with an empty buffer".into(),
            ));
        }
        let batch = self.buffer.sample_batch(rng, batch_size.max(1));
        let mut grads = MlpGrads::zeros_like(&self.net);
        let mut loss_sum = 0.0;
        for (features, power) in &batch {
            let trace = self.net.forward_trace(features)?;
            let prediction = trace.output()[0];
            loss_sum += pinball_loss(self.proportion, prediction, *power)?;
            let g = pinball_grad(self.proportion, prediction, *power);
            if g != 0.0 {
                self.net.backprop(&trace, &[g], &mut grads)?;
            }
        }
        adam_step(&mut self.net, &mut self.optimizer, &grads)?;
        Ok(loss_sum / batch.len() as f64)
    }

    pub fn fingerprint(&self) -> u64 {
        self.net.fingerprint()
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    /// Rebuild from checkpointed parts; buffer and optimizer start fresh.
    pub fn from_parts(
        proportion: f64,
        net: Mlp,
        buffer_capacity: usize,
        learning_rate: f64,
    ) -> Result<Self> {
        check_alpha(proportion)?;
        let optimizer = AdamState::new(&net, learning_rate);
        Ok(Self {
            proportion,
            net,
            optimizer,
            buffer: ReplayBuffer::new(buffer_capacity),
        })
    }
}

/// Losses from one [`QrBank::update_selected`] call.
#[derive(Debug, Clone, Copy)]
pub struct QrUpdate {
    pub lower_loss: f64,
    pub upper_loss: f64,
}

/// `2 * n_actions` quantile models: `lower[i]` at proportion `actions[i]`,
/// `upper[i]` at `actions[i] + ncp`. Models stay distinct even when
/// proportion values coincide across the two roles.
#[derive(Debug, Clone)]
pub struct QrBank {
    beta: f64,
    actions: Vec<f64>,
    lower: Vec<QrModel>,
    upper: Vec<QrModel>,
}

impl QrBank {
    pub fn new<R: Rng + ?Sized>(
        beta: f64,
        actions: &[f64],
        hidden: &[usize],
        buffer_capacity: usize,
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::InvalidArgument("action set must be non-empty".into()));
        }
        let mut lower = Vec::with_capacity(actions.len());
        let mut upper = Vec::with_capacity(actions.len());
        for &a in actions {
            let pair = ProportionPair::new(a, beta)?;
            lower.push(QrModel::new(pair.lower, hidden, buffer_capacity, learning_rate, rng)?);
            upper.push(QrModel::new(pair.upper, hidden, buffer_capacity, learning_rate, rng)?);
        }
        Ok(Self {
            beta,
            actions: actions.to_vec(),
            lower,
            upper,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn pair(&self, index: usize) -> Result<ProportionPair> {
        let a = *self.actions.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!("action index {index} out of range"))
        })?;
        ProportionPair::new(a, self.beta)
    }

    fn index_of(&self, pair: &ProportionPair) -> Result<usize> {
        self.actions
            .iter()
            .position(|&a| {
                (a - pair.lower).abs() < 1e-12 && (a + (1.0 - self.beta) - pair.upper).abs() < 1e-12
            })
            .ok_or(Error::UnknownPair {
                lower: pair.lower,
                upper: pair.upper,
            })
    }

    /// Store the sample in both selected models' buffers and take one Adam
    /// step on each; every other model is untouched.
    pub fn update_selected<R: Rng + ?Sized>(
        &mut self,
        pair: &ProportionPair,
        features: FeatureVector,
        power: f64,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<QrUpdate> {
        let idx = self.index_of(pair)?;
        self.lower[idx].observe(features, power);
        self.upper[idx].observe(features, power);
        let lower_loss = self.lower[idx].train_step(batch_size, rng)?;
        let upper_loss = self.upper[idx].train_step(batch_size, rng)?;
        Ok(QrUpdate { lower_loss, upper_loss })
    }

    /// Interval from the pair's two models, post-processed: both bounds
    /// clamped into `[0, capacity]`, then swapped if they cross.
    pub fn predict_interval(
        &self,
        pair: &ProportionPair,
        features: &FeatureVector,
        capacity: f64,
    ) -> Result<PredictionInterval> {
        let idx = self.index_of(pair)?;
        let mut lower = self.lower[idx].predict(features).clamp(0.0, capacity);
        let mut upper = self.upper[idx].predict(features).clamp(0.0, capacity);
        if lower > upper {
            std::mem::swap(&mut lower, &mut upper);
        }
        Ok(PredictionInterval {
            lower,
            upper,
            proportions: *pair,
        })
    }

    /// Parameter fingerprints of all models, lower bank then upper bank.
    pub fn fingerprints(&self) -> Vec<u64> {
        self.lower
            .iter()
            .chain(self.upper.iter())
            .map(QrModel::fingerprint)
            .collect()
    }

    pub fn lower_models(&self) -> &[QrModel] {
        &self.lower
    }

    pub fn upper_models(&self) -> &[QrModel] {
        &self.upper
    }

    pub(crate) fn from_parts(
        beta: f64,
        actions: Vec<f64>,
        lower: Vec<QrModel>,
        upper: Vec<QrModel>,
    ) -> Self {
        Self { beta, actions, lower, upper }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn pinball_examples() {
        assert!((pinball_loss(0.1, 5.0, 3.0).unwrap() - 1.8).abs() < 1e-12);
        assert_eq!(pinball_loss(0.3, 4.0, 4.0).unwrap(), 0.0);
        for (x, y) in [(1.0f64, 9.0f64), (-3.0, 2.5), (7.0, 7.0)] {
            let expected = (y - x).abs() / 2.0;
            assert!((pinball_loss(0.5, x, y).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn pinball_rejects_bad_alpha() {
        assert!(pinball_loss(0.0, 1.0, 2.0).is_err());
        assert!(pinball_loss(1.0, 1.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn pinball_is_convex_in_prediction(
            alpha in 0.01f64..0.99,
            x1 in -50.0f64..50.0,
            x2 in -50.0f64..50.0,
            y in -50.0f64..50.0,
            lambda in 0.0f64..1.0,
        ) {
            let mid = lambda * x1 + (1.0 - lambda) * x2;
            let lhs = pinball_loss(alpha, mid, y).unwrap();
            let rhs = lambda * pinball_loss(alpha, x1, y).unwrap()
                + (1.0 - lambda) * pinball_loss(alpha, x2, y).unwrap();
            prop_assert!(lhs <= rhs + 1e-9);
        }

        #[test]
        fn pinball_is_nonnegative(
            alpha in 0.01f64..0.99,
            x in -50.0f64..50.0,
            y in -50.0f64..50.0,
        ) {
            prop_assert!(pinball_loss(alpha, x, y).unwrap() >= 0.0);
        }
    }

    #[test]
    fn proportion_pair_invariants() {
        let pair = ProportionPair::new(0.0125, 0.05).unwrap();
        assert!((pair.upper - 0.9625).abs() < 1e-12);
        assert!(((pair.upper - pair.lower) - pair.ncp).abs() < 1e-15);
        assert!(ProportionPair::new(0.05, 0.05).is_err());
        assert!(ProportionPair::new(0.0, 0.05).is_err());
    }

    fn bank_025(rng: &mut StdRng) -> QrBank {
        QrBank::new(0.05, &[0.0125, 0.025, 0.0375], &[16], 1000, 1e-3, rng).unwrap()
    }

    #[test]
    fn update_touches_only_the_selected_pair() {
        let mut rng = StdRng::seed_from_u64(2);
        let mut bank = bank_025(&mut rng);
        let before = bank.fingerprints();

        let pair = ProportionPair::new(0.025, 0.05).unwrap();
        bank.update_selected(&pair, [0.1, 0.2, 0.3, 0.4], 12.0, 8, &mut rng)
            .unwrap();
        let after = bank.fingerprints();

        // Index 1 in each role changed, the other four are untouched.
        for (i, (b, a)) in before.iter().zip(&after).enumerate() {
            if i == 1 || i == 4 {
                assert_ne!(b, a, "model {i} should have been updated");
            } else {
                assert_eq!(b, a, "model {i} must be untouched");
            }
        }
    }

    #[test]
    fn unknown_pair_is_a_lookup_error() {
        let mut rng = StdRng::seed_from_u64(2);
        let mut bank = bank_025(&mut rng);
        let foreign = ProportionPair::new(0.02, 0.05).unwrap();
        assert!(matches!(
            bank.update_selected(&foreign, [0.0; 4], 1.0, 8, &mut rng),
            Err(Error::UnknownPair { .. })
        ));
    }

    #[test]
    fn single_sample_buffer_trains_with_batch_of_one() {
        let mut rng = StdRng::seed_from_u64(3);
        let mut bank = bank_025(&mut rng);
        let pair = ProportionPair::new(0.0125, 0.05).unwrap();
        let update = bank
            .update_selected(&pair, [0.5; 4], 3.0, 128, &mut rng)
            .unwrap();
        assert!(update.lower_loss.is_finite());
        assert_eq!(bank.lower_models()[0].buffer_len(), 1);
    }

    #[test]
    fn zero_initialized_models_give_zero_interval() {
        let mut rng = StdRng::seed_from_u64(4);
        let mut bank = bank_025(&mut rng);
        // Force zero nets.
        for m in bank.lower.iter_mut().chain(bank.upper.iter_mut()) {
            let widths = m.net.widths().to_vec();
            m.net = Mlp::zeros(&widths, Activation::Linear).unwrap();
        }
        let pair = ProportionPair::new(0.025, 0.05).unwrap();
        let iv = bank.predict_interval(&pair, &[0.3; 4], 30.0).unwrap();
        assert_eq!((iv.lower, iv.upper), (0.0, 0.0));
    }

    #[test]
    fn interval_is_clamped_and_uncrossed() {
        let mut rng = StdRng::seed_from_u64(5);
        let mut bank = QrBank::new(0.05, &[0.025], &[4], 10, 1e-3, &mut rng).unwrap();

        // Bias-only nets emitting fixed raw outputs.
        let set_bias = |m: &mut QrModel, v: f64| {
            let widths = m.net.widths().to_vec();
            let mut net = Mlp::zeros(&widths, Activation::Linear).unwrap();
            let n = net.param_count();
            net.set_param(n - 1, v);
            m.net = net;
        };
        set_bias(&mut bank.lower[0], -2.0);
        set_bias(&mut bank.upper[0], 35.0);
        let pair = ProportionPair::new(0.025, 0.05).unwrap();
        let iv = bank.predict_interval(&pair, &[0.0; 4], 30.0).unwrap();
        assert_eq!((iv.lower, iv.upper), (0.0, 30.0));

        set_bias(&mut bank.lower[0], 12.0);
        set_bias(&mut bank.upper[0], 9.0);
        let iv = bank.predict_interval(&pair, &[0.0; 4], 30.0).unwrap();
        assert_eq!((iv.lower, iv.upper), (9.0, 12.0));
    }

    #[test]
    fn constant_feature_training_approaches_empirical_quantile() {
        // Short-horizon sanity run; the full-accuracy version lives in the
        // acceptance suite.
        let mut rng = StdRng::seed_from_u64(6);
        let mut model = QrModel::new(0.5, &[16, 16], 5000, 2e-3, &mut rng).unwrap();
        let features = [0.0; 4];
        let mut draws = Vec::new();
        for _ in 0..3000 {
            let y: f64 = rng.random::<f64>();
            draws.push(y);
            model.observe(features, y);
            model.train_step(64, &mut rng).unwrap();
        }
        draws.sort_by(f64::total_cmp);
        let empirical_median = draws[draws.len() / 2];
        let predicted = model.predict(&features);
        assert!(
            (predicted - empirical_median).abs() < 0.06,
            "predicted {predicted} vs empirical {empirical_median}"
        );
    }
}

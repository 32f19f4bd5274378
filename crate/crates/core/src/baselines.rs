//! Quality-oriented comparison forecasters: the central PI from fixed
//! symmetric proportions, a rolling empirical-quantile extension of the
//! persistence model, and a deterministic point forecast from the median
//! quantile model.

use serde::{Deserialize, Serialize};

use crate::data::FeatureVector;
use crate::qr::{PredictionInterval, ProportionPair, QrBank, QrModel};
use crate::{Error, Result};

/// Default rolling window (hours) for the naive persistence interval.
pub const DEFAULT_NAIVE_WINDOW: usize = 168;

/// Which comparison forecaster to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Symmetric proportions (beta/2, 1 - beta/2) through the same QMLP
    /// bank machinery, trained on the full training stream.
    CentralQmlp,
    /// Empirical quantiles of the most recent realizations.
    NaivePersistence,
    /// Degenerate interval at the median quantile model's output.
    Deterministic,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::CentralQmlp => "central",
            BaselineKind::NaivePersistence => "naive",
            BaselineKind::Deterministic => "deterministic",
        }
    }
}

/// The symmetric proportion pair (beta/2, 1 - beta/2) of the central PI.
pub fn central_pair(beta: f64) -> Result<ProportionPair> {
    ProportionPair::new(beta / 2.0, beta)
}

/// Central PI from a bank trained with the fixed symmetric pair; same
/// clamping and crossing repair as any bank interval.
pub fn central_pi_forecast(
    bank: &QrBank,
    features: &FeatureVector,
    beta: f64,
    capacity: f64,
) -> Result<PredictionInterval> {
    let pair = central_pair(beta)?;
    bank.predict_interval(&pair, features, capacity)
}

/// Empirical `beta/2` and `1 - beta/2` quantiles of the recent history,
/// linearly interpolated between order statistics and clamped.
pub fn naive_pi_forecast(history: &[f64], beta: f64, capacity: f64) -> Result<PredictionInterval> {
    if history.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "naive interval needs at least 2 recent realizations, got {}",
            history.len()
        )));
    }
    let pair = central_pair(beta)?;
    let mut sorted = history.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lower = empirical_quantile(&sorted, pair.lower).clamp(0.0, capacity);
    let upper = empirical_quantile(&sorted, pair.upper).clamp(0.0, capacity);
    Ok(PredictionInterval {
        lower: lower.min(upper),
        upper: upper.max(lower),
        proportions: pair,
    })
}

/// Degenerate interval `[m, m]` at the clamped median-model output; the
/// dispatch then treats wind as certain.
pub fn deterministic_forecast(
    median_model: &QrModel,
    features: &FeatureVector,
    beta: f64,
    capacity: f64,
) -> Result<PredictionInterval> {
    let m = median_model.predict(features).clamp(0.0, capacity);
    Ok(PredictionInterval {
        lower: m,
        upper: m,
        proportions: central_pair(beta)?,
    })
}

/// Linear interpolation between order statistics of an ascending slice:
/// position `h = (n - 1) p`, value `x[floor h] + frac(h) * (x[floor h + 1]
/// - x[floor h])`.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

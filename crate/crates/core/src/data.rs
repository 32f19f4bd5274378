//! Dataset representation: CSV ingestion, synthetic skewed wind-data
//! generation, chronological splitting, and per-feature affine scaling.
//!
//! The feature layout is fixed as `[ws10, wd10, ws100, wd100]` (wind speed
//! and direction at 10 m and 100 m, directions in degrees). Power and load
//! stay in MW throughout; only features are scaled.

use std::fmt::Write as _;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const FEATURE_DIM: usize = 4;
pub type FeatureVector = [f64; FEATURE_DIM];

/// Expected CSV header, in order.
pub const CSV_COLUMNS: [&str; 7] = ["timestamp", "ws10", "wd10", "ws100", "wd100", "power", "load"];

/// One hourly observation: 4-d context, realized wind power, and demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub timestamp: u64,
    pub features: FeatureVector,
    /// Realized wind power, MW, in `[0, capacity]`.
    pub power: f64,
    /// Demand, MW, positive.
    pub load: f64,
}

/// Per-feature affine normalization fitted on a training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: [f64; FEATURE_DIM],
    pub scale: [f64; FEATURE_DIM],
}

impl Scaler {
    /// Fit mean and standard deviation per feature dimension.
    pub fn fit(samples: &[PowerSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("cannot fit scaler on empty data".into()));
        }
        let n = samples.len() as f64;
        let mut mean = [0.0; FEATURE_DIM];
        for s in samples {
            for (m, f) in mean.iter_mut().zip(&s.features) {
                *m += f;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = [0.0; FEATURE_DIM];
        for s in samples {
            for d in 0..FEATURE_DIM {
                let diff = s.features[d] - mean[d];
                var[d] += diff * diff;
            }
        }
        let mut scale = [0.0; FEATURE_DIM];
        for d in 0..FEATURE_DIM {
            scale[d] = (var[d] / n).sqrt().max(1e-12);
        }
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, features: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; FEATURE_DIM];
        for d in 0..FEATURE_DIM {
            out[d] = (features[d] - self.mean[d]) / self.scale[d];
        }
        out
    }

    pub fn invert(&self, scaled: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; FEATURE_DIM];
        for d in 0..FEATURE_DIM {
            out[d] = scaled[d] * self.scale[d] + self.mean[d];
        }
        out
    }
}

/// Ordered samples plus the wind capacity they were recorded under.
/// Immutable after construction; share read-only across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<PowerSample>,
    /// Wind capacity P, MW.
    pub capacity: f64,
    /// Present iff features have been normalized (fitted on the training
    /// partition only).
    pub scaler: Option<Scaler>,
    /// Rows whose power had to be clamped into `[0, capacity]` at ingestion.
    pub clamp_warnings: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Features of a sample in raw (unscaled) units.
    pub fn raw_features(&self, sample: &PowerSample) -> FeatureVector {
        match &self.scaler {
            Some(s) => s.invert(&sample.features),
            None => sample.features,
        }
    }

    /// Parse a CSV file with the exact header
    /// `timestamp,ws10,wd10,ws100,wd100,power,load`. Power outside
    /// `[0, capacity]` is clamped and counted in `clamp_warnings`.
    pub fn load_csv<P: AsRef<Path>>(path: P, capacity: f64) -> Result<Dataset> {
        if !(capacity > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "capacity must be positive, got {capacity}"
            )));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path.as_ref())?;
        let headers = reader
            .headers()
            .map_err(|e| Error::ParseRow { row: 0, message: e.to_string() })?
            .clone();
        let header_fields: Vec<&str> = headers.iter().map(str::trim).collect();
        for expected in CSV_COLUMNS {
            if !header_fields.contains(&expected) {
                return Err(Error::MissingColumn(expected.to_string()));
            }
        }
        if header_fields != CSV_COLUMNS {
            return Err(Error::InvalidArgument(format!(
                "unexpected CSV header {header_fields:?}, expected {CSV_COLUMNS:?}"
            )));
        }

        let mut samples = Vec::new();
        let mut clamp_warnings = 0usize;
        let mut last_timestamp: Option<u64> = None;
        for (i, record) in reader.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| Error::ParseRow { row, message: e.to_string() })?;
            if record.len() != CSV_COLUMNS.len() {
                return Err(Error::ParseRow {
                    row,
                    message: format!("expected {} fields, got {}", CSV_COLUMNS.len(), record.len()),
                });
            }
            let field = |idx: usize| -> Result<f64> {
                record[idx].trim().parse::<f64>().map_err(|_| Error::ParseRow {
                    row,
                    message: format!("non-numeric value `{}` in column `{}`", &record[idx], CSV_COLUMNS[idx]),
                })
            };
            let timestamp = record[0].trim().parse::<u64>().map_err(|_| Error::ParseRow {
                row,
                message: format!("non-integer timestamp `{}`", &record[0]),
            })?;
            if let Some(prev) = last_timestamp {
                if timestamp <= prev {
                    return Err(Error::ParseRow {
                        row,
                        message: format!("timestamp {timestamp} is not strictly increasing after {prev}"),
                    });
                }
            }
            last_timestamp = Some(timestamp);

            let features = [field(1)?, field(2)?, field(3)?, field(4)?];
            if features.iter().any(|f| !f.is_finite()) {
                return Err(Error::ParseRow { row, message: "non-finite feature".into() });
            }
            let mut power = field(5)?;
            let load = field(6)?;
            if !(load > 0.0) {
                return Err(Error::ParseRow { row, message: format!("load must be positive, got {load}") });
            }
            if power < 0.0 || power > capacity {
                power = power.clamp(0.0, capacity);
                clamp_warnings += 1;
            }
            samples.push(PowerSample { timestamp, features, power, load });
        }
        Ok(Dataset { samples, capacity, scaler: None, clamp_warnings })
    }

    /// Write the dataset in the same CSV schema, shortest round-trip float
    /// formatting (re-parsing reproduces the values exactly).
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = String::new();
        out.push_str(&CSV_COLUMNS.join(","));
        out.push('\n');
        for s in &self.samples {
            let f = self.raw_features(s);
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.timestamp, f[0], f[1], f[2], f[3], s.power, s.load
            )
            .expect("string write");
        }
        std::fs::write(path.as_ref(), out)?;
        Ok(())
    }

    /// Chronological split. The training partition gets
    /// `max(1, ceil(fraction * n))` samples; the scaler is fitted on it and
    /// applied to both partitions.
    pub fn split(&self, train_fraction: f64) -> Result<(Dataset, Dataset)> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("cannot split an empty dataset".into()));
        }
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train fraction must be in (0, 1), got {train_fraction}"
            )));
        }
        let n = self.samples.len();
        let n_train = ((train_fraction * n as f64).ceil() as usize).clamp(1, n);

        let mut train_samples = self.samples[..n_train].to_vec();
        let mut test_samples = self.samples[n_train..].to_vec();
        let scaler = Scaler::fit(&train_samples)?;
        for s in &mut train_samples {
            s.features = scaler.apply(&s.features);
        }
        for s in &mut test_samples {
            s.features = scaler.apply(&s.features);
        }
        let train = Dataset {
            samples: train_samples,
            capacity: self.capacity,
            scaler: Some(scaler.clone()),
            clamp_warnings: 0,
        };
        let test = Dataset {
            samples: test_samples,
            capacity: self.capacity,
            scaler: Some(scaler),
            clamp_warnings: 0,
        };
        Ok((train, test))
    }

    /// Rescale to a new wind capacity: power scales linearly by the capacity
    /// ratio, features and load are unchanged.
    pub fn rescale_capacity(&self, new_capacity: f64) -> Result<Dataset> {
        if !(new_capacity > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "capacity must be positive, got {new_capacity}"
            )));
        }
        let ratio = new_capacity / self.capacity;
        let samples = self
            .samples
            .iter()
            .map(|s| PowerSample { power: s.power * ratio, ..s.clone() })
            .collect();
        Ok(Dataset {
            samples,
            capacity: new_capacity,
            scaler: self.scaler.clone(),
            clamp_warnings: self.clamp_warnings,
        })
    }
}

/// Parameters of the synthetic hourly wind generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n: usize,
    pub capacity: f64,
    pub seed: u64,
    /// Log-scale sigma of the multiplicative power noise; positive skew.
    pub noise_sigma: f64,
    /// Mean demand, MW.
    pub load_mean: f64,
    /// Relative amplitude of the daily demand sinusoid.
    pub load_swing: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 8760,
            capacity: 30.0,
            seed: 1,
            noise_sigma: 0.35,
            load_mean: 50.0,
            load_swing: 0.2,
        }
    }
}

// Wind-speed process and power-curve constants.
const WS_MEAN: f64 = 7.5;
const WS_PHI: f64 = 0.92;
const WS_INNOV_SIGMA: f64 = 0.9;
const SHEAR: f64 = 0.75;
const WS10_NOISE: f64 = 0.3;
const WD_WALK_DEG: f64 = 8.0;
const WD_OFFSET_DEG: f64 = 15.0;
const WD_OFFSET_NOISE: f64 = 5.0;
const CURVE_MID: f64 = 8.0;
const CURVE_SCALE: f64 = 1.8;

/// Sigmoid power curve: fraction of capacity produced at 100 m wind speed.
pub fn power_curve(ws100: f64) -> f64 {
    1.0 / (1.0 + (-(ws100 - CURVE_MID) / CURVE_SCALE).exp())
}

/// Deterministic synthetic dataset. Features follow smooth autocorrelated
/// processes; power is the capacity-scaled curve output times multiplicative
/// log-normal noise (mean one), clamped; load is a daily sinusoid.
///
/// A fixed number of RNG draws per sample makes any length-`m` prefix of an
/// `n`-sample run identical to an `m`-sample run.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if !(spec.capacity > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "capacity must be positive, got {}",
            spec.capacity
        )));
    }
    let mut rng = StdRng::seed_from_u64(spec.seed);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };

    // Initial latent state: stationary wind speed and a random direction.
    let stat_sigma = WS_INNOV_SIGMA / (1.0 - WS_PHI * WS_PHI).sqrt();
    let mut v = WS_MEAN + stat_sigma * normal();
    let mut wd100 = (normal().abs() * 97.0) % 360.0;

    let mut samples = Vec::with_capacity(spec.n);
    for t in 0..spec.n as u64 {
        let (e1, e2, e3, e4, e5) = (normal(), normal(), normal(), normal(), normal());
        v = WS_MEAN + WS_PHI * (v - WS_MEAN) + WS_INNOV_SIGMA * e1;
        let ws100 = v.max(0.0);
        let ws10 = (SHEAR * ws100 + WS10_NOISE * e2).max(0.0);
        wd100 = (wd100 + WD_WALK_DEG * e3).rem_euclid(360.0);
        let wd10 = (wd100 + WD_OFFSET_DEG + WD_OFFSET_NOISE * e4).rem_euclid(360.0);

        // Mean-one log-normal factor gives a positively skewed conditional
        // distribution.
        let sigma = spec.noise_sigma;
        let noise = (sigma * e5 - 0.5 * sigma * sigma).exp();
        let power = (spec.capacity * power_curve(ws100) * noise).clamp(0.0, spec.capacity);

        let load = spec.load_mean
            * (1.0 + spec.load_swing * (2.0 * std::f64::consts::PI * (t % 24) as f64 / 24.0).sin());

        samples.push(PowerSample {
            timestamp: t,
            features: [ws10, wd10, ws100, wd100],
            power,
            load,
        });
    }
    Ok(Dataset {
        samples,
        capacity: spec.capacity,
        scaler: None,
        clamp_warnings: 0,
    })
}

/// True conditional `alpha`-quantile of power given raw features under the
/// synthetic generator (monotone transform of the log-normal factor,
/// clamped like the generator itself).
pub fn conditional_power_quantile(spec: &SyntheticSpec, raw_features: &FeatureVector, alpha: f64) -> f64 {
    let ws100 = raw_features[2];
    let sigma = spec.noise_sigma;
    let z = normal_quantile(alpha);
    let factor = (sigma * z - 0.5 * sigma * sigma).exp();
    (spec.capacity * power_curve(ws100) * factor).clamp(0.0, spec.capacity)
}

/// Inverse standard normal CDF (Acklam's rational approximation, ~1e-9
/// absolute error).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must be in (0, 1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

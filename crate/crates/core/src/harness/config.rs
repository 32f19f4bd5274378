use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::EpsilonSchedule;
use crate::baselines::{BaselineKind, DEFAULT_NAIVE_WINDOW};
use crate::data::{generate_synthetic, Dataset, SyntheticSpec};
use crate::dispatch::VppConfig;
use crate::seeds::derive_seed;
use crate::{Error, Result};

/// Environment variable holding the root directory for relative `out_dir`s.
pub const OUT_ROOT_ENV: &str = "VOPI_OUT_ROOT";

/// Where the training data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// CSV file with the fixed column schema.
    Csv { path: PathBuf, capacity: f64 },
    /// Built-in synthetic generator. Its seed is re-derived from the run's
    /// root seed so that a single seed governs the whole run.
    Synthetic(SyntheticSpec),
}

/// Declarative description of one training/evaluation run. Every key can be
/// set in the TOML config file and overridden by a CLI flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Nominal coverage probability (1 - beta).
    pub ncp: f64,
    /// Action-space exponent n; the agent chooses among 2^n - 1 proportions.
    pub actions_exponent: u32,
    pub epochs: usize,
    pub batch_size: usize,
    /// Learning rate of the quantile models.
    pub qr_learning_rate: f64,
    /// Learning rate of the agent's Q-network.
    pub agent_learning_rate: f64,
    pub qr_hidden: Vec<usize>,
    pub agent_hidden: Vec<usize>,
    /// Capacity of every replay buffer (per quantile model and the agent).
    pub buffer_capacity: usize,
    /// Root seed; all randomness derives from it through named streams.
    pub seed: u64,
    /// Repetitions with derived seeds, used by sweeps for averaging.
    pub n_seeds: usize,
    pub train_fraction: f64,
    /// Rolling window of the naive persistence baseline, hours.
    pub naive_window: usize,
    pub epsilon: EpsilonSchedule,
    /// Baselines to train and evaluate alongside the proposed method.
    pub baselines: Vec<BaselineKind>,
    pub data: DataSource,
    pub vpp: VppConfig,
    /// Rescale the dataset's power linearly to this wind capacity (and use
    /// it as the dispatch wind capacity); used by capacity sweeps.
    pub capacity_override: Option<f64>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ncp: 0.95,
            actions_exponent: 2,
            epochs: 30,
            batch_size: 128,
            qr_learning_rate: 1e-3,
            agent_learning_rate: 1e-4,
            qr_hidden: vec![128, 128],
            agent_hidden: vec![512, 256],
            buffer_capacity: 50_000,
            seed: 1,
            n_seeds: 1,
            train_fraction: 0.8,
            naive_window: DEFAULT_NAIVE_WINDOW,
            epsilon: EpsilonSchedule::default(),
            baselines: vec![
                BaselineKind::CentralQmlp,
                BaselineKind::NaivePersistence,
                BaselineKind::Deterministic,
            ],
            data: DataSource::Synthetic(SyntheticSpec::default()),
            vpp: VppConfig::default(),
            capacity_override: None,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

impl RunConfig {
    pub fn beta(&self) -> f64 {
        1.0 - self.ncp
    }

    /// Hard errors for inconsistent settings; soft problems come back as
    /// warning strings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.ncp > 0.0 && self.ncp < 1.0) {
            return Err(Error::InvalidConfig(format!("ncp must be in (0, 1), got {}", self.ncp)));
        }
        if self.actions_exponent < 1 {
            return Err(Error::InvalidConfig("actions_exponent must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.naive_window < 2 {
            return Err(Error::InvalidConfig("naive_window must be at least 2".into()));
        }
        if self.n_seeds == 0 {
            return Err(Error::InvalidConfig("n_seeds must be at least 1".into()));
        }
        if self.qr_hidden.is_empty() || self.agent_hidden.is_empty() {
            return Err(Error::InvalidConfig("hidden layer lists must be non-empty".into()));
        }
        let mut warnings = self.vpp.validate()?;
        if let Some(cap) = self.capacity_override {
            if !(cap > 0.0) {
                return Err(Error::InvalidConfig("capacity_override must be positive".into()));
            }
        }
        if let DataSource::Csv { capacity, .. } = &self.data {
            if !(*capacity > 0.0) {
                return Err(Error::InvalidConfig("data capacity must be positive".into()));
            }
        }
        let dataset_capacity = self.effective_capacity();
        if (dataset_capacity - self.vpp.wind_capacity).abs() > 1e-9 {
            warnings.push(format!(
                "dataset capacity {dataset_capacity} MW differs from dispatch wind capacity {} MW",
                self.vpp.wind_capacity
            ));
        }
        Ok(warnings)
    }

    fn effective_capacity(&self) -> f64 {
        if let Some(cap) = self.capacity_override {
            return cap;
        }
        match &self.data {
            DataSource::Csv { capacity, .. } => *capacity,
            DataSource::Synthetic(spec) => spec.capacity,
        }
    }

    /// Load (or generate) the configured dataset. Synthetic generation is
    /// seeded from this run's root seed through the `data` stream; the
    /// capacity override rescales power linearly.
    pub fn load_dataset(&self) -> Result<Dataset> {
        let dataset = match &self.data {
            DataSource::Csv { path, capacity } => Dataset::load_csv(path, *capacity)?,
            DataSource::Synthetic(spec) => {
                let mut spec = spec.clone();
                spec.seed = derive_seed(self.seed, "data");
                generate_synthetic(&spec)?
            }
        };
        match self.capacity_override {
            Some(cap) => dataset.rescale_capacity(cap),
            None => Ok(dataset),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_toml_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Output directory, rooted at `$VOPI_OUT_ROOT` when relative.
    pub fn resolved_out_dir(&self) -> PathBuf {
        if self.out_dir.is_absolute() {
            return self.out_dir.clone();
        }
        match std::env::var_os(OUT_ROOT_ENV) {
            Some(root) => PathBuf::from(root).join(&self.out_dir),
            None => self.out_dir.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let config = RunConfig::default();
        let text = config.to_toml_string().unwrap();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let config = RunConfig::from_toml_str("ncp = 0.9\nepochs = 3\n").unwrap();
        assert_eq!(config.ncp, 0.9);
        assert_eq!(config.epochs, 3);
        assert_eq!(config.batch_size, 128);
        assert_eq!(config.agent_hidden, vec![512, 256]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml_str("epoched = 3\n").is_err());
        assert!(RunConfig::from_toml_str("not_a_key = 1\n").is_err());
    }

    #[test]
    fn synthetic_data_source_parses_from_toml() {
        let text = "[data]\nkind = \"synthetic\"\nn = 500\ncapacity = 8.0\n";
        let config = RunConfig::from_toml_str(text).unwrap();
        match &config.data {
            DataSource::Synthetic(spec) => {
                assert_eq!(spec.n, 500);
                assert_eq!(spec.capacity, 8.0);
            }
            other => panic!("unexpected source {other:?}"),
        }
    }

    #[test]
    fn validation_catches_bad_ranges() {
        let config = RunConfig { ncp: 1.2, ..RunConfig::default() };
        assert!(config.validate().is_err());

        let config = RunConfig { train_fraction: 1.0, ..RunConfig::default() };
        assert!(config.validate().is_err());

        let config = RunConfig { naive_window: 1, ..RunConfig::default() };
        assert!(config.validate().is_err());
    }

    #[test]
    fn capacity_override_rescales_dataset() {
        let mut config = RunConfig::default();
        if let DataSource::Synthetic(spec) = &mut config.data {
            spec.n = 50;
        }
        config.capacity_override = Some(8.0);
        let ds = config.load_dataset().unwrap();
        assert_eq!(ds.capacity, 8.0);
        assert!(ds.samples.iter().all(|s| s.power <= 8.0));
    }

    #[test]
    fn dataset_seed_follows_root_seed() {
        let mut a = RunConfig::default();
        if let DataSource::Synthetic(spec) = &mut a.data {
            spec.n = 30;
        }
        let mut b = a.clone();
        b.seed = 2;
        assert_ne!(a.load_dataset().unwrap(), b.load_dataset().unwrap());
        assert_eq!(a.load_dataset().unwrap(), a.load_dataset().unwrap());
    }
}

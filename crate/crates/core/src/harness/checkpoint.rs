//! Artifact serialization. Checkpoints are versioned JSON files holding an
//! architecture descriptor plus one flat `f64` parameter array in
//! `W0 (row-major), b0, W1, b1, ...` order. Replay buffers and optimizer
//! moments are training state and are not persisted.
//!
//! Layout under `<out_dir>/checkpoints/`:
//!
//! ```text
//! agent.json                    # config, action space, nets, schedule position
//! qr/bank.json                  # beta + action list
//! qr/lower/q<prop>.json         # one model per proportion, 6-decimal key
//! qr/upper/q<prop>.json
//! central/...                   # same shape as qr/, single action
//! median.json                   # median quantile model
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{ActionSpace, Agent, AgentConfig};
use crate::nn::{Activation, DuelingHead, Mlp};
use crate::qr::{QrBank, QrModel};
use crate::{Error, Result};

use super::config::RunConfig;
use super::train::Artifacts;

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetCheckpoint {
    widths: Vec<usize>,
    output_activation: Activation,
    params: Vec<f64>,
}

impl NetCheckpoint {
    fn of(net: &Mlp) -> Self {
        Self {
            widths: net.widths().to_vec(),
            output_activation: net.output_activation(),
            params: net.flat_params(),
        }
    }

    fn restore(&self) -> Result<Mlp> {
        let mut net = Mlp::zeros(&self.widths, self.output_activation)?;
        net.set_flat_params(&self.params)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(net)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelCheckpoint {
    version: u32,
    proportion: f64,
    net: NetCheckpoint,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BankManifest {
    version: u32,
    beta: f64,
    actions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AgentCheckpoint {
    version: u32,
    config: AgentConfig,
    space: ActionSpace,
    trunk: NetCheckpoint,
    value: NetCheckpoint,
    advantage: NetCheckpoint,
    steps_trained: usize,
}

fn write_json<T: Serialize, P: AsRef<Path>>(path: P, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Checkpoint(e.to_string()))?;
    std::fs::write(path.as_ref(), text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>, P: AsRef<Path>>(path: P) -> Result<T> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
}

/// File key of one quantile model: fixed 6-decimal proportion string.
pub fn model_key(proportion: f64) -> String {
    format!("q{proportion:.6}")
}

fn save_bank(dir: &Path, bank: &QrBank) -> Result<()> {
    std::fs::create_dir_all(dir.join("lower"))?;
    std::fs::create_dir_all(dir.join("upper"))?;
    write_json(
        dir.join("bank.json"),
        &BankManifest {
            version: CHECKPOINT_VERSION,
            beta: bank.beta(),
            actions: bank.actions().to_vec(),
        },
    )?;
    for (role, models) in [("lower", bank.lower_models()), ("upper", bank.upper_models())] {
        for model in models {
            let checkpoint = ModelCheckpoint {
                version: CHECKPOINT_VERSION,
                proportion: model.proportion(),
                net: NetCheckpoint::of(model.net()),
            };
            write_json(
                dir.join(role).join(format!("{}.json", model_key(model.proportion()))),
                &checkpoint,
            )?;
        }
    }
    Ok(())
}

fn load_bank(dir: &Path, buffer_capacity: usize, learning_rate: f64) -> Result<QrBank> {
    let manifest: BankManifest = read_json(dir.join("bank.json"))?;
    let ncp = 1.0 - manifest.beta;
    let mut lower = Vec::with_capacity(manifest.actions.len());
    let mut upper = Vec::with_capacity(manifest.actions.len());
    for &a in &manifest.actions {
        for (role, proportion, out) in
            [("lower", a, &mut lower), ("upper", a + ncp, &mut upper)]
        {
            let path = dir.join(role).join(format!("{}.json", model_key(proportion)));
            let checkpoint: ModelCheckpoint = read_json(&path)?;
            let net = checkpoint.net.restore()?;
            out.push(QrModel::from_parts(
                checkpoint.proportion,
                net,
                buffer_capacity,
                learning_rate,
            )?);
        }
    }
    Ok(QrBank::from_parts(manifest.beta, manifest.actions, lower, upper))
}

/// Persist all artifacts under `<dir>/checkpoints/`.
pub fn save_artifacts(dir: &Path, artifacts: &Artifacts, _config: &RunConfig) -> Result<()> {
    let root = dir.join("checkpoints");
    std::fs::create_dir_all(&root)?;

    let (trunk, value, advantage) = artifacts.agent.head().parts();
    write_json(
        root.join("agent.json"),
        &AgentCheckpoint {
            version: CHECKPOINT_VERSION,
            config: *artifacts.agent.config(),
            space: artifacts.space.clone(),
            trunk: NetCheckpoint::of(trunk),
            value: NetCheckpoint::of(value),
            advantage: NetCheckpoint::of(advantage),
            steps_trained: artifacts.steps_trained,
        },
    )?;

    save_bank(&root.join("qr"), &artifacts.bank)?;
    if let Some(central) = &artifacts.central {
        save_bank(&root.join("central"), central)?;
    }
    if let Some(median) = &artifacts.median {
        write_json(
            root.join("median.json"),
            &ModelCheckpoint {
                version: CHECKPOINT_VERSION,
                proportion: median.proportion(),
                net: NetCheckpoint::of(median.net()),
            },
        )?;
    }
    Ok(())
}

/// Load artifacts written by [`save_artifacts`]. Buffers and optimizer
/// states start fresh; the config supplies capacities and learning rates.
pub fn load_artifacts(dir: &Path, config: &RunConfig) -> Result<Artifacts> {
    let root = dir.join("checkpoints");
    let agent_cp: AgentCheckpoint = read_json(root.join("agent.json"))?;
    if agent_cp.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported agent checkpoint version {}",
            agent_cp.version
        )));
    }
    let head = DuelingHead::from_parts(
        agent_cp.trunk.restore()?,
        agent_cp.value.restore()?,
        agent_cp.advantage.restore()?,
    )?;
    let agent = Agent::from_parts(agent_cp.config, agent_cp.space.clone(), head)?;

    let bank = load_bank(&root.join("qr"), config.buffer_capacity, config.qr_learning_rate)?;
    let central_dir = root.join("central");
    let central = if central_dir.join("bank.json").exists() {
        Some(load_bank(&central_dir, config.buffer_capacity, config.qr_learning_rate)?)
    } else {
        None
    };
    let median_path = root.join("median.json");
    let median = if median_path.exists() {
        let checkpoint: ModelCheckpoint = read_json(&median_path)?;
        Some(QrModel::from_parts(
            checkpoint.proportion,
            checkpoint.net.restore()?,
            config.buffer_capacity,
            config.qr_learning_rate,
        )?)
    } else {
        None
    };

    Ok(Artifacts {
        space: agent_cp.space,
        bank,
        agent,
        central,
        median,
        steps_trained: agent_cp.steps_trained,
    })
}

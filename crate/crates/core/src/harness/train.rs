use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::agent::{ActionSpace, Agent, AgentConfig};
use crate::baselines::{central_pair, BaselineKind};
use crate::data::Dataset;
use crate::dispatch::monetary_score;
use crate::qr::{QrBank, QrModel};
use crate::seeds::stream_rng;
use crate::{Error, Result};

use super::checkpoint::save_artifacts;
use super::config::RunConfig;

/// Everything `train` produces that later stages consume.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub space: ActionSpace,
    pub bank: QrBank,
    pub agent: Agent,
    pub central: Option<QrBank>,
    pub median: Option<QrModel>,
    /// Steps already taken against the epsilon schedule.
    pub steps_trained: usize,
}

/// Per-epoch aggregates of the training loop.
#[derive(Debug, Clone, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub avg_reward: f64,
    pub avg_pinball_lower: f64,
    pub avg_pinball_upper: f64,
    pub avg_agent_loss: f64,
    pub action_counts: Vec<u64>,
    pub epsilon_end: f64,
}

/// One training interaction, kept so log aggregates can be re-derived.
#[derive(Debug, Clone, Serialize)]
pub struct StepLog {
    pub epoch: usize,
    pub step: usize,
    pub timestamp: u64,
    pub action: usize,
    pub reward: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub steps: Vec<StepLog>,
}

impl TrainingLog {
    pub fn write_csv<P: AsRef<Path>>(&self, dir: P) -> Result<()> {
        let dir = dir.as_ref();
        let mut epochs = String::from(
            "epoch,avg_reward,avg_pinball_lower,avg_pinball_upper,avg_agent_loss,epsilon_end,action_counts\n",
        );
        for e in &self.epochs {
            let counts = e
                .action_counts
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join("|");
            writeln!(
                epochs,
                "{},{},{},{},{},{},{}",
                e.epoch, e.avg_reward, e.avg_pinball_lower, e.avg_pinball_upper, e.avg_agent_loss, e.epsilon_end, counts
            )
            .expect("string write");
        }
        std::fs::write(dir.join("train_epochs.csv"), epochs)?;

        let mut steps = String::from("epoch,step,timestamp,action,reward,epsilon\n");
        for s in &self.steps {
            writeln!(
                steps,
                "{},{},{},{},{},{}",
                s.epoch, s.step, s.timestamp, s.action, s.reward, s.epsilon
            )
            .expect("string write");
        }
        std::fs::write(dir.join("train_steps.csv"), steps)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub artifacts: Artifacts,
    pub train_data: Dataset,
    pub test_data: Dataset,
    pub log: TrainingLog,
}

/// Run the closed-loop training: per sample, the agent picks a proportion,
/// the selected quantile models emit the interval and take a pinball step,
/// the dispatch solvers turn the interval into a monetary score, and its
/// negative feeds the agent's replay buffer and Q-update.
///
/// Baselines that need models (central bank, median model) are trained on
/// the same stream. Checkpoints and logs land in the config's output
/// directory; the whole run is deterministic for a fixed root seed.
pub fn train(config: &RunConfig) -> Result<TrainOutput> {
    config.validate()?;
    let dataset = config.load_dataset()?;
    let (train_data, test_data) = dataset.split(config.train_fraction)?;

    let output = train_on(config, &train_data)?;

    let out_dir = config.resolved_out_dir();
    std::fs::create_dir_all(&out_dir)?;
    save_artifacts(&out_dir, &output.0, config)?;
    output.1.write_csv(&out_dir)?;
    std::fs::write(out_dir.join("config.toml"), config.to_toml_string()?)?;

    Ok(TrainOutput {
        artifacts: output.0,
        train_data,
        test_data,
        log: output.1,
    })
}

/// The training loop itself, without any file I/O. Exposed for tests that
/// drive custom datasets.
pub fn train_on(config: &RunConfig, train_data: &Dataset) -> Result<(Artifacts, TrainingLog)> {
    if train_data.is_empty() {
        return Err(Error::InvalidArgument("training partition is empty".into()));
    }
    let beta = config.beta();
    let space = ActionSpace::build(beta, config.actions_exponent)?;

    let mut qr_init = stream_rng(config.seed, "qr-init");
    let mut bank = QrBank::new(
        beta,
        space.actions(),
        &config.qr_hidden,
        config.buffer_capacity,
        config.qr_learning_rate,
        &mut qr_init,
    )?;

    let agent_config = AgentConfig {
        epsilon: config.epsilon.end,
        batch_size: config.batch_size,
        learning_rate: config.agent_learning_rate,
        buffer_capacity: config.buffer_capacity,
        seed: config.seed,
    };
    let mut agent_init = stream_rng(config.seed, "agent-init");
    let mut agent = Agent::new(agent_config, space.clone(), &config.agent_hidden, &mut agent_init)?;

    let want_central = config.baselines.contains(&BaselineKind::CentralQmlp);
    let want_median = config.baselines.contains(&BaselineKind::Deterministic);
    let mut central = if want_central {
        let mut rng = stream_rng(config.seed, "central-init");
        Some(QrBank::new(
            beta,
            &[central_pair(beta)?.lower],
            &config.qr_hidden,
            config.buffer_capacity,
            config.qr_learning_rate,
            &mut rng,
        )?)
    } else {
        None
    };
    let mut median = if want_median {
        let mut rng = stream_rng(config.seed, "median-init");
        Some(QrModel::new(
            0.5,
            &config.qr_hidden,
            config.buffer_capacity,
            config.qr_learning_rate,
            &mut rng,
        )?)
    } else {
        None
    };

    let mut rng_eps = stream_rng(config.seed, "epsilon");
    let mut rng_qr = stream_rng(config.seed, "qr-batch");
    let mut rng_agent = stream_rng(config.seed, "agent-batch");
    let mut rng_central = stream_rng(config.seed, "central-batch");
    let mut rng_median = stream_rng(config.seed, "median-batch");

    let total_steps = config.epochs * train_data.len();
    let central_proportions = central_pair(beta)?;
    let mut log = TrainingLog::default();
    let mut global_step = 0usize;

    for epoch in 1..=config.epochs {
        let mut reward_sum = 0.0;
        let mut pinball_lower_sum = 0.0;
        let mut pinball_upper_sum = 0.0;
        let mut agent_loss_sum = 0.0;
        let mut action_counts = vec![0u64; space.len()];
        let mut epsilon = config.epsilon.start;

        for sample in &train_data.samples {
            epsilon = config.epsilon.value_at(global_step, total_steps);
            let state = sample.features;

            let (action, lower_proportion) = agent.select_action(&state, epsilon, &mut rng_eps);
            let pair = space.pair(action)?;
            debug_assert_eq!(pair.lower, lower_proportion);

            // Interval from the pre-update models, like the decision an
            // operator would have issued at this step.
            let interval = bank.predict_interval(&pair, &state, train_data.capacity)?;
            let update = bank.update_selected(&pair, state, sample.power, config.batch_size, &mut rng_qr)?;

            let ms = monetary_score(&config.vpp, &interval, sample.load, sample.power)
                .map_err(|e| e.at_sample(sample.timestamp))?;
            let reward = -ms.score;
            if !reward.is_finite() {
                return Err(Error::NonFinite {
                    layer: 0,
                    message: format!("reward at sample t={}", sample.timestamp),
                });
            }
            agent.record(crate::agent::RewardRecord { state, action, reward })?;
            let agent_loss = agent.update_from_buffer(&mut rng_agent)?;

            if let Some(cb) = central.as_mut() {
                cb.update_selected(
                    &central_proportions,
                    state,
                    sample.power,
                    config.batch_size,
                    &mut rng_central,
                )?;
            }
            if let Some(m) = median.as_mut() {
                m.observe(state, sample.power);
                m.train_step(config.batch_size, &mut rng_median)?;
            }

            reward_sum += reward;
            pinball_lower_sum += update.lower_loss;
            pinball_upper_sum += update.upper_loss;
            agent_loss_sum += agent_loss;
            action_counts[action] += 1;
            log.steps.push(StepLog {
                epoch,
                step: global_step,
                timestamp: sample.timestamp,
                action,
                reward,
                epsilon,
            });
            global_step += 1;
        }

        let n = train_data.len() as f64;
        log.epochs.push(EpochLog {
            epoch,
            avg_reward: reward_sum / n,
            avg_pinball_lower: pinball_lower_sum / n,
            avg_pinball_upper: pinball_upper_sum / n,
            avg_agent_loss: agent_loss_sum / n,
            action_counts,
            epsilon_end: epsilon,
        });
    }

    Ok((
        Artifacts {
            space,
            bank,
            agent,
            central,
            median,
            steps_trained: global_step,
        },
        log,
    ))
}

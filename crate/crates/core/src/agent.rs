//! Value-based contextual bandit over quantile proportions: discretized
//! action space, epsilon-greedy selection against a dueling Q-network, a
//! FIFO reward buffer, and squared-error regression of Q to the stored
//! rewards. Rewards are immediate, so there is no bootstrapping and no
//! target network.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureVector, FEATURE_DIM};
use crate::nn::{DuelingGrads, DuelingHead, DuelingOptimizer};
use crate::qr::ProportionPair;
use crate::replay::ReplayBuffer;
use crate::{Error, Result};

/// Discretization of `(0, beta)` into `2^n - 1` equally spaced lower
/// proportions `{i * beta / (|A| + 1)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    beta: f64,
    actions: Vec<f64>,
}

impl ActionSpace {
    /// `exponent` is `n` in `|A| = 2^n - 1`, at least 1.
    pub fn build(beta: f64, exponent: u32) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be in (0, 1), got {beta}"
            )));
        }
        if !(1..=16).contains(&exponent) {
            return Err(Error::InvalidArgument(format!(
                "action-space exponent must be in [1, 16], got {exponent}"
            )));
        }
        let size = (1usize << exponent) - 1;
        let actions = (1..=size)
            .map(|i| i as f64 * beta / (size + 1) as f64)
            .collect();
        Ok(Self { beta, actions })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn ncp(&self) -> f64 {
        1.0 - self.beta
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn lower(&self, index: usize) -> f64 {
        self.actions[index]
    }

    pub fn pair(&self, index: usize) -> Result<ProportionPair> {
        let a = *self.actions.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!("action index {index} out of range"))
        })?;
        ProportionPair::new(a, self.beta)
    }
}

/// Linear decay from `start` to `end` over the first `decay_fraction` of
/// training steps, then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.05,
            decay_fraction: 0.5,
        }
    }
}

impl EpsilonSchedule {
    pub fn value_at(&self, step: usize, total_steps: usize) -> f64 {
        let horizon = (total_steps as f64 * self.decay_fraction).max(1.0);
        let progress = (step as f64 / horizon).min(1.0);
        self.start + (self.end - self.start) * progress
    }
}

/// Agent hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Exploration probability used when the caller does not supply a
    /// schedule value.
    pub epsilon: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            batch_size: 128,
            learning_rate: 1e-4,
            buffer_capacity: 50_000,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be in [0, 1], got {}",
                self.epsilon
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One stored interaction: context, chosen action, negated monetary score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub state: FeatureVector,
    pub action: usize,
    pub reward: f64,
}

/// The bandit: dueling Q-network plus reward replay buffer.
#[derive(Debug, Clone)]
pub struct Agent {
    config: AgentConfig,
    space: ActionSpace,
    head: DuelingHead,
    optimizer: DuelingOptimizer,
    buffer: ReplayBuffer<RewardRecord>,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        config: AgentConfig,
        space: ActionSpace,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let head = DuelingHead::new_seeded(FEATURE_DIM, hidden, space.len(), rng)?;
        let optimizer = DuelingOptimizer::new(&head, config.learning_rate);
        let buffer = ReplayBuffer::new(config.buffer_capacity);
        Ok(Self {
            config,
            space,
            head,
            optimizer,
            buffer,
        })
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn q_values(&self, state: &FeatureVector) -> Vec<f64> {
        self.head.q_values(state).expect("state dim fixed")
    }

    /// Greedy action: argmax of the Q-vector, ties broken by lowest index.
    pub fn greedy_action(&self, state: &FeatureVector) -> usize {
        argmax(&self.q_values(state))
    }

    /// Epsilon-greedy selection: with probability `epsilon` a uniform random
    /// action, otherwise the greedy one. Returns the index and its lower
    /// proportion.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &FeatureVector,
        epsilon: f64,
        rng: &mut R,
    ) -> (usize, f64) {
        let explore: f64 = rng.random();
        let index = if explore < epsilon {
            rng.random_range(0..self.space.len())
        } else {
            self.greedy_action(state)
        };
        (index, self.space.lower(index))
    }

    /// Append one interaction to the reward buffer.
    pub fn record(&mut self, record: RewardRecord) -> Result<()> {
        if record.action >= self.space.len() {
            return Err(Error::InvalidArgument(format!(
                "action index {} out of range for |A| = {}",
                record.action,
                self.space.len()
            )));
        }
        self.buffer.push(record);
        Ok(())
    }

    /// Sample a uniform batch of `min(batch_size, buffer len)` records and
    /// take one update step; returns the summed squared-error loss.
    pub fn update_from_buffer<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        if self.buffer.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot update the agent with an empty reward buffer".into(),
            ));
        }
        let batch = self.buffer.sample_batch(rng, self.config.batch_size);
        self.update_on_batch(&batch)
    }

    /// One Adam step on `L = sum 0.5 (Q(s_t, a_t) - r_t)^2`; the gradient
    /// flows only through each record's chosen action's Q output.
    pub fn update_on_batch(&mut self, batch: &[RewardRecord]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("agent batch must be non-empty".into()));
        }
        let n_actions = self.space.len();
        let mut grads = DuelingGrads::zeros_like(&self.head);
        let mut loss = 0.0;
        let mut q_grad = vec![0.0; n_actions];
        for record in batch {
            if !record.reward.is_finite() {
                return Err(Error::NonFinite {
                    layer: 0,
                    message: format!("reward for action {}", record.action),
                });
            }
            let trace = self.head.forward_trace(&record.state)?;
            let err = trace.q_values()[record.action] - record.reward;
            loss += 0.5 * err * err;
            q_grad.fill(0.0);
            q_grad[record.action] = err;
            self.head.backprop(&trace, &q_grad, &mut grads)?;
        }
        self.head.apply(&mut self.optimizer, &grads)?;
        Ok(loss)
    }

    pub fn fingerprint(&self) -> u64 {
        self.head.fingerprint()
    }

    pub fn head(&self) -> &DuelingHead {
        &self.head
    }

    pub fn buffer(&self) -> &ReplayBuffer<RewardRecord> {
        &self.buffer
    }

    /// Rebuild from checkpointed parts; buffer starts fresh.
    pub fn from_parts(config: AgentConfig, space: ActionSpace, head: DuelingHead) -> Result<Self> {
        config.validate()?;
        if head.n_actions() != space.len() {
            return Err(Error::ShapeMismatch(format!(
                "head has {} actions, space has {}",
                head.n_actions(),
                space.len()
            )));
        }
        let optimizer = DuelingOptimizer::new(&head, config.learning_rate);
        let buffer = ReplayBuffer::new(config.buffer_capacity);
        Ok(Self {
            config,
            space,
            head,
            optimizer,
            buffer,
        })
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn action_space_matches_reference_discretization() {
        let space = ActionSpace::build(0.05, 2).unwrap();
        let expected = [0.0125, 0.025, 0.0375];
        assert_eq!(space.len(), 3);
        for (a, e) in space.actions().iter().zip(&expected) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn single_action_space_is_the_midpoint() {
        let space = ActionSpace::build(0.10, 1).unwrap();
        assert_eq!(space.len(), 1);
        assert!((space.lower(0) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn exponent_three_gives_seven_evenly_spaced_actions() {
        let space = ActionSpace::build(0.05, 3).unwrap();
        assert_eq!(space.len(), 7);
        for w in space.actions().windows(2) {
            assert!((w[1] - w[0] - 0.00625).abs() < 1e-12);
        }
        assert!(space.actions().iter().all(|&a| a > 0.0 && a < 0.05));
    }

    #[test]
    fn zero_exponent_is_rejected() {
        assert!(ActionSpace::build(0.05, 0).is_err());
    }

    fn test_agent(seed: u64) -> Agent {
        let mut rng = StdRng::seed_from_u64(seed);
        let space = ActionSpace::build(0.05, 2).unwrap();
        Agent::new(AgentConfig::default(), space, &[16, 8], &mut rng).unwrap()
    }

    /// Agent whose Q-values are forced through advantage-head biases.
    fn rigged_agent(q: &[f64; 3]) -> Agent {
        let space = ActionSpace::build(0.05, 2).unwrap();
        let mut head = DuelingHead::zeros(FEATURE_DIM, &[4], 3).unwrap();
        // The last 3 parameters are the advantage biases; with a zero trunk
        // the Q-vector equals advantage bias minus its mean.
        let n = head.param_count();
        head.set_param(n - 3, q[0]);
        head.set_param(n - 2, q[1]);
        head.set_param(n - 1, q[2]);
        Agent::from_parts(AgentConfig::default(), space, head).unwrap()
    }

    #[test]
    fn greedy_selection_takes_the_argmax() {
        let agent = rigged_agent(&[1.0, 3.0, 2.0]);
        let mut rng = StdRng::seed_from_u64(0);
        let (idx, lower) = agent.select_action(&[0.0; 4], 0.0, &mut rng);
        assert_eq!(idx, 1);
        assert!((lower - 0.025).abs() < 1e-12);
    }

    #[test]
    fn ties_break_to_the_lowest_index() {
        let agent = rigged_agent(&[2.0, 2.0, 1.0]);
        assert_eq!(agent.greedy_action(&[0.0; 4]), 0);
    }

    #[test]
    fn greedy_is_invariant_to_constant_q_shifts() {
        let a = rigged_agent(&[0.4, -1.0, 0.2]);
        let b = rigged_agent(&[100.4, 99.0, 100.2]);
        for k in 0..10 {
            let s = [k as f64 * 0.1; 4];
            assert_eq!(a.greedy_action(&s), b.greedy_action(&s));
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let agent = test_agent(1);
        let mut rng = StdRng::seed_from_u64(7);
        let mut counts = [0usize; 3];
        let draws = 100_000;
        for _ in 0..draws {
            let (idx, _) = agent.select_action(&[0.0; 4], 1.0, &mut rng);
            counts[idx] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 1.0 / 3.0).abs() < 0.01, "frequency {freq}");
        }
    }

    #[test]
    fn repeated_greedy_selection_is_consistent() {
        let agent = test_agent(3);
        let state = [0.3, -0.7, 0.5, 0.0];
        let first = agent.greedy_action(&state);
        for _ in 0..10 {
            assert_eq!(agent.greedy_action(&state), first);
        }
    }

    #[test]
    fn exact_q_fit_is_a_fixed_point() {
        // With a zero trunk all Q-values are zero; rewards of zero give zero
        // gradient, so parameters stay put.
        let space = ActionSpace::build(0.05, 2).unwrap();
        let head = DuelingHead::zeros(FEATURE_DIM, &[8], 3).unwrap();
        let mut agent = Agent::from_parts(AgentConfig::default(), space, head).unwrap();
        let before = agent.fingerprint();
        let batch = [RewardRecord { state: [0.5; 4], action: 1, reward: 0.0 }];
        let loss = agent.update_on_batch(&batch).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(agent.fingerprint(), before);
    }

    #[test]
    fn non_finite_reward_is_rejected() {
        let mut agent = test_agent(5);
        let batch = [RewardRecord { state: [0.0; 4], action: 0, reward: f64::NAN }];
        assert!(matches!(
            agent.update_on_batch(&batch),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn update_gradient_matches_finite_differences() {
        let mut agent = test_agent(9);
        let record = RewardRecord { state: [0.4, -0.2, 1.0, 0.3], action: 2, reward: 1.5 };

        // Analytic gradient via the same path update_on_batch uses.
        let trace = agent.head.forward_trace(&record.state).unwrap();
        let mut grads = DuelingGrads::zeros_like(&agent.head);
        let mut q_grad = vec![0.0; 3];
        q_grad[record.action] = trace.q_values()[record.action] - record.reward;
        agent.head.backprop(&trace, &q_grad, &mut grads).unwrap();

        let loss = |head: &DuelingHead| {
            let q = head.q_values(&record.state).unwrap();
            0.5 * (q[record.action] - record.reward).powi(2)
        };
        let h = 1e-5;
        let n = agent.head.param_count();
        for probe in 0..100 {
            let idx = (probe * 509 + 3) % n;
            let orig = agent.head.get_param(idx);
            agent.head.set_param(idx, orig + h);
            let up = loss(&agent.head);
            agent.head.set_param(idx, orig - h);
            let down = loss(&agent.head);
            agent.head.set_param(idx, orig);
            let fd = (up - down) / (2.0 * h);
            let an = agent.head.grad_at(&grads, idx);
            let denom = fd.abs().max(an.abs()).max(1e-7);
            assert!((fd - an).abs() / denom < 1e-4, "param {idx}: {an} vs {fd}");
        }
    }

    #[test]
    fn bandit_identifies_the_best_arm() {
        // Constant state, fixed per-action rewards (0, 5, 1): after enough
        // updates the greedy policy picks action 1.
        let mut rng = StdRng::seed_from_u64(12);
        let space = ActionSpace::build(0.05, 2).unwrap();
        let config = AgentConfig {
            batch_size: 32,
            learning_rate: 1e-3,
            ..AgentConfig::default()
        };
        let mut agent = Agent::new(config, space, &[32, 16], &mut rng).unwrap();
        let state = [0.1, 0.2, 0.3, 0.4];
        let rewards = [0.0, 5.0, 1.0];
        for _ in 0..3000 {
            let (action, _) = agent.select_action(&state, 0.3, &mut rng);
            agent
                .record(RewardRecord { state, action, reward: rewards[action] })
                .unwrap();
            agent.update_from_buffer(&mut rng).unwrap();
        }
        assert_eq!(agent.greedy_action(&state), 1);
        // Q-estimates should rank like the rewards.
        let q = agent.q_values(&state);
        assert!(q[1] > q[0] && q[1] > q[2]);
    }

    #[test]
    fn reward_buffer_is_fifo() {
        let space = ActionSpace::build(0.05, 1).unwrap();
        let config = AgentConfig { buffer_capacity: 5, ..AgentConfig::default() };
        let mut rng = StdRng::seed_from_u64(2);
        let mut agent = Agent::new(config, space, &[4], &mut rng).unwrap();
        for k in 0..8 {
            agent
                .record(RewardRecord { state: [k as f64; 4], action: 0, reward: k as f64 })
                .unwrap();
        }
        let rewards: Vec<f64> = agent.buffer().iter().map(|r| r.reward).collect();
        assert_eq!(rewards, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn epsilon_schedule_decays_linearly_then_holds() {
        let sched = EpsilonSchedule::default();
        let total = 1000;
        assert!((sched.value_at(0, total) - 1.0).abs() < 1e-12);
        assert!((sched.value_at(250, total) - 0.525).abs() < 1e-12);
        assert!((sched.value_at(500, total) - 0.05).abs() < 1e-12);
        assert!((sched.value_at(900, total) - 0.05).abs() < 1e-12);
    }
}

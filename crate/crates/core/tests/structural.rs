//! With a single action (n = 1), the proposed method's only proportion is
//! beta/2 — exactly the central PI pair. Given identical training streams
//! and seeds, its quantile models must coincide with a central bank trained
//! on the same samples, and so must the resulting forecasts.

use rand::rngs::StdRng;
use rand::SeedableRng;

use vopi::agent::{ActionSpace, Agent, AgentConfig, EpsilonSchedule};
use vopi::baselines::{central_pair, central_pi_forecast};
use vopi::data::{generate_synthetic, SyntheticSpec};
use vopi::dispatch::{monetary_score, VppConfig};
use vopi::qr::QrBank;

#[test]
fn single_action_run_coincides_with_central_pi() {
    let beta = 0.10;
    let spec = SyntheticSpec { n: 250, seed: 42, ..SyntheticSpec::default() };
    let (train, test) = generate_synthetic(&spec).unwrap().split(0.8).unwrap();
    let vpp = VppConfig::default();

    let space = ActionSpace::build(beta, 1).unwrap();
    assert_eq!(space.len(), 1);
    assert_eq!(space.lower(0), central_pair(beta).unwrap().lower);

    // Identical init and batch streams for both banks; the agent draws from
    // its own streams so its presence cannot perturb the quantile models.
    let hidden = [16usize];
    let (buffer_capacity, batch, lr) = (10_000usize, 32usize, 1e-3);
    let mut init_a = StdRng::seed_from_u64(7);
    let mut init_b = StdRng::seed_from_u64(7);
    let mut bank_proposed =
        QrBank::new(beta, space.actions(), &hidden, buffer_capacity, lr, &mut init_a).unwrap();
    let mut bank_central = QrBank::new(
        beta,
        &[central_pair(beta).unwrap().lower],
        &hidden,
        buffer_capacity,
        lr,
        &mut init_b,
    )
    .unwrap();

    let config = AgentConfig { batch_size: batch, learning_rate: 1e-3, ..AgentConfig::default() };
    let mut agent_rng = StdRng::seed_from_u64(100);
    let mut agent = Agent::new(config, space.clone(), &[16, 8], &mut agent_rng).unwrap();

    let mut qr_rng_a = StdRng::seed_from_u64(55);
    let mut qr_rng_b = StdRng::seed_from_u64(55);
    let mut eps_rng = StdRng::seed_from_u64(77);
    let mut agent_batch_rng = StdRng::seed_from_u64(88);
    let schedule = EpsilonSchedule::default();

    let pair = space.pair(0).unwrap();
    for (step, sample) in train.samples.iter().enumerate() {
        let epsilon = schedule.value_at(step, train.len());
        // Forced to the only action either way; keeps the full loop running.
        let (action, _) = agent.select_action(&sample.features, epsilon, &mut eps_rng);
        assert_eq!(action, 0);

        let interval = bank_proposed
            .predict_interval(&pair, &sample.features, train.capacity)
            .unwrap();
        bank_proposed
            .update_selected(&pair, sample.features, sample.power, batch, &mut qr_rng_a)
            .unwrap();
        bank_central
            .update_selected(&pair, sample.features, sample.power, batch, &mut qr_rng_b)
            .unwrap();

        let ms = monetary_score(&vpp, &interval, sample.load, sample.power).unwrap();
        agent
            .record(vopi::agent::RewardRecord {
                state: sample.features,
                action,
                reward: -ms.score,
            })
            .unwrap();
        agent.update_from_buffer(&mut agent_batch_rng).unwrap();
    }

    assert_eq!(bank_proposed.fingerprints(), bank_central.fingerprints());
    for sample in &test.samples {
        let proposed = bank_proposed
            .predict_interval(&pair, &sample.features, test.capacity)
            .unwrap();
        let central =
            central_pi_forecast(&bank_central, &sample.features, beta, test.capacity).unwrap();
        assert_eq!((proposed.lower, proposed.upper), (central.lower, central.upper));
    }
}

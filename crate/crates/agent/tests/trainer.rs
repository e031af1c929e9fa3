mod common;

use cgrl_agent::trainer::OptimizerKind;
use cgrl_agent::{select_action, td_target, D3qn, PolicyConfig, ReplayBuffer, TrainerConfig, Transition};
use cgrl_core::gradcheck::{check_gradient, finite_difference};
use common::random_obs;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_policy() -> PolicyConfig {
    PolicyConfig { hidden_dim: 8, gat_heads: 2, fc_dim: 8, ..Default::default() }
}

fn transition(rng: &mut ChaCha8Rng, terminal: bool) -> Transition {
    Transition {
        state: random_obs(5, rng.random_range(1..=5), rng),
        state_weights: None,
        action: rng.random_range(0..3),
        reward: rng.random_range(-2.0..2.0),
        next_state: random_obs(5, rng.random_range(1..=5), rng),
        next_weights: None,
        terminal,
    }
}

#[test]
fn greedy_selection_and_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(select_action(&[0.1, 0.9, 0.3], 0.0, &mut rng), 1);
    assert_eq!(select_action(&[0.5, 0.5, 0.1], 0.0, &mut rng), 0);
}

#[test]
fn uniform_exploration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts = [0usize; 3];
    for _ in 0..30000 {
        counts[select_action(&[0.0, 5.0, 1.0], 1.0, &mut rng)] += 1;
    }
    for c in counts {
        assert!((c as f64 / 30000.0 - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
    }
}

#[test]
fn target_examples() {
    let (online, target) = ([0.2, 0.7, 0.1], [0.5, 0.3, 0.9]);
    let double = td_target(1.0, false, 0.95, &online, &target, true);
    let vanilla = td_target(1.0, false, 0.95, &online, &target, false);
    assert_eq!(double, 1.0 + 0.95 * 0.3);
    assert_eq!(vanilla, 1.0 + 0.95 * 0.9);
    assert!((double - 1.285).abs() < 1e-15 && (vanilla - 1.855).abs() < 1e-15);
    assert_eq!(td_target(-2.0, true, 0.95, &online, &target, true), -2.0);
    assert_eq!(td_target(0.7, false, 0.0, &online, &target, false), 0.7);
}

#[test]
fn replay_is_fifo_and_samples_without_replacement() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut buf = ReplayBuffer::new(5);
    assert!(buf.sample(1, &mut rng).is_none());
    for i in 0..8 {
        let mut t = transition(&mut rng, false);
        t.reward = i as f64;
        buf.push(t);
        assert!(buf.len() <= 5);
    }
    let kept: Vec<f64> = buf.iter().map(|t| t.reward).collect();
    assert_eq!(kept, vec![3.0, 4.0, 5.0, 6.0, 7.0]);
    assert!(buf.sample(6, &mut rng).is_none());
    for _ in 0..50 {
        let mut s: Vec<f64> = buf.sample(5, &mut rng).unwrap().iter().map(|t| t.reward).collect();
        s.sort_by(f64::total_cmp);
        assert_eq!(s, kept);
    }
}

#[test]
fn loss_examples_and_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let agent = D3qn::new(small_policy(), TrainerConfig::default(), &mut rng).unwrap();
    let ts: Vec<_> = (0..2).map(|_| transition(&mut rng, false)).collect();
    let batch: Vec<_> = ts.iter().collect();
    let q: Vec<f64> = ts.iter().map(|t| agent.q_values(&t.state, None).unwrap()[t.action]).collect();
    assert_eq!(agent.loss_and_grad(&agent.online, &batch, &q).unwrap().0, 0.0);
    let shifted = [q[0] + 1.0, q[1] - 1.0];
    let (loss, grads, _) = agent.loss_and_grad(&agent.online, &batch, &shifted).unwrap();
    assert!((loss - 1.0).abs() < 1e-12);
    for (name, value) in agent.online.iter() {
        let fd = finite_difference(std::slice::from_ref(value), 0, 1e-6, |v| {
            let mut p = agent.online.clone();
            *p.get_mut(name).unwrap() = v[0].clone();
            agent.loss_and_grad(&p, &batch, &shifted).unwrap().0
        });
        let g = grads.get(name).unwrap();
        let err = check_gradient(g, &fd);
        let abs = g.sub(&fd).unwrap().max_abs();
        // Near-zero gradients are compared absolutely.
        assert!(err < 1e-5 || abs < 1e-8, "{name}: rel {err} abs {abs}");
    }
}

#[test]
fn double_and_vanilla_paths_differ() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut agent = D3qn::new(small_policy(), TrainerConfig::default(), &mut rng).unwrap();
    // Decouple the two networks so their argmaxes can disagree.
    agent.target = cgrl_agent::init_params(&agent.policy, &mut rng).unwrap();
    let ts: Vec<_> = (0..40).map(|_| transition(&mut rng, false)).collect();
    let batch: Vec<_> = ts.iter().collect();
    let double = agent.targets(&batch).unwrap();
    agent.policy.arch_flags.use_double = false;
    let vanilla = agent.targets(&batch).unwrap();
    assert!(double.iter().zip(&vanilla).all(|(d, v)| d <= v));
    assert!(double.iter().zip(&vanilla).any(|(d, v)| d < v));
}

#[test]
fn hard_copy_every_5000_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut agent = D3qn::new(small_policy(), TrainerConfig { lr: 1e-3, batch_size: 2, ..Default::default() }, &mut rng).unwrap();
    let initial = agent.online.clone();
    let ts: Vec<_> = (0..4).map(|_| transition(&mut rng, false)).collect();
    let batch: Vec<_> = ts.iter().take(2).collect();
    for _ in 0..4999 {
        agent.train_on(&batch).unwrap();
    }
    assert_eq!(agent.target, initial);
    assert_ne!(agent.online, initial);
    agent.train_on(&batch).unwrap();
    assert_eq!(agent.steps, 5000);
    assert_eq!(agent.target, agent.online);
}

#[test]
fn zero_learning_rate_is_a_no_op() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut agent = D3qn::new(small_policy(), TrainerConfig { lr: 0.0, batch_size: 2, ..Default::default() }, &mut rng).unwrap();
    let before = agent.online.clone();
    let ts: Vec<_> = (0..2).map(|_| transition(&mut rng, false)).collect();
    agent.train_on(&ts.iter().collect::<Vec<_>>()).unwrap();
    assert_eq!(agent.online, before);
}

#[test]
fn single_transition_overfit() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = TrainerConfig { lr: 1e-2, batch_size: 1, ..Default::default() };
    let mut agent = D3qn::new(small_policy(), cfg, &mut rng).unwrap();
    let t = transition(&mut rng, true);
    for _ in 0..500 {
        agent.train_on(&[&t]).unwrap();
    }
    let residual = agent.q_values(&t.state, None).unwrap()[t.action] - t.reward;
    assert!(residual.abs() < 1e-3, "{residual}");
}

#[test]
fn sampling_below_batch_signals_skip() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut agent = D3qn::new(small_policy(), TrainerConfig { batch_size: 4, ..Default::default() }, &mut rng).unwrap();
    let mut buf = ReplayBuffer::new(10);
    buf.push(transition(&mut rng, false));
    assert!(agent.train_step(&buf, &mut rng).unwrap().is_none());
    assert_eq!(agent.steps, 0);
}

#[test]
fn training_is_reproducible_and_bounded() {
    let run = |opt| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = TrainerConfig { lr: 1e-3, batch_size: 8, target_update: 20, optimizer: opt, ..Default::default() };
        let mut agent = D3qn::new(small_policy(), cfg, &mut rng).unwrap();
        let mut buf = ReplayBuffer::new(100);
        let mut losses = Vec::new();
        for _ in 0..60 {
            let terminal = rng.random_bool(0.2);
            buf.push(transition(&mut rng, terminal));
            if let Some(r) = agent.train_step(&buf, &mut rng).unwrap() {
                assert!(r.max_abs_q <= 45.0);
                losses.push(r.loss);
            }
        }
        losses
    };
    for opt in [OptimizerKind::Sgd, OptimizerKind::Adam] {
        let a = run(opt);
        assert_eq!(a.len(), 53);
        assert_eq!(a, run(opt));
    }
}

#[test]
fn config_validation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for bad in [
        TrainerConfig { gamma: 1.0, ..Default::default() },
        TrainerConfig { epsilon: 1.5, ..Default::default() },
        TrainerConfig { batch_size: 0, ..Default::default() },
        TrainerConfig { lr: -1.0, ..Default::default() },
    ] {
        assert!(D3qn::new(small_policy(), bad, &mut rng).is_err());
    }
}

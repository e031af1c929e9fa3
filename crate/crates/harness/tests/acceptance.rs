//! Acceptance suite. Each criterion prints one line; the process exits
//! nonzero if any of them fails. Criteria run one after another so their
//! wall-clock limits are measured without contention.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use cgrl_agent::graph_ops::dueling;
use cgrl_agent::policy::{gatv2_layer, gcn2_layer};
use cgrl_agent::vgae::{init_vgae, one_hot, sample_noise};
use cgrl_agent::{
    cdrl_loss, elbo_loss, encode, gcn2_beta, init_params, observe, q_values, td_target, ArchFlags, CausalModel,
    CdrlConfig, D3qn, GraphBatch, GraphObservation, PolicyConfig, ReplayBuffer, TrainerConfig, Transition, FEATURES,
};
use cgrl_core::gradcheck::{check_gradient, finite_difference};
use cgrl_core::{conditional_mi, mutual_information, renyi_entropy, Params64, Tape64, Tensor64};
use cgrl_harness::{
    read_episode_csv, run_eval, run_random, run_training, Checkpoint, ExperimentConfig, MetricsReport, ModelId,
};
use cgrl_sim::{build_scenario, idm_acceleration, integrate, Action, IdmParams, Leader, ScenarioConfig, Task, VEHICLE_LENGTH};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// Pinned tolerances.
const RENYI_TOL: f64 = 1e-9;
const MI_INDEPENDENT_MAX: f64 = 0.1;
const MI_SELF_MIN: f64 = 0.5;
const CMI_CONSTANT_TOL: f64 = 1e-6;
const FD_TOL: f64 = 1e-4;
const FD_EIGEN_TOL: f64 = 1e-3;
const FD_STEP: f64 = 1e-6;
const FD_INSTANCES: usize = 20;
const IDM_TOL: f64 = 1e-12;
const AUC_MIN: f64 = 0.8;
const ELBO_SMOKE_LR: f64 = 5e-3;
const ELBO_EVAL_DRAWS: usize = 8;
const EQUIVARIANCE_TOL: f64 = 1e-9;
const REWARD_GAIN: f64 = 1.5;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rand_tensor(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Tensor64 {
    Tensor64::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn normals(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor64 {
    Tensor64::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Observation from a real scenario after a few random actions.
fn sim_obs(rng: &mut ChaCha8Rng, humans: usize, capacity: usize) -> GraphObservation {
    let cfg = ScenarioConfig { n_human_vehicles: humans, ..Default::default() };
    loop {
        let Ok(mut w) = build_scenario(&cfg, rng.random()) else { continue };
        for _ in 0..rng.random_range(0..4) {
            if w.is_terminal() {
                break;
            }
            w.step(Action::from_index(rng.random_range(0..3)).unwrap()).unwrap();
        }
        if !w.is_terminal() {
            return observe(&w, capacity).unwrap();
        }
    }
}

/// Random graph with `present` of `capacity` nodes filled.
fn random_obs(capacity: usize, present: usize, rng: &mut ChaCha8Rng) -> GraphObservation {
    let mut f = Tensor64::zeros([capacity, FEATURES]);
    for i in 0..present {
        f.set(i, 0, 1.0);
        for k in 1..FEATURES {
            f.set(i, k, rng.random_range(-1.0..1.0));
        }
    }
    let mut a = Tensor64::zeros([capacity, capacity]);
    for i in 0..present {
        for j in (i + 1)..present {
            if rng.random_bool(0.5) {
                a.set(i, j, 1.0);
                a.set(j, i, 1.0);
            }
        }
    }
    GraphObservation { features: f, adjacency: a, n_present: present }
}

fn batch_of(obs: &[GraphObservation]) -> GraphBatch {
    GraphBatch::build(&obs.iter().map(|o| (o, None)).collect::<Vec<_>>()).unwrap()
}

/// Largest relative error of analytic against numerical gradients over
/// every parameter of `loss`.
fn worst_fd_error(params: &Params64, loss: &dyn Fn(&Params64) -> (f64, Params64)) -> f64 {
    let (_, grads) = loss(params);
    let mut worst: f64 = 0.0;
    for (name, value) in params.iter() {
        let fd = finite_difference(std::slice::from_ref(value), 0, FD_STEP, |v| {
            let mut p = params.clone();
            *p.get_mut(name).unwrap() = v[0].clone();
            loss(&p).0
        });
        worst = worst.max(check_gradient(grads.get(name).unwrap(), &fd));
    }
    worst
}

fn criterion_1() -> Verdict {
    let mut worst: f64 = 0.0;
    for b in [2usize, 8, 64] {
        let scaled = Tensor64::eye(b).scale(1.0 / b as f64);
        let rank1 = Tensor64::full([b, b], 1.0 / b as f64);
        for alpha in [0.5, 2.0, 4.0] {
            worst = worst.max((renyi_entropy(&scaled, alpha).unwrap() - (b as f64).log2()).abs());
            worst = worst.max(renyi_entropy(&rank1, alpha).unwrap().abs());
        }
    }
    check(worst < RENYI_TOL, format!("max deviation {worst:.2e} (tol {RENYI_TOL:.0e})"))
}

fn criterion_2() -> Verdict {
    let (mut indep, mut selfmi) = (0.0, f64::INFINITY);
    let mut mean_self = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = normals(256, 4, &mut rng);
        let v = normals(256, 4, &mut rng);
        indep += mutual_information(&u, &v, 2.0).unwrap().abs() / 20.0;
        let s = mutual_information(&u, &u, 2.0).unwrap();
        selfmi = f64::min(selfmi, s);
        mean_self += s / 20.0;
    }
    check(
        indep < MI_INDEPENDENT_MAX && selfmi > MI_SELF_MIN,
        format!(
            "mean |I(u;v)| {indep:.4} (< {MI_INDEPENDENT_MAX}); I(u;u) min {selfmi:.4}, mean {mean_self:.4} (> {MI_SELF_MIN})"
        ),
    )
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = CdrlConfig::default();
    let params = init_vgae(&cfg, &mut rng).unwrap();
    let mut worst: f64 = 0.0;
    for trial in 0..10 {
        let obs: Vec<_> = (0..16).map(|_| sim_obs(&mut rng, 5, 6)).collect();
        let batch = batch_of(&obs);
        let noise = sample_noise(batch.rows(), cfg.latent_dim, &mut rng);
        let tape = Tape64::new();
        let bound = tape.bind_frozen(&params);
        let t = cdrl_loss(&bound, &batch, &one_hot(&[trial % 3; 16], 3), Some(&noise), &cfg).unwrap();
        worst = worst.max(t.cmi.abs());
        // The estimator itself, on unrelated data with a constant label.
        let a = one_hot(&[1; 16], 3);
        let x = normals(16, 4, &mut rng);
        let z = normals(16, 4, &mut rng);
        worst = worst.max(conditional_mi(&x, &a, &z, 2.0).unwrap().abs());
    }
    check(worst < CMI_CONSTANT_TOL, format!("max |I(Zc;A*|Zs)| {worst:.2e} (tol {CMI_CONSTANT_TOL:.0e})"))
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut lines = Vec::new();
    let mut ok = true;
    let mut record = |name: &str, errs: Vec<f64>, tol: f64| {
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        ok &= errs.len() >= FD_INSTANCES && worst < tol;
        lines.push(format!("{name} {}x max {worst:.1e}", errs.len()));
    };

    let errs = (0..FD_INSTANCES)
        .map(|_| {
            let n = rng.random_range(2..7);
            let batch = batch_of(&[random_obs(n, rng.random_range(1..=n), &mut rng), random_obs(n, n, &mut rng)]);
            let d = 5;
            let beta = gcn2_beta(1.0, rng.random_range(1..4));
            let mut p = Params64::new();
            p.insert("x", rand_tensor(2 * n, d, &mut rng));
            p.insert("x0", rand_tensor(2 * n, d, &mut rng));
            p.insert("w", rand_tensor(d, d, &mut rng));
            let probe = rand_tensor(2 * n, d, &mut rng);
            worst_fd_error(&p, &|p| {
                let tape = Tape64::new();
                let b = tape.bind(p);
                let out = gcn2_layer(b.get("x").unwrap(), b.get("x0").unwrap(), b.get("w").unwrap(), &batch, 0.1, beta).unwrap();
                let l = out.mul(tape.constant(probe.clone())).unwrap().sum();
                (l.item().unwrap(), tape.grad(l, &b).unwrap())
            })
        })
        .collect();
    record("GCNII", errs, FD_TOL);

    let errs = (0..FD_INSTANCES)
        .map(|_| {
            // One complete graph of three or more nodes. With a single
            // neighbour and every LeakyReLU input on one side of the kink,
            // the left projection cancels in the softmax and its true
            // gradient is exactly zero, which leaves only FD noise to compare.
            let n = rng.random_range(3..6);
            let mut full = random_obs(n, n, &mut rng);
            full.adjacency = Tensor64::from_fn(n, n, |i, j| (i != j) as u8 as f64);
            let batch = batch_of(&[random_obs(n, rng.random_range(1..=n), &mut rng), full]);
            let (input, heads, d) = (4, 2, 3);
            let mut p = Params64::new();
            p.insert("x", rand_tensor(2 * n, input, &mut rng));
            p.insert("g.wl", rand_tensor(input, heads * d, &mut rng));
            p.insert("g.wr", rand_tensor(input, heads * d, &mut rng));
            p.insert("g.att", rand_tensor(1, heads * d, &mut rng));
            let probe = rand_tensor(2 * n, heads * d, &mut rng);
            worst_fd_error(&p, &|p| {
                let tape = Tape64::new();
                let b = tape.bind(p);
                let (out, _) = gatv2_layer(b.get("x").unwrap(), &b, "g", &batch, heads, 0.2).unwrap();
                let l = out.mul(tape.constant(probe.clone())).unwrap().sum();
                (l.item().unwrap(), tape.grad(l, &b).unwrap())
            })
        })
        .collect();
    record("GATv2", errs, FD_TOL);

    let errs = (0..FD_INSTANCES)
        .map(|_| {
            let b = rng.random_range(1..5);
            let mut p = Params64::new();
            p.insert("v", rand_tensor(b, 1, &mut rng));
            p.insert("adv", rand_tensor(b, 3, &mut rng));
            let probe = rand_tensor(b, 3, &mut rng);
            worst_fd_error(&p, &|p| {
                let tape = Tape64::new();
                let bd = tape.bind(p);
                let q = dueling(bd.get("v").unwrap(), bd.get("adv").unwrap()).unwrap();
                let l = q.mul(tape.constant(probe.clone())).unwrap().sum();
                (l.item().unwrap(), tape.grad(l, &bd).unwrap())
            })
        })
        .collect();
    record("dueling", errs, FD_TOL);

    let small = CdrlConfig { hidden_dim: 6, latent_dim: 4, ..Default::default() };
    let errs = (0..FD_INSTANCES)
        .map(|_| {
            let obs: Vec<_> = (0..3).map(|_| sim_obs(&mut rng, 4, 5)).collect();
            let batch = batch_of(&obs);
            let p = init_vgae(&small, &mut rng).unwrap();
            let noise = sample_noise(batch.rows(), small.latent_dim, &mut rng);
            worst_fd_error(&p, &|p| {
                let tape = Tape64::new();
                let b = tape.bind(p);
                let l = elbo_loss(&encode(&b, &batch, Some(&noise)).unwrap(), &batch).unwrap().loss;
                (l.item().unwrap(), tape.grad(l, &b).unwrap())
            })
        })
        .collect();
    record("ELBO", errs, FD_TOL);

    let errs = (0..FD_INSTANCES)
        .map(|_| {
            // Enough graphs that the median kernel width is a genuine
            // function of the latents.
            let graphs = rng.random_range(5..9);
            let obs: Vec<_> = (0..graphs).map(|_| sim_obs(&mut rng, 4, 5)).collect();
            let batch = batch_of(&obs);
            let actions: Vec<usize> = (0..graphs).map(|_| rng.random_range(0..3)).collect();
            let actions = one_hot(&actions, 3);
            let p = init_vgae(&small, &mut rng).unwrap();
            let noise = sample_noise(batch.rows(), small.latent_dim, &mut rng);
            worst_fd_error(&p, &|p| {
                let tape = Tape64::new();
                let b = tape.bind(p);
                let l = cdrl_loss(&b, &batch, &actions, Some(&noise), &small).unwrap().loss;
                (l.item().unwrap(), tape.grad(l, &b).unwrap())
            })
        })
        .collect();
    record("cdrl_loss", errs, FD_EIGEN_TOL);

    check(ok, lines.join(", "))
}

fn criterion_5() -> Verdict {
    let q_online = [0.2, 0.7, 0.1];
    let q_target = [0.5, 0.3, 0.9];
    let double = td_target(1.0, false, 0.95, &q_online, &q_target, true);
    let vanilla = td_target(1.0, false, 0.95, &q_online, &q_target, false);
    let targets_ok = double == 1.0 + 0.95 * 0.3 && vanilla == 1.0 + 0.95 * 0.9 && (double - 1.285).abs() < 1e-15
        && (vanilla - 1.855).abs() < 1e-15;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tape = Tape64::new();
    let mut dueling_ok = true;
    for _ in 0..1000 {
        let b = rng.random_range(1..5);
        let v = rand_tensor(b, 1, &mut rng);
        let c = rng.random_range(-10.0..10.0);
        let q = dueling(tape.constant(v.clone()), tape.constant(Tensor64::full([b, 3], c))).unwrap().value();
        dueling_ok &= (0..b).all(|i| q.row(i).iter().all(|&x| x == v.get(i, 0)));
    }

    // Full-scale trainer defaults on a small network so 5000 updates are quick.
    let trainer = TrainerConfig::default();
    let policy = PolicyConfig { hidden_dim: 8, gat_heads: 2, fc_dim: 8, ..Default::default() };
    let mut agent = D3qn::new(policy, trainer.clone(), &mut rng).unwrap();
    let mut buffer = ReplayBuffer::new(256);
    for _ in 0..256 {
        let state = random_obs(4, rng.random_range(1..=4), &mut rng);
        let next_state = random_obs(4, rng.random_range(1..=4), &mut rng);
        let terminal = rng.random_bool(0.2);
        buffer.push(Transition {
            state,
            state_weights: None,
            action: rng.random_range(0..3),
            reward: rng.random_range(-2.0..2.0),
            next_state,
            next_weights: None,
            terminal,
        });
    }
    let initial_target = agent.target.clone();
    let mut untouched = true;
    while agent.steps < trainer.target_update - 1 {
        agent.train_step(&buffer, &mut rng).unwrap();
        untouched &= agent.target == initial_target;
    }
    let differs_before = agent.online != agent.target;
    agent.train_step(&buffer, &mut rng).unwrap();
    let copy_ok = untouched && differs_before && agent.steps == 5000 && agent.online == agent.target;

    check(
        targets_ok && dueling_ok && copy_ok,
        format!(
            "double {double} vanilla {vanilla} ({}), constant advantage {}, hard copy at step {} {}",
            if targets_ok { "exact" } else { "MISMATCH" },
            if dueling_ok { "bitwise" } else { "MISMATCH" },
            agent.steps,
            if copy_ok { "bitwise" } else { "MISMATCH" }
        ),
    )
}

fn criterion_6() -> Verdict {
    let p = IdmParams::default();
    let at_rest = idm_acceleration(0.0, None, &p).unwrap();
    let at_v0 = idm_acceleration(p.v0, None, &p).unwrap();
    let dt = 1.0 / 15.0;
    let mut smallest = f64::INFINITY;
    for gap in [5.0, 10.0, 20.0, 40.0] {
        for leader_speed in [0.0, 4.0, 8.0] {
            for follower_speed in [0.0, 4.0, 8.0] {
                let (mut xl, mut xf, mut vf) = (gap + VEHICLE_LENGTH, 0.0, follower_speed);
                for _ in 0..(60 * 15) {
                    let g = xl - xf - VEHICLE_LENGTH;
                    let a = idm_acceleration(vf, Some(Leader { gap: g, speed: leader_speed }), &p).unwrap();
                    (xf, vf) = integrate(xf, vf, a, dt);
                    xl += leader_speed * dt;
                    smallest = smallest.min(xl - xf - VEHICLE_LENGTH);
                }
            }
        }
    }
    check(
        (at_rest - 6.0).abs() < IDM_TOL && at_v0.abs() < IDM_TOL && smallest > 0.0,
        format!("a(0) {at_rest}, a(v0) {at_v0:.1e}, smallest bumper gap over 60 s {smallest:.3} m"),
    )
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let graphs: Vec<_> = (0..8).map(|_| sim_obs(&mut rng, 15, 16)).collect();
    let batch = batch_of(&graphs);
    let cfg = CdrlConfig { lr: ELBO_SMOKE_LR, ..Default::default() };
    let mut model = CausalModel::new(cfg.clone(), &mut rng).unwrap();
    // The negative ELBO after each step, estimated on the same noise draws
    // every time so the curve reflects the parameters, not the sampling.
    let draws: Vec<_> = (0..ELBO_EVAL_DRAWS).map(|_| sample_noise(batch.rows(), cfg.latent_dim, &mut rng)).collect();
    let neg_elbo = |m: &CausalModel| {
        let tape = Tape64::new();
        let b = tape.bind_frozen(&m.params);
        let total: f64 = draws
            .iter()
            .map(|n| elbo_loss(&encode(&b, &batch, Some(n)).unwrap(), &batch).unwrap().loss.item().unwrap())
            .sum();
        total / draws.len() as f64
    };
    let start = neg_elbo(&model);
    let losses: Vec<f64> = (0..200)
        .map(|_| {
            model.elbo_step(&batch, &mut rng).unwrap();
            neg_elbo(&model)
        })
        .collect();
    let blocks: Vec<f64> = losses.chunks(20).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let monotone = blocks.windows(2).all(|w| w[1] < w[0]);
    let refs: Vec<_> = graphs.iter().collect();
    let auc = model.edge_auc(&refs).unwrap();
    let shown: Vec<String> = blocks.iter().map(|b| format!("{b:.3}")).collect();
    check(
        monotone && auc > AUC_MIN,
        format!("-ELBO {start:.3} then 20-step means [{}], edge AUC {auc:.3} (> {AUC_MIN})", shown.join(" ")),
    )
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn criterion_8() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut cgrl = Vec::new();
    for model in ModelId::ALL {
        let cfg = ExperimentConfig::desk(model);
        let mut improved = 0;
        for &seed in &cfg.seeds {
            let run = run_training(&cfg, seed, None).unwrap();
            let r: Vec<f64> = run.logs.iter().map(|l| l.reward).collect();
            let third = r.len() / 3;
            let (first, last) = (mean(&r[..third]), mean(&r[r.len() - third..]));
            improved += (last > first) as usize;
            ok &= last > first;
            if model == ModelId::Cgrl {
                cgrl.push(run.checkpoint);
            }
        }
        parts.push(format!("{model} {improved}/{}", cfg.seeds.len()));
    }
    let cfg = ExperimentConfig::desk(ModelId::Cgrl);
    let n = cfg.eval_episodes;
    let eval_seed = 1_000;
    let random = run_random(&cfg, Task::Straight, n, eval_seed).unwrap().report;
    let greedy: Vec<MetricsReport> =
        cgrl.iter().map(|ck| run_eval(ck, Task::Straight, n, eval_seed, false).unwrap().report).collect();
    let cr = mean(&greedy.iter().map(|r| r.collision_rate).collect::<Vec<_>>());
    let ar = mean(&greedy.iter().map(|r| r.average_reward).collect::<Vec<_>>());
    let per_seed: Vec<String> =
        greedy.iter().map(|r| format!("{:.1}%/{:.2}", r.collision_rate, r.average_reward)).collect();
    ok &= cr < random.collision_rate && ar >= REWARD_GAIN * random.average_reward;
    check(
        ok,
        format!(
            "last third beats first third: {}; greedy CGRL C.R./A.R. mean {cr:.1}%/{ar:.2} (seeds {}) vs random {:.1}%/{:.2}",
            parts.join(", "),
            per_seed.join(" "),
            random.collision_rate,
            random.average_reward
        ),
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn criterion_9() -> Verdict {
    let mut cfg = ExperimentConfig::desk(ModelId::Cgrl);
    cfg.trainer.episodes = 40;
    cfg.schedule.cdrl_warmup_episodes = 10;
    cfg.schedule.checkpoint_every = 20;
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_training(&cfg, 11, Some(&a)).unwrap();
    run_training(&cfg, 11, Some(&b)).unwrap();
    let files = dir_bytes(&a);
    let identical = files == dir_bytes(&b);

    let ck_path = a.join("checkpoint-00040.bin");
    let ck_bytes = std::fs::read(&ck_path).unwrap();
    let ck = Checkpoint::load(&ck_path).unwrap();
    let has_vgae = ck.params.names().any(|n| n.starts_with("vgae/"));
    let e1 = run_eval(&ck, Task::Left, 50, 3, false).unwrap();
    let e2 = run_eval(&Checkpoint::load(&ck_path).unwrap(), Task::Left, 50, 3, false).unwrap();
    let untouched = std::fs::read(&ck_path).unwrap() == ck_bytes;
    let csv = tmp.path().join("eval.csv");
    cgrl_harness::write_episode_csv(&csv, &e1.logs).unwrap();
    let rows = read_episode_csv(&csv).unwrap();
    let recomputed = MetricsReport::from_logs(&rows, "cgrl", Task::Left, 3).unwrap();
    let exact = recomputed == e1.report && e1.report == e2.report && e1.logs == e2.logs;
    let train_rows = read_episode_csv(&a.join("episodes.csv")).unwrap().len() == 40;

    let table: [(ModelId, [bool; 5]); 7] = [
        (ModelId::Cgrl, [true, true, true, true, true]),
        (ModelId::GcnDqn, [true, false, false, false, false]),
        (ModelId::GcnDoubleDqn, [true, false, false, true, false]),
        (ModelId::GcnDuelingDqn, [true, false, true, false, false]),
        (ModelId::GcnD3qn, [true, false, true, true, false]),
        (ModelId::GatD3qn, [false, true, true, true, false]),
        (ModelId::GcnGatD3qn, [true, true, true, true, false]),
    ];
    let flags_ok = table.iter().all(|(m, [gcn, gat, duel, double, cdrl])| {
        let f = m.flags();
        f.arch == ArchFlags { use_gcn: *gcn, use_gat: *gat, use_dueling: *duel, use_double: *double } && f.cdrl == *cdrl
    });
    check(
        identical && untouched && exact && train_rows && has_vgae && flags_ok,
        format!(
            "rerun {} ({} files), eval leaves checkpoint {}, metrics from rows {}, flag table {}",
            if identical { "byte-identical" } else { "DIFFERS" },
            files.len(),
            if untouched { "unchanged" } else { "MODIFIED" },
            if exact { "exact" } else { "MISMATCH" },
            if flags_ok { "matches" } else { "MISMATCH" }
        ),
    )
}

fn criterion_10() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cfg = PolicyConfig::default();
    let params = init_params(&cfg, &mut rng).unwrap();
    let causal = CausalModel::new(CdrlConfig::default(), &mut rng).unwrap();
    let mut worst: f64 = 0.0;
    let mut weighted_worst: f64 = 0.0;
    for _ in 0..50 {
        let humans = rng.random_range(3..=15);
        let obs = sim_obs(&mut rng, humans, 16);
        let mut tail: Vec<usize> = (1..16).collect();
        tail.shuffle(&mut rng);
        let perm: Vec<usize> = std::iter::once(0).chain(tail).collect();
        let n = obs.capacity();
        let permuted = GraphObservation {
            features: Tensor64::from_fn(n, FEATURES, |i, k| obs.features.get(perm[i], k)),
            adjacency: Tensor64::from_fn(n, n, |i, j| obs.adjacency.get(perm[i], perm[j])),
            n_present: obs.n_present,
        };
        let q = q_values(&cfg, &params, &obs, None).unwrap();
        let qp = q_values(&cfg, &params, &permuted, None).unwrap();
        let w = causal.causal_weights(&obs).unwrap();
        let wp = causal.causal_weights(&permuted).unwrap();
        let qw = q_values(&cfg, &params, &obs, Some(&w)).unwrap();
        let qwp = q_values(&cfg, &params, &permuted, Some(&wp)).unwrap();
        for k in 0..3 {
            worst = worst.max((q[k] - qp[k]).abs());
            weighted_worst = weighted_worst.max((qw[k] - qwp[k]).abs());
        }
    }
    check(
        worst < EQUIVARIANCE_TOL && weighted_worst < EQUIVARIANCE_TOL,
        format!("max |ΔQ| {worst:.1e}, with causal weights {weighted_worst:.1e} (tol {EQUIVARIANCE_TOL:.0e})"),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Verdict); 10] = [
        ("Renyi closed forms", Duration::from_secs(1), criterion_1),
        ("MI sanity", Duration::from_secs(30), criterion_2),
        ("constant-label CMI", Duration::MAX, criterion_3),
        ("gradient suite", Duration::from_secs(300), criterion_4),
        ("Q-learning oracles", Duration::MAX, criterion_5),
        ("IDM properties", Duration::MAX, criterion_6),
        ("VGAE learning", Duration::from_secs(120), criterion_7),
        ("desk-scale RL", Duration::from_secs(1800), criterion_8),
        ("determinism and metrics", Duration::MAX, criterion_9),
        ("permutation invariance", Duration::MAX, criterion_10),
    ];
    let only: Vec<usize> = std::env::var("CGRL_CRITERIA")
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let (mut pass, mut detail) = match verdict {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if took > limit {
            pass = false;
            detail.push_str(&format!("; over the {}s limit", limit.as_secs()));
        }
        failed += !pass as usize;
        println!("criterion {n}: {} [{:.1}s] {name}: {detail}", if pass { "PASS" } else { "FAIL" }, took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

//! The training loop shared by CGRL and the six baselines.

use std::path::{Path, PathBuf};

use cgrl_agent::{observe, q_values_batch, CausalModel, D3qn, GraphBatch, GraphObservation, ReplayBuffer, Transition};
use cgrl_core::Tensor64;
use cgrl_sim::{build_scenario, Action, ScenarioConfig, SimError, World};
use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::error::{io_err, HarnessError, Result};
use crate::metrics::{write_episode_csv, EpisodeLog, Outcome};

/// Bounded so a hopeless scenario configuration fails instead of spinning.
const SCENARIO_RETRIES: usize = 1000;

/// Fresh scenario from `rng`, redrawing the seed when vehicle placement
/// fails.
pub fn fresh_world<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<World> {
    let mut last = None;
    for _ in 0..SCENARIO_RETRIES {
        match build_scenario(config, rng.random()) {
            Ok(w) => return Ok(w),
            Err(e @ SimError::Scenario(_)) => last = Some(e),
            Err(e) => return Err(e.into()),
        }
    }
    Err(last.expect("at least one attempt").into())
}

pub fn outcome_of(flags: &cgrl_sim::StepFlags) -> Outcome {
    if flags.collided {
        Outcome::Collided
    } else if flags.arrived {
        Outcome::Arrived
    } else {
        Outcome::Timeout
    }
}

/// Independent streams split off one master seed, so adding draws to one
/// stage never shifts another.
pub(crate) struct Streams {
    pub init: ChaCha8Rng,
    pub scenario: ChaCha8Rng,
    pub explore: ChaCha8Rng,
    pub replay: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let mut next = || ChaCha8Rng::seed_from_u64(master.random());
        Self { init: next(), scenario: next(), explore: next(), replay: next(), noise: next() }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub logs: Vec<EpisodeLog>,
    pub checkpoint: Checkpoint,
    pub checkpoint_paths: Vec<PathBuf>,
}

/// Observation plus the causal weights in force when it was taken.
fn observe_weighted(world: &World, capacity: usize, causal: Option<&CausalModel>) -> Result<(GraphObservation, Option<Tensor64>)> {
    let obs = observe(world, capacity)?;
    let w = causal.map(|c| c.causal_weights(&obs)).transpose()?;
    Ok((obs, w))
}

fn source(on: bool, causal: &Option<CausalModel>) -> Option<&CausalModel> {
    causal.as_ref().filter(|_| on)
}

/// Greedy online-network actions for a sample of stored states.
fn greedy_labels(agent: &D3qn, batch: &[&Transition]) -> Result<Vec<usize>> {
    let items: Vec<_> = batch.iter().map(|t| (&t.state, t.state_weights.as_ref())).collect();
    let q = q_values_batch(&agent.policy, &agent.online, &GraphBatch::build(&items)?)?;
    let k = agent.policy.n_actions;
    Ok((0..batch.len()).map(|i| cgrl_agent::argmax(&q.data()[i * k..(i + 1) * k])).collect())
}

/// Trains one (model, task, seed) cell. With `out` set, writes the config
/// echo, `episodes.csv` and checkpoints there.
pub fn run_training(config: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<TrainOutcome> {
    config.validate()?;
    let mut rng = Streams::new(seed);
    let scenario = config.scenario_for(config.task);
    let mut agent = D3qn::new(config.policy.clone(), config.trainer.clone(), &mut rng.init)?;
    let mut causal = config.cdrl.clone().map(|c| CausalModel::new(c, &mut rng.init)).transpose()?;
    let mut buffer = ReplayBuffer::new(config.trainer.replay_capacity);
    let budget = config.trainer.episodes;
    let sched = &config.schedule;

    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let p = dir.join("config.toml");
        std::fs::write(&p, config.echo()).map_err(io_err(&p))?;
    }
    let mut paths = Vec::new();
    let mut save = |ck: &Checkpoint, episode: usize| -> Result<()> {
        if let Some(dir) = out {
            let p = dir.join(format!("checkpoint-{episode:05}.bin"));
            ck.save(&p)?;
            paths.push(p);
        }
        Ok(())
    };
    save(&Checkpoint::capture(config, &agent, None), 0)?;

    let mut logs = Vec::with_capacity(budget);
    let mut rl_since_cdrl = 0u64;
    for episode in 0..budget {
        let causal_on = episode >= sched.cdrl_warmup_episodes;
        let epsilon = config.epsilon(episode);
        let mut world = fresh_world(&scenario, &mut rng.scenario)?;
        let (mut obs, mut weights) = observe_weighted(&world, config.capacity, source(causal_on, &causal))?;
        let (mut total, mut speed_sum, mut steps) = (0.0, 0.0, 0u32);
        let outcome = loop {
            let action = agent.act(&obs, weights.as_ref(), epsilon, &mut rng.explore)?;
            let r = world.step(Action::from_index(action)?)?;
            total += r.reward;
            speed_sum += world.ego().speed;
            steps += 1;
            let (next, next_w) = observe_weighted(&world, config.capacity, source(causal_on, &causal))?;
            buffer.push(Transition {
                state: obs,
                state_weights: weights,
                action,
                reward: r.reward,
                next_state: next.clone(),
                next_weights: next_w.clone(),
                terminal: r.terminal,
            });
            for _ in 0..sched.updates_per_step {
                let Some(rep) = agent.train_step(&buffer, &mut rng.replay).map_err(|e| {
                    HarnessError::Domain(format!("training aborted in episode {episode}: {e}"))
                })?
                else {
                    break;
                };
                debug!("step {} loss {:.5} |g| {:.3}", agent.steps, rep.loss, rep.grad_norm);
                rl_since_cdrl += 1;
                if let (true, Some(model)) = (causal_on, causal.as_mut()) {
                    if rl_since_cdrl >= sched.cdrl_every {
                        rl_since_cdrl = 0;
                        if let Some(batch) = buffer.sample(model.config.batch_size, &mut rng.replay) {
                            let labels = greedy_labels(&agent, &batch)?;
                            let graphs: Vec<_> = batch.iter().map(|t| &t.state).collect();
                            let rep = model
                                .cdrl_step(&graphs, &labels, agent.policy.n_actions, &mut rng.noise)
                                .map_err(|e| HarnessError::Domain(format!("CDRL aborted in episode {episode}: {e}")))?;
                            debug!("cdrl loss {:.5} cmi {:.4} mi {:.4}", rep.loss, rep.cmi, rep.mi);
                        }
                    }
                }
            }
            if r.terminal {
                break outcome_of(&r.flags);
            }
            // The causal model may have moved during the updates above.
            (obs, weights) = match source(causal_on, &causal) {
                Some(c) => {
                    let w = c.causal_weights(&next)?;
                    (next, Some(w))
                }
                None => (next, next_w),
            };
        };
        let log = EpisodeLog { episode, reward: total, steps, outcome, mean_speed: speed_sum / steps as f64 };
        info!("episode {episode}: reward {:.3} steps {} {}", log.reward, log.steps, log.outcome);
        logs.push(log);
        let done = episode + 1;
        if done == budget || (sched.checkpoint_every > 0 && done.is_multiple_of(sched.checkpoint_every)) {
            let c = if causal_on { causal.as_ref() } else { None };
            save(&Checkpoint::capture(config, &agent, c), done)?;
        }
    }
    if let Some(dir) = out {
        write_episode_csv(&dir.join("episodes.csv"), &logs)?;
    }
    let on = budget > sched.cdrl_warmup_episodes;
    let checkpoint = Checkpoint::capture(config, &agent, if on { causal.as_ref() } else { None });
    Ok(TrainOutcome { logs, checkpoint, checkpoint_paths: paths })
}

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{argmax, epsilon_at, sr_exploit, sr_explore, uniform_action};
use super::replay::ReplayBuffer;
use super::{AgentError, RunConfig};
use crate::bridge::Guidance;
use crate::envs::{EnvConfig, GridEnv, Observation};
use crate::neural::{sync_target, train_step, Adam, Features, QNetwork, Transition};
use crate::rm::{detect_events, RewardMachine};

pub const STREAM_INIT: u64 = 0;
pub const STREAM_LAYOUT: u64 = 1;
pub const STREAM_ACTIONS: u64 = 2;

/// Independent ChaCha stream `stream` of the generator keyed by `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn layout_rng(seed: u64, env_seed: u64) -> ChaCha8Rng {
    rng_stream(seed ^ env_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15), STREAM_LAYOUT)
}

/// One row of the per-run metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub steps: u32,
    #[serde(rename = "return")]
    pub ret: f64,
    pub discounted_return: f64,
    pub success: bool,
    pub epsilon: f64,
    /// NaN when no update happened during the episode.
    pub loss_mean: f64,
    pub neural_ms_per_step: f64,
    pub symbolic_ms_per_step: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Completed episodes; an episode cut by the step budget is dropped.
    pub episodes: Vec<EpisodeRecord>,
    pub net: QNetwork,
    pub total_steps: u64,
    pub updates: u64,
    pub wall_time: Duration,
    /// Zero unless timing was recorded.
    pub neural_time: Duration,
    pub symbolic_time: Duration,
}

fn encode(obs: &Observation, rm_state: Option<(usize, usize)>) -> Features {
    let mut idx = obs.active_features();
    if let Some((base, u)) = rm_state {
        idx.push((base + u) as u32);
    }
    Features::Binary(Arc::from(idx))
}

struct Clock {
    on: bool,
    total: Duration,
}

impl Clock {
    fn start(&self) -> Option<Instant> {
        self.on.then(Instant::now)
    }

    fn stop(&mut self, t: Option<Instant>) {
        if let Some(t) = t {
            self.total += t.elapsed();
        }
    }
}

/// Trains one agent. `guidance` is required by the SR variants and
/// `reward_machine` by RM-DQN; each is ignored by the other variants.
pub fn train(
    config: &RunConfig,
    guidance: Option<&Guidance>,
    reward_machine: Option<&RewardMachine>,
) -> Result<RunOutput, AgentError> {
    config.validate()?;
    let variant = config.variant;
    let guidance = if variant.needs_guidance() {
        Some(guidance.ok_or_else(|| AgentError::Config(format!("{} needs a guidance program", variant.name())))?)
    } else {
        None
    };
    let rm = if variant.needs_reward_machine() {
        Some(reward_machine.ok_or_else(|| AgentError::Config("rm_dqn needs a reward machine".into()))?)
    } else {
        None
    };
    let started = Instant::now();
    let dqn = &config.dqn;
    let train_cfg = dqn.train_config();

    let mut env = GridEnv::new(&config.env)?;
    let n_actions = env.num_actions();
    let base_dim = env.feature_dim();
    let input_dim = base_dim + rm.map_or(0, |m| m.num_states());
    let mut sizes = vec![input_dim];
    sizes.extend(&dqn.hidden);
    sizes.push(n_actions);

    let mut init_rng = rng_stream(config.seed, STREAM_INIT);
    let mut env_rng = layout_rng(config.seed, config.env.seed);
    let mut rng = rng_stream(config.seed, STREAM_ACTIONS);

    let mut net = QNetwork::new(&sizes, &mut init_rng)?;
    if dqn.zero_output_init {
        net.zero_output_layer();
    }
    let mut target = net.clone();
    let mut adam = Adam::new(&net, dqn.learning_rate);
    let mut buffer = ReplayBuffer::new(dqn.buffer_capacity);

    let mut neural = Clock {
        on: config.record_timing,
        total: Duration::ZERO,
    };
    let mut symbolic = Clock {
        on: config.record_timing,
        total: Duration::ZERO,
    };
    let mut episodes = Vec::new();
    let mut steps: u64 = 0;
    let mut updates: u64 = 0;
    let mut warned_negative = false;
    let mut episode: u64 = 0;

    'run: while steps < config.max_total_steps {
        if let Some(total) = config.schedule.episodes {
            if episode >= total {
                break;
            }
        }
        let epsilon = match config.schedule.episodes {
            Some(total) => epsilon_at(&config.schedule, episode, total),
            None => config.schedule.at_progress(steps as f64 / config.max_total_steps as f64),
        };
        let obs = env.reset(&mut env_rng)?;
        let mut u = rm.map(|m| m.initial());
        let mut feats = encode(&obs, u.map(|u| (base_dim, u)));
        let (neural_before, symbolic_before) = (neural.total, symbolic.total);
        let (mut ret, mut disc, mut discount) = (0.0, 0.0, 1.0);
        let (mut loss_sum, mut loss_n) = (0.0, 0u32);
        let mut ep_steps: u32 = 0;

        loop {
            let x: f64 = rng.gen();
            let exploit = x >= epsilon;
            let want_sr = if exploit {
                variant.sr_exploitation()
            } else {
                variant.sr_exploration()
            };
            let suggested = match (want_sr, guidance) {
                (true, Some(g)) => {
                    let t = symbolic.start();
                    let s = g.suggest(&env)?.actions;
                    symbolic.stop(t);
                    s
                }
                _ => Vec::new(),
            };
            let action = if exploit {
                let t = neural.start();
                let q = net.forward(feats.as_input())?;
                neural.stop(t);
                if want_sr {
                    if !warned_negative && q.iter().any(|v| *v < 0.0) {
                        warned_negative = true;
                        log::warn!("rescaling negative Q-values (seed {})", config.seed);
                    }
                    sr_exploit(&q, &suggested, epsilon, config.rho, config.normalized_rescale)
                } else {
                    argmax(&q)
                }
            } else if want_sr {
                sr_explore(n_actions, &suggested, config.rho, &mut rng)
            } else {
                uniform_action(n_actions, &mut rng)
            };

            let result = env.step(action)?;
            let mut reward = result.reward;
            let mut next_u = u;
            if let (Some(m), Some(cur)) = (rm, u) {
                let events = detect_events(&env);
                let (to, bonus) = m.step(cur, &events)?;
                next_u = Some(to);
                reward += bonus;
            }
            let next_feats = encode(&result.observation, next_u.map(|u| (base_dim, u)));
            buffer.push(Transition {
                obs: feats,
                action,
                reward,
                next_obs: next_feats.clone(),
                terminal: result.terminal && !result.truncated,
            });
            feats = next_feats;
            u = next_u;
            steps += 1;
            ep_steps += 1;
            ret += result.reward;
            disc += discount * result.reward;
            discount *= dqn.gamma;

            if steps >= dqn.learning_starts && steps % dqn.train_freq == 0 {
                if let Some(batch) = buffer.sample(dqn.batch_size, &mut rng) {
                    let t = neural.start();
                    let loss = train_step(&mut net, &target, &batch, &train_cfg, &mut adam)?;
                    neural.stop(t);
                    loss_sum += loss;
                    loss_n += 1;
                    updates += 1;
                }
            }
            if steps % dqn.target_update == 0 {
                let t = neural.start();
                sync_target(&net, &mut target)?;
                neural.stop(t);
            }
            if result.terminal {
                break;
            }
            if steps >= config.max_total_steps {
                break 'run;
            }
        }

        let per_step = |d: Duration| d.as_secs_f64() * 1e3 / ep_steps as f64;
        episodes.push(EpisodeRecord {
            episode,
            steps: ep_steps,
            ret,
            discounted_return: disc,
            success: env.task_success(),
            epsilon,
            loss_mean: if loss_n > 0 { loss_sum / loss_n as f64 } else { f64::NAN },
            neural_ms_per_step: per_step(neural.total - neural_before),
            symbolic_ms_per_step: per_step(symbolic.total - symbolic_before),
        });
        episode += 1;
    }

    Ok(RunOutput {
        episodes,
        net,
        total_steps: steps,
        updates,
        wall_time: started.elapsed(),
        neural_time: neural.total,
        symbolic_time: symbolic.total,
    })
}

pub fn write_episodes_csv<W: Write>(records: &[EpisodeRecord], out: W) -> Result<(), AgentError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean_discounted_return: f64,
    pub std_discounted_return: f64,
    pub success_rate: f64,
}

/// Runs `episodes` episodes choosing actions with `policy` and reports the
/// Σ γᵗ rₜ statistics (population standard deviation).
pub fn evaluate_policy<F>(
    env_config: &EnvConfig,
    episodes: usize,
    gamma: f64,
    seed: u64,
    mut policy: F,
) -> Result<EvalSummary, AgentError>
where
    F: FnMut(&GridEnv, &Observation) -> Result<usize, AgentError>,
{
    if episodes == 0 {
        return Err(AgentError::Config("evaluation needs at least one episode".into()));
    }
    let mut env = GridEnv::new(env_config)?;
    let mut rng = layout_rng(seed, env_config.seed);
    let mut returns = Vec::with_capacity(episodes);
    let mut successes = 0;
    for _ in 0..episodes {
        let mut obs = env.reset(&mut rng)?;
        let (mut disc, mut discount) = (0.0, 1.0);
        loop {
            let a = policy(&env, &obs)?;
            let r = env.step(a)?;
            disc += discount * r.reward;
            discount *= gamma;
            obs = r.observation;
            if r.terminal {
                break;
            }
        }
        successes += env.task_success() as usize;
        returns.push(disc);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    Ok(EvalSummary {
        episodes,
        mean_discounted_return: mean,
        std_discounted_return: var.sqrt(),
        success_rate: successes as f64 / n,
    })
}

/// Greedy (ε = 0, no rescaling) evaluation of a trained network. RM-DQN
/// networks need their reward machine to build the augmented input.
pub fn evaluate(
    net: &QNetwork,
    env_config: &EnvConfig,
    episodes: usize,
    gamma: f64,
    seed: u64,
    reward_machine: Option<&RewardMachine>,
) -> Result<EvalSummary, AgentError> {
    let mut u = reward_machine.map(|m| m.initial());
    evaluate_policy(env_config, episodes, gamma, seed, |env, obs| {
        if let Some(m) = reward_machine {
            u = Some(match (env.step_count(), u) {
                (0, _) | (_, None) => m.initial(),
                (_, Some(cur)) => m.step(cur, &detect_events(env))?.0,
            });
        }
        let feats = encode(obs, u.map(|u| (env.feature_dim(), u)));
        Ok(argmax(&net.forward(feats.as_input())?))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{EpsilonSchedule, Variant};
    use crate::envs::OfficeTask;

    fn small(variant: Variant, seed: u64) -> RunConfig {
        let mut c = RunConfig::new(
            EnvConfig::office(OfficeTask::DeliverCoffee),
            variant,
            EpsilonSchedule::new(1.0, 0.1, 0.5, None).unwrap(),
            1500,
            seed,
        );
        c.dqn.hidden = vec![16];
        c.dqn.learning_starts = 100;
        c.dqn.batch_size = 8;
        c.dqn.target_update = 200;
        c.dqn.learning_rate = 1e-3;
        c
    }

    #[test]
    fn same_seed_same_metrics() {
        let g = Guidance::builtin(crate::envs::Domain::OfficeWorld, Some(OfficeTask::DeliverCoffee), false).unwrap();
        let a = train(&small(Variant::SrDqn, 3), Some(&g), None).unwrap();
        let b = train(&small(Variant::SrDqn, 3), Some(&g), None).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_episodes_csv(&a.episodes, &mut x).unwrap();
        write_episodes_csv(&b.episodes, &mut y).unwrap();
        assert_eq!(x, y);
        assert!(a.total_steps == 1500 && a.updates > 0);
    }

    #[test]
    fn sr_variants_need_guidance() {
        assert!(matches!(train(&small(Variant::SrDqn, 0), None, None), Err(AgentError::Config(_))));
        assert!(matches!(train(&small(Variant::RmDqn, 0), None, None), Err(AgentError::Config(_))));
    }

    #[test]
    fn csv_header() {
        let mut out = Vec::new();
        let r = EpisodeRecord {
            episode: 0,
            steps: 3,
            ret: 0.5,
            discounted_return: 0.25,
            success: true,
            epsilon: 1.0,
            loss_mean: f64::NAN,
            neural_ms_per_step: 0.0,
            symbolic_ms_per_step: 0.0,
        };
        write_episodes_csv(&[r], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "episode,steps,return,discounted_return,success,epsilon,loss_mean,neural_ms_per_step,symbolic_ms_per_step"
        );
        assert!(text.lines().nth(1).unwrap().contains("NaN"));
    }

    #[test]
    fn evaluate_zero_network_on_office_fails_gracefully() {
        // action 0 forever walks into the left wall until the time limit
        let net = QNetwork::zeros(&[crate::envs::OfficeObs::FEATURE_DIM, 4]).unwrap();
        let mut env = EnvConfig::office(OfficeTask::DeliverCoffee);
        env.max_steps = Some(20);
        let s = evaluate(&net, &env, 3, 0.9, 0, None).unwrap();
        assert_eq!(s.mean_discounted_return, 0.0);
        assert_eq!(s.success_rate, 0.0);
    }
}

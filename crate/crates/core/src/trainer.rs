//! Advantage actor-critic training loop with parameter sharing.
//!
//! All agents run one shared network; their transitions are pooled into a
//! single batch and one gradient step is applied per episode. Advantages use
//! the one-step TD error A = r + gamma * V(s') - V(s) with V(s') = 0 on
//! terminal transitions. The safety supervisor filters actions before they
//! reach the environment; the executed (possibly replaced) action is what
//! gets stored and trained on.

use std::fs::OpenOptions;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::dynamics::{MetaAction, N_ACTIONS};
use crate::env::{ActionMask, EnvConfig, MergeEnv, Observation};
use crate::neural::{
    self, checkpoint, forward, loss_and_gradients, optimizer_step, LossSample, NetworkParams,
    NeuralError, OptimizerState,
};
use crate::supervisor::{supervise, Snapshot, SupervisorConfig};
use crate::trace::{TraceRecord, TraceWriter};

#[derive(Debug, Clone)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub lr: f64,
    /// Value loss weight.
    pub beta_value: f64,
    /// Entropy bonus weight.
    pub beta_entropy: f64,
    /// Environment decision steps to train for.
    pub total_steps: usize,
    /// Evaluate every this many training episodes.
    pub eval_every_episodes: usize,
    /// Greedy episodes per evaluation point.
    pub eval_episodes: usize,
    pub seed: u64,
    pub supervisor_enabled: bool,
    pub supervisor: SupervisorConfig,
    pub env: EnvConfig,
    /// Warm-start parameters (curriculum); optimizer state starts fresh.
    pub init_from: Option<PathBuf>,
    /// Metrics and checkpoints land here; no files are written when unset.
    pub out_dir: Option<PathBuf>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 5e-4,
            beta_value: 1.0,
            beta_entropy: 0.01,
            total_steps: 2_000_000,
            eval_every_episodes: 200,
            eval_episodes: 3,
            seed: 0,
            supervisor_enabled: true,
            supervisor: SupervisorConfig::default(),
            env: EnvConfig::default(),
            init_from: None,
            out_dir: None,
        }
    }
}

impl TrainerConfig {
    /// Hash of everything that shapes the run, stored in checkpoints so a
    /// resume against a different setup is detectable.
    pub fn config_hash(&self) -> u64 {
        let mut c = self.clone();
        c.out_dir = None;
        c.init_from = None;
        checkpoint::config_hash(&format!("{c:?}"))
    }
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub observation: Observation,
    pub mask: ActionMask,
    /// Executed action index (after supervision).
    pub action: usize,
    /// Local (neighborhood-averaged) reward.
    pub reward: f64,
    pub next_observation: Observation,
    pub next_mask: ActionMask,
    pub terminal: bool,
}

#[derive(Debug, Default)]
pub struct ExperienceBuffer {
    pub transitions: Vec<Transition>,
}

impl ExperienceBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Transition) {
        self.transitions.push(t);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn clear(&mut self) {
        self.transitions.clear();
    }
}

/// One-step TD target.
pub fn td_target(reward: f64, gamma: f64, next_value: f64, terminal: bool) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * next_value
    }
}

/// Turn buffered transitions into loss samples with advantages computed
/// under the current parameters.
pub fn compute_advantages(
    params: &NetworkParams,
    buffer: &ExperienceBuffer,
    gamma: f64,
) -> Result<Vec<LossSample>, NeuralError> {
    buffer
        .transitions
        .iter()
        .map(|t| {
            let (_, value, _) = forward(params, &t.observation, &t.mask)?;
            let next_value = if t.terminal {
                0.0
            } else {
                let (_, v, _) = forward(params, &t.next_observation, &t.next_mask)?;
                v
            };
            let target = td_target(t.reward, gamma, next_value, t.terminal);
            Ok(LossSample {
                observation: t.observation,
                mask: t.mask,
                action: t.action,
                advantage: target - value,
                value_target: target,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    Sample,
    Greedy,
}

fn select_action(
    params: &NetworkParams,
    obs: &Observation,
    mask: &ActionMask,
    mode: PolicyMode,
    rng: &mut impl Rng,
) -> Result<usize, NeuralError> {
    let (probs, _, _) = forward(params, obs, mask)?;
    Ok(match mode {
        PolicyMode::Greedy => {
            let mut best = 0;
            for i in 1..N_ACTIONS {
                if probs[i] > probs[best] {
                    best = i;
                }
            }
            best
        }
        PolicyMode::Sample => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = N_ACTIONS - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            // Guard against rounding: the chosen action must be valid.
            if !mask.0[chosen] {
                chosen = (0..N_ACTIONS).find(|&i| mask.0[i]).unwrap();
            }
            chosen
        }
    })
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeOutcome {
    pub steps: usize,
    /// Mean over agents of their summed local rewards.
    pub return_mean: f64,
    pub collision: bool,
    pub avg_speed: f64,
    /// Supervisor action replacements / supervised decisions.
    pub interventions: usize,
    pub decisions: usize,
    pub no_safe_action_steps: usize,
    pub supervisor_latency_ms: f64,
    pub predicted_steps: usize,
}

/// Roll one episode, optionally recording transitions.
pub fn run_episode(
    cfg: &TrainerConfig,
    params: &NetworkParams,
    mode: PolicyMode,
    rng: &mut ChaCha12Rng,
    buffer: Option<&mut ExperienceBuffer>,
) -> Result<EpisodeOutcome, NeuralError> {
    run_episode_inner(cfg, params, mode, rng, buffer, None)
}

/// As [`run_episode`], additionally dumping every vehicle state per step.
pub fn run_episode_traced(
    cfg: &TrainerConfig,
    params: &NetworkParams,
    mode: PolicyMode,
    rng: &mut ChaCha12Rng,
    writer: &mut TraceWriter,
) -> Result<EpisodeOutcome, NeuralError> {
    run_episode_inner(cfg, params, mode, rng, None, Some(writer))
}

fn run_episode_inner(
    cfg: &TrainerConfig,
    params: &NetworkParams,
    mode: PolicyMode,
    rng: &mut ChaCha12Rng,
    mut buffer: Option<&mut ExperienceBuffer>,
    mut trace: Option<&mut TraceWriter>,
) -> Result<EpisodeOutcome, NeuralError> {
    let mut env = MergeEnv::reset(cfg.env.clone(), rng);
    let av_ids = env.av_ids();
    let n_agents = av_ids.len();

    let mut obs: Vec<Observation> = av_ids.iter().map(|&id| env.observe(id)).collect();
    let mut masks: Vec<ActionMask> = av_ids.iter().map(|&id| env.action_mask(id)).collect();
    let mut returns = vec![0.0; n_agents];
    let mut out = EpisodeOutcome::default();
    let mut speed_sum = 0.0;
    let dt = env.kinematics.physics_dt * env.kinematics.substeps_per_action as f64;

    if let Some(w) = trace.as_deref_mut() {
        for v in &env.vehicles {
            w.write(&TraceRecord::of_vehicle(0, dt, v, None, false, false, None))
                .expect("trace write");
        }
    }

    loop {
        let mut actions: Vec<MetaAction> = Vec::with_capacity(n_agents);
        for k in 0..n_agents {
            let idx = select_action(params, &obs[k], &masks[k], mode, rng)?;
            actions.push(MetaAction::from_index(idx));
        }

        let mut replaced = vec![false; n_agents];
        if cfg.supervisor_enabled {
            let last: Vec<Option<MetaAction>> = (0..env.vehicles.len())
                .map(|id| env.last_action(id))
                .collect();
            let snap = Snapshot {
                vehicles: &env.vehicles,
                idm_params: &env.idm_params,
                mobil: &env.config.mobil,
                road: &env.road,
                kinematics: &env.kinematics,
            };
            let result = supervise(
                &snap,
                &av_ids,
                &actions,
                &masks,
                &last,
                &cfg.supervisor,
                rng,
            );
            out.interventions += result.replaced.iter().filter(|&&r| r).count();
            out.decisions += n_agents;
            out.no_safe_action_steps += usize::from(result.no_safe_action);
            out.supervisor_latency_ms += result.latency_ms;
            out.predicted_steps += result.predicted_steps;
            replaced = result.replaced.clone();
            actions = result.actions;
        }

        let step = env.step(&actions, rng).expect("masked action rejected");
        out.steps += 1;

        if let Some(w) = trace.as_deref_mut() {
            for v in &env.vehicles {
                let k = av_ids.iter().position(|&id| id == v.id);
                w.write(&TraceRecord::of_vehicle(
                    env.t,
                    dt,
                    v,
                    k.map(|k| actions[k]),
                    k.map(|k| replaced[k]).unwrap_or(false),
                    step.crashed_ids.contains(&v.id),
                    k.map(|k| step.agents[k].reward),
                ))
                .expect("trace write");
            }
        }
        speed_sum += step.avg_speed;
        out.collision |= step.collision;

        for (k, agent) in step.agents.iter().enumerate() {
            returns[k] += agent.local_reward;
            if let Some(buf) = buffer.as_deref_mut() {
                buf.push(Transition {
                    observation: obs[k],
                    mask: masks[k],
                    action: actions[k].index(),
                    reward: agent.local_reward,
                    next_observation: agent.observation,
                    next_mask: agent.mask,
                    terminal: step.done,
                });
            }
            obs[k] = agent.observation;
            masks[k] = agent.mask;
        }

        if step.done {
            break;
        }
    }

    out.return_mean = returns.iter().sum::<f64>() / n_agents as f64;
    out.avg_speed = speed_sum / out.steps as f64;
    Ok(out)
}

/// One metrics row, written at every evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub step: usize,
    pub episode: usize,
    pub eval_reward: f64,
    pub avg_speed: f64,
    pub collision_rate: f64,
    pub intervention_rate: f64,
    pub supervisor_latency_ms: f64,
}

pub const METRICS_HEADER: &str =
    "step,episode,eval_reward,avg_speed,collision_rate,intervention_rate,supervisor_latency_ms";

pub fn append_metrics(path: &Path, row: &MetricsRow) -> std::io::Result<()> {
    let fresh = !path.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{METRICS_HEADER}")?;
    }
    writeln!(
        f,
        "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
        row.step,
        row.episode,
        row.eval_reward,
        row.avg_speed,
        row.collision_rate,
        row.intervention_rate,
        row.supervisor_latency_ms
    )
}

/// Run `eval_episodes` greedy episodes and aggregate.
pub fn evaluate(
    cfg: &TrainerConfig,
    params: &NetworkParams,
    rng: &mut ChaCha12Rng,
    step: usize,
    episode: usize,
) -> Result<MetricsRow, NeuralError> {
    let n = cfg.eval_episodes.max(1);
    let mut reward = 0.0;
    let mut speed = 0.0;
    let mut collisions = 0usize;
    let mut interventions = 0usize;
    let mut decisions = 0usize;
    let mut latency = 0.0;
    let mut latency_calls = 0usize;
    for _ in 0..n {
        let o = run_episode(cfg, params, PolicyMode::Greedy, rng, None)?;
        reward += o.return_mean;
        speed += o.avg_speed;
        collisions += usize::from(o.collision);
        interventions += o.interventions;
        decisions += o.decisions;
        latency += o.supervisor_latency_ms;
        latency_calls += o.steps;
    }
    Ok(MetricsRow {
        step,
        episode,
        eval_reward: reward / n as f64,
        avg_speed: speed / n as f64,
        collision_rate: collisions as f64 / n as f64,
        intervention_rate: if decisions > 0 {
            interventions as f64 / decisions as f64
        } else {
            0.0
        },
        supervisor_latency_ms: if latency_calls > 0 {
            latency / latency_calls as f64
        } else {
            0.0
        },
    })
}

#[derive(Debug)]
pub struct TrainSummary {
    pub params: NetworkParams,
    pub episodes: usize,
    pub steps: usize,
    pub metrics: Vec<MetricsRow>,
    pub best_eval: f64,
    pub skipped_updates: usize,
}

/// Full training run: episodes until the step budget is spent, one pooled
/// gradient update per episode, periodic greedy evaluation with metrics and
/// checkpoints.
pub fn train(cfg: &TrainerConfig) -> anyhow::Result<TrainSummary> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    let mut params = match &cfg.init_from {
        Some(path) => checkpoint::load(path)?.params,
        None => NetworkParams::init(&mut rng),
    };
    let mut opt = OptimizerState::new();
    let hash = cfg.config_hash();

    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let metrics_path = cfg.out_dir.as_ref().map(|d| d.join("metrics.csv"));
    if let Some(p) = &metrics_path {
        if p.exists() {
            std::fs::remove_file(p)?;
        }
    }

    let mut buffer = ExperienceBuffer::new();
    let mut steps = 0usize;
    let mut episodes = 0usize;
    let mut metrics = Vec::new();
    let mut best_eval = f64::NEG_INFINITY;
    let mut skipped_updates = 0usize;

    while steps < cfg.total_steps {
        let outcome = run_episode(
            cfg,
            &params,
            PolicyMode::Sample,
            &mut rng,
            Some(&mut buffer),
        )?;
        steps += outcome.steps;
        episodes += 1;

        match compute_advantages(&params, &buffer, cfg.gamma)
            .and_then(|batch| loss_and_gradients(&params, &batch, cfg.beta_value, cfg.beta_entropy))
        {
            Ok((_, grads)) if grads.is_finite() => {
                optimizer_step(&mut opt, &mut params, &grads, cfg.lr);
            }
            // A non-finite batch is dropped; training continues.
            _ => skipped_updates += 1,
        }
        buffer.clear();

        if episodes % cfg.eval_every_episodes == 0 {
            let row = evaluate(cfg, &params, &mut rng, steps, episodes)?;
            eprintln!(
                "episode {} step {} eval_reward {:.2} collision_rate {:.2} interventions {:.3}",
                row.episode, row.step, row.eval_reward, row.collision_rate, row.intervention_rate
            );
            if let Some(p) = &metrics_path {
                append_metrics(p, &row)?;
            }
            if let Some(dir) = &cfg.out_dir {
                checkpoint::save(
                    &dir.join("latest.ckpt"),
                    &params,
                    Some(&opt),
                    steps as u64,
                    hash,
                )?;
                if row.eval_reward > best_eval {
                    checkpoint::save(
                        &dir.join("best.ckpt"),
                        &params,
                        Some(&opt),
                        steps as u64,
                        hash,
                    )?;
                }
            }
            best_eval = best_eval.max(row.eval_reward);
            metrics.push(row);
        }
    }

    if let Some(dir) = &cfg.out_dir {
        checkpoint::save(
            &dir.join("latest.ckpt"),
            &params,
            Some(&opt),
            steps as u64,
            hash,
        )?;
    }

    Ok(TrainSummary {
        params,
        episodes,
        steps,
        metrics,
        best_eval,
        skipped_updates,
    })
}

/// Grad norm helper re-exported for instrumentation.
pub use neural::global_grad_norm;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::TrafficMode;

    fn quick_cfg() -> TrainerConfig {
        let mut cfg = TrainerConfig::default();
        cfg.env.mode = TrafficMode::Easy;
        cfg.env.horizon = 10;
        cfg.supervisor_enabled = false;
        cfg
    }

    fn obs_and_mask() -> (Observation, ActionMask) {
        (Observation::zeros(), ActionMask([true; N_ACTIONS]))
    }

    #[test]
    fn td_target_arithmetic() {
        assert!((td_target(1.0, 0.99, 0.6, false) - 1.594).abs() < 1e-12);
        assert!((td_target(-200.0, 0.99, 123.0, true) - -200.0).abs() < 1e-12);
    }

    #[test]
    fn advantage_with_constant_critic() {
        // Zero network plus a critic bias c gives V(s) = c for every state,
        // so A = r + gamma*c - c on non-terminal and r - c on terminal steps.
        let c = 0.5;
        let mut params = NetworkParams::zeros();
        params.critic.b[0] = c;
        let (obs, mask) = obs_and_mask();
        let mut buf = ExperienceBuffer::new();
        buf.push(Transition {
            observation: obs,
            mask,
            action: 1,
            reward: 1.0,
            next_observation: obs,
            next_mask: mask,
            terminal: false,
        });
        buf.push(Transition {
            observation: obs,
            mask,
            action: 1,
            reward: -200.0,
            next_observation: obs,
            next_mask: mask,
            terminal: true,
        });
        let samples = compute_advantages(&params, &buf, 0.99).unwrap();
        assert!((samples[0].advantage - (1.0 + 0.99 * c - c)).abs() < 1e-12);
        assert!((samples[0].value_target - (1.0 + 0.99 * c)).abs() < 1e-12);
        assert!((samples[1].advantage - (-200.0 - c)).abs() < 1e-12);
        assert!((samples[1].value_target - -200.0).abs() < 1e-12);
    }

    #[test]
    fn toy_chain_advantages_zero_critic() {
        // Three-step chain with unit rewards and V = 0: A_t = r_t except the
        // terminal bootstrap, which is just r.
        let params = NetworkParams::zeros();
        let (obs, mask) = obs_and_mask();
        let mut buf = ExperienceBuffer::new();
        for t in 0..3 {
            buf.push(Transition {
                observation: obs,
                mask,
                action: 1,
                reward: 1.0,
                next_observation: obs,
                next_mask: mask,
                terminal: t == 2,
            });
        }
        let samples = compute_advantages(&params, &buf, 0.99).unwrap();
        for s in samples {
            assert!((s.advantage - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_updates_descend_frozen_batch() {
        let mut rng = ChaCha12Rng::seed_from_u64(20);
        let mut params = NetworkParams::init(&mut rng);
        let cfg = quick_cfg();
        let mut buf = ExperienceBuffer::new();
        run_episode(&cfg, &params, PolicyMode::Sample, &mut rng, Some(&mut buf)).unwrap();
        let samples = compute_advantages(&params, &buf, cfg.gamma).unwrap();
        let mut opt = crate::neural::OptimizerState::new();
        let (first, _) = crate::neural::loss_and_gradients(&params, &samples, 1.0, 0.01).unwrap();
        let mut last = first;
        for _ in 0..50 {
            let (loss, grads) =
                crate::neural::loss_and_gradients(&params, &samples, 1.0, 0.01).unwrap();
            crate::neural::optimizer_step(&mut opt, &mut params, &grads, 5e-4);
            last = loss;
        }
        assert!(
            last.total < first.total,
            "loss did not decrease: {} -> {}",
            first.total,
            last.total
        );
    }

    #[test]
    fn duplicated_batch_same_gradient() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let params = NetworkParams::init(&mut rng);
        let (obs, mask) = obs_and_mask();
        let one = vec![LossSample {
            observation: obs,
            mask,
            action: 2,
            advantage: 1.0,
            value_target: 3.0,
        }];
        let two: Vec<LossSample> = one.iter().chain(one.iter()).copied().collect();
        let (_, g1) = crate::neural::loss_and_gradients(&params, &one, 1.0, 0.01).unwrap();
        let (_, g2) = crate::neural::loss_and_gradients(&params, &two, 1.0, 0.01).unwrap();
        for ((_, a), (_, b)) in g1.tensors().iter().zip(g2.tensors().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn greedy_action_is_argmax() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut params = NetworkParams::zeros();
        params.actor.b[3] = 1.0;
        let (obs, mask) = obs_and_mask();
        let a = select_action(&params, &obs, &mask, PolicyMode::Greedy, &mut rng).unwrap();
        assert_eq!(a, 3);
    }

    #[test]
    fn sampled_action_respects_mask() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let params = NetworkParams::zeros();
        let obs = Observation::zeros();
        let mask = ActionMask([false, true, false, true, false]);
        for _ in 0..200 {
            let a = select_action(&params, &obs, &mask, PolicyMode::Sample, &mut rng).unwrap();
            assert!(mask.0[a]);
        }
    }

    #[test]
    fn episode_fills_buffer_and_terminates() {
        let cfg = quick_cfg();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let params = NetworkParams::init(&mut rng);
        let mut buf = ExperienceBuffer::new();
        let out = run_episode(&cfg, &params, PolicyMode::Sample, &mut rng, Some(&mut buf))
            .unwrap();
        assert!(out.steps >= 1 && out.steps <= cfg.env.horizon);
        assert_eq!(buf.len() % out.steps, 0);
        assert!(!buf.is_empty());
        let terminal_count = buf.transitions.iter().filter(|t| t.terminal).count();
        let n_agents = buf.len() / out.steps;
        assert_eq!(terminal_count, n_agents);
    }

    #[test]
    fn training_is_deterministic() {
        let mut cfg = quick_cfg();
        cfg.total_steps = 60;
        cfg.eval_every_episodes = 3;
        cfg.eval_episodes = 1;
        cfg.seed = 42;
        let a = train(&cfg).unwrap();
        let b = train(&cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.metrics.len(), b.metrics.len());
        for (x, y) in a.metrics.iter().zip(b.metrics.iter()) {
            assert_eq!(x.step, y.step);
            assert_eq!(x.eval_reward, y.eval_reward);
            assert_eq!(x.avg_speed, y.avg_speed);
        }
    }

    #[test]
    fn training_updates_parameters() {
        let mut cfg = quick_cfg();
        cfg.total_steps = 30;
        cfg.seed = 7;
        let summary = train(&cfg).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let init = NetworkParams::init(&mut rng);
        assert_ne!(summary.params, init);
        assert_eq!(summary.skipped_updates, 0);
        assert!(summary.params.is_finite());
    }

    #[test]
    fn warm_start_loads_params_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = quick_cfg();
        cfg.total_steps = 30;
        cfg.seed = 9;
        cfg.out_dir = Some(dir.path().to_path_buf());
        cfg.eval_every_episodes = 2;
        cfg.eval_episodes = 1;
        train(&cfg).unwrap();
        let ckpt_path = dir.path().join("latest.ckpt");
        let saved = checkpoint::load(&ckpt_path).unwrap();

        let mut cfg2 = quick_cfg();
        cfg2.total_steps = 1;
        cfg2.seed = 10;
        cfg2.env.mode = TrafficMode::Medium;
        cfg2.init_from = Some(ckpt_path);
        let resumed = train(&cfg2).unwrap();
        // One gradient step away from the loaded parameters, so close but
        // not equal.
        assert_ne!(resumed.params, saved.params);
        let delta: f64 = resumed
            .params
            .tensors()
            .iter()
            .zip(saved.params.tensors().iter())
            .flat_map(|((_, a), (_, b))| a.iter().zip(b.iter()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(delta < 1e-2, "warm start drifted too far: {delta}");
    }

    #[test]
    fn metrics_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let row = MetricsRow {
            step: 100,
            episode: 2,
            eval_reward: 1.5,
            avg_speed: 25.0,
            collision_rate: 0.0,
            intervention_rate: 0.25,
            supervisor_latency_ms: 1.0,
        };
        append_metrics(&path, &row).unwrap();
        append_metrics(&path, &row).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], METRICS_HEADER);
        assert!(lines[1].starts_with("100,2,1.500000,25.000000,"));
        assert_eq!(lines[1], lines[2]);
    }

    #[test]
    fn supervised_episode_counts_decisions() {
        let mut cfg = quick_cfg();
        cfg.supervisor_enabled = true;
        cfg.env.mode = TrafficMode::Medium;
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let params = NetworkParams::init(&mut rng);
        let out = run_episode(&cfg, &params, PolicyMode::Sample, &mut rng, None).unwrap();
        assert!(out.decisions >= out.steps);
        assert!(out.interventions <= out.decisions);
    }
}

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{TrainingConfig, GRAD_CLIP_NORM};
use super::metrics::{MetricsLog, MetricsRow};
use super::optim::{clip_grad_norm, Adam};
use super::replay::{Batch, ReplayBuffer, Transition};
use super::state::{make_state, randomize_scenario};
use super::stats::{mean, Summary};
use crate::channel::{nominal_channel, ChannelPair, Scenario};
use crate::diffusion::{actor_loss, gaussian_action, gaussian_loss, sample_actions, ActorLoss, Sample, SamplerMode};
use crate::gradcore::Graph;
use crate::nets::{ActorParameters, ActorVariant, CriticParameters};
use crate::rng::{derive_seed, rng_from, stream};
use crate::secrecy::{paradigm_reward, BeamformingAction, RewardBreakdown};
use crate::{Error, Result};

/// Epochs averaged at each end of a run when judging improvement.
pub const REWARD_WINDOW: usize = 50;
/// Iterations discarded before latency timing starts.
pub const LATENCY_WARMUP: usize = 5;

/// Actions for a batch of states from any actor variant.
pub fn act(
    actor: &ActorParameters<f64>,
    cfg: &TrainingConfig,
    states: &[f64],
    batch: usize,
    mode: SamplerMode,
    seed: u64,
) -> Result<Sample<f64>> {
    let power = cfg.scenario.tx_power;
    if actor.variant().is_diffusion() {
        sample_actions(actor, &cfg.schedule, states, batch, mode, seed, power)
    } else {
        gaussian_action(actor, states, batch, mode, seed, power)
    }
}

/// One squared-error step of both critics toward the batch rewards.
/// Returns the loss before the update.
pub fn critic_update(
    critic: &mut CriticParameters<f64>,
    opt: &mut Adam,
    batch: &Batch,
    clip: bool,
) -> Result<f64> {
    let cfg = critic.config().clone();
    let mut g = Graph::new();
    let p = critic.bind(&mut g, true)?;
    let s = g.constant(batch.states.clone(), &[batch.size, cfg.state_dim])?;
    let a = g.constant(batch.actions.clone(), &[batch.size, cfg.action_dim])?;
    let r = g.constant(batch.rewards.clone(), &[batch.size, 1])?;
    let (q1, q2) = critic.forward(&mut g, &p, s, a)?;
    let mut terms = Vec::with_capacity(2);
    for q in [q1, q2] {
        let d = g.sub(q, r)?;
        let sq = g.square(d)?;
        terms.push(g.mean(sq)?);
    }
    let loss = g.add(terms[0], terms[1])?;
    let value = g.item(loss)?;
    if !value.is_finite() {
        return Err(Error::NonFinite("critic loss".into()));
    }
    g.backward(loss)?;
    let mut grads = critic.params.gradients(&g, &p)?;
    if clip {
        clip_grad_norm(&mut grads, GRAD_CLIP_NORM);
    }
    if grads.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("critic gradient".into()));
    }
    opt.step(&mut critic.params, &grads)?;
    Ok(value)
}

/// Policy objective for any variant, with gradients.
pub fn policy_loss(
    actor: &ActorParameters<f64>,
    critic: &CriticParameters<f64>,
    cfg: &TrainingConfig,
    states: &[f64],
    batch: usize,
    seed: u64,
) -> Result<ActorLoss<f64>> {
    if actor.variant().is_diffusion() {
        actor_loss(actor, critic, &cfg.schedule, states, batch, seed)
    } else {
        gaussian_loss(actor, critic, states, batch, seed, cfg.entropy_coef)
    }
}

struct Episode {
    scenario: Scenario,
    nominal: ChannelPair<f64>,
    state: Vec<f64>,
}

fn episode(cfg: &TrainingConfig, seed: u64, index: u64) -> Result<Episode> {
    let scenario = randomize_scenario(
        &cfg.scenario,
        &cfg.randomization,
        derive_seed(seed, stream::SCENARIO, index),
    );
    let nominal = nominal_channel::<f64>(&scenario, derive_seed(seed, stream::CHANNEL, index))?;
    let state = make_state(&nominal, &cfg.uncertainty, &cfg.state_scale);
    Ok(Episode {
        scenario,
        nominal,
        state,
    })
}

/// Single-threaded owner of the mutable training state.
#[derive(Debug, Clone)]
pub struct Trainer {
    cfg: TrainingConfig,
    actor: ActorParameters<f64>,
    critic: CriticParameters<f64>,
    actor_opt: Adam,
    critic_opt: Adam,
    replay: ReplayBuffer,
    epoch: usize,
}

impl Trainer {
    pub fn new(cfg: &TrainingConfig) -> Result<Self> {
        cfg.validate()?;
        let actor = ActorParameters::init(&cfg.actor_config(), derive_seed(cfg.master_seed, stream::INIT, 0))?;
        let critic = CriticParameters::init(&cfg.critic_config(), derive_seed(cfg.master_seed, stream::INIT, 1))?;
        Self::with_parameters(cfg, actor, critic)
    }

    pub fn with_parameters(
        cfg: &TrainingConfig,
        actor: ActorParameters<f64>,
        critic: CriticParameters<f64>,
    ) -> Result<Self> {
        cfg.validate()?;
        if actor.config() != &cfg.actor_config() {
            return Err(Error::config("actor_variant", "parameters do not match the configured actor"));
        }
        if critic.config() != &cfg.critic_config() {
            return Err(Error::config("network.critic_hidden", "parameters do not match the configured critic"));
        }
        Ok(Self {
            actor_opt: Adam::new(cfg.learning_rate, &actor.params),
            critic_opt: Adam::new(cfg.learning_rate, &critic.params),
            replay: ReplayBuffer::new(cfg.replay_capacity)?,
            cfg: cfg.clone(),
            actor,
            critic,
            epoch: 0,
        })
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.cfg
    }

    pub fn actor(&self) -> &ActorParameters<f64> {
        &self.actor
    }

    pub fn critic(&self) -> &CriticParameters<f64> {
        &self.critic
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn into_parameters(self) -> (ActorParameters<f64>, CriticParameters<f64>) {
        (self.actor, self.critic)
    }

    /// One interaction plus one critic and one actor update. Evaluation is
    /// left to the caller.
    pub fn step(&mut self) -> Result<MetricsRow> {
        let start = Instant::now();
        self.epoch += 1;
        let (cfg, e) = (&self.cfg, self.epoch as u64);
        let seed = cfg.master_seed;
        let numerical = |what: &str| Error::Numerical {
            epoch: e as usize,
            what: what.to_string(),
        };

        let ep = episode(cfg, seed, e)?;
        let sample = act(&self.actor, cfg, &ep.state, 1, SamplerMode::Exploratory, derive_seed(seed, stream::EXPLORE, e))?;
        let reward = paradigm_reward(
            &ep.nominal,
            &ep.scenario,
            &cfg.uncertainty,
            &sample.actions[0],
            &cfg.paradigm,
            cfg.paradigm.mc_samples_train,
            derive_seed(seed, stream::REWARD, e),
        )?
        .reward;
        let transition = Transition {
            state: ep.state,
            action: sample.squashed,
            reward,
        };
        if !transition.is_finite() {
            return Err(numerical("non-finite transition"));
        }
        self.replay.push(transition)?;

        let batch = self
            .replay
            .sample(cfg.batch_size, &mut rng_from(derive_seed(seed, stream::BATCH, e)))?;
        let critic_loss = critic_update(&mut self.critic, &mut self.critic_opt, &batch, cfg.clip_gradients)
            .map_err(|err| match err {
                Error::NonFinite(what) => numerical(&what),
                other => other,
            })?;

        let mut out = policy_loss(
            &self.actor,
            &self.critic,
            cfg,
            &batch.states,
            batch.size,
            derive_seed(seed, stream::ACTOR, e),
        )?;
        if !out.loss.is_finite() {
            return Err(numerical("actor loss"));
        }
        if cfg.clip_gradients {
            clip_grad_norm(&mut out.grads, GRAD_CLIP_NORM);
        }
        if out.grads.iter().flatten().any(|x| !x.is_finite()) {
            return Err(numerical("actor gradient"));
        }
        self.actor_opt.step(&mut self.actor.params, &out.grads)?;

        let mut row = MetricsRow {
            epoch: self.epoch,
            reward,
            critic_loss,
            actor_loss: out.loss,
            eval_reward: None,
            iter_seconds: cfg.record_wall_clock.then(|| start.elapsed().as_secs_f64()),
            expert_frac_0: None,
            expert_frac_1: None,
            expert_frac_2: None,
            expert_frac_3: None,
        };
        if let Some(report) = &out.report {
            row.set_expert_fractions(&report.fractions());
        }
        Ok(row)
    }
}

/// Something that maps states to beamforming actions at evaluation time.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    Actor(&'a ActorParameters<f64>),
    /// Transmits nothing; its secrecy rate is zero everywhere.
    ZeroBeamformer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rewards: Vec<f64>,
    pub breakdowns: Vec<RewardBreakdown>,
    pub summary: Summary,
}

pub fn evaluate_policy(policy: Policy<'_>, n_episodes: usize, cfg: &TrainingConfig, seed: u64) -> Result<EvaluationReport> {
    if n_episodes == 0 {
        return Err(Error::config("eval_episodes", "must be at least 1"));
    }
    let episodes = (0..n_episodes as u64)
        .map(|i| episode(cfg, seed, i))
        .collect::<Result<Vec<_>>>()?;
    let actions: Vec<BeamformingAction<f64>> = match policy {
        Policy::Actor(actor) => {
            let states: Vec<f64> = episodes.iter().flat_map(|e| e.state.iter().copied()).collect();
            act(actor, cfg, &states, n_episodes, SamplerMode::Deterministic, derive_seed(seed, stream::EXPLORE, 0))?.actions
        }
        Policy::ZeroBeamformer => vec![BeamformingAction::zero(cfg.n_tx()); n_episodes],
    };
    let breakdowns = episodes
        .iter()
        .zip(&actions)
        .enumerate()
        .map(|(i, (ep, a))| {
            paradigm_reward(
                &ep.nominal,
                &ep.scenario,
                &cfg.uncertainty,
                a,
                &cfg.paradigm,
                cfg.paradigm.mc_samples_eval,
                derive_seed(seed, stream::REWARD, i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let rewards: Vec<f64> = breakdowns.iter().map(|b| b.reward).collect();
    Ok(EvaluationReport {
        summary: Summary::of(&rewards),
        rewards,
        breakdowns,
    })
}

/// Deterministic-sampler evaluation over fresh scenarios.
pub fn evaluate(actor: &ActorParameters<f64>, n_episodes: usize, cfg: &TrainingConfig, seed: u64) -> Result<EvaluationReport> {
    evaluate_policy(Policy::Actor(actor), n_episodes, cfg, seed)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: MetricsLog,
    pub actor: ActorParameters<f64>,
    pub critic: CriticParameters<f64>,
    pub final_eval: EvaluationReport,
}

/// Seed of the periodic evaluation episodes; fixed for the whole run so
/// successive points of a learning curve score the same scenarios.
pub fn curve_eval_seed(master_seed: u64) -> u64 {
    derive_seed(master_seed, stream::EVAL, 0)
}

/// Seed of the end-of-run evaluation.
pub fn final_eval_seed(master_seed: u64) -> u64 {
    derive_seed(master_seed, stream::EVAL, 1)
}

pub fn train(cfg: &TrainingConfig) -> Result<TrainOutcome> {
    train_with(cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(cfg: &TrainingConfig, mut on_epoch: impl FnMut(&MetricsRow)) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg)?;
    let mut metrics = MetricsLog::default();
    let eval_seed = curve_eval_seed(cfg.master_seed);
    for _ in 0..cfg.epochs {
        let mut row = trainer.step()?;
        if row.epoch % cfg.eval_every == 0 {
            row.eval_reward = Some(evaluate(trainer.actor(), cfg.eval_episodes, cfg, eval_seed)?.summary.mean);
        }
        on_epoch(&row);
        metrics.rows.push(row);
    }
    let final_eval = evaluate(trainer.actor(), cfg.final_eval_episodes, cfg, final_eval_seed(cfg.master_seed))?;
    let (actor, critic) = trainer.into_parameters();
    Ok(TrainOutcome {
        metrics,
        actor,
        critic,
        final_eval,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub variant: ActorVariant,
    pub batch_size: usize,
    pub iterations: usize,
    pub samples: Vec<f64>,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

/// Wall-clock seconds of full training iterations after a warm-up.
pub fn measure_latency(cfg: &TrainingConfig, n_iterations: usize) -> Result<LatencyReport> {
    if n_iterations < 10 {
        return Err(Error::config("iterations", "need at least 10 timed iterations"));
    }
    let mut trainer = Trainer::new(cfg)?;
    for _ in 0..LATENCY_WARMUP {
        trainer.step()?;
    }
    let samples = (0..n_iterations)
        .map(|_| {
            let t = Instant::now();
            trainer.step().map(|_| t.elapsed().as_secs_f64())
        })
        .collect::<Result<Vec<_>>>()?;
    let m = mean(&samples);
    let var = samples.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (samples.len() - 1) as f64;
    Ok(LatencyReport {
        variant: cfg.actor_variant,
        batch_size: cfg.batch_size,
        iterations: n_iterations,
        samples,
        mean_seconds: m,
        std_seconds: var.sqrt(),
    })
}

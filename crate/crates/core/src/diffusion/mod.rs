//! Denoising action generator and the actor objectives built on it.

mod gaussian;

pub use gaussian::{gaussian_action, gaussian_loss, gaussian_nodes, DEFAULT_ENTROPY_COEF};

use serde::{Deserialize, Serialize};

use crate::gradcore::{Graph, NodeRef};
use crate::nets::{ActorParameters, Bound, CriticParameters, GateReport};
use crate::rng::{derive_seed, normal_vec, rng_from, stream};
use crate::secrecy::BeamformingAction;
use crate::{Error, Result, Scalar};

/// Weight of the MoE load-balancing penalty in the actor loss.
pub const BALANCE_COEF: f64 = 0.01;

/// Linear noise schedule. Step `t` runs from 1 to `steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionSchedule {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for DiffusionSchedule {
    fn default() -> Self {
        Self {
            steps: 6,
            beta_start: 1e-4,
            beta_end: 0.2,
        }
    }
}

impl DiffusionSchedule {
    pub fn new(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        let s = Self {
            steps,
            beta_start,
            beta_end,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("steps", "need at least one diffusion step"));
        }
        if !(self.beta_start > 0.0 && self.beta_start < 1.0) {
            return Err(Error::config("beta_start", "must lie in (0, 1)"));
        }
        if !(self.beta_end > 0.0 && self.beta_end < 1.0) {
            return Err(Error::config("beta_end", "must lie in (0, 1)"));
        }
        if self.steps > 1 && self.beta_end <= self.beta_start {
            return Err(Error::config("beta_end", "must exceed beta_start"));
        }
        Ok(())
    }

    pub fn betas(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.beta_start];
        }
        let span = self.beta_end - self.beta_start;
        (0..self.steps)
            .map(|i| self.beta_start + span * i as f64 / (self.steps - 1) as f64)
            .collect()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.betas().into_iter().map(|b| 1.0 - b).collect()
    }

    pub fn alpha_bars(&self) -> Vec<f64> {
        self.alphas()
            .into_iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    Exploratory,
    Deterministic,
}

/// Every state of one reverse chain plus the noise injected along it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord<T> {
    pub batch: usize,
    /// `x_T, ..., x_0`, each `[batch x action_dim]`.
    pub states: Vec<Vec<T>>,
    /// Noise added on the way from `x_t` to `x_{t-1}`, for `t = T..1`.
    pub noise: Vec<Option<Vec<T>>>,
}

#[derive(Debug, Clone)]
pub struct Sample<T> {
    /// Pre-projection actions in `(-1, 1)`, `[batch x action_dim]`.
    pub squashed: Vec<T>,
    pub actions: Vec<BeamformingAction<T>>,
    pub record: Option<ChainRecord<T>>,
    pub report: Option<GateReport>,
    /// Gaussian pre-tanh values; empty for diffusion actors.
    pub pre_tanh: Vec<T>,
}

/// Handles produced by [`chain_nodes`].
pub struct ChainNodes {
    pub states: Vec<NodeRef>,
    pub squashed: NodeRef,
    pub balance: Option<NodeRef>,
    pub report: Option<GateReport>,
}

fn require_diffusion<T: Scalar>(actor: &ActorParameters<T>) -> Result<()> {
    if !actor.variant().is_diffusion() {
        return Err(Error::Variant(format!(
            "{} is not a diffusion actor",
            actor.variant()
        )));
    }
    Ok(())
}

fn check_states<T: Scalar>(actor: &ActorParameters<T>, states: &[T], batch: usize) -> Result<()> {
    if batch == 0 {
        return Err(Error::shape("empty batch"));
    }
    let want = batch * actor.config().state_dim;
    if states.len() != want {
        return Err(Error::shape(format!(
            "{} state values for batch {batch}, expected {want}",
            states.len()
        )));
    }
    Ok(())
}

/// Initial state and per-step noise for a chain, all from one seed.
pub fn draw_chain_noise<T: Scalar>(
    schedule: &DiffusionSchedule,
    action_dim: usize,
    batch: usize,
    mode: SamplerMode,
    seed: u64,
) -> (Vec<T>, Vec<Option<Vec<T>>>) {
    let mut rng = rng_from(derive_seed(seed, stream::ACTOR, 0));
    let x_t = normal_vec(&mut rng, batch * action_dim);
    let noise = (1..=schedule.steps)
        .rev()
        .map(|t| (mode == SamplerMode::Exploratory && t > 1).then(|| normal_vec(&mut rng, batch * action_dim)))
        .collect();
    (x_t, noise)
}

/// Reverse chain as graph ops, ending at `tanh(x_0)`.
pub fn chain_nodes<T: Scalar>(
    g: &mut Graph<T>,
    actor: &ActorParameters<T>,
    p: &Bound,
    schedule: &DiffusionSchedule,
    state: NodeRef,
    x_t: Vec<T>,
    noise: &[Option<Vec<T>>],
) -> Result<ChainNodes> {
    require_diffusion(actor)?;
    if schedule.steps != actor.config().steps {
        return Err(Error::config(
            "steps",
            format!(
                "schedule has {} steps but the actor embeds {}",
                schedule.steps,
                actor.config().steps
            ),
        ));
    }
    if noise.len() != schedule.steps {
        return Err(Error::shape("one noise slot per step"));
    }
    let dim = actor.config().action_dim;
    let batch = x_t.len() / dim;
    let (betas, alphas, bars) = (schedule.betas(), schedule.alphas(), schedule.alpha_bars());
    let mut x = g.constant(x_t, &[batch, dim])?;
    let mut states = vec![x];
    let mut balances = Vec::new();
    let mut report: Option<GateReport> = None;
    for (k, t) in (1..=schedule.steps).rev().enumerate() {
        let i = t - 1;
        let out = actor.forward(g, p, state, Some(x), i)?;
        let inv_sqrt_alpha = 1.0 / alphas[i].sqrt();
        let eps_coef = -betas[i] / (1.0 - bars[i]).sqrt() * inv_sqrt_alpha;
        let kept = g.scale(x, T::of(inv_sqrt_alpha))?;
        let removed = g.scale(out.output, T::of(eps_coef))?;
        let mut next = g.add(kept, removed)?;
        if let Some(z) = &noise[k] {
            let z: Vec<T> = z.iter().map(|&v| v * T::of(betas[i].sqrt())).collect();
            let z = g.constant(z, &[batch, dim])?;
            next = g.add(next, z)?;
        }
        x = next;
        states.push(x);
        if let Some(b) = out.balance {
            balances.push(b);
        }
        if let Some(r) = out.report {
            report.get_or_insert_with(|| GateReport::new(r.counts.len())).merge(&r);
        }
    }
    let squashed = g.tanh(x)?;
    let balance = match balances.split_first() {
        None => None,
        Some((&first, rest)) => {
            let mut acc = first;
            for &b in rest {
                acc = g.add(acc, b)?;
            }
            Some(g.scale(acc, T::of(1.0 / balances.len() as f64))?)
        }
    };
    Ok(ChainNodes {
        states,
        squashed,
        balance,
        report,
    })
}

fn project_rows<T: Scalar>(squashed: &[T], dim: usize, tx_power: T) -> Result<Vec<BeamformingAction<T>>> {
    squashed
        .chunks(dim)
        .map(|row| BeamformingAction::from_flat(row, dim / 4, tx_power))
        .collect()
}

fn run_recorded<T: Scalar>(
    actor: &ActorParameters<T>,
    schedule: &DiffusionSchedule,
    states: &[T],
    batch: usize,
    x_t: Vec<T>,
    noise: Vec<Option<Vec<T>>>,
    tx_power: T,
) -> Result<Sample<T>> {
    check_states(actor, states, batch)?;
    let mut g = Graph::new();
    let p = actor.bind(&mut g, false)?;
    let s = g.constant(states.to_vec(), &[batch, actor.config().state_dim])?;
    let chain = chain_nodes(&mut g, actor, &p, schedule, s, x_t, &noise)?;
    let record = ChainRecord {
        batch,
        states: chain
            .states
            .iter()
            .map(|&n| g.value(n).map(<[T]>::to_vec))
            .collect::<Result<_>>()?,
        noise,
    };
    let squashed = g.value(chain.squashed)?.to_vec();
    Ok(Sample {
        actions: project_rows(&squashed, actor.config().action_dim, tx_power)?,
        squashed,
        record: Some(record),
        report: chain.report,
        pre_tanh: Vec::new(),
    })
}

/// Draws actions for a batch of states `[batch x state_dim]`.
pub fn sample_actions<T: Scalar>(
    actor: &ActorParameters<T>,
    schedule: &DiffusionSchedule,
    states: &[T],
    batch: usize,
    mode: SamplerMode,
    seed: u64,
    tx_power: T,
) -> Result<Sample<T>> {
    require_diffusion(actor)?;
    let (x_t, noise) = draw_chain_noise(schedule, actor.config().action_dim, batch, mode, seed);
    run_recorded(actor, schedule, states, batch, x_t, noise, tx_power)
}

/// Single-state convenience around [`sample_actions`].
pub fn sample_action<T: Scalar>(
    actor: &ActorParameters<T>,
    schedule: &DiffusionSchedule,
    state: &[T],
    mode: SamplerMode,
    seed: u64,
    tx_power: T,
) -> Result<(BeamformingAction<T>, ChainRecord<T>)> {
    let mut s = sample_actions(actor, schedule, state, 1, mode, seed, tx_power)?;
    Ok((s.actions.remove(0), s.record.take().expect("diffusion sample has a record")))
}

impl<T: Scalar> ChainRecord<T> {
    /// Reruns the chain from the recorded start and noise.
    pub fn replay(
        &self,
        actor: &ActorParameters<T>,
        schedule: &DiffusionSchedule,
        states: &[T],
        tx_power: T,
    ) -> Result<Sample<T>> {
        let start = self
            .states
            .first()
            .ok_or_else(|| Error::shape("empty chain record"))?
            .clone();
        run_recorded(actor, schedule, states, self.batch, start, self.noise.clone(), tx_power)
    }
}

/// Value and actor gradients of a policy objective.
#[derive(Debug, Clone)]
pub struct ActorLoss<T> {
    pub loss: T,
    /// Mean of `min(q1, q2)` at the sampled actions.
    pub q_mean: T,
    pub balance: Option<T>,
    pub grads: Vec<Vec<T>>,
    pub report: Option<GateReport>,
}

/// `-mean min(q1, q2)` at exploratory chain samples, plus the weighted MoE
/// balance penalty. The critic enters as constants.
pub fn actor_loss<T: Scalar>(
    actor: &ActorParameters<T>,
    critic: &CriticParameters<T>,
    schedule: &DiffusionSchedule,
    states: &[T],
    batch: usize,
    seed: u64,
) -> Result<ActorLoss<T>> {
    require_diffusion(actor)?;
    check_states(actor, states, batch)?;
    let (x_t, noise) = draw_chain_noise(
        schedule,
        actor.config().action_dim,
        batch,
        SamplerMode::Exploratory,
        seed,
    );
    let mut g = Graph::new();
    let p = actor.bind(&mut g, true)?;
    let cp = critic.bind(&mut g, false)?;
    let s = g.constant(states.to_vec(), &[batch, actor.config().state_dim])?;
    let chain = chain_nodes(&mut g, actor, &p, schedule, s, x_t, &noise)?;
    let (q1, q2) = critic.forward(&mut g, &cp, s, chain.squashed)?;
    let q = g.minimum(q1, q2)?;
    let q_mean = g.mean(q)?;
    let mut loss = g.neg(q_mean)?;
    if let Some(b) = chain.balance {
        let weighted = g.scale(b, T::of(BALANCE_COEF))?;
        loss = g.add(loss, weighted)?;
    }
    g.backward(loss)?;
    Ok(ActorLoss {
        loss: g.item(loss)?,
        q_mean: g.item(q_mean)?,
        balance: chain.balance.map(|b| g.item(b)).transpose()?,
        grads: actor.params.gradients(&g, &p)?,
        report: chain.report,
    })
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rate::{rate, smoothed_asr_node, smoothed_penalized_node, ActionNodes, HINGE_TEMPERATURE};
use super::BeamformingAction;
use crate::channel::{perturb, ChannelPair, Scenario, UncertaintyModel};
use crate::error::{Error, Result};
use crate::gradcore::{Graph, NodeRef, ReduceOp};
use crate::rng::{derive_seed, stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    Deterministic,
    Stochastic,
    Chance,
    Robust,
}

impl Paradigm {
    pub const ALL: [Paradigm; 4] = [
        Paradigm::Deterministic,
        Paradigm::Stochastic,
        Paradigm::Chance,
        Paradigm::Robust,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Paradigm::Deterministic => "deterministic",
            Paradigm::Stochastic => "stochastic",
            Paradigm::Chance => "chance",
            Paradigm::Robust => "robust",
        }
    }
}

impl std::str::FromStr for Paradigm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Paradigm::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config("paradigm", format!("unknown paradigm {s:?}")))
    }
}

fn default_c_eve() -> f64 {
    3.0
}
fn default_p_eve() -> f64 {
    0.70
}
fn default_train_samples() -> usize {
    64
}
fn default_eval_samples() -> usize {
    256
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParadigmConfig {
    pub paradigm: Paradigm,
    /// Eavesdropper capacity threshold, bps/Hz.
    #[serde(default = "default_c_eve")]
    pub c_eve: f64,
    /// Required probability that the eavesdropper stays under `c_eve`.
    #[serde(default = "default_p_eve")]
    pub p_eve: f64,
    #[serde(default = "default_train_samples")]
    pub mc_samples_train: usize,
    #[serde(default = "default_eval_samples")]
    pub mc_samples_eval: usize,
}

impl ParadigmConfig {
    pub fn new(paradigm: Paradigm) -> Self {
        Self {
            paradigm,
            c_eve: default_c_eve(),
            p_eve: default_p_eve(),
            mc_samples_train: default_train_samples(),
            mc_samples_eval: default_eval_samples(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_eve > 0.0 && self.p_eve < 1.0) {
            return Err(Error::config("p_eve", format!("must lie in (0, 1), got {}", self.p_eve)));
        }
        if !(self.c_eve > 0.0) || !self.c_eve.is_finite() {
            return Err(Error::config("c_eve", format!("must be positive, got {}", self.c_eve)));
        }
        if self.mc_samples_train == 0 {
            return Err(Error::config("mc_samples_train", "must be at least 1"));
        }
        if self.mc_samples_eval == 0 {
            return Err(Error::config("mc_samples_eval", "must be at least 1"));
        }
        Ok(())
    }
}

/// Exact per-sample quantities, bps/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOutcome {
    pub legit_rate: f64,
    pub eve_rate: f64,
    pub asr: f64,
    pub excess: f64,
    pub penalized: f64,
}

impl SampleOutcome {
    pub fn evaluate<T: Scalar>(
        pair: &ChannelPair<T>,
        action: &BeamformingAction<T>,
        c_eve: f64,
        noise_power: T,
    ) -> Result<Self> {
        let legit_rate = rate(&pair.h_b, action, noise_power)?.as_f64();
        let eve_rate = rate(&pair.h_e, action, noise_power)?.as_f64();
        Ok(Self::from_rates(legit_rate, eve_rate, c_eve))
    }

    pub fn from_rates(legit_rate: f64, eve_rate: f64, c_eve: f64) -> Self {
        let asr = (legit_rate - eve_rate).max(0.0);
        let excess = (eve_rate - c_eve).max(0.0);
        Self {
            legit_rate,
            eve_rate,
            asr,
            excess,
            penalized: asr - excess,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub reward: f64,
    pub mean_asr: f64,
    pub mean_excess: f64,
    pub satisfaction_prob: f64,
    pub worst_sample_reward: f64,
}

impl RewardBreakdown {
    pub const CSV_HEADER: &'static str =
        "paradigm,reward,mean_asr,satisfaction_prob,worst_sample_reward";

    pub fn csv_row(&self, paradigm: Paradigm) -> String {
        format!(
            "{},{},{},{},{}",
            paradigm.name(),
            self.reward,
            self.mean_asr,
            self.satisfaction_prob,
            self.worst_sample_reward
        )
    }
}

/// Reduce per-sample outcomes to the paradigm's reward. Reduction runs in
/// sample index order.
pub fn aggregate(paradigm: Paradigm, cfg: &ParadigmConfig, samples: &[SampleOutcome]) -> Result<RewardBreakdown> {
    if samples.is_empty() {
        return Err(Error::config("mc_samples", "need at least one sample"));
    }
    let n = samples.len() as f64;
    let mean = |f: fn(&SampleOutcome) -> f64| samples.iter().map(f).sum::<f64>() / n;
    let mean_asr = mean(|s| s.asr);
    let mean_excess = mean(|s| s.excess);
    let mean_penalized = mean(|s| s.penalized);
    let satisfied = samples.iter().filter(|s| s.eve_rate <= cfg.c_eve).count();
    let satisfaction_prob = satisfied as f64 / n;
    let worst = samples
        .iter()
        .map(|s| s.penalized)
        .fold(f64::INFINITY, f64::min);
    let reward = match paradigm {
        Paradigm::Deterministic => samples[0].penalized,
        Paradigm::Stochastic => mean_penalized,
        Paradigm::Chance => {
            if satisfaction_prob >= cfg.p_eve {
                mean_asr
            } else {
                mean_asr - mean_excess
            }
        }
        Paradigm::Robust => worst,
    };
    Ok(RewardBreakdown {
        reward,
        mean_asr,
        mean_excess,
        satisfaction_prob,
        worst_sample_reward: worst,
    })
}

/// The uncertainty realizations scored for one action. Sample `i` uses a
/// seed derived from `(seed, i)`, so equal seeds give equal sample sets
/// regardless of how the work is scheduled.
pub fn sample_set<T: Scalar>(
    nominal: &ChannelPair<T>,
    scenario: &Scenario,
    u: &UncertaintyModel,
    samples: usize,
    seed: u64,
) -> Result<Vec<ChannelPair<T>>> {
    (0..samples)
        .into_par_iter()
        .map(|i| perturb(nominal, scenario, u, derive_seed(seed, stream::MC_SAMPLE, i as u64)))
        .collect()
}

/// Paradigm reward of `action` around `nominal`. The deterministic
/// paradigm scores the nominal pair alone; the others draw `samples`
/// realizations.
pub fn paradigm_reward<T: Scalar>(
    nominal: &ChannelPair<T>,
    scenario: &Scenario,
    u: &UncertaintyModel,
    action: &BeamformingAction<T>,
    cfg: &ParadigmConfig,
    samples: usize,
    seed: u64,
) -> Result<RewardBreakdown> {
    if samples == 0 {
        return Err(Error::config("mc_samples", "need at least one sample"));
    }
    let noise = T::of(scenario.noise_power);
    if cfg.paradigm == Paradigm::Deterministic {
        let s = SampleOutcome::evaluate(nominal, action, cfg.c_eve, noise)?;
        return aggregate(cfg.paradigm, cfg, &[s]);
    }
    let outcomes: Vec<SampleOutcome> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let pair = perturb(nominal, scenario, u, derive_seed(seed, stream::MC_SAMPLE, i as u64))?;
            SampleOutcome::evaluate(&pair, action, cfg.c_eve, noise)
        })
        .collect::<Result<_>>()?;
    aggregate(cfg.paradigm, cfg, &outcomes)
}

/// Differentiable paradigm reward over a fixed sample set, with softplus
/// hinges in place of exact ones. The chance branch is selected from the
/// exact satisfaction frequency.
pub fn paradigm_reward_node<T: Scalar>(
    g: &mut Graph<T>,
    pairs: &[ChannelPair<T>],
    action: &ActionNodes,
    action_values: &BeamformingAction<T>,
    cfg: &ParadigmConfig,
    noise_power: T,
) -> Result<NodeRef> {
    if pairs.is_empty() {
        return Err(Error::config("mc_samples", "need at least one sample"));
    }
    let c_eve = T::of(cfg.c_eve);
    let per_sample = |g: &mut Graph<T>, use_asr: bool| -> Result<Vec<NodeRef>> {
        pairs
            .iter()
            .map(|p| {
                if use_asr {
                    smoothed_asr_node(g, p, action, noise_power)
                } else {
                    smoothed_penalized_node(g, p, action, c_eve, noise_power)
                }
            })
            .collect()
    };
    let reduce = |g: &mut Graph<T>, nodes: &[NodeRef], op: ReduceOp| -> Result<NodeRef> {
        let col: Vec<NodeRef> = nodes
            .iter()
            .map(|&n| g.reshape(n, &[1, 1]))
            .collect::<Result<_>>()?;
        let stacked = g.concat_rows(&col)?;
        g.reduce(op, stacked, None)
    };
    match cfg.paradigm {
        Paradigm::Deterministic => {
            let n = per_sample(g, false)?;
            Ok(n[0])
        }
        Paradigm::Stochastic => {
            let n = per_sample(g, false)?;
            reduce(g, &n, ReduceOp::Mean)
        }
        Paradigm::Robust => {
            let n = per_sample(g, false)?;
            reduce(g, &n, ReduceOp::Min)
        }
        Paradigm::Chance => {
            let satisfied = pairs
                .iter()
                .map(|p| rate(&p.h_e, action_values, noise_power).map(|c| c.as_f64() <= cfg.c_eve))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .filter(|&s| s)
                .count();
            let prob = satisfied as f64 / pairs.len() as f64;
            let n = per_sample(g, prob >= cfg.p_eve)?;
            reduce(g, &n, ReduceOp::Mean)
        }
    }
}

/// Upper bound of the smoothed hinge at zero margin: `t ln 2`.
pub fn hinge_smoothing_bound() -> f64 {
    HINGE_TEMPERATURE * std::f64::consts::LN_2
}

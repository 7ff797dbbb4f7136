use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{Scenario, UncertaintyModel};
use crate::diffusion::{DiffusionSchedule, DEFAULT_ENTROPY_COEF};
use crate::nets::{ActorConfig, ActorVariant, CriticConfig};
use crate::secrecy::{action_len, Paradigm, ParadigmConfig};
use crate::{Error, Result};

/// Half-widths of the box UAV and eavesdropper positions are drawn from,
/// centered on the configured scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Randomization {
    pub horizontal_m: f64,
    pub vertical_m: f64,
}

impl Default for Randomization {
    fn default() -> Self {
        Self {
            horizontal_m: 20.0,
            vertical_m: 30.0,
        }
    }
}

/// Fixed divisors applied to state features. Channel entries are divided
/// by `channel`; each uncertainty sigma by its default value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateScale {
    pub channel: f64,
    pub position_sigma: f64,
    pub csi_error_sigma: f64,
    pub aoa_sigma: f64,
}

impl Default for StateScale {
    fn default() -> Self {
        let u = UncertaintyModel::default();
        Self {
            // amplitude of one channel entry at the default UAV distance
            channel: 6e-5,
            position_sigma: u.position_sigma,
            csi_error_sigma: u.csi_error_sigma,
            aoa_sigma: u.aoa_sigma,
        }
    }
}

/// Layer sizes shared by all actor variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkShape {
    pub model_dim: usize,
    pub n_heads: usize,
    pub n_blocks: usize,
    pub ffn_dim: usize,
    pub n_experts: usize,
    pub top_k: usize,
    pub mlp_hidden: usize,
    pub critic_hidden: usize,
}

impl Default for NetworkShape {
    fn default() -> Self {
        let a = ActorConfig::full_size(ActorVariant::MoeTransformerDiffusion);
        Self {
            model_dim: a.model_dim,
            n_heads: a.n_heads,
            n_blocks: a.n_blocks,
            ffn_dim: a.ffn_dim,
            n_experts: a.n_experts,
            top_k: a.top_k,
            mlp_hidden: a.mlp_hidden,
            critic_hidden: 256,
        }
    }
}

/// Metrics CSV columns available for expert fractions.
pub const MAX_LOGGED_EXPERTS: usize = 4;
/// Gradient-norm ceiling used when `clip_gradients` is set.
pub const GRAD_CLIP_NORM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub soft_update_tau: f64,
    pub paradigm: ParadigmConfig,
    pub actor_variant: ActorVariant,
    pub master_seed: u64,
    pub scenario: Scenario,
    pub uncertainty: UncertaintyModel,
    pub randomization: Randomization,
    pub schedule: DiffusionSchedule,
    pub network: NetworkShape,
    pub state_scale: StateScale,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub final_eval_episodes: usize,
    pub entropy_coef: f64,
    pub clip_gradients: bool,
    /// When false the `iter_seconds` column is left empty so that
    /// metrics files from identical runs compare byte for byte.
    pub record_wall_clock: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 1e-4,
            batch_size: 64,
            replay_capacity: 10_000,
            soft_update_tau: 0.005,
            paradigm: ParadigmConfig::new(Paradigm::Stochastic),
            actor_variant: ActorVariant::MoeTransformerDiffusion,
            master_seed: 0,
            scenario: Scenario::default(),
            uncertainty: UncertaintyModel::default(),
            randomization: Randomization::default(),
            schedule: DiffusionSchedule::default(),
            network: NetworkShape::default(),
            state_scale: StateScale::default(),
            eval_every: 20,
            eval_episodes: 16,
            final_eval_episodes: 64,
            entropy_coef: DEFAULT_ENTROPY_COEF,
            clip_gradients: false,
            record_wall_clock: true,
        }
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {v}")))
    }
}

impl TrainingConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.batch_size > self.replay_capacity {
            return Err(Error::config(
                "batch_size",
                format!("{} exceeds replay_capacity {}", self.batch_size, self.replay_capacity),
            ));
        }
        if !(self.soft_update_tau > 0.0 && self.soft_update_tau <= 1.0) {
            return Err(Error::config("soft_update_tau", "must lie in (0, 1]"));
        }
        self.paradigm.validate()?;
        self.scenario.validate()?;
        self.uncertainty.validate()?;
        self.schedule.validate()?;
        let r = self.randomization;
        if !(r.horizontal_m >= 0.0 && r.horizontal_m.is_finite()) {
            return Err(Error::config("randomization.horizontal_m", "must be finite and non-negative"));
        }
        if !(r.vertical_m >= 0.0 && r.vertical_m.is_finite()) {
            return Err(Error::config("randomization.vertical_m", "must be finite and non-negative"));
        }
        let lowest = self.scenario.uav_position[2].min(self.scenario.eve_position[2]);
        let highest = self.scenario.uav_position[2].max(self.scenario.eve_position[2]);
        if lowest - r.vertical_m <= 0.0 || highest + r.vertical_m > crate::channel::MAX_ALTITUDE_M {
            return Err(Error::config(
                "randomization.vertical_m",
                "jittered altitudes must stay within (0, 1000] m",
            ));
        }
        positive("state_scale.channel", self.state_scale.channel)?;
        positive("state_scale.position_sigma", self.state_scale.position_sigma)?;
        positive("state_scale.csi_error_sigma", self.state_scale.csi_error_sigma)?;
        positive("state_scale.aoa_sigma", self.state_scale.aoa_sigma)?;
        if self.eval_every == 0 {
            return Err(Error::config("eval_every", "must be at least 1"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes", "must be at least 1"));
        }
        if self.final_eval_episodes == 0 {
            return Err(Error::config("final_eval_episodes", "must be at least 1"));
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return Err(Error::config("entropy_coef", "must be finite and non-negative"));
        }
        if self.network.n_experts > MAX_LOGGED_EXPERTS {
            return Err(Error::config(
                "network.n_experts",
                format!("metrics log at most {MAX_LOGGED_EXPERTS} experts"),
            ));
        }
        if self.network.critic_hidden == 0 {
            return Err(Error::config("network.critic_hidden", "must be positive"));
        }
        self.actor_config().validate().map_err(|e| match e {
            Error::Config { field, reason } => Error::Config {
                field: format!("network.{field}"),
                reason,
            },
            other => other,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.scenario.bs_array.elements()
    }

    /// Re/im of both channels plus three uncertainty features.
    pub fn state_dim(&self) -> usize {
        let s = &self.scenario;
        let n_tx = self.n_tx();
        2 * (s.uav_array.elements() + s.eve_array.elements()) * n_tx + 3
    }

    pub fn actor_config(&self) -> ActorConfig {
        let n = self.network;
        ActorConfig {
            variant: self.actor_variant,
            state_dim: self.state_dim(),
            action_dim: action_len(self.n_tx()),
            model_dim: n.model_dim,
            n_heads: n.n_heads,
            n_blocks: n.n_blocks,
            ffn_dim: n.ffn_dim,
            n_experts: n.n_experts,
            top_k: n.top_k,
            mlp_hidden: n.mlp_hidden,
            steps: self.schedule.steps,
        }
    }

    pub fn critic_config(&self) -> CriticConfig {
        CriticConfig {
            state_dim: self.state_dim(),
            action_dim: action_len(self.n_tx()),
            hidden: self.network.critic_hidden,
        }
    }
}

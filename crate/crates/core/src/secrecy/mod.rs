//! Beamforming objectives: legitimate and eavesdropper rates under
//! artificial noise, the achievable secrecy rate, and the paradigm rewards
//! (deterministic, stochastic, chance-constrained, robust).

mod action;
mod paradigm;
mod rate;

pub use action::{action_len, project_power, BeamformingAction};
pub use paradigm::{
    aggregate, hinge_smoothing_bound, paradigm_reward, paradigm_reward_node, sample_set,
    Paradigm, ParadigmConfig, RewardBreakdown, SampleOutcome,
};
pub use rate::{
    asr, penalized_reward, project_power_node, rate, rate_node, sinr, smoothed_asr_node,
    smoothed_penalized_node, ActionNodes, HINGE_TEMPERATURE,
};

//! One-step episodic actor-critic training, evaluation, latency timing,
//! and paired comparisons.

mod compare;
mod config;
mod metrics;
mod optim;
mod replay;
mod state;
pub mod stats;
mod train;

pub use compare::{compare, compare_with, tabulate, validate_entries, CompareEntry, Comparison, ComparisonRow, RowKind, RunResult};
pub use config::{NetworkShape, Randomization, StateScale, TrainingConfig, GRAD_CLIP_NORM, MAX_LOGGED_EXPERTS};
pub use metrics::{MetricsLog, MetricsRow, MetricsSummary, METRICS_HEADER};
pub use optim::{clip_grad_norm, grad_norm, Adam};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use state::{make_state, randomize_scenario};
pub use train::{
    act, critic_update, curve_eval_seed, evaluate, evaluate_policy, final_eval_seed, measure_latency, policy_loss,
    train, train_with, EvaluationReport, LatencyReport, Policy, TrainOutcome, Trainer, LATENCY_WARMUP,
    REWARD_WINDOW,
};

#[cfg(test)]
mod tests;

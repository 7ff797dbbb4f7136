//! Network building blocks, the actor variants, and the twin critic.
//!
//! Parameters live in a [`ParamSet`] outside any graph. A forward pass binds
//! them into a [`Graph`](crate::gradcore::Graph), either as trainable leaves
//! or as constants, and returns node handles.

mod actor;
mod critic;
mod layers;
mod params;

pub use actor::{step_encoding, ActorConfig, ActorOutput, ActorParameters, ActorVariant, LOG_STD_MAX, LOG_STD_MIN};
pub use critic::{CriticConfig, CriticParameters};
pub use layers::{
    top_k_indices, AttentionOutput, GateReport, LayerNorm, LinearLayer, MoELayer, MoEOutput, Mlp,
    MultiHeadAttention,
};
pub use params::{Bound, Builder, Init, ParamSet, Tensor};

#[cfg(test)]
mod tests;

pub mod channel;
pub mod diffusion;
pub mod error;
pub mod gradcore;
pub mod nets;
pub mod rng;
pub mod scalar;
pub mod secrecy;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision instantiations used by the trainer and the CLI.
pub type Actor = nets::ActorParameters<f64>;
pub type Critic = nets::CriticParameters<f64>;
pub type Channels = channel::ChannelPair<f64>;
pub type Action = secrecy::BeamformingAction<f64>;
pub type Matrix = channel::ComplexMatrix<f64>;

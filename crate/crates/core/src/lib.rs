//! Controllable agents for 9-player Werewolf.
//!
//! The crate bundles a rules engine, per-seat Bayesian role beliefs, a masked
//! policy/value network with a hand-written backward pass, decision-chain
//! win-rate statistics, the win-rate-constrained reward, and a PPO self-play
//! trainer that conditions the policy on a target win rate.

pub mod agents;
pub mod chains;
pub mod config;
pub mod discussor;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod policy;
pub mod predictor;
pub mod rewards;
pub mod sim;
pub mod stats;
pub mod train;

pub use engine::{Action, ActionMask, Camp, Event, GameLog, GameState, Phase, PlayerId, Role};
pub use error::{ConfigError, DataError, EngineError, PolicyError, ReplayError, TrainError};

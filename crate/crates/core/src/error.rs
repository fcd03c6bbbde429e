use std::io;

use thiserror::Error;

use crate::engine::{Action, PlayerId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("malformed chain string `{0}`")]
    MalformedChain(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("invalid game config: {0}")]
    InvalidConfig(String),
    #[error("player {player} may not play `{action}` now")]
    IllegalAction { player: PlayerId, action: Action },
    #[error("no decision supplied for acting player {0}")]
    MissingDecision(PlayerId),
    #[error("player {0} is not asked to act in this phase")]
    UnexpectedDecision(PlayerId),
    #[error("invalid speech by player {player}: {reason}")]
    InvalidSpeech { player: PlayerId, reason: String },
    #[error("the game is already over")]
    GameOver,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("log has an empty event history")]
    EmptyHistory,
    #[error("role assignment does not match the seed")]
    RoleMismatch,
    #[error("replay diverged at event {index}: log has `{expected}`, rules produce `{found}`")]
    Divergence {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("log ends before the game is over (after {0} events)")]
    Truncated(usize),
    #[error("final outcome differs from the log: {0}")]
    Outcome(String),
    #[error("engine rejected replayed decision at event {index}: {source}")]
    Engine {
        index: usize,
        #[source]
        source: EngineError,
    },
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("private knowledge is inconsistent: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("every action is masked")]
    AllMasked,
    #[error("unknown verb token `{0}`")]
    UnknownVerb(String),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at wave {wave}, epoch {epoch}: {detail}")]
    NonFinite {
        wave: usize,
        epoch: usize,
        detail: String,
    },
    #[error("environment rejected a step in game with seed {game}: {source}")]
    Env {
        game: u64,
        #[source]
        source: EngineError,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum DiscussError {
    #[error("template `{0}` is missing")]
    MissingTemplate(String),
    #[error("cannot parse line `{0}`")]
    Unparseable(String),
    #[error("external generator: {0}")]
    External(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

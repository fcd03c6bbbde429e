//! Deterministic 9-player Werewolf rules engine.
//!
//! Night order is wolf kill, seer check, witch. Deaths are announced at dawn,
//! a hunter killed by wolves or by vote shoots immediately, and the day ends
//! with a plurality vote where ties eliminate nobody. Wolves win once every
//! plain villager or every special role is dead; the village wins once every
//! wolf is dead. Games that reach the round limit go to the wolves.

mod action;
mod log;
mod state;
mod types;

pub use action::{Action, ActionMask, ACTION_SPACE, PASS_INDEX};
pub use log::{
    is_visible, object_role, read_jsonl, replay, replay_with, seer_checks_from, visible_events,
    write_jsonl, GameLog, StateView,
};
pub use state::{
    decision_event, legal_actions, new_game, step, win_condition, winner, GameConfig, GameState,
    DEFAULT_MAX_ROUNDS, STANDARD_ROLES,
};
pub use types::{
    Camp, Event, Object, Phase, PlayerId, Role, Verb, NUM_PLAYERS, NUM_ROLES, SYSTEM,
};

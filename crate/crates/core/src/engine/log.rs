use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::action::Action;
use super::state::{GameConfig, GameState};
use super::types::{Camp, Event, Object, Phase, PlayerId, Role, Verb, NUM_PLAYERS, SYSTEM};
use crate::error::{DataError, ReplayError};

/// Persisted record of a finished game, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameLog {
    pub seed: u64,
    pub roles: Vec<Role>,
    pub events: Vec<Event>,
    pub winner: Camp,
    pub alive_at_end: Vec<bool>,
}

impl GameLog {
    /// `None` while the game is still running.
    pub fn from_state(state: &GameState) -> Option<GameLog> {
        Some(GameLog {
            seed: state.rng_seed,
            roles: state.roles.to_vec(),
            events: state.history.clone(),
            winner: state.winner()?,
            alive_at_end: state.alive.to_vec(),
        })
    }

    pub fn role(&self, p: PlayerId) -> Option<Role> {
        self.roles.get(p as usize).copied()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("game log serializes")
    }

    pub fn from_json_line(line: &str) -> Result<GameLog, serde_json::Error> {
        serde_json::from_str(line)
    }
}

pub fn write_jsonl<'a, W: Write>(
    mut w: W,
    logs: impl IntoIterator<Item = &'a GameLog>,
) -> std::io::Result<()> {
    for log in logs {
        writeln!(w, "{}", log.to_json_line())?;
    }
    Ok(())
}

/// Reads a JSONL corpus. Blank lines are ignored; unreadable lines are
/// returned as errors in place so callers can count or abort.
pub fn read_jsonl<R: BufRead>(r: R) -> impl Iterator<Item = Result<GameLog, DataError>> {
    r.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(DataError::Io(e))),
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(GameLog::from_json_line(&l).map_err(|e| DataError::Malformed {
            line: i + 1,
            msg: e.to_string(),
        })),
    })
}

/// Whether `observer` can see `event`: night actions are private to the
/// acting role, everything else is public.
pub fn is_visible(event: &Event, observer: PlayerId, roles: &[Role]) -> bool {
    if event.subject == SYSTEM {
        return true;
    }
    let role = roles[observer as usize];
    match event.phase {
        Phase::NightWolfKill => role == Role::Werewolf,
        Phase::NightSeerCheck => role == Role::Seer,
        Phase::NightWitch => role == Role::Witch,
        _ => true,
    }
}

/// What one seat knows at a decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct StateView {
    pub observer: PlayerId,
    pub role: Role,
    pub round: u32,
    pub phase: Phase,
    pub alive: [bool; NUM_PLAYERS],
    pub events: Vec<Event>,
    /// Teammates for wolves, always including the observer itself.
    pub known_roles: Vec<(PlayerId, Role)>,
    /// Seer's own checks: `(target, is_werewolf)`.
    pub seer_checks: Vec<(PlayerId, bool)>,
    /// Tonight's wolf target; only the witch sees it, during her phase.
    pub night_victim: Option<PlayerId>,
    pub antidote_available: bool,
    pub poison_available: bool,
}

impl StateView {
    pub fn new(state: &GameState, observer: PlayerId) -> StateView {
        let role = state.role(observer);
        let events: Vec<Event> = state
            .history
            .iter()
            .filter(|e| is_visible(e, observer, &state.roles))
            .copied()
            .collect();
        let known_roles = if role == Role::Werewolf {
            state.players_with(Role::Werewolf).map(|p| (p, Role::Werewolf)).collect()
        } else {
            vec![(observer, role)]
        };
        let seer_checks = if role == Role::Seer {
            seer_checks_from(&events, observer, &state.roles)
        } else {
            Vec::new()
        };
        let is_witch = role == Role::Witch;
        StateView {
            observer,
            role,
            round: state.round,
            phase: state.phase,
            alive: state.alive,
            events,
            known_roles,
            seer_checks,
            night_victim: if is_witch && state.phase == Phase::NightWitch {
                state.pending_kill
            } else {
                None
            },
            antidote_available: is_witch && state.witch_antidote_available,
            poison_available: is_witch && state.witch_poison_available,
        }
    }

    pub fn latest_check(&self) -> Option<(PlayerId, bool)> {
        self.seer_checks.last().copied()
    }
}

pub fn seer_checks_from(events: &[Event], seer: PlayerId, roles: &[Role]) -> Vec<(PlayerId, bool)> {
    events
        .iter()
        .filter(|e| e.subject == seer && e.verb == Verb::Check && e.phase == Phase::NightSeerCheck)
        .filter_map(|e| e.object.player())
        .map(|t| (t, roles[t as usize] == Role::Werewolf))
        .collect()
}

fn decode_decision(e: &Event) -> Option<Action> {
    let target = e.object.player();
    Some(match e.verb {
        Verb::Kill => Action::Kill(target?),
        Verb::Check => Action::Check(target?),
        Verb::Save => Action::Save(target?),
        Verb::Poison => Action::Poison(target?),
        Verb::Vote => Action::Vote(target?),
        Verb::Shoot => Action::Shoot(target?),
        Verb::Accuse => Action::Accuse(target?),
        Verb::Pass => Action::Pass,
        Verb::Claim | Verb::Die => return None,
    })
}

/// Re-executes a log from its seed and checks that the rules reproduce every
/// event and the recorded outcome.
pub fn replay(log: &GameLog) -> Result<GameState, ReplayError> {
    replay_with(log, &GameConfig::default())
}

pub fn replay_with(log: &GameLog, config: &GameConfig) -> Result<GameState, ReplayError> {
    if log.events.is_empty() {
        return Err(ReplayError::EmptyHistory);
    }
    let mut state = GameState::new(log.seed, config).map_err(|source| ReplayError::Engine {
        index: 0,
        source,
    })?;
    if state.roles.as_slice() != log.roles.as_slice() {
        return Err(ReplayError::RoleMismatch);
    }
    let events = &log.events;
    let mut pos = 0;
    let diverge = |index: usize, expected: Option<&Event>, found: String| ReplayError::Divergence {
        index,
        expected: expected.map_or_else(|| "end of log".to_string(), |e| e.to_string()),
        found,
    };
    while !state.is_over() {
        let start = pos;
        let actors = state.acting_players();
        let mut decisions = BTreeMap::new();
        let mut speech: BTreeMap<PlayerId, Vec<Event>> = BTreeMap::new();
        if state.phase == Phase::DayDiscuss {
            while let Some(e) = events.get(pos) {
                if e.phase != Phase::DayDiscuss || e.round != state.round || e.subject == SYSTEM {
                    break;
                }
                speech.entry(e.subject).or_default().push(*e);
                pos += 1;
            }
            for &p in &actors {
                let said = speech.get(&p).ok_or_else(|| {
                    diverge(pos, events.get(pos), format!("discussion by player {p}"))
                })?;
                let action = said
                    .iter()
                    .find(|e| e.verb == Verb::Accuse)
                    .and_then(|e| e.object.player())
                    .map_or(Action::Pass, Action::Accuse);
                decisions.insert(p, action);
            }
        } else {
            for &p in &actors {
                let e = events.get(pos);
                let action = e
                    .filter(|e| e.subject == p && e.phase == state.phase && e.round == state.round)
                    .and_then(decode_decision)
                    .ok_or_else(|| {
                        diverge(pos, e, format!("decision by player {p} in {}", state.phase))
                    })?;
                decisions.insert(p, action);
                pos += 1;
            }
        }
        let produced = state
            .apply_with_speech(&decisions, &speech)
            .map_err(|source| ReplayError::Engine { index: start, source })?;
        for (i, e) in produced.iter().enumerate() {
            let idx = start + i;
            if events.get(idx) != Some(e) {
                return Err(diverge(idx, events.get(idx), e.to_string()));
            }
        }
        pos = start + produced.len();
    }
    if pos != events.len() {
        return Err(diverge(pos, events.get(pos), "game over".to_string()));
    }
    if state.winner() != Some(log.winner) {
        return Err(ReplayError::Outcome(format!(
            "winner {:?} vs logged {}",
            state.winner(),
            log.winner
        )));
    }
    if state.alive.as_slice() != log.alive_at_end.as_slice() {
        return Err(ReplayError::Outcome("survivors differ".into()));
    }
    Ok(state)
}

/// Events `observer` could see, in order.
pub fn visible_events(log: &GameLog, observer: PlayerId) -> impl Iterator<Item = &Event> {
    log.events
        .iter()
        .filter(move |e| is_visible(e, observer, &log.roles))
}

pub fn object_role(log: &GameLog, o: Object) -> Option<Role> {
    o.player().and_then(|p| log.role(p))
}

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::action::{Action, ActionMask};
use super::types::{Camp, Event, Object, Phase, PlayerId, Role, Verb, NUM_PLAYERS, SYSTEM};
use crate::error::EngineError;

pub const DEFAULT_MAX_ROUNDS: u32 = 9;

/// Role multiset of the 9-player board.
pub const STANDARD_ROLES: [Role; NUM_PLAYERS] = [
    Role::Werewolf,
    Role::Werewolf,
    Role::Werewolf,
    Role::Villager,
    Role::Villager,
    Role::Villager,
    Role::Seer,
    Role::Witch,
    Role::Hunter,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub roles: Vec<Role>,
    pub max_rounds: u32,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            roles: STANDARD_ROLES.to_vec(),
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.roles.len() != NUM_PLAYERS {
            return Err(EngineError::InvalidConfig(format!(
                "expected {NUM_PLAYERS} players, got {}",
                self.roles.len()
            )));
        }
        let mut counts = [0usize; 5];
        for r in &self.roles {
            counts[r.index()] += 1;
        }
        if counts != [3, 3, 1, 1, 1] {
            return Err(EngineError::InvalidConfig(format!(
                "role counts (werewolf, villager, seer, witch, hunter) must be (3, 3, 1, 1, 1), got {counts:?}"
            )));
        }
        if self.max_rounds == 0 {
            return Err(EngineError::InvalidConfig("max_rounds must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AfterShot {
    Discuss,
    EndOfDay,
}

/// Full hidden ground truth of one game.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameState {
    pub roles: [Role; NUM_PLAYERS],
    pub alive: [bool; NUM_PLAYERS],
    pub phase: Phase,
    pub round: u32,
    pub witch_antidote_available: bool,
    pub witch_poison_available: bool,
    pub hunter_can_shoot: bool,
    pub history: Vec<Event>,
    pub rng_seed: u64,
    pub max_rounds: u32,
    /// Wolf target of the current night, visible to the witch.
    pub pending_kill: Option<PlayerId>,
    pending_shooter: Option<PlayerId>,
    after_shot: AfterShot,
    outcome: Option<Camp>,
}

/// Plurality target among `(voter, target)` ballots; `None` on a tie or no ballots.
fn plurality(targets: impl IntoIterator<Item = PlayerId>) -> (Option<PlayerId>, Vec<PlayerId>) {
    let mut counts = [0usize; NUM_PLAYERS];
    for t in targets {
        counts[t as usize] += 1;
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    if best == 0 {
        return (None, Vec::new());
    }
    let leaders: Vec<PlayerId> = (0..NUM_PLAYERS as PlayerId)
        .filter(|&p| counts[p as usize] == best)
        .collect();
    if leaders.len() == 1 {
        (Some(leaders[0]), leaders)
    } else {
        (None, leaders)
    }
}

/// Win condition on a liveness vector. Village is checked first.
pub fn win_condition(roles: &[Role; NUM_PLAYERS], alive: &[bool; NUM_PLAYERS]) -> Option<Camp> {
    let living = |pred: &dyn Fn(Role) -> bool| {
        (0..NUM_PLAYERS).any(|i| alive[i] && pred(roles[i]))
    };
    if !living(&|r| r == Role::Werewolf) {
        Some(Camp::VillageSide)
    } else if !living(&|r| r == Role::Villager) || !living(&|r| r.is_special()) {
        Some(Camp::WolfSide)
    } else {
        None
    }
}

impl GameState {
    pub fn new(seed: u64, config: &GameConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let mut roles = config.roles.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        roles.shuffle(&mut rng);
        let mut arr = [Role::Villager; NUM_PLAYERS];
        arr.copy_from_slice(&roles);
        Ok(GameState::with_roles(arr, seed, config.max_rounds))
    }

    /// Starts a game from an explicit role assignment.
    pub fn with_roles(roles: [Role; NUM_PLAYERS], seed: u64, max_rounds: u32) -> Self {
        GameState {
            roles,
            alive: [true; NUM_PLAYERS],
            phase: Phase::NightWolfKill,
            round: 1,
            witch_antidote_available: true,
            witch_poison_available: true,
            hunter_can_shoot: true,
            history: Vec::new(),
            rng_seed: seed,
            max_rounds,
            pending_kill: None,
            pending_shooter: None,
            after_shot: AfterShot::Discuss,
            outcome: None,
        }
    }

    pub fn role(&self, p: PlayerId) -> Role {
        self.roles[p as usize]
    }

    pub fn is_alive(&self, p: PlayerId) -> bool {
        (p as usize) < NUM_PLAYERS && self.alive[p as usize]
    }

    pub fn players_with(&self, role: Role) -> impl Iterator<Item = PlayerId> + '_ {
        (0..NUM_PLAYERS as PlayerId).filter(move |&p| self.roles[p as usize] == role)
    }

    pub fn alive_players(&self) -> impl Iterator<Item = PlayerId> + '_ {
        (0..NUM_PLAYERS as PlayerId).filter(move |&p| self.alive[p as usize])
    }

    fn alive_with(&self, role: Role) -> Option<PlayerId> {
        self.players_with(role).find(|&p| self.is_alive(p))
    }

    pub fn is_over(&self) -> bool {
        self.phase == Phase::GameOver
    }

    pub fn winner(&self) -> Option<Camp> {
        if self.is_over() {
            self.outcome
        } else {
            None
        }
    }

    /// The shooter during `HunterShot`: the hunter acts posthumously.
    pub fn pending_shooter(&self) -> Option<PlayerId> {
        self.pending_shooter
    }

    /// Players whose decision `step` requires, in seat order.
    pub fn acting_players(&self) -> Vec<PlayerId> {
        match self.phase {
            Phase::NightWolfKill => self
                .players_with(Role::Werewolf)
                .filter(|&p| self.is_alive(p))
                .collect(),
            Phase::NightSeerCheck => self.alive_with(Role::Seer).into_iter().collect(),
            Phase::NightWitch => self.alive_with(Role::Witch).into_iter().collect(),
            Phase::DayDiscuss | Phase::DayVote => self.alive_players().collect(),
            Phase::HunterShot => self.pending_shooter.into_iter().collect(),
            Phase::DayAnnounce | Phase::GameOver => Vec::new(),
        }
    }

    pub fn legal_actions(&self, player: PlayerId) -> ActionMask {
        let mut mask = ActionMask::none();
        if !self.acting_players().contains(&player) {
            return mask;
        }
        let others = || self.alive_players().filter(move |&p| p != player);
        match self.phase {
            Phase::NightWolfKill => {
                for p in self.alive_players() {
                    mask.allow(Action::Kill(p));
                }
                mask.allow(Action::Pass);
            }
            Phase::NightSeerCheck => {
                for p in others() {
                    mask.allow(Action::Check(p));
                }
            }
            Phase::NightWitch => {
                mask.allow(Action::Pass);
                if self.witch_antidote_available {
                    if let Some(v) = self.pending_kill.filter(|&v| v != player) {
                        mask.allow(Action::Save(v));
                    }
                }
                if self.witch_poison_available {
                    for p in others() {
                        mask.allow(Action::Poison(p));
                    }
                }
            }
            Phase::DayDiscuss => {
                for p in others() {
                    mask.allow(Action::Accuse(p));
                }
                mask.allow(Action::Pass);
            }
            Phase::DayVote => {
                for p in others() {
                    mask.allow(Action::Vote(p));
                }
                mask.allow(Action::Pass);
            }
            Phase::HunterShot => {
                for p in others() {
                    mask.allow(Action::Shoot(p));
                }
                mask.allow(Action::Pass);
            }
            Phase::DayAnnounce | Phase::GameOver => {}
        }
        mask
    }

    fn validate(
        &self,
        decisions: &BTreeMap<PlayerId, Action>,
        speech: &BTreeMap<PlayerId, Vec<Event>>,
    ) -> Result<(), EngineError> {
        if self.is_over() {
            return Err(EngineError::GameOver);
        }
        let actors = self.acting_players();
        for &p in decisions.keys() {
            if !actors.contains(&p) {
                return Err(EngineError::UnexpectedDecision(p));
            }
        }
        for &p in &actors {
            let action = *decisions.get(&p).ok_or(EngineError::MissingDecision(p))?;
            if !self.legal_actions(p).is_legal(action) {
                return Err(EngineError::IllegalAction { player: p, action });
            }
        }
        for (&p, events) in speech {
            let bad = |reason: &str| EngineError::InvalidSpeech {
                player: p,
                reason: reason.to_string(),
            };
            if self.phase != Phase::DayDiscuss {
                return Err(bad("speech outside the discussion phase"));
            }
            if !actors.contains(&p) {
                return Err(bad("speaker is not alive"));
            }
            if events.is_empty() {
                return Err(bad("empty speech"));
            }
            for e in events {
                if e.subject != p {
                    return Err(bad("event subject differs from speaker"));
                }
                let living_other = |o: Object| matches!(o, Object::Player(t) if t != p && self.is_alive(t));
                let ok = match e.verb {
                    Verb::Claim => matches!(e.object, Object::Role(_)) && e.detail.is_none(),
                    Verb::Accuse => living_other(e.object) && e.detail.is_some(),
                    Verb::Check => {
                        matches!(e.object, Object::Player(t) if t != p && (t as usize) < NUM_PLAYERS)
                            && e.detail.is_some()
                    }
                    Verb::Vote => living_other(e.object) && e.detail.is_none(),
                    Verb::Pass => e.object == Object::None && e.detail.is_none(),
                    _ => false,
                };
                if !ok {
                    return Err(bad(&format!("`{e}` is not a valid discussion act")));
                }
            }
        }
        Ok(())
    }

    /// Applies one phase worth of decisions in place and returns the events it appended.
    pub fn apply(&mut self, decisions: &BTreeMap<PlayerId, Action>) -> Result<Vec<Event>, EngineError> {
        self.apply_with_speech(decisions, &BTreeMap::new())
    }

    /// Like [`GameState::apply`], with structured discussion acts replacing the
    /// default accusation/pass events of the listed speakers.
    pub fn apply_with_speech(
        &mut self,
        decisions: &BTreeMap<PlayerId, Action>,
        speech: &BTreeMap<PlayerId, Vec<Event>>,
    ) -> Result<Vec<Event>, EngineError> {
        self.validate(decisions, speech)?;
        let start = self.history.len();
        let round = self.round;
        let phase = self.phase;
        for (&p, &action) in decisions {
            if phase == Phase::DayDiscuss {
                if let Some(events) = speech.get(&p) {
                    for e in events {
                        let mut e = *e;
                        e.round = round;
                        e.phase = phase;
                        self.history.push(e);
                    }
                    continue;
                }
            }
            self.history.push(decision_event(round, phase, p, action));
        }
        match phase {
            Phase::NightWolfKill => {
                let (_, leaders) = plurality(decisions.values().filter_map(|a| match a {
                    Action::Kill(t) => Some(*t),
                    _ => None,
                }));
                self.pending_kill = leaders.first().copied();
                self.after_wolves();
            }
            Phase::NightSeerCheck => self.after_seer(),
            Phase::NightWitch => {
                let mut saved = false;
                let mut poisoned = None;
                for a in decisions.values() {
                    match *a {
                        Action::Save(_) => {
                            self.witch_antidote_available = false;
                            saved = true;
                        }
                        Action::Poison(t) => {
                            self.witch_poison_available = false;
                            poisoned = Some(t);
                        }
                        _ => {}
                    }
                }
                self.resolve_night(saved, poisoned);
            }
            Phase::DayDiscuss => self.phase = Phase::DayVote,
            Phase::DayVote => {
                let (out, _) = plurality(decisions.values().filter_map(|a| match a {
                    Action::Vote(t) => Some(*t),
                    _ => None,
                }));
                match out {
                    Some(p) => {
                        self.kill(p, Phase::DayVote);
                        let hunter_shot = self.role(p) == Role::Hunter && self.hunter_can_shoot;
                        self.after_deaths(hunter_shot.then_some(p), AfterShot::EndOfDay);
                    }
                    None => self.end_of_day(),
                }
            }
            Phase::HunterShot => {
                self.hunter_can_shoot = false;
                self.pending_shooter = None;
                if let Some(Action::Shoot(t)) = decisions.values().next().copied() {
                    self.kill(t, Phase::HunterShot);
                }
                if let Some(w) = win_condition(&self.roles, &self.alive) {
                    self.finish(w);
                } else {
                    match self.after_shot {
                        AfterShot::Discuss => self.phase = Phase::DayDiscuss,
                        AfterShot::EndOfDay => self.end_of_day(),
                    }
                }
            }
            Phase::DayAnnounce | Phase::GameOver => unreachable!("no actors in {phase}"),
        }
        Ok(self.history[start..].to_vec())
    }

    fn after_wolves(&mut self) {
        if self.alive_with(Role::Seer).is_some() {
            self.phase = Phase::NightSeerCheck;
        } else {
            self.after_seer();
        }
    }

    fn after_seer(&mut self) {
        if self.alive_with(Role::Witch).is_some() {
            self.phase = Phase::NightWitch;
        } else {
            self.resolve_night(false, None);
        }
    }

    fn kill(&mut self, p: PlayerId, phase: Phase) {
        self.alive[p as usize] = false;
        self.history
            .push(Event::new(self.round, phase, SYSTEM, Verb::Die, Object::Player(p)));
    }

    fn resolve_night(&mut self, saved: bool, poisoned: Option<PlayerId>) {
        self.phase = Phase::DayAnnounce;
        let killed = self.pending_kill.take().filter(|_| !saved);
        let mut deaths: Vec<PlayerId> = killed.into_iter().chain(poisoned).collect();
        deaths.sort_unstable();
        deaths.dedup();
        if deaths.is_empty() {
            self.history.push(Event::new(
                self.round,
                Phase::DayAnnounce,
                SYSTEM,
                Verb::Pass,
                Object::None,
            ));
        }
        let mut shooter = None;
        for &p in &deaths {
            self.kill(p, Phase::DayAnnounce);
            if self.role(p) == Role::Hunter {
                if poisoned == Some(p) {
                    self.hunter_can_shoot = false;
                } else if self.hunter_can_shoot {
                    shooter = Some(p);
                }
            }
        }
        self.after_deaths(shooter, AfterShot::Discuss);
    }

    fn after_deaths(&mut self, shooter: Option<PlayerId>, after: AfterShot) {
        if let Some(w) = win_condition(&self.roles, &self.alive) {
            self.finish(w);
            return;
        }
        match (shooter, after) {
            (Some(h), _) => {
                self.pending_shooter = Some(h);
                self.after_shot = after;
                self.phase = Phase::HunterShot;
            }
            (None, AfterShot::Discuss) => self.phase = Phase::DayDiscuss,
            (None, AfterShot::EndOfDay) => self.end_of_day(),
        }
    }

    fn end_of_day(&mut self) {
        if self.round >= self.max_rounds {
            self.finish(Camp::WolfSide);
        } else {
            self.round += 1;
            self.phase = Phase::NightWolfKill;
        }
    }

    fn finish(&mut self, winner: Camp) {
        self.phase = Phase::GameOver;
        self.pending_shooter = None;
        self.pending_kill = None;
        self.outcome = Some(winner);
    }
}

/// Event recorded for a binding decision.
pub fn decision_event(round: u32, phase: Phase, p: PlayerId, action: Action) -> Event {
    let (verb, object) = match action {
        Action::Kill(t) => (Verb::Kill, Object::Player(t)),
        Action::Check(t) => (Verb::Check, Object::Player(t)),
        Action::Save(t) => (Verb::Save, Object::Player(t)),
        Action::Poison(t) => (Verb::Poison, Object::Player(t)),
        Action::Vote(t) => (Verb::Vote, Object::Player(t)),
        Action::Shoot(t) => (Verb::Shoot, Object::Player(t)),
        Action::Accuse(t) => {
            return Event::new(round, phase, p, Verb::Accuse, Object::Player(t))
                .with_detail(Role::Werewolf)
        }
        Action::Pass => (Verb::Pass, Object::None),
    };
    Event::new(round, phase, p, verb, object)
}

/// Pure transition: returns the successor state and the appended events.
pub fn step(
    state: &GameState,
    decisions: &BTreeMap<PlayerId, Action>,
) -> Result<(GameState, Vec<Event>), EngineError> {
    let mut next = state.clone();
    let events = next.apply(decisions)?;
    Ok((next, events))
}

pub fn new_game(seed: u64, config: &GameConfig) -> Result<GameState, EngineError> {
    GameState::new(seed, config)
}

pub fn legal_actions(state: &GameState, player: PlayerId) -> ActionMask {
    state.legal_actions(player)
}

pub fn winner(state: &GameState) -> Option<Camp> {
    state.winner()
}

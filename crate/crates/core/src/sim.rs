//! Game runner: seats scripted agents and policy nets around one engine,
//! keeps per-seat beliefs current, and routes discussion through the
//! discussor.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{random_action, Heuristic};
use crate::discussor::{make_claims, render_text, ClaimPolicy, Templates};
use crate::engine::{
    is_visible, Action, ActionMask, Camp, Event, GameConfig, GameLog, GameState, Phase, PlayerId, Role, StateView,
    Verb, NUM_PLAYERS,
};
use crate::error::EngineError;
use crate::policy::{featurize_marginals, sample_action, FeatureVector, PolicyBank};
use crate::predictor::{init_belief, private_knowledge, Belief, Fact, LikelihoodModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeatKind {
    Random,
    Heuristic(Heuristic),
    /// Index into the policy seats passed to [`play_game`].
    Policy(usize),
}

/// Who plays each role.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lineup {
    pub by_role: [SeatKind; 5],
}

impl Lineup {
    pub fn uniform(kind: SeatKind) -> Self {
        Lineup { by_role: [kind; 5] }
    }

    pub fn camps(wolves: SeatKind, village: SeatKind) -> Self {
        Lineup::groups(wolves, village, village)
    }

    pub fn groups(wolves: SeatKind, villagers: SeatKind, specials: SeatKind) -> Self {
        let mut by_role = [specials; 5];
        by_role[Role::Werewolf.index()] = wolves;
        by_role[Role::Villager.index()] = villagers;
        Lineup { by_role }
    }

    pub fn kind(&self, role: Role) -> SeatKind {
        self.by_role[role.index()]
    }
}

/// Which seats a trained policy controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlGroup {
    Wolves,
    Villagers,
    Specials,
    #[default]
    Village,
}

impl ControlGroup {
    pub fn controls(self, role: Role) -> bool {
        match self {
            ControlGroup::Wolves => role == Role::Werewolf,
            ControlGroup::Villagers => role == Role::Villager,
            ControlGroup::Specials => role.is_special(),
            ControlGroup::Village => role.camp() == Camp::VillageSide,
        }
    }

    /// The camp whose win rate the group is steered on.
    pub fn camp(self) -> Camp {
        match self {
            ControlGroup::Wolves => Camp::WolfSide,
            _ => Camp::VillageSide,
        }
    }

    /// Policy seat 0 on the controlled roles, `others` elsewhere.
    pub fn lineup(self, others: SeatKind) -> Lineup {
        let mut by_role = [others; 5];
        for r in Role::ALL {
            if self.controls(r) {
                by_role[r.index()] = SeatKind::Policy(0);
            }
        }
        Lineup { by_role }
    }
}

/// A policy seat for one game.
#[derive(Debug, Clone, Copy)]
pub struct PolicySeat<'a> {
    pub bank: &'a PolicyBank,
    pub wr_cons: f64,
    pub greedy: bool,
    /// Keep a [`StepRecord`] for every decision.
    pub record: bool,
    /// When false the net sees only the private-knowledge prior.
    pub use_predictor: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub game: GameConfig,
    pub model: LikelihoodModel,
    pub claims: ClaimPolicy,
    /// Render discussion to text alongside the log.
    pub transcript: bool,
    pub templates: Templates,
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub player: PlayerId,
    pub role: Role,
    pub seat: usize,
    pub features: FeatureVector,
    pub mask: ActionMask,
    pub action: usize,
    pub prob: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct GameRecord {
    pub log: GameLog,
    pub steps: Vec<StepRecord>,
    pub transcript: Vec<String>,
}

/// A seat's belief, fed lazily from the public history.
#[derive(Debug, Clone)]
pub struct BeliefTracker {
    pub belief: Belief,
    cursor: usize,
}

impl BeliefTracker {
    pub fn new(observer: PlayerId, roles: &[Role]) -> Self {
        let role = roles[observer as usize];
        let belief = init_belief(observer, role, &private_knowledge(observer, roles)).expect("true roles are consistent");
        BeliefTracker { belief, cursor: 0 }
    }

    /// Consumes `history[cursor..]`: visible events by others as likelihood
    /// evidence, the seer's own checks as hard facts.
    pub fn catch_up(&mut self, history: &[Event], roles: &[Role], model: &LikelihoodModel) {
        let me = self.belief.observer;
        let mut batch = Vec::new();
        for e in &history[self.cursor.min(history.len())..] {
            if !is_visible(e, me, roles) {
                continue;
            }
            if e.subject == me {
                if e.verb == Verb::Check && e.phase == Phase::NightSeerCheck {
                    if let Some(t) = e.object.player() {
                        self.flush(&mut batch, model);
                        let fact = Fact::Camp(t, roles[t as usize].camp());
                        self.belief.observe_fact(fact).expect("true check is consistent");
                    }
                }
                continue;
            }
            batch.push(*e);
        }
        self.flush(&mut batch, model);
        self.cursor = history.len();
    }

    fn flush(&mut self, batch: &mut Vec<Event>, model: &LikelihoodModel) {
        if !batch.is_empty() {
            self.belief = crate::predictor::update_batch(&self.belief, batch, model);
            batch.clear();
        }
    }
}

/// Plays one game to completion. Roles come from `seed`; seat decisions draw
/// from a separate stream of the same seed.
pub fn play_game(
    seed: u64,
    lineup: &Lineup,
    policies: &[PolicySeat<'_>],
    opts: &SimOptions,
) -> Result<GameRecord, EngineError> {
    let state = GameState::new(seed, &opts.game)?;
    play_from(state, lineup, policies, opts)
}

pub fn play_from(
    state: GameState,
    lineup: &Lineup,
    policies: &[PolicySeat<'_>],
    opts: &SimOptions,
) -> Result<GameRecord, EngineError> {
    match play_with_external(state, lineup, policies, opts, None)? {
        PlayOutcome::Finished(r) => Ok(r),
        PlayOutcome::Aborted(_) => unreachable!("no external seat"),
    }
}

/// A seat driven from outside the simulator, e.g. a human at a terminal.
pub trait ExternalSeat {
    /// Called with the seat's view and mask; `None` aborts the game.
    fn decide(&mut self, view: &StateView, belief: &Belief, mask: &ActionMask) -> Option<Action>;

    /// Every batch of events the engine produces.
    fn observe(&mut self, _state: &GameState, _produced: &[Event]) {}
}

pub enum PlayOutcome {
    Finished(GameRecord),
    /// The external seat gave up; the state is as it was left.
    Aborted(Box<GameState>),
}

/// Like [`play_from`] with one player's decisions delegated to `external`.
pub fn play_with_external(
    mut state: GameState,
    lineup: &Lineup,
    policies: &[PolicySeat<'_>],
    opts: &SimOptions,
    mut external: Option<(PlayerId, &mut dyn ExternalSeat)>,
) -> Result<PlayOutcome, EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
    rng.set_stream(1);
    let roles = state.roles;
    let kinds: Vec<SeatKind> = roles.iter().map(|&r| lineup.kind(r)).collect();
    for k in &kinds {
        if let SeatKind::Policy(i) = k {
            if *i >= policies.len() {
                return Err(EngineError::InvalidConfig(format!("lineup names policy seat {i}")));
            }
        }
    }
    let mut trackers: Vec<Option<BeliefTracker>> = vec![None; NUM_PLAYERS];
    let mut priors: Vec<Option<Belief>> = vec![None; NUM_PLAYERS];
    let mut steps = Vec::new();
    let mut transcript = Vec::new();

    while !state.is_over() {
        let acting = state.acting_players();
        let mut decisions = BTreeMap::new();
        let mut speech = BTreeMap::new();
        for &p in &acting {
            let mask = state.legal_actions(p);
            let kind = kinds[p as usize];
            let is_external = external.as_ref().is_some_and(|(x, _)| *x == p);
            if kind == SeatKind::Random && !is_external {
                decisions.insert(p, random_action(&mask, &mut rng));
                continue;
            }
            let view = StateView::new(&state, p);
            let tracker = trackers[p as usize].get_or_insert_with(|| BeliefTracker::new(p, &roles));
            tracker.catch_up(&state.history, &roles, &opts.model);
            let action = match kind {
                _ if is_external => {
                    let (_, seat) = external.as_mut().expect("external seat present");
                    match seat.decide(&view, &tracker.belief, &mask) {
                        Some(a) if mask.is_legal(a) => a,
                        Some(a) => return Err(EngineError::IllegalAction { player: p, action: a }),
                        None => return Ok(PlayOutcome::Aborted(Box::new(state))),
                    }
                }
                SeatKind::Random => unreachable!(),
                SeatKind::Heuristic(h) => h.act(&view, &tracker.belief, &mask, &mut rng),
                SeatKind::Policy(i) => {
                    let seat = &policies[i];
                    let marginals = if seat.use_predictor {
                        tracker.belief.marginals().to_vec()
                    } else {
                        priors[p as usize]
                            .get_or_insert_with(|| BeliefTracker::new(p, &roles).belief)
                            .marginals()
                            .to_vec()
                    };
                    let features = featurize_marginals(&view, &marginals, seat.wr_cons);
                    let net = seat.bank.net(roles[p as usize]);
                    let dist = net
                        .forward(&features, &mask)
                        .map_err(|e| EngineError::InvalidConfig(format!("policy forward failed: {e}")))?;
                    let idx = sample_action(&dist, &mut rng, seat.greedy);
                    if seat.record {
                        steps.push(StepRecord {
                            player: p,
                            role: roles[p as usize],
                            seat: i,
                            features,
                            mask,
                            action: idx,
                            prob: dist.probs[idx],
                            value: dist.value,
                        });
                    }
                    Action::from_index(idx).expect("index within action space")
                }
            };
            if state.phase == Phase::DayDiscuss {
                let claims = make_claims(&view, &roles, &tracker.belief, action, &opts.claims);
                if opts.transcript {
                    if let Ok(text) = render_text(&claims, &opts.templates) {
                        if !text.is_empty() {
                            transcript.push(format!("[day {}] {}", state.round, text));
                        }
                    }
                }
                speech.insert(p, claims.to_events(state.round));
            }
            decisions.insert(p, action);
        }
        let produced = state.apply_with_speech(&decisions, &speech)?;
        if let Some((_, seat)) = external.as_mut() {
            seat.observe(&state, &produced);
        }
        if opts.transcript {
            for e in produced.iter().filter(|e| e.is_system()) {
                transcript.push(e.to_string());
            }
        }
    }
    let log = GameLog::from_state(&state).expect("finished game has a log");
    Ok(PlayOutcome::Finished(GameRecord { log, steps, transcript }))
}

/// Simulates `n` games with seeds `base_seed + i`.
pub fn simulate_corpus(n: usize, base_seed: u64, lineup: &Lineup, opts: &SimOptions) -> Result<Vec<GameLog>, EngineError> {
    (0..n as u64)
        .map(|i| play_game(base_seed.wrapping_add(i), lineup, &[], opts).map(|r| r.log))
        .collect()
}

/// The mixed-skill corpus used to seed chain databases: heuristic wolves
/// (with `wolf_noise`) against heuristic village seats whose noise varies
/// per game.
pub fn mixed_corpus(n: usize, base_seed: u64, wolf_noise: f64, opts: &SimOptions) -> Result<Vec<GameLog>, EngineError> {
    const NOISE: [f64; 4] = [0.0, 0.3, 0.6, 1.0];
    (0..n as u64)
        .map(|i| {
            let mut pick = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(i));
            pick.set_stream(2);
            let noise = NOISE[pick.gen_range(0..NOISE.len())];
            let lineup = Lineup::camps(
                SeatKind::Heuristic(Heuristic::new(wolf_noise)),
                SeatKind::Heuristic(Heuristic::new(noise)),
            );
            play_game(base_seed.wrapping_add(i), &lineup, &[], opts).map(|r| r.log)
        })
        .collect()
}

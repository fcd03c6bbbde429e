//! Scripted seats: uniform-random legal play and a belief-driven heuristic.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::discussor::claimants;
use crate::engine::{Action, ActionMask, Camp, Object, Phase, PlayerId, Role, StateView, Verb};
use crate::predictor::Belief;

/// A uniformly random legal action. Panics on an empty mask.
pub fn random_action<R: Rng>(mask: &ActionMask, rng: &mut R) -> Action {
    let legal: Vec<Action> = mask.legal_actions().collect();
    *legal.choose(rng).expect("no legal action")
}

/// Scripted play from the seat's belief. With probability `noise` the seat
/// plays a random legal action instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Heuristic {
    pub noise: f64,
}

impl Default for Heuristic {
    fn default() -> Self {
        Heuristic { noise: 0.0 }
    }
}

impl Heuristic {
    pub fn new(noise: f64) -> Self {
        Heuristic { noise }
    }

    pub fn act<R: Rng>(&self, view: &StateView, belief: &Belief, mask: &ActionMask, rng: &mut R) -> Action {
        if self.noise > 0.0 && rng.gen_bool(self.noise.min(1.0)) {
            return random_action(mask, rng);
        }
        let chosen = match view.phase {
            Phase::NightWolfKill => wolf_kill(view, mask, rng),
            Phase::NightSeerCheck => seer_check(view, belief, mask, rng),
            Phase::NightWitch => witch(view, belief, mask),
            Phase::DayDiscuss => {
                if view.role == Role::Werewolf {
                    wolf_vote_target(view).map(Action::Accuse)
                } else {
                    top_suspect(view, belief).map(Action::Accuse)
                }
            }
            Phase::DayVote => {
                if view.role == Role::Werewolf {
                    wolf_vote_target(view).map(Action::Vote)
                } else {
                    top_suspect(view, belief).map(Action::Vote)
                }
            }
            Phase::HunterShot => top_suspect(view, belief).map(Action::Shoot),
            Phase::DayAnnounce | Phase::GameOver => None,
        };
        match chosen {
            Some(a) if mask.is_legal(a) => a,
            _ if mask.is_legal(Action::Pass) => Action::Pass,
            _ => random_action(mask, rng),
        }
    }
}

fn teammates(view: &StateView) -> Vec<PlayerId> {
    view.known_roles
        .iter()
        .filter(|(_, r)| *r == Role::Werewolf)
        .map(|(p, _)| *p)
        .collect()
}

fn living_others(view: &StateView) -> impl Iterator<Item = PlayerId> + '_ {
    (0..view.alive.len() as PlayerId).filter(move |&p| view.alive[p as usize] && p != view.observer)
}

/// Highest P(Werewolf) among living others not known to be friendly.
pub fn top_suspect(view: &StateView, belief: &Belief) -> Option<PlayerId> {
    let friendly = |p: PlayerId| {
        view.role.camp() == Camp::WolfSide && teammates(view).contains(&p)
    };
    living_others(view)
        .filter(|&p| !friendly(p))
        .max_by(|&a, &b| {
            belief
                .prob(a, Role::Werewolf)
                .total_cmp(&belief.prob(b, Role::Werewolf))
                .then(b.cmp(&a))
        })
}

fn wolf_kill<R: Rng>(view: &StateView, mask: &ActionMask, rng: &mut R) -> Option<Action> {
    let pack = teammates(view);
    if let Some(&seer) = claimants(view, Role::Seer)
        .iter()
        .find(|p| !pack.contains(p) && view.alive[**p as usize])
    {
        return Some(Action::Kill(seer));
    }
    let prey: Vec<PlayerId> = (0..view.alive.len() as PlayerId)
        .filter(|&p| view.alive[p as usize] && !pack.contains(&p))
        .filter(|&p| mask.is_legal(Action::Kill(p)))
        .collect();
    prey.choose(rng).map(|&p| Action::Kill(p))
}

fn seer_check<R: Rng>(view: &StateView, belief: &Belief, mask: &ActionMask, rng: &mut R) -> Option<Action> {
    let checked: Vec<PlayerId> = view.seer_checks.iter().map(|(p, _)| *p).collect();
    let pool: Vec<PlayerId> = living_others(view).filter(|p| !checked.contains(p)).collect();
    let best = pool
        .iter()
        .map(|&p| belief.prob(p, Role::Werewolf))
        .fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<PlayerId> = pool
        .into_iter()
        .filter(|&p| belief.prob(p, Role::Werewolf) >= best - 1e-12)
        .collect();
    ties.choose(rng)
        .map(|&p| Action::Check(p))
        .filter(|a| mask.is_legal(*a))
}

fn witch(view: &StateView, belief: &Belief, mask: &ActionMask) -> Option<Action> {
    if let Some(v) = view.night_victim {
        if mask.is_legal(Action::Save(v)) {
            return Some(Action::Save(v));
        }
    }
    let suspect = top_suspect(view, belief)?;
    (belief.prob(suspect, Role::Werewolf) >= 0.7).then_some(Action::Poison(suspect))
}

/// Pack vote: a living seer claimant, else the non-wolf who accused wolves
/// most often (lowest id on ties), else the lowest living non-wolf.
pub fn wolf_vote_target(view: &StateView) -> Option<PlayerId> {
    let pack = teammates(view);
    let alive_prey = |p: &PlayerId| view.alive[*p as usize] && !pack.contains(p);
    if let Some(&s) = claimants(view, Role::Seer).iter().find(|p| alive_prey(p)) {
        return Some(s);
    }
    let mut counts = vec![0usize; view.alive.len()];
    for e in &view.events {
        if e.phase == Phase::DayDiscuss && matches!(e.verb, Verb::Accuse | Verb::Check) {
            if let Object::Player(t) = e.object {
                if pack.contains(&t) && e.detail == Some(Role::Werewolf) && (e.subject as usize) < counts.len() {
                    counts[e.subject as usize] += 1;
                }
            }
        }
    }
    let prey: Vec<PlayerId> = (0..view.alive.len() as PlayerId).filter(alive_prey).collect();
    prey.iter()
        .copied()
        .max_by(|&a, &b| counts[a as usize].cmp(&counts[b as usize]).then(b.cmp(&a)))
}

//! Exact Bayesian role beliefs.
//!
//! Each observer keeps a weight per role assignment consistent with its
//! private knowledge (10080 assignments on the full board, 3360 for a plain
//! villager). Public events multiply the weights by a per-assignment
//! likelihood; marginals per player are re-derived after every update.

use std::collections::HashSet;
use std::hash::Hash;
use std::sync::{Arc, OnceLock};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Camp, Event, Object, Phase, PlayerId, Role, Verb, NUM_ROLES, STANDARD_ROLES};
use crate::error::PredictorError;

/// All distinct seatings of a role multiset.
#[derive(Debug, PartialEq)]
pub struct AssignmentSpace {
    n_players: usize,
    roles: Vec<Role>,
    flat: Vec<Role>,
}

impl AssignmentSpace {
    pub fn enumerate(roles: &[Role]) -> AssignmentSpace {
        let mut sorted = roles.to_vec();
        sorted.sort();
        let n = sorted.len();
        let mut flat = Vec::new();
        // lexicographic next-permutation visits each distinct arrangement once
        let mut cur = sorted.clone();
        loop {
            flat.extend_from_slice(&cur);
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).expect("successor exists");
            cur.swap(i, j);
            cur[i + 1..].reverse();
        }
        AssignmentSpace {
            n_players: n,
            roles: sorted,
            flat,
        }
    }

    /// The 9-player board, enumerated once per process.
    pub fn standard() -> Arc<AssignmentSpace> {
        static SPACE: OnceLock<Arc<AssignmentSpace>> = OnceLock::new();
        SPACE
            .get_or_init(|| Arc::new(AssignmentSpace::enumerate(&STANDARD_ROLES)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.flat.len() / self.n_players.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn n_players(&self) -> usize {
        self.n_players
    }

    pub fn role_counts(&self) -> [usize; NUM_ROLES] {
        let mut c = [0; NUM_ROLES];
        for r in &self.roles {
            c[r.index()] += 1;
        }
        c
    }

    pub fn get(&self, i: usize) -> &[Role] {
        &self.flat[i * self.n_players..(i + 1) * self.n_players]
    }
}

/// Private knowledge of an observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fact {
    Role(PlayerId, Role),
    /// e.g. a seer's check result.
    Camp(PlayerId, Camp),
}

impl Fact {
    fn holds(&self, a: &[Role]) -> bool {
        match *self {
            Fact::Role(p, r) => a[p as usize] == r,
            Fact::Camp(p, c) => a[p as usize].camp() == c,
        }
    }
}

/// Event likelihood weights. A weight multiplies the probability of every
/// assignment in which its pattern holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LikelihoodModel {
    pub wolf_votes_wolf: f64,
    pub wolf_votes_nonwolf: f64,
    pub nonwolf_votes_wolf: f64,
    pub nonwolf_votes_nonwolf: f64,
    /// Revealed check that is accurate and made by the true seer.
    pub truthful_check_claim: f64,
    /// Any other revealed check.
    pub other_check_claim: f64,
    pub wolf_accuses_wolf: f64,
    pub wolf_accuses_nonwolf: f64,
    pub nonwolf_accuses_wolf: f64,
    pub nonwolf_accuses_nonwolf: f64,
    pub role_claim_true: f64,
    pub role_claim_false: f64,
    /// Shots by anyone but the hunter contradict the rules.
    pub shot_by_non_hunter: f64,
}

impl Default for LikelihoodModel {
    fn default() -> Self {
        LikelihoodModel {
            wolf_votes_wolf: 0.4,
            wolf_votes_nonwolf: 1.2,
            nonwolf_votes_wolf: 1.0,
            nonwolf_votes_nonwolf: 1.0,
            truthful_check_claim: 2.0,
            other_check_claim: 0.7,
            wolf_accuses_wolf: 1.0,
            wolf_accuses_nonwolf: 1.0,
            nonwolf_accuses_wolf: 1.0,
            nonwolf_accuses_nonwolf: 1.0,
            role_claim_true: 1.0,
            role_claim_false: 1.0,
            shot_by_non_hunter: 1e-6,
        }
    }
}

impl LikelihoodModel {
    /// Uniform model: every event is uninformative.
    pub fn uninformative() -> Self {
        LikelihoodModel {
            wolf_votes_wolf: 1.0,
            wolf_votes_nonwolf: 1.0,
            truthful_check_claim: 1.0,
            other_check_claim: 1.0,
            shot_by_non_hunter: 1.0,
            ..LikelihoodModel::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.wolf_votes_wolf,
            self.wolf_votes_nonwolf,
            self.nonwolf_votes_wolf,
            self.nonwolf_votes_nonwolf,
            self.truthful_check_claim,
            self.other_check_claim,
            self.wolf_accuses_wolf,
            self.wolf_accuses_nonwolf,
            self.nonwolf_accuses_wolf,
            self.nonwolf_accuses_nonwolf,
            self.role_claim_true,
            self.role_claim_false,
            self.shot_by_non_hunter,
        ];
        if all.iter().all(|w| w.is_finite() && *w > 0.0) {
            Ok(())
        } else {
            Err("likelihood weights must be finite and > 0".into())
        }
    }

    /// Likelihood of `event` under assignment `a`; `None` when the event
    /// carries no evidence under this model.
    pub fn weight(&self, event: &Event, a: &[Role]) -> Option<f64> {
        let subject = event.subject as usize;
        if subject >= a.len() {
            return None;
        }
        let wolf = |i: usize| a[i] == Role::Werewolf;
        let target = event.object.player().map(usize::from).filter(|&t| t < a.len());
        match (event.phase, event.verb) {
            (Phase::DayVote, Verb::Vote) => {
                let t = target?;
                Some(match (wolf(subject), wolf(t)) {
                    (true, true) => self.wolf_votes_wolf,
                    (true, false) => self.wolf_votes_nonwolf,
                    (false, true) => self.nonwolf_votes_wolf,
                    (false, false) => self.nonwolf_votes_nonwolf,
                })
            }
            (Phase::DayDiscuss, Verb::Accuse) => {
                let t = target?;
                Some(match (wolf(subject), wolf(t)) {
                    (true, true) => self.wolf_accuses_wolf,
                    (true, false) => self.wolf_accuses_nonwolf,
                    (false, true) => self.nonwolf_accuses_wolf,
                    (false, false) => self.nonwolf_accuses_nonwolf,
                })
            }
            (Phase::DayDiscuss, Verb::Check) => {
                let t = target?;
                let says_wolf = event.detail? == Role::Werewolf;
                let accurate = says_wolf == wolf(t);
                Some(if a[subject] == Role::Seer && accurate {
                    self.truthful_check_claim
                } else {
                    self.other_check_claim
                })
            }
            (Phase::DayDiscuss, Verb::Claim) => match event.object {
                Object::Role(r) => Some(if a[subject] == r {
                    self.role_claim_true
                } else {
                    self.role_claim_false
                }),
                _ => None,
            },
            (Phase::HunterShot, Verb::Shoot) => Some(if a[subject] == Role::Hunter {
                1.0
            } else {
                self.shot_by_non_hunter
            }),
            _ => None,
        }
    }
}

/// One observer's posterior over hidden roles.
#[derive(Debug, Clone)]
pub struct Belief {
    pub observer: PlayerId,
    space: Arc<AssignmentSpace>,
    support: Vec<u32>,
    weights: Vec<f64>,
    marginals: Vec<[f64; NUM_ROLES]>,
    /// Number of events consumed so far.
    pub consumed: usize,
}

impl Belief {
    pub fn marginals(&self) -> &[[f64; NUM_ROLES]] {
        &self.marginals
    }

    pub fn prob(&self, p: PlayerId, role: Role) -> f64 {
        self.marginals[p as usize][role.index()]
    }

    pub fn n_players(&self) -> usize {
        self.marginals.len()
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    /// Row-major flattening of the marginal matrix.
    pub fn flatten(&self) -> Vec<f64> {
        self.marginals.iter().flatten().copied().collect()
    }

    /// Marginal probability of `(p, role)` pairs jointly over the posterior.
    pub fn joint_prob(&self, facts: &[Fact]) -> f64 {
        self.support
            .iter()
            .zip(&self.weights)
            .filter(|(&i, _)| facts.iter().all(|f| f.holds(self.space.get(i as usize))))
            .map(|(_, w)| w)
            .sum()
    }

    fn normalize(&mut self) {
        let total: f64 = self.weights.iter().sum();
        for w in &mut self.weights {
            *w /= total;
        }
        let n = self.space.n_players();
        let mut m = vec![[0.0; NUM_ROLES]; n];
        for (&i, &w) in self.support.iter().zip(&self.weights) {
            for (p, r) in self.space.get(i as usize).iter().enumerate() {
                m[p][r.index()] += w;
            }
        }
        self.marginals = m;
    }

    /// Conditions on hard knowledge learned mid-game (e.g. a new check).
    pub fn observe_fact(&mut self, fact: Fact) -> Result<(), PredictorError> {
        let keep: Vec<bool> = self
            .support
            .iter()
            .map(|&i| fact.holds(self.space.get(i as usize)))
            .collect();
        if !keep.iter().zip(&self.weights).any(|(&k, &w)| k && w > 0.0) {
            return Err(PredictorError::Inconsistent(format!("{fact:?} has zero probability")));
        }
        let mut k = keep.iter();
        self.support.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.weights.retain(|_| *k.next().unwrap());
        self.normalize();
        Ok(())
    }

    fn apply_weights(&mut self, events: &[&Event], model: &LikelihoodModel) {
        let mut informative = false;
        for (&i, w) in self.support.iter().zip(self.weights.iter_mut()) {
            let a = self.space.get(i as usize);
            for e in events {
                if let Some(l) = model.weight(e, a) {
                    *w *= l;
                    informative = true;
                }
            }
        }
        self.consumed += events.len();
        if informative {
            self.normalize();
        }
    }
}

/// Uniform posterior over assignments consistent with the observer's role
/// and private facts.
pub fn init_belief_in(
    space: Arc<AssignmentSpace>,
    observer: PlayerId,
    role: Role,
    knowledge: &[Fact],
) -> Result<Belief, PredictorError> {
    if observer as usize >= space.n_players() {
        return Err(PredictorError::Inconsistent(format!("observer {observer} out of range")));
    }
    let mut facts = vec![Fact::Role(observer, role)];
    facts.extend_from_slice(knowledge);
    let support: Vec<u32> = (0..space.len())
        .filter(|&i| facts.iter().all(|f| f.holds(space.get(i))))
        .map(|i| i as u32)
        .collect();
    if support.is_empty() {
        return Err(PredictorError::Inconsistent(format!(
            "no assignment satisfies {facts:?}"
        )));
    }
    let n = support.len();
    let mut b = Belief {
        observer,
        marginals: Vec::new(),
        space,
        weights: vec![1.0 / n as f64; n],
        support,
        consumed: 0,
    };
    b.normalize();
    Ok(b)
}

pub fn init_belief(observer: PlayerId, role: Role, knowledge: &[Fact]) -> Result<Belief, PredictorError> {
    init_belief_in(AssignmentSpace::standard(), observer, role, knowledge)
}

/// The prior a seat holds before any event: wolves know their pack.
pub fn private_knowledge(observer: PlayerId, roles: &[Role]) -> Vec<Fact> {
    if roles[observer as usize] == Role::Werewolf {
        roles
            .iter()
            .enumerate()
            .filter(|(_, &r)| r == Role::Werewolf)
            .map(|(p, _)| Fact::Role(p as PlayerId, Role::Werewolf))
            .collect()
    } else {
        Vec::new()
    }
}

pub fn update_belief(belief: &Belief, event: &Event, model: &LikelihoodModel) -> Belief {
    let mut b = belief.clone();
    b.apply_weights(&[event], model);
    b
}

/// In-place update with one event.
pub fn update_in_place(belief: &mut Belief, event: &Event, model: &LikelihoodModel) {
    belief.apply_weights(&[event], model);
}

/// Joint update with several events at once.
pub fn update_batch(belief: &Belief, events: &[Event], model: &LikelihoodModel) -> Belief {
    let mut b = belief.clone();
    let refs: Vec<&Event> = events.iter().collect();
    b.apply_weights(&refs, model);
    b
}

/// Top-`n` suspects among the other players, ties to the lowest id.
pub fn predict_werewolves(belief: &Belief, n: usize) -> Vec<PlayerId> {
    let mut others: Vec<PlayerId> = (0..belief.n_players() as PlayerId)
        .filter(|&p| p != belief.observer)
        .collect();
    others.sort_by(|&a, &b| {
        belief
            .prob(b, Role::Werewolf)
            .total_cmp(&belief.prob(a, Role::Werewolf))
            .then(a.cmp(&b))
    });
    others.truncate(n);
    others.sort_unstable();
    others
}

/// Most probable role of every other player.
pub fn predict_identities(belief: &Belief) -> Vec<(PlayerId, Role)> {
    (0..belief.n_players() as PlayerId)
        .filter(|&p| p != belief.observer)
        .map(|p| {
            let row = &belief.marginals[p as usize];
            let best = (0..NUM_ROLES)
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .expect("non-empty role set");
            (p, Role::ALL[best])
        })
        .collect()
}

/// Uniform 3-of-8 style guess among the other players.
pub fn random_werewolves<R: Rng>(observer: PlayerId, n_players: usize, n: usize, rng: &mut R) -> Vec<PlayerId> {
    let others: Vec<PlayerId> = (0..n_players as PlayerId).filter(|&p| p != observer).collect();
    let mut pick: Vec<PlayerId> = others.choose_multiple(rng, n).copied().collect();
    pick.sort_unstable();
    pick
}

/// Random seating of the roles the observer does not hold.
pub fn random_identities<R: Rng>(observer: PlayerId, own: Role, roles: &[Role], rng: &mut R) -> Vec<(PlayerId, Role)> {
    let mut pool = roles.to_vec();
    let pos = pool.iter().position(|&r| r == own).expect("observer role in multiset");
    pool.remove(pos);
    pool.shuffle(rng);
    (0..roles.len() as PlayerId)
        .filter(|&p| p != observer)
        .zip(pool)
        .collect()
}

/// At least `n` of the predictions are correct.
pub fn acc_at_n<T: Eq + Hash>(predicted: &[T], truth: &[T], n: usize) -> bool {
    let truth: HashSet<&T> = truth.iter().collect();
    predicted.iter().filter(|p| truth.contains(p)).count() >= n
}

/// Mean hit rates for a fixed list of thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct AccTable {
    pub thresholds: Vec<usize>,
    pub hits: Vec<usize>,
    pub total: usize,
}

impl AccTable {
    pub fn new(thresholds: &[usize]) -> Self {
        AccTable {
            thresholds: thresholds.to_vec(),
            hits: vec![0; thresholds.len()],
            total: 0,
        }
    }

    pub fn record<T: Eq + Hash>(&mut self, predicted: &[T], truth: &[T]) {
        for (i, &n) in self.thresholds.iter().enumerate() {
            self.hits[i] += acc_at_n(predicted, truth, n) as usize;
        }
        self.total += 1;
    }

    pub fn rates(&self) -> Vec<f64> {
        self.hits
            .iter()
            .map(|&h| if self.total == 0 { 0.0 } else { h as f64 / self.total as f64 })
            .collect()
    }
}

/// `1 - C(n-k, m) / C(n, m)`-style exact probability that a uniform
/// `m`-subset of `n` items hits at least `at_least` of `k` targets.
pub fn exact_random_acc(n: u64, k: u64, m: u64, at_least: u64) -> f64 {
    fn binom(n: u64, r: u64) -> f64 {
        if r > n {
            return 0.0;
        }
        (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }
    let total = binom(n, m);
    (at_least..=k.min(m))
        .map(|j| binom(k, j) * binom(n - k, m - j))
        .sum::<f64>()
        / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Event;
    use Role::*;

    fn vote(subject: PlayerId, target: PlayerId) -> Event {
        Event::new(1, Phase::DayVote, subject, Verb::Vote, Object::Player(target))
    }

    #[test]
    fn standard_space_size() {
        let s = AssignmentSpace::standard();
        assert_eq!(s.len(), 10080);
        let b = init_belief(0, Villager, &[]).unwrap();
        assert_eq!(b.support_len(), 56 * 5 * 4 * 3);
    }

    #[test]
    fn villager_prior_is_three_eighths() {
        let b = init_belief(4, Villager, &[]).unwrap();
        for p in 0..9 {
            let expected = if p == 4 { 0.0 } else { 3.0 / 8.0 };
            assert!((b.prob(p, Werewolf) - expected).abs() < 1e-12);
        }
        assert!((b.prob(4, Villager) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wolf_prior_knows_the_pack() {
        let roles = [Werewolf, Villager, Werewolf, Seer, Villager, Werewolf, Witch, Hunter, Villager];
        let b = init_belief(0, Werewolf, &private_knowledge(0, &roles)).unwrap();
        for p in 0..9u8 {
            let expected = if roles[p as usize] == Werewolf { 1.0 } else { 0.0 };
            assert!((b.prob(p, Werewolf) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn seer_check_pins_row() {
        let b = init_belief(6, Seer, &[Fact::Role(2, Werewolf)]).unwrap();
        assert!((b.prob(2, Werewolf) - 1.0).abs() < 1e-12);
        let mut b = init_belief(6, Seer, &[]).unwrap();
        b.observe_fact(Fact::Camp(3, Camp::WolfSide)).unwrap();
        assert!((b.prob(3, Werewolf) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_knowledge_errors() {
        assert!(init_belief(1, Villager, &[Fact::Role(1, Seer)]).is_err());
        let four_wolves: Vec<Fact> = (0..4).map(|p| Fact::Role(p, Werewolf)).collect();
        assert!(init_belief(8, Hunter, &four_wolves).is_err());
    }

    #[test]
    fn uninformative_event_leaves_belief_unchanged() {
        let b = init_belief(0, Villager, &[]).unwrap();
        let model = LikelihoodModel::uninformative();
        let after = update_belief(&b, &vote(3, 5), &model);
        for (x, y) in b.marginals().iter().zip(after.marginals()) {
            for r in 0..NUM_ROLES {
                assert!((x[r] - y[r]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn toy_accusation_raises_villager_probability() {
        // three seats: one wolf, two villagers, observer 2
        let space = Arc::new(AssignmentSpace::enumerate(&[Werewolf, Villager, Villager]));
        assert_eq!(space.len(), 3);
        let b = init_belief_in(space, 2, Villager, &[]).unwrap();
        assert!((b.prob(1, Villager) - 0.5).abs() < 1e-12);
        let model = LikelihoodModel {
            nonwolf_accuses_wolf: 3.0,
            ..LikelihoodModel::default()
        };
        let accuse = Event::new(1, Phase::DayDiscuss, 1, Verb::Accuse, Object::Player(0)).with_detail(Werewolf);
        let after = update_belief(&b, &accuse, &model);
        // hand computation: w / (w + 1) with w = 3
        assert!((after.prob(1, Villager) - 0.75).abs() < 1e-12);
        assert!(after.prob(1, Villager) > b.prob(1, Villager));
    }

    /// Independent posterior: enumerate every permutation of the roles
    /// (duplicates included), keep consistent ones, weight by the product of
    /// event likelihoods.
    fn brute_force(roles: &[Role], observer: usize, events: &[Event], model: &LikelihoodModel) -> Vec<[f64; NUM_ROLES]> {
        fn perms(items: &[Role]) -> Vec<Vec<Role>> {
            if items.len() <= 1 {
                return vec![items.to_vec()];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.to_vec();
                let head = rest.remove(i);
                for mut tail in perms(&rest) {
                    tail.insert(0, head);
                    out.push(tail);
                }
            }
            out
        }
        let n = roles.len();
        let mut m = vec![[0.0; NUM_ROLES]; n];
        let mut total = 0.0;
        for a in perms(roles) {
            if a[observer] != roles[observer] {
                continue;
            }
            let w: f64 = events.iter().map(|e| model.weight(e, &a).unwrap_or(1.0)).product();
            total += w;
            for p in 0..n {
                m[p][a[p].index()] += w;
            }
        }
        for row in &mut m {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
        m
    }

    #[test]
    fn sequential_equals_batched_equals_enumeration_on_toy_board() {
        let roles = [Werewolf, Villager, Seer, Villager];
        let space = Arc::new(AssignmentSpace::enumerate(&roles));
        assert_eq!(space.len(), 12);
        let model = LikelihoodModel::default();
        let events = [
            vote(0, 2),
            Event::new(1, Phase::DayDiscuss, 2, Verb::Check, Object::Player(0)).with_detail(Werewolf),
        ];
        let b = init_belief_in(space, 1, Villager, &[]).unwrap();
        let seq = update_belief(&update_belief(&b, &events[0], &model), &events[1], &model);
        let batch = update_batch(&b, &events, &model);
        let oracle = brute_force(&roles, 1, &events, &model);
        for (p, row) in oracle.iter().enumerate().take(4) {
            for (r, want) in row.iter().enumerate() {
                assert!((seq.marginals()[p][r] - batch.marginals()[p][r]).abs() < 1e-9);
                assert!((seq.marginals()[p][r] - want).abs() < 1e-9);
            }
        }
        // order of independent events does not matter
        let rev = update_belief(&update_belief(&b, &events[1], &model), &events[0], &model);
        for p in 0..4 {
            for r in 0..NUM_ROLES {
                assert!((seq.marginals()[p][r] - rev.marginals()[p][r]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn predictions_and_ties() {
        let b = init_belief(0, Villager, &[]).unwrap();
        assert_eq!(predict_werewolves(&b, 3), vec![1, 2, 3]);
        let facts = [Fact::Role(2, Werewolf), Fact::Role(5, Werewolf), Fact::Role(7, Werewolf)];
        let b = init_belief(0, Villager, &facts).unwrap();
        assert_eq!(predict_werewolves(&b, 3), vec![2, 5, 7]);
        let ids = predict_identities(&b);
        assert_eq!(ids.len(), 8);
        assert!(ids.contains(&(5, Werewolf)));
    }

    #[test]
    fn acc_at_n_counts_overlap() {
        assert!(acc_at_n(&[1, 2, 3], &[1, 2, 3], 3));
        assert!(acc_at_n(&[1, 2, 4], &[1, 2, 3], 2));
        assert!(!acc_at_n(&[1, 2, 4], &[1, 2, 3], 3));
        assert!(acc_at_n::<u8>(&[], &[1], 0));
    }

    #[test]
    fn exact_random_baseline() {
        let acc1 = exact_random_acc(8, 3, 3, 1);
        assert!((acc1 - 23.0 / 28.0).abs() < 1e-12);
        assert!((exact_random_acc(8, 3, 3, 3) - 1.0 / 56.0).abs() < 1e-12);
    }

    #[test]
    fn column_sums_match_role_counts_after_updates() {
        let model = LikelihoodModel::default();
        let mut b = init_belief(4, Villager, &[]).unwrap();
        for e in [vote(0, 3), vote(1, 3), vote(3, 0), vote(6, 1)] {
            update_in_place(&mut b, &e, &model);
        }
        let counts = [3.0, 3.0, 1.0, 1.0, 1.0];
        for r in 0..NUM_ROLES {
            let col: f64 = b.marginals().iter().map(|row| row[r]).sum();
            assert!((col - counts[r]).abs() < 1e-6);
        }
        for row in b.marginals() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

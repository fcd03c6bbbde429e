use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wolfctl_core::agents::Heuristic;
use wolfctl_core::chains::ChainDb;
use wolfctl_core::discussor::{make_claims, ClaimPolicy, Honesty, WolfClaim};
use wolfctl_core::engine::{
    replay, step, Action, Camp, GameConfig, GameLog, GameState, Phase, Role, StateView, NUM_PLAYERS,
};
use wolfctl_core::policy::{NetConfig, PolicyBank, WR_CONS_OFFSET};
use wolfctl_core::predictor::LikelihoodModel;
use wolfctl_core::rewards::RewardConfig;
use wolfctl_core::sim::{play_game, BeliefTracker, Lineup, PolicySeat, SeatKind, SimOptions};
use wolfctl_core::train::{train, TrainConfig};

fn random_game(seed: u64, pick: u64) -> (GameState, Vec<GameState>) {
    let mut rng = ChaCha8Rng::seed_from_u64(pick);
    let mut s = GameState::new(seed, &GameConfig::default()).unwrap();
    let mut trail = vec![s.clone()];
    while !s.is_over() {
        let mut d = BTreeMap::new();
        for p in s.acting_players() {
            let legal: Vec<Action> = s.legal_actions(p).legal_actions().collect();
            assert!(!legal.is_empty(), "acting player {p} has no legal action");
            d.insert(p, legal[rng.gen_range(0..legal.len())]);
        }
        let (next, produced) = step(&s, &d).unwrap();
        assert_eq!(&next.history[s.history.len()..], produced.as_slice());
        s = next;
        trail.push(s.clone());
    }
    (s, trail)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_games_keep_invariants_and_replay(seed in any::<u64>(), pick in any::<u64>()) {
        let (end, trail) = random_game(seed, pick);
        for w in trail.windows(2) {
            for i in 0..NUM_PLAYERS {
                prop_assert!(w[0].alive[i] || !w[1].alive[i]);
            }
            prop_assert_eq!(w[0].roles, w[1].roles);
            prop_assert!(w[1].round <= end.max_rounds);
        }
        let log = GameLog::from_state(&end).unwrap();
        prop_assert_eq!(replay(&log).unwrap(), end);
    }

    #[test]
    fn tampered_logs_do_not_replay(seed in 0u64..500, pick in any::<u64>(), at in any::<prop::sample::Index>()) {
        let (end, _) = random_game(seed, pick);
        let mut log = GameLog::from_state(&end).unwrap();
        let i = at.index(log.events.len());
        log.events[i].round += 1;
        prop_assert!(replay(&log).is_err());
    }
}

/// Plays heuristic games and hands every discussion speech to `check`.
fn with_speeches(games: u64, policy: &ClaimPolicy, mut check: impl FnMut(&GameState, &wolfctl_core::discussor::ClaimSet)) {
    let model = LikelihoodModel::default();
    for seed in 0..games {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = GameState::new(seed, &GameConfig::default()).unwrap();
        let roles = s.roles;
        let mut trackers: Vec<BeliefTracker> = (0..NUM_PLAYERS as u8).map(|p| BeliefTracker::new(p, &roles)).collect();
        let h = Heuristic::new(0.2);
        while !s.is_over() {
            let mut d = BTreeMap::new();
            let mut speech = BTreeMap::new();
            for p in s.acting_players() {
                let view = StateView::new(&s, p);
                let t = &mut trackers[p as usize];
                t.catch_up(&s.history, &roles, &model);
                let a = h.act(&view, &t.belief, &s.legal_actions(p), &mut rng);
                if s.phase == Phase::DayDiscuss {
                    let claims = make_claims(&view, &roles, &t.belief, a, policy);
                    check(&s, &claims);
                    speech.insert(p, claims.to_events(s.round));
                }
                d.insert(p, a);
            }
            s.apply_with_speech(&d, &speech).unwrap();
        }
    }
}

#[test]
fn claim_tags_always_match_ground_truth() {
    let mut speeches = 0;
    let mut deceptive = 0;
    with_speeches(150, &ClaimPolicy::default(), |s, c| {
        speeches += 1;
        assert!(c.consistent_with(&s.roles), "{c:?}");
        let role = s.roles[c.speaker as usize];
        if role != Role::Werewolf {
            // only wolves lie
            assert!(c.role_claim.is_none_or(|(_, h)| h == Honesty::Truthful));
            assert!(c.revealed_check.is_none_or(|a| a.honesty == Honesty::Truthful));
        } else if c.role_claim.is_some_and(|(_, h)| h == Honesty::Deceptive) {
            deceptive += 1;
        }
    });
    assert!(speeches > 1000);
    assert!(deceptive > 0);
}

#[test]
fn hiding_wolves_only_claim_villager() {
    let policy = ClaimPolicy {
        wolf: WolfClaim::AlwaysHide,
        seer_reveals: true,
    };
    with_speeches(60, &policy, |s, c| {
        if s.roles[c.speaker as usize] == Role::Werewolf {
            assert_eq!(c.role_claim, Some((Role::Villager, Honesty::Deceptive)));
            assert!(c.revealed_check.is_none());
        }
    });
}

#[test]
fn beliefs_stay_normalized_and_keep_the_truth() {
    let model = LikelihoodModel::default();
    let opts = SimOptions::default();
    let lineup = Lineup::uniform(SeatKind::Heuristic(Heuristic::new(0.3)));
    for seed in 0..40 {
        let log = play_game(seed, &lineup, &[], &opts).unwrap().log;
        for observer in 0..NUM_PLAYERS as u8 {
            let mut t = BeliefTracker::new(observer, &log.roles);
            t.catch_up(&log.events, &log.roles, &model);
            for (p, row) in t.belief.marginals().iter().enumerate() {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "player {p}: {sum}");
                assert!(t.belief.prob(p as u8, log.roles[p]) > 0.0);
            }
        }
    }
}

#[test]
fn wr_cons_reaches_policy_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let bank = PolicyBank::init(NetConfig::default(), false, &mut rng);
    for c in [0.1, 0.7] {
        let seat = PolicySeat {
            bank: &bank,
            wr_cons: c,
            greedy: false,
            record: true,
            use_predictor: true,
        };
        let lineup = Lineup::camps(SeatKind::Heuristic(Heuristic::default()), SeatKind::Policy(0));
        let rec = play_game(3, &lineup, &[seat], &SimOptions::default()).unwrap();
        assert!(!rec.steps.is_empty());
        assert!(rec.steps.iter().all(|s| s.features.dense[WR_CONS_OFFSET] == c));
        assert!(rec.steps.iter().all(|s| s.role.camp() == Camp::VillageSide));
    }
}

#[test]
fn seeded_games_and_training_are_reproducible() {
    let lineup = Lineup::uniform(SeatKind::Heuristic(Heuristic::new(0.5)));
    let a = play_game(17, &lineup, &[], &SimOptions::default()).unwrap();
    let b = play_game(17, &lineup, &[], &SimOptions::default()).unwrap();
    assert_eq!(a.log, b.log);

    let cfg = TrainConfig {
        waves: 2,
        games_per_wave: 6,
        net: NetConfig { embed: 4, hidden: 8, ..NetConfig::default() },
        ..TrainConfig::default()
    };
    let db = ChainDb::default();
    let x = train(&cfg, &RewardConfig::default(), &db, &SimOptions::default(), None).unwrap();
    let y = train(&cfg, &RewardConfig::default(), &db, &SimOptions::default(), None).unwrap();
    assert_eq!(x.bank.to_json(), y.bank.to_json());
    assert_eq!(x.report.to_csv(), y.report.to_csv());
}

//! A constructed corpus that reproduces a published table of decision chains
//! with their win rates and game counts.
//!
//! Each log carries one acting player whose events spell out the chain; the
//! first `round(wr * count)` logs are wins for that player's camp. These logs
//! exist to feed the chain database and are not engine-replayable.

use crate::chains::{ChainVerb, DecisionChain, TargetClass};
use crate::engine::{Camp, Event, GameLog, Object, Phase, PlayerId, Role, Verb, NUM_PLAYERS};
use crate::error::ParseError;

/// `(role, chain, win rate, count)`.
pub const APPENDIX_CHAINS: [(Role, &str, f64, u64); 15] = [
    (Role::Werewolf, "kill: villager vote: seer kill: witch vote: hunter", 0.98, 971),
    (Role::Werewolf, "kill: villager vote: seer kill: witch vote: pass", 0.63, 932),
    (Role::Werewolf, "kill: villager kill: werewolf", 0.00, 312),
    (Role::Villager, "vote: werewolf vote: werewolf vote: werewolf", 0.95, 687),
    (Role::Villager, "vote: werewolf vote: hunter", 0.44, 556),
    (Role::Villager, "vote: seer vote: villager vote: pass", 0.13, 684),
    (Role::Seer, "check: werewolf vote: werewolf check: werewolf vote: pass", 0.77, 413),
    (Role::Seer, "check: villager vote: werewolf check: werewolf vote: pass", 0.65, 493),
    (Role::Seer, "check: werewolf vote: werewolf check: pass vote: pass", 0.04, 539),
    (Role::Witch, "antidote: villager vote: werewolf poison: werewolf vote: werewolf", 0.98, 317),
    (Role::Witch, "antidote: villager vote: werewolf poison: villager vote: pass vote: pass", 0.52, 270),
    (Role::Witch, "antidote: villager vote: seer poison: villager vote: pass", 0.00, 263),
    (Role::Hunter, "vote: werewolf vote: none shot: werewolf", 0.92, 306),
    (Role::Hunter, "vote: werewolf vote: none shot: werewolf vote: none", 0.51, 105),
    (Role::Hunter, "vote: none vote: werewolf shot: witch", 0.0, 107),
];

const SEATING: [Role; NUM_PLAYERS] = [
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

fn phase_of(verb: ChainVerb) -> (Phase, Verb) {
    match verb {
        ChainVerb::Kill => (Phase::NightWolfKill, Verb::Kill),
        ChainVerb::Check => (Phase::NightSeerCheck, Verb::Check),
        ChainVerb::Antidote => (Phase::NightWitch, Verb::Save),
        ChainVerb::Poison => (Phase::NightWitch, Verb::Poison),
        ChainVerb::Vote => (Phase::DayVote, Verb::Vote),
        ChainVerb::Shot => (Phase::HunterShot, Verb::Shoot),
    }
}

/// A seat holding `role`, preferring one other than `actor`.
fn seat_of(role: Role, actor: PlayerId) -> PlayerId {
    let seats: Vec<PlayerId> = (0..NUM_PLAYERS as PlayerId).filter(|&p| SEATING[p as usize] == role).collect();
    seats.iter().copied().find(|&p| p != actor).unwrap_or(seats[0])
}

/// The events one player would have logged to produce `chain`.
pub fn chain_events(chain: &DecisionChain, actor: PlayerId) -> Vec<Event> {
    let mut round = 1;
    let mut last_phase: Option<Phase> = None;
    let mut out = Vec::new();
    for tok in &chain.tokens {
        let (phase, verb) = phase_of(tok.verb);
        if let Some(prev) = last_phase {
            if phase.index() <= prev.index() {
                round += 1;
            }
        }
        last_phase = Some(phase);
        let (verb, object) = match tok.target {
            TargetClass::Role(r) => (verb, Object::Player(seat_of(r, actor))),
            TargetClass::Pass => (Verb::Pass, Object::None),
            TargetClass::None => (verb, Object::None),
        };
        out.push(Event::new(round, phase, actor, verb, object));
    }
    out
}

/// `count` logs for one chain, `round(wr * count)` of them won.
pub fn chain_logs(role: Role, chain: &str, wr: f64, count: u64) -> Result<Vec<GameLog>, ParseError> {
    let chain = DecisionChain::parse(role, chain)?;
    let actor = seat_of(role, PlayerId::MAX);
    let events = chain_events(&chain, actor);
    let wins = (wr * count as f64).round() as u64;
    let camp = role.camp();
    Ok((0..count)
        .map(|i| GameLog {
            seed: i,
            roles: SEATING.to_vec(),
            events: events.clone(),
            winner: if i < wins { camp } else { camp.opponent() },
            alive_at_end: vec![true; NUM_PLAYERS],
        })
        .collect())
}

/// The whole table as one corpus.
pub fn appendix_corpus() -> Vec<GameLog> {
    APPENDIX_CHAINS
        .iter()
        .flat_map(|&(role, chain, wr, count)| chain_logs(role, chain, wr, count).expect("table chains parse"))
        .collect()
}

/// Number of logs won by `camp`.
pub fn winner_counts(logs: &[GameLog], camp: Camp) -> usize {
    logs.iter().filter(|l| l.winner == camp).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{build_db, extract_chain};

    #[test]
    fn events_spell_the_chain() {
        for &(role, chain, _, _) in &APPENDIX_CHAINS {
            let logs = chain_logs(role, chain, 0.5, 2).unwrap();
            let actor = seat_of(role, PlayerId::MAX);
            assert_eq!(extract_chain(&logs[0], actor).to_string(), chain);
        }
    }

    #[test]
    fn top_wolf_chain_counts() {
        let (role, chain, wr, count) = APPENDIX_CHAINS[0];
        let logs = chain_logs(role, chain, wr, count).unwrap();
        assert_eq!(logs.len(), 971);
        assert_eq!(winner_counts(&logs, Camp::WolfSide), 952);
    }

    #[test]
    fn database_reproduces_the_table() {
        let logs = appendix_corpus();
        let (db, report) = build_db(logs.iter(), 1, 0.5);
        assert_eq!(report.games, logs.len());
        for &(role, chain, wr, count) in &APPENDIX_CHAINS {
            let stats = db.get(&DecisionChain::parse(role, chain).unwrap()).unwrap();
            assert_eq!(stats.count, count);
            assert!((stats.win_rate - wr).abs() <= 0.005, "{chain}: {}", stats.win_rate);
        }
    }
}

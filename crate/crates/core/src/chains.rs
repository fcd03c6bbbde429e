//! Per-role decision chains and their empirical win rates.
//!
//! A chain is the ordered list of one player's binding decisions, each token
//! written as `verb: target` where the target is the TRUE role of the player
//! acted upon (or `pass` / `none`). Speech acts never enter a chain.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::engine::{read_jsonl, Event, GameLog, Object, Phase, PlayerId, Role, Verb};
use crate::error::{DataError, ParseError};

pub const DEFAULT_MIN_COUNT: u64 = 30;
pub const DEFAULT_WIN_RATE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChainVerb {
    Kill,
    Check,
    Antidote,
    Poison,
    Vote,
    Shot,
}

impl ChainVerb {
    const ALL: [ChainVerb; 6] = [
        ChainVerb::Kill,
        ChainVerb::Check,
        ChainVerb::Antidote,
        ChainVerb::Poison,
        ChainVerb::Vote,
        ChainVerb::Shot,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChainVerb::Kill => "kill",
            ChainVerb::Check => "check",
            ChainVerb::Antidote => "antidote",
            ChainVerb::Poison => "poison",
            ChainVerb::Vote => "vote",
            ChainVerb::Shot => "shot",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TargetClass {
    Role(Role),
    Pass,
    None,
}

impl TargetClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetClass::Role(r) => r.as_str(),
            TargetClass::Pass => "pass",
            TargetClass::None => "none",
        }
    }
}

impl FromStr for TargetClass {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pass" => Ok(TargetClass::Pass),
            "none" => Ok(TargetClass::None),
            other => other.parse().map(TargetClass::Role),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChainToken {
    pub verb: ChainVerb,
    pub target: TargetClass,
}

impl ChainToken {
    pub fn new(verb: ChainVerb, target: TargetClass) -> Self {
        ChainToken { verb, target }
    }
}

impl fmt::Display for ChainToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.verb.as_str(), self.target.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DecisionChain {
    pub role: Role,
    pub tokens: Vec<ChainToken>,
}

impl DecisionChain {
    pub fn new(role: Role, tokens: Vec<ChainToken>) -> Self {
        DecisionChain { role, tokens }
    }

    /// Parses the `verb: target verb: target ...` serialization.
    pub fn parse(role: Role, s: &str) -> Result<Self, ParseError> {
        let words: Vec<&str> = s.split_whitespace().collect();
        if !words.len().is_multiple_of(2) {
            return Err(ParseError::MalformedChain(s.to_string()));
        }
        let tokens = words
            .chunks(2)
            .map(|pair| {
                let verb = pair[0]
                    .strip_suffix(':')
                    .and_then(|v| ChainVerb::ALL.into_iter().find(|cv| cv.as_str() == v))
                    .ok_or_else(|| ParseError::MalformedChain(s.to_string()))?;
                Ok(ChainToken::new(verb, pair[1].parse()?))
            })
            .collect::<Result<_, ParseError>>()?;
        Ok(DecisionChain { role, tokens })
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl fmt::Display for DecisionChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

fn token_for(event: &Event, roles: &[Role]) -> Option<ChainToken> {
    let target = |o: Object| match o {
        Object::Player(p) => roles
            .get(p as usize)
            .map_or(TargetClass::None, |&r| TargetClass::Role(r)),
        _ => TargetClass::None,
    };
    let pass = event.verb == Verb::Pass;
    let verb = match (event.phase, event.verb) {
        (Phase::NightWolfKill, Verb::Kill | Verb::Pass) => ChainVerb::Kill,
        (Phase::NightSeerCheck, Verb::Check | Verb::Pass) => ChainVerb::Check,
        (Phase::NightWitch, Verb::Save) => ChainVerb::Antidote,
        (Phase::NightWitch, Verb::Poison) => ChainVerb::Poison,
        (Phase::DayVote, Verb::Vote | Verb::Pass) => ChainVerb::Vote,
        (Phase::HunterShot, Verb::Shoot | Verb::Pass) => ChainVerb::Shot,
        _ => return None,
    };
    let target = if pass {
        TargetClass::Pass
    } else {
        target(event.object)
    };
    Some(ChainToken::new(verb, target))
}

/// The decision chain of `player` in a finished game.
pub fn extract_chain(log: &GameLog, player: PlayerId) -> DecisionChain {
    let role = log.role(player).unwrap_or(Role::Villager);
    let tokens = log
        .events
        .iter()
        .filter(|e| e.subject == player)
        .filter_map(|e| token_for(e, &log.roles))
        .collect();
    DecisionChain { role, tokens }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainStats {
    pub win_rate: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainDb {
    tables: HashMap<Role, HashMap<Vec<ChainToken>, ChainStats>>,
    pub min_count: u64,
    pub default_wr: f64,
}

impl Default for ChainDb {
    fn default() -> Self {
        ChainDb::new(DEFAULT_MIN_COUNT, DEFAULT_WIN_RATE)
    }
}

impl ChainDb {
    pub fn new(min_count: u64, default_wr: f64) -> Self {
        ChainDb {
            tables: HashMap::new(),
            min_count,
            default_wr,
        }
    }

    pub fn len(&self) -> usize {
        self.tables.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&mut self, chain: DecisionChain, stats: ChainStats) {
        self.tables.entry(chain.role).or_default().insert(chain.tokens, stats);
    }

    /// Stored entry regardless of `min_count`.
    pub fn get(&self, chain: &DecisionChain) -> Option<ChainStats> {
        self.tables.get(&chain.role)?.get(&chain.tokens).copied()
    }

    /// Entries sorted by role, then chain, for stable output.
    pub fn entries(&self) -> Vec<(DecisionChain, ChainStats)> {
        let mut out: Vec<_> = self
            .tables
            .iter()
            .flat_map(|(&role, t)| {
                t.iter()
                    .map(move |(tokens, &s)| (DecisionChain::new(role, tokens.clone()), s))
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Exact match, else longest proper prefix, else the default; only
    /// entries with at least `min_count` games qualify.
    pub fn lookup(&self, chain: &DecisionChain) -> ChainStats {
        let fallback = ChainStats {
            win_rate: self.default_wr,
            count: 0,
        };
        let Some(table) = self.tables.get(&chain.role) else {
            return fallback;
        };
        (0..=chain.tokens.len())
            .rev()
            .filter_map(|len| table.get(&chain.tokens[..len]))
            .find(|s| s.count >= self.min_count)
            .copied()
            .unwrap_or(fallback)
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), DataError> {
        writeln!(w, "# min_count={} default_wr={}", self.min_count, self.default_wr)?;
        for (chain, s) in self.entries() {
            writeln!(w, "{}\t{}\t{}\t{}", chain.role, chain, s.win_rate, s.count)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ChainDb, DataError> {
        ChainDb::read_from(BufReader::new(File::open(path)?))
    }

    /// Reads `role<TAB>chain<TAB>win_rate<TAB>count` lines. `#` lines are
    /// comments; a `# min_count=.. default_wr=..` header sets the lookup parameters.
    pub fn read_from<R: BufRead>(r: R) -> Result<ChainDb, DataError> {
        let mut db = ChainDb::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let n = i + 1;
            let bad = |msg: String| DataError::Malformed { line: n, msg };
            if let Some(comment) = line.strip_prefix('#') {
                for kv in comment.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("min_count", v)) => {
                            db.min_count = v.parse().map_err(|e| bad(format!("min_count: {e}")))?
                        }
                        Some(("default_wr", v)) => {
                            db.default_wr = v.parse().map_err(|e| bad(format!("default_wr: {e}")))?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(bad(format!("expected 4 tab-separated fields, got {}", fields.len())));
            }
            let role: Role = fields[0].parse().map_err(|e: ParseError| bad(e.to_string()))?;
            let chain = DecisionChain::parse(role, fields[1]).map_err(|e| bad(e.to_string()))?;
            let win_rate: f64 = fields[2].parse().map_err(|e| bad(format!("win rate: {e}")))?;
            let count: u64 = fields[3].parse().map_err(|e| bad(format!("count: {e}")))?;
            if !(0.0..=1.0).contains(&win_rate) || count == 0 {
                return Err(bad(format!("win rate {win_rate} / count {count} out of range")));
            }
            db.insert(chain, ChainStats { win_rate, count });
        }
        Ok(db)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub games: usize,
    pub chains: usize,
    pub warnings: usize,
}

/// Aggregates every non-empty chain of every player into win-rate statistics.
pub fn build_db<'a>(
    logs: impl IntoIterator<Item = &'a GameLog>,
    min_count: u64,
    default_wr: f64,
) -> (ChainDb, BuildReport) {
    let mut tallies: HashMap<DecisionChain, (u64, u64)> = HashMap::new();
    let mut report = BuildReport::default();
    for log in logs {
        if log.roles.len() != crate::engine::NUM_PLAYERS {
            report.warnings += 1;
            continue;
        }
        report.games += 1;
        for p in 0..log.roles.len() as PlayerId {
            let chain = extract_chain(log, p);
            if chain.is_empty() {
                continue;
            }
            let won = chain.role.camp() == log.winner;
            let t = tallies.entry(chain).or_default();
            t.0 += won as u64;
            t.1 += 1;
            report.chains += 1;
        }
    }
    let mut db = ChainDb::new(min_count, default_wr);
    for (chain, (wins, count)) in tallies {
        db.insert(
            chain,
            ChainStats {
                win_rate: wins as f64 / count as f64,
                count,
            },
        );
    }
    (db, report)
}

/// Builds from a JSONL stream, skipping unreadable lines.
pub fn build_db_jsonl<R: BufRead>(r: R, min_count: u64, default_wr: f64) -> (ChainDb, BuildReport) {
    let mut warnings = 0;
    let logs: Vec<GameLog> = read_jsonl(r)
        .filter_map(|l| l.map_err(|_| warnings += 1).ok())
        .collect();
    let (db, mut report) = build_db(&logs, min_count, default_wr);
    report.warnings += warnings;
    (db, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Camp;
    use Role::*;

    const ROLES: [Role; 9] = [Werewolf, Werewolf, Werewolf, Villager, Villager, Villager, Seer, Witch, Hunter];

    fn ev(round: u32, phase: Phase, subject: PlayerId, verb: Verb, object: Object) -> Event {
        Event::new(round, phase, subject, verb, object)
    }

    fn log(events: Vec<Event>, winner: Camp) -> GameLog {
        GameLog {
            seed: 0,
            roles: ROLES.to_vec(),
            events,
            winner,
            alive_at_end: vec![true; 9],
        }
    }

    #[test]
    fn wolf_chain_matches_reference_serialization() {
        let l = log(
            vec![
                ev(1, Phase::NightWolfKill, 0, Verb::Kill, Object::Player(3)),
                ev(1, Phase::DayDiscuss, 0, Verb::Accuse, Object::Player(6)).with_detail(Werewolf),
                ev(1, Phase::DayVote, 0, Verb::Vote, Object::Player(6)),
                ev(2, Phase::NightWolfKill, 0, Verb::Kill, Object::Player(7)),
                ev(2, Phase::DayVote, 0, Verb::Vote, Object::Player(8)),
            ],
            Camp::WolfSide,
        );
        assert_eq!(
            extract_chain(&l, 0).to_string(),
            "kill: villager vote: seer kill: witch vote: hunter"
        );
    }

    #[test]
    fn early_death_gives_empty_chain() {
        let l = log(
            vec![ev(1, Phase::DayAnnounce, crate::engine::SYSTEM, Verb::Die, Object::Player(4))],
            Camp::WolfSide,
        );
        assert!(extract_chain(&l, 4).is_empty());
    }

    #[test]
    fn seer_check_then_abstain() {
        let l = log(
            vec![
                ev(1, Phase::NightSeerCheck, 6, Verb::Check, Object::Player(1)),
                ev(1, Phase::DayDiscuss, 6, Verb::Check, Object::Player(1)).with_detail(Werewolf),
                ev(1, Phase::DayVote, 6, Verb::Pass, Object::None),
            ],
            Camp::VillageSide,
        );
        assert_eq!(extract_chain(&l, 6).to_string(), "check: werewolf vote: pass");
    }

    #[test]
    fn witch_save_is_antidote_and_pass_is_silent() {
        let l = log(
            vec![
                ev(1, Phase::NightWitch, 7, Verb::Save, Object::Player(4)),
                ev(2, Phase::NightWitch, 7, Verb::Pass, Object::None),
                ev(2, Phase::DayVote, 7, Verb::Vote, Object::None),
                ev(3, Phase::NightWitch, 7, Verb::Poison, Object::Player(2)),
            ],
            Camp::VillageSide,
        );
        assert_eq!(
            extract_chain(&l, 7).to_string(),
            "antidote: villager vote: none poison: werewolf"
        );
    }

    #[test]
    fn parse_roundtrip() {
        let s = "check: werewolf vote: werewolf check: pass vote: pass";
        let c = DecisionChain::parse(Seer, s).unwrap();
        assert_eq!(c.to_string(), s);
        assert!(DecisionChain::parse(Seer, "check werewolf").is_err());
        assert!(DecisionChain::parse(Seer, "check:").is_err());
        assert!(DecisionChain::parse(Seer, "").unwrap().is_empty());
    }

    #[test]
    fn four_logs_one_win() {
        let make = |w| {
            log(
                vec![ev(1, Phase::DayVote, 3, Verb::Vote, Object::Player(0))],
                w,
            )
        };
        let logs = vec![
            make(Camp::VillageSide),
            make(Camp::WolfSide),
            make(Camp::WolfSide),
            make(Camp::WolfSide),
        ];
        let (db, report) = build_db(&logs, 1, 0.5);
        let stats = db.get(&DecisionChain::parse(Villager, "vote: werewolf").unwrap()).unwrap();
        assert_eq!(stats, ChainStats { win_rate: 0.25, count: 4 });
        assert_eq!(report.games, 4);
    }

    #[test]
    fn single_winning_game() {
        let l = log(
            vec![
                ev(1, Phase::NightWolfKill, 0, Verb::Kill, Object::Player(3)),
                ev(1, Phase::DayVote, 4, Verb::Vote, Object::Player(5)),
            ],
            Camp::VillageSide,
        );
        let (db, _) = build_db([&l], 1, 0.5);
        let e = db.entries();
        assert_eq!(e.len(), 2);
        let village = db.get(&DecisionChain::parse(Villager, "vote: villager").unwrap()).unwrap();
        assert_eq!(village, ChainStats { win_rate: 1.0, count: 1 });
        let wolf = db.get(&DecisionChain::parse(Werewolf, "kill: villager").unwrap()).unwrap();
        assert_eq!(wolf, ChainStats { win_rate: 0.0, count: 1 });
    }

    #[test]
    fn lookup_exact_prefix_default() {
        let mut db = ChainDb::new(30, 0.5);
        let full = DecisionChain::parse(Werewolf, "kill: villager kill: werewolf").unwrap();
        db.insert(full.clone(), ChainStats { win_rate: 0.0, count: 312 });
        assert_eq!(db.lookup(&full), ChainStats { win_rate: 0.0, count: 312 });

        let ab = DecisionChain::parse(Seer, "check: werewolf vote: werewolf").unwrap();
        db.insert(ab, ChainStats { win_rate: 0.7, count: 40 });
        let abc = DecisionChain::parse(Seer, "check: werewolf vote: werewolf check: villager").unwrap();
        assert_eq!(db.lookup(&abc), ChainStats { win_rate: 0.7, count: 40 });

        // same tokens under another role never match
        let other = DecisionChain::new(Witch, abc.tokens.clone());
        assert_eq!(db.lookup(&other), ChainStats { win_rate: 0.5, count: 0 });

        let empty = ChainDb::default();
        assert_eq!(
            empty.lookup(&DecisionChain::new(Villager, vec![])),
            ChainStats { win_rate: 0.5, count: 0 }
        );
    }

    #[test]
    fn lookup_skips_entries_below_min_count() {
        let mut db = ChainDb::new(30, 0.5);
        db.insert(DecisionChain::parse(Villager, "vote: seer").unwrap(), ChainStats { win_rate: 0.2, count: 50 });
        db.insert(
            DecisionChain::parse(Villager, "vote: seer vote: witch").unwrap(),
            ChainStats { win_rate: 0.1, count: 29 },
        );
        let c = DecisionChain::parse(Villager, "vote: seer vote: witch").unwrap();
        assert_eq!(db.lookup(&c).count, 50);
    }

    #[test]
    fn handwritten_file_loads() {
        let text = "villager\tvote: werewolf vote: werewolf vote: werewolf\t0.95\t687\n\
                    seer\tcheck: werewolf vote: werewolf check: werewolf vote: pass\t0.77\t413\n\
                    hunter\tvote: werewolf vote: none shot: werewolf\t0.92\t306\n";
        let db = ChainDb::read_from(text.as_bytes()).unwrap();
        assert_eq!(db.len(), 3);
        let c = DecisionChain::parse(Hunter, "vote: werewolf vote: none shot: werewolf").unwrap();
        assert_eq!(db.lookup(&c), ChainStats { win_rate: 0.92, count: 306 });
    }

    #[test]
    fn malformed_file_reports_line() {
        let text = "# header\nvillager\tvote: werewolf\t0.5\t2\nseer\tcheck: werewolf\tabc\t3\n";
        match ChainDb::read_from(text.as_bytes()) {
            Err(DataError::Malformed { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn empty_db_roundtrip() {
        let db = ChainDb::new(7, 0.25);
        let mut buf = Vec::new();
        db.write_to(&mut buf).unwrap();
        assert_eq!(ChainDb::read_from(buf.as_slice()).unwrap(), db);
    }

    #[test]
    fn jsonl_build_counts_bad_lines() {
        let good = log(vec![ev(1, Phase::DayVote, 3, Verb::Vote, Object::Player(0))], Camp::VillageSide);
        let text = format!("{}\nnot json\n\n{}\n", good.to_json_line(), good.to_json_line());
        let (db, report) = build_db_jsonl(text.as_bytes(), 1, 0.5);
        assert_eq!(report.warnings, 1);
        assert_eq!(report.games, 2);
        assert_eq!(db.len(), 1);
    }
}

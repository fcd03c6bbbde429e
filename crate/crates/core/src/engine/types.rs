use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ParseError;

pub type PlayerId = u8;

pub const NUM_PLAYERS: usize = 9;
/// Subject id used for engine announcements.
pub const SYSTEM: PlayerId = 255;
pub const NUM_ROLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Werewolf,
    Villager,
    Seer,
    Witch,
    Hunter,
}

impl Role {
    pub const ALL: [Role; NUM_ROLES] = [
        Role::Werewolf,
        Role::Villager,
        Role::Seer,
        Role::Witch,
        Role::Hunter,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Role> {
        Role::ALL.get(i).copied()
    }

    pub fn camp(self) -> Camp {
        match self {
            Role::Werewolf => Camp::WolfSide,
            _ => Camp::VillageSide,
        }
    }

    /// Seer, witch and hunter.
    pub fn is_special(self) -> bool {
        matches!(self, Role::Seer | Role::Witch | Role::Hunter)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Werewolf => "werewolf",
            Role::Villager => "villager",
            Role::Seer => "seer",
            Role::Witch => "witch",
            Role::Hunter => "hunter",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| ParseError::UnknownToken(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Camp {
    WolfSide,
    VillageSide,
}

impl Camp {
    pub fn as_str(self) -> &'static str {
        match self {
            Camp::WolfSide => "wolfside",
            Camp::VillageSide => "villageside",
        }
    }

    pub fn opponent(self) -> Camp {
        match self {
            Camp::WolfSide => Camp::VillageSide,
            Camp::VillageSide => Camp::WolfSide,
        }
    }
}

impl fmt::Display for Camp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Camp {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wolfside" => Ok(Camp::WolfSide),
            "villageside" => Ok(Camp::VillageSide),
            _ => Err(ParseError::UnknownToken(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    NightWolfKill,
    NightSeerCheck,
    NightWitch,
    DayAnnounce,
    DayDiscuss,
    DayVote,
    HunterShot,
    GameOver,
}

impl Phase {
    pub const ALL: [Phase; 8] = [
        Phase::NightWolfKill,
        Phase::NightSeerCheck,
        Phase::NightWitch,
        Phase::DayAnnounce,
        Phase::DayDiscuss,
        Phase::DayVote,
        Phase::HunterShot,
        Phase::GameOver,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::NightWolfKill => "night_wolf_kill",
            Phase::NightSeerCheck => "night_seer_check",
            Phase::NightWitch => "night_witch",
            Phase::DayAnnounce => "day_announce",
            Phase::DayDiscuss => "day_discuss",
            Phase::DayVote => "day_vote",
            Phase::HunterShot => "hunter_shot",
            Phase::GameOver => "game_over",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| ParseError::UnknownToken(s.to_string()))
    }
}

/// Closed event vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Verb {
    Kill,
    Check,
    Save,
    Poison,
    Vote,
    Shoot,
    Claim,
    Accuse,
    Pass,
    Die,
}

impl Verb {
    pub const ALL: [Verb; 10] = [
        Verb::Kill,
        Verb::Check,
        Verb::Save,
        Verb::Poison,
        Verb::Vote,
        Verb::Shoot,
        Verb::Claim,
        Verb::Accuse,
        Verb::Pass,
        Verb::Die,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Kill => "kill",
            Verb::Check => "check",
            Verb::Save => "save",
            Verb::Poison => "poison",
            Verb::Vote => "vote",
            Verb::Shoot => "shoot",
            Verb::Claim => "claim",
            Verb::Accuse => "accuse",
            Verb::Pass => "pass",
            Verb::Die => "die",
        }
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verb {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Verb::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| ParseError::UnknownToken(s.to_string()))
    }
}

/// Event object: a player, a role name, or nothing.
///
/// Serialized as a JSON integer for players, a lowercase role string for roles
/// and the string `"none"` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Object {
    Player(PlayerId),
    Role(Role),
    None,
}

impl Object {
    pub fn player(self) -> Option<PlayerId> {
        match self {
            Object::Player(p) => Some(p),
            _ => None,
        }
    }
}

impl Serialize for Object {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Object::Player(p) => s.serialize_u8(*p),
            Object::Role(r) => s.serialize_str(r.as_str()),
            Object::None => s.serialize_str("none"),
        }
    }
}

impl<'de> Deserialize<'de> for Object {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Id(u8),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Id(p) => Ok(Object::Player(p)),
            Raw::Word(w) if w == "none" => Ok(Object::None),
            Raw::Word(w) => w
                .parse::<Role>()
                .map(Object::Role)
                .map_err(serde::de::Error::custom),
        }
    }
}

macro_rules! serde_via_str {
    ($($t:ty),*) => {$(
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    )*};
}

serde_via_str!(Role, Camp, Phase, Verb);

/// One `(subject, verb, object)` record of the game history.
///
/// `detail` carries the asserted role of a spoken accusation or a revealed
/// check result; it is absent for every engine-generated event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub round: u32,
    pub phase: Phase,
    pub subject: PlayerId,
    pub verb: Verb,
    pub object: Object,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Role>,
}

impl Event {
    pub fn new(round: u32, phase: Phase, subject: PlayerId, verb: Verb, object: Object) -> Self {
        Event {
            round,
            phase,
            subject,
            verb,
            object,
            detail: None,
        }
    }

    pub fn with_detail(mut self, role: Role) -> Self {
        self.detail = Some(role);
        self
    }

    pub fn is_system(&self) -> bool {
        self.subject == SYSTEM
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let subject = if self.is_system() {
            "system".to_string()
        } else {
            format!("p{}", self.subject)
        };
        let object = match self.object {
            Object::Player(p) => format!("p{p}"),
            Object::Role(r) => r.to_string(),
            Object::None => "none".to_string(),
        };
        write!(f, "[r{} {}] {} {} {}", self.round, self.phase, subject, self.verb, object)?;
        if let Some(d) = self.detail {
            write!(f, " ({d})")?;
        }
        Ok(())
    }
}

use std::fmt;

use super::types::{PlayerId, NUM_PLAYERS};

/// Seven targeted verbs times nine seats, plus `pass`.
pub const ACTION_SPACE: usize = 64;
pub const PASS_INDEX: usize = ACTION_SPACE - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Kill(PlayerId),
    Check(PlayerId),
    Save(PlayerId),
    Poison(PlayerId),
    Vote(PlayerId),
    Shoot(PlayerId),
    Accuse(PlayerId),
    Pass,
}

impl Action {
    pub fn index(self) -> usize {
        let (slot, p) = match self {
            Action::Kill(p) => (0, p),
            Action::Check(p) => (1, p),
            Action::Save(p) => (2, p),
            Action::Poison(p) => (3, p),
            Action::Vote(p) => (4, p),
            Action::Shoot(p) => (5, p),
            Action::Accuse(p) => (6, p),
            Action::Pass => return PASS_INDEX,
        };
        slot * NUM_PLAYERS + p as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        if i == PASS_INDEX {
            return Some(Action::Pass);
        }
        if i >= PASS_INDEX {
            return None;
        }
        let p = (i % NUM_PLAYERS) as PlayerId;
        Some(match i / NUM_PLAYERS {
            0 => Action::Kill(p),
            1 => Action::Check(p),
            2 => Action::Save(p),
            3 => Action::Poison(p),
            4 => Action::Vote(p),
            5 => Action::Shoot(p),
            _ => Action::Accuse(p),
        })
    }

    pub fn target(self) -> Option<PlayerId> {
        match self {
            Action::Kill(p)
            | Action::Check(p)
            | Action::Save(p)
            | Action::Poison(p)
            | Action::Vote(p)
            | Action::Shoot(p)
            | Action::Accuse(p) => Some(p),
            Action::Pass => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Kill(p) => write!(f, "kill {p}"),
            Action::Check(p) => write!(f, "check {p}"),
            Action::Save(p) => write!(f, "save {p}"),
            Action::Poison(p) => write!(f, "poison {p}"),
            Action::Vote(p) => write!(f, "vote {p}"),
            Action::Shoot(p) => write!(f, "shoot {p}"),
            Action::Accuse(p) => write!(f, "accuse {p}"),
            Action::Pass => f.write_str("pass"),
        }
    }
}

/// Legal-action flags over the global action space.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct ActionMask {
    legal: [bool; ACTION_SPACE],
}

impl ActionMask {
    pub fn none() -> Self {
        ActionMask {
            legal: [false; ACTION_SPACE],
        }
    }

    pub fn from_legal(legal: [bool; ACTION_SPACE]) -> Self {
        ActionMask { legal }
    }

    pub fn allow(&mut self, action: Action) {
        self.legal[action.index()] = true;
    }

    pub fn is_legal(&self, action: Action) -> bool {
        self.legal[action.index()]
    }

    pub fn is_legal_index(&self, i: usize) -> bool {
        self.legal[i]
    }

    /// 1.0 for masked (illegal) entries, 0.0 for legal ones.
    pub fn penalty_indicator(&self, i: usize) -> f64 {
        if self.legal[i] {
            0.0
        } else {
            1.0
        }
    }

    pub fn any_legal(&self) -> bool {
        self.legal.iter().any(|&b| b)
    }

    pub fn count_legal(&self) -> usize {
        self.legal.iter().filter(|&&b| b).count()
    }

    pub fn legal_actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.legal
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .filter_map(|(i, _)| Action::from_index(i))
    }

    pub fn as_slice(&self) -> &[bool; ACTION_SPACE] {
        &self.legal
    }
}

impl fmt::Debug for ActionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.legal_actions()).finish()
    }
}

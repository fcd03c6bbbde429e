//! Structured discussion: what each seat says during `DayDiscuss`.
//!
//! The game-visible output is a [`ClaimSet`], converted to speech events the
//! predictor consumes. Text is a rendering of the claims, either from local
//! templates or from an external generator reached over newline-delimited JSON.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::{Action, Event, Object, Phase, PlayerId, Role, StateView, Verb};
use crate::error::DiscussError;
use crate::predictor::Belief;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Honesty {
    Truthful,
    Deceptive,
}

impl Honesty {
    fn of(matches_truth: bool) -> Self {
        if matches_truth {
            Honesty::Truthful
        } else {
            Honesty::Deceptive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assertion {
    pub target: PlayerId,
    pub role: Role,
    pub honesty: Honesty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeclaredVote {
    Target(PlayerId),
    Pass,
}

/// What one seat asserts in one discussion phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimSet {
    pub speaker: PlayerId,
    pub role_claim: Option<(Role, Honesty)>,
    pub accusations: BTreeSet<Assertion>,
    /// A revealed check; `Werewolf` or `Villager` (meaning "good").
    pub revealed_check: Option<Assertion>,
    pub declared_vote: Option<DeclaredVote>,
}

impl ClaimSet {
    pub fn empty(speaker: PlayerId) -> Self {
        ClaimSet {
            speaker,
            role_claim: None,
            accusations: BTreeSet::new(),
            revealed_check: None,
            declared_vote: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.role_claim.is_none()
            && self.accusations.is_empty()
            && self.revealed_check.is_none()
            && self.declared_vote.is_none()
    }

    /// Speech events for the engine, in a fixed order.
    pub fn to_events(&self, round: u32) -> Vec<Event> {
        let s = self.speaker;
        let phase = Phase::DayDiscuss;
        let mut out = Vec::new();
        if let Some((r, _)) = self.role_claim {
            out.push(Event::new(round, phase, s, Verb::Claim, Object::Role(r)));
        }
        if let Some(c) = self.revealed_check {
            out.push(Event::new(round, phase, s, Verb::Check, Object::Player(c.target)).with_detail(c.role));
        }
        for a in &self.accusations {
            out.push(Event::new(round, phase, s, Verb::Accuse, Object::Player(a.target)).with_detail(a.role));
        }
        match self.declared_vote {
            Some(DeclaredVote::Target(t)) => out.push(Event::new(round, phase, s, Verb::Vote, Object::Player(t))),
            Some(DeclaredVote::Pass) => out.push(Event::new(round, phase, s, Verb::Pass, Object::None)),
            None => {}
        }
        out
    }

    /// Every tag agrees with the ground truth.
    pub fn consistent_with(&self, roles: &[Role]) -> bool {
        let role_ok = self
            .role_claim
            .is_none_or(|(r, h)| h == Honesty::of(roles[self.speaker as usize] == r));
        let check_ok = self.revealed_check.is_none_or(|c| c.honesty == check_honesty(c.target, c.role, roles));
        let acc_ok = self
            .accusations
            .iter()
            .all(|a| a.honesty == Honesty::of(roles[a.target as usize] == a.role));
        role_ok && check_ok && acc_ok
    }
}

fn check_honesty(target: PlayerId, result: Role, roles: &[Role]) -> Honesty {
    Honesty::of((result == Role::Werewolf) == (roles[target as usize] == Role::Werewolf))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WolfClaim {
    /// Claim villager, never counter-claim.
    AlwaysHide,
    /// Counter-claim seer once a seer claimant exposes a teammate.
    #[default]
    CounterWhenExposed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClaimPolicy {
    pub wolf: WolfClaim,
    pub seer_reveals: bool,
}

impl Default for ClaimPolicy {
    fn default() -> Self {
        ClaimPolicy {
            wolf: WolfClaim::CounterWhenExposed,
            seer_reveals: true,
        }
    }
}

/// Players who publicly claimed `role`, in claim order.
pub fn claimants(view: &StateView, role: Role) -> Vec<PlayerId> {
    let mut out = Vec::new();
    for e in &view.events {
        if e.phase == Phase::DayDiscuss && e.verb == Verb::Claim && e.object == Object::Role(role) && !out.contains(&e.subject) {
            out.push(e.subject);
        }
    }
    out
}

fn top_by(view: &StateView, candidates: impl Iterator<Item = PlayerId>, score: impl Fn(PlayerId) -> f64) -> Option<PlayerId> {
    candidates
        .filter(|&p| view.alive[p as usize] && p != view.observer)
        .max_by(|&a, &b| score(a).total_cmp(&score(b)).then(b.cmp(&a)))
}

/// Deterministic claims for the speaker given its view, belief and the
/// decider's discussion decision.
pub fn make_claims(
    view: &StateView,
    roles: &[Role],
    belief: &Belief,
    decision: Action,
    policy: &ClaimPolicy,
) -> ClaimSet {
    let me = view.observer;
    let mut claims = ClaimSet::empty(me);
    let n = view.alive.len() as PlayerId;
    let teammates: Vec<PlayerId> = view
        .known_roles
        .iter()
        .filter(|(_, r)| *r == Role::Werewolf)
        .map(|(p, _)| *p)
        .collect();
    let is_wolf = view.role == Role::Werewolf;

    let accuse_target = match decision {
        Action::Accuse(t) => Some(t),
        _ if is_wolf => {
            let seers = claimants(view, Role::Seer);
            top_by(view, (0..n).filter(|p| !teammates.contains(p)), |p| {
                belief.prob(p, Role::Seer) + if seers.contains(&p) { 1.0 } else { 0.0 }
            })
        }
        _ => top_by(view, 0..n, |p| belief.prob(p, Role::Werewolf)),
    };

    match view.role {
        Role::Werewolf => {
            let already = claimants(view, Role::Seer).contains(&me);
            // a non-teammate seer claimant who named a teammate
            let exposer = view.events.iter().rev().find(|e| {
                e.phase == Phase::DayDiscuss
                    && !teammates.contains(&e.subject)
                    && matches!(e.verb, Verb::Check | Verb::Accuse)
                    && e.detail == Some(Role::Werewolf)
                    && e.object == Object::Player(me)
                    && claimants(view, Role::Seer).contains(&e.subject)
            });
            let counter = policy.wolf == WolfClaim::CounterWhenExposed && (already || exposer.is_some());
            if counter {
                claims.role_claim = Some((Role::Seer, Honesty::Deceptive));
                let fake = exposer
                    .map(|e| e.subject)
                    .or_else(|| claimants(view, Role::Seer).into_iter().find(|p| !teammates.contains(p)))
                    .or(accuse_target);
                if let Some(t) = fake {
                    claims.revealed_check = Some(Assertion {
                        target: t,
                        role: Role::Werewolf,
                        honesty: check_honesty(t, Role::Werewolf, roles),
                    });
                }
            } else {
                claims.role_claim = Some((Role::Villager, Honesty::Deceptive));
            }
        }
        Role::Seer if policy.seer_reveals => {
            claims.role_claim = Some((Role::Seer, Honesty::Truthful));
            if let Some((t, is_wolf)) = view.latest_check() {
                let result = if is_wolf { Role::Werewolf } else { Role::Villager };
                claims.revealed_check = Some(Assertion {
                    target: t,
                    role: result,
                    honesty: check_honesty(t, result, roles),
                });
            }
        }
        _ => {}
    }

    if let Some(t) = accuse_target.filter(|&t| t != me && view.alive[t as usize]) {
        claims.accusations.insert(Assertion {
            target: t,
            role: Role::Werewolf,
            honesty: Honesty::of(roles[t as usize] == Role::Werewolf),
        });
    }
    claims.declared_vote = Some(match decision {
        Action::Accuse(t) => DeclaredVote::Target(t),
        _ => DeclaredVote::Pass,
    });
    claims
}

/// Text templates with `{speaker}`, `{target}` and `{role}` placeholders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Templates(pub BTreeMap<String, String>);

impl Default for Templates {
    fn default() -> Self {
        let t = [
            ("role_claim", "Player {speaker} claims to be the {role}."),
            ("check", "Player {speaker} checked player {target} and found a {role}."),
            ("accuse", "Player {speaker} accuses player {target} of being a {role}."),
            ("vote", "Player {speaker} will vote for player {target}."),
            ("vote_pass", "Player {speaker} will not vote."),
        ];
        Templates(t.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }
}

impl Templates {
    fn get(&self, key: &str) -> Result<&str, DiscussError> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| DiscussError::MissingTemplate(key.to_string()))
    }
}

fn fill(template: &str, speaker: PlayerId, target: Option<PlayerId>, role: Option<Role>) -> String {
    let mut s = template.replace("{speaker}", &speaker.to_string());
    if let Some(t) = target {
        s = s.replace("{target}", &t.to_string());
    }
    if let Some(r) = role {
        s = s.replace("{role}", r.as_str());
    }
    s
}

/// Matches `line` against `template`, returning placeholder values.
fn match_template(template: &str, line: &str) -> Option<BTreeMap<String, String>> {
    let mut vars = BTreeMap::new();
    let mut rest_t = template;
    let mut rest_l = line;
    loop {
        match rest_t.find('{') {
            None => return (rest_t == rest_l).then_some(vars),
            Some(open) => {
                let literal = &rest_t[..open];
                rest_l = rest_l.strip_prefix(literal)?;
                let close = rest_t[open..].find('}')? + open;
                let name = &rest_t[open + 1..close];
                rest_t = &rest_t[close + 1..];
                let next_lit_end = rest_t.find('{').unwrap_or(rest_t.len());
                let next_lit = &rest_t[..next_lit_end];
                let end = if next_lit.is_empty() {
                    rest_l.len()
                } else {
                    rest_l.find(next_lit)?
                };
                vars.insert(name.to_string(), rest_l[..end].to_string());
                rest_l = &rest_l[end..];
            }
        }
    }
}

/// One line per claim, in the same order as [`ClaimSet::to_events`].
pub fn render_text(claims: &ClaimSet, templates: &Templates) -> Result<String, DiscussError> {
    let s = claims.speaker;
    let mut lines = Vec::new();
    if let Some((r, _)) = claims.role_claim {
        lines.push(fill(templates.get("role_claim")?, s, None, Some(r)));
    }
    if let Some(c) = claims.revealed_check {
        lines.push(fill(templates.get("check")?, s, Some(c.target), Some(c.role)));
    }
    for a in &claims.accusations {
        lines.push(fill(templates.get("accuse")?, s, Some(a.target), Some(a.role)));
    }
    match claims.declared_vote {
        Some(DeclaredVote::Target(t)) => lines.push(fill(templates.get("vote")?, s, Some(t), None)),
        Some(DeclaredVote::Pass) => lines.push(fill(templates.get("vote_pass")?, s, None, None)),
        None => {}
    }
    Ok(lines.join("\n"))
}

/// Inverse of [`render_text`]; honesty tags are recomputed from `roles`.
pub fn parse_claims(
    text: &str,
    speaker: PlayerId,
    templates: &Templates,
    roles: &[Role],
) -> Result<ClaimSet, DiscussError> {
    let mut claims = ClaimSet::empty(speaker);
    let unparseable = |l: &str| DiscussError::Unparseable(l.to_string());
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let mut matched = false;
        for key in ["role_claim", "check", "accuse", "vote", "vote_pass"] {
            let Some(vars) = match_template(templates.get(key)?, line) else {
                continue;
            };
            if vars.get("speaker").map(String::as_str) != Some(speaker.to_string().as_str()) {
                continue;
            }
            let target = vars.get("target").map(|t| t.parse::<PlayerId>());
            let role = vars.get("role").map(|r| r.parse::<Role>());
            let target = match target {
                Some(Ok(t)) if (t as usize) < roles.len() => Some(t),
                Some(_) => continue,
                None => None,
            };
            let role = match role {
                Some(Ok(r)) => Some(r),
                Some(Err(_)) => continue,
                None => None,
            };
            match (key, target, role) {
                ("role_claim", None, Some(r)) => {
                    claims.role_claim = Some((r, Honesty::of(roles[speaker as usize] == r)))
                }
                ("check", Some(t), Some(r)) => {
                    claims.revealed_check = Some(Assertion {
                        target: t,
                        role: r,
                        honesty: check_honesty(t, r, roles),
                    })
                }
                ("accuse", Some(t), Some(r)) => {
                    claims.accusations.insert(Assertion {
                        target: t,
                        role: r,
                        honesty: Honesty::of(roles[t as usize] == r),
                    });
                }
                ("vote", Some(t), None) => claims.declared_vote = Some(DeclaredVote::Target(t)),
                ("vote_pass", None, None) => claims.declared_vote = Some(DeclaredVote::Pass),
                _ => continue,
            }
            matched = true;
            break;
        }
        if !matched {
            return Err(unparseable(line));
        }
    }
    Ok(claims)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub context: String,
    pub claims: ClaimSet,
    pub role: Role,
}

#[derive(Debug, Clone, Deserialize)]
struct GenerationResponse {
    text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TextSource {
    External,
    Template,
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub text: String,
    pub source: TextSource,
    pub warning: Option<String>,
}

/// Client for an external text generator. Without an endpoint, or on any
/// failure, falls back to the templates.
#[derive(Debug)]
pub struct ExternalGenerator {
    pub endpoint: Option<String>,
    pub timeout: Duration,
    pub templates: Templates,
    failures: AtomicUsize,
}

impl ExternalGenerator {
    pub fn new(endpoint: Option<String>, timeout: Duration) -> Self {
        ExternalGenerator {
            endpoint,
            timeout,
            templates: Templates::default(),
            failures: AtomicUsize::new(0),
        }
    }

    pub fn failures(&self) -> usize {
        self.failures.load(Ordering::Relaxed)
    }

    fn request(&self, endpoint: &str, req: &GenerationRequest) -> Result<String, DiscussError> {
        let ext = |e: std::io::Error| DiscussError::External(e.to_string());
        let addr = endpoint
            .to_socket_addrs()
            .map_err(ext)?
            .next()
            .ok_or_else(|| DiscussError::External(format!("cannot resolve {endpoint}")))?;
        let mut stream = TcpStream::connect_timeout(&addr, self.timeout).map_err(ext)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(ext)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(ext)?;
        let mut line = serde_json::to_string(req).map_err(|e| DiscussError::External(e.to_string()))?;
        line.push('\n');
        stream.write_all(line.as_bytes()).map_err(ext)?;
        let mut reply = String::new();
        BufReader::new(stream).read_line(&mut reply).map_err(ext)?;
        let resp: GenerationResponse = serde_json::from_str(reply.trim_end())
            .map_err(|e| DiscussError::External(format!("malformed response: {e}")))?;
        Ok(resp.text)
    }

    pub fn generate(&self, req: &GenerationRequest) -> Generated {
        let fallback = |warning: Option<String>| Generated {
            text: render_text(&req.claims, &self.templates).unwrap_or_default(),
            source: TextSource::Template,
            warning,
        };
        let Some(endpoint) = self.endpoint.as_deref() else {
            return fallback(None);
        };
        match self.request(endpoint, req) {
            Ok(text) => Generated {
                text,
                source: TextSource::External,
                warning: None,
            },
            Err(e) => {
                self.failures.fetch_add(1, Ordering::Relaxed);
                fallback(Some(e.to_string()))
            }
        }
    }
}

pub fn external_generate(generator: &ExternalGenerator, req: &GenerationRequest) -> Generated {
    generator.generate(req)
}

//! PPO self-play: rollout waves, one-step TD advantages, clipped surrogate
//! updates, and the win-rate-conditioned training mode.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::Heuristic;
use crate::chains::{extract_chain, ChainDb};
use crate::engine::{ActionMask, Camp, PlayerId, Role};
use crate::error::{DataError, TrainError};
use crate::policy::{sample_loss, Adam, FeatureVector, LossConfig, NetConfig, PolicyBank, SampleTarget, Surrogate};
use crate::rewards::{chain_reward, ctrl_reward, step_reward, RewardConfig};
use crate::sim::{play_game, ControlGroup, GameRecord, Lineup, PolicySeat, SeatKind, SimOptions};
use crate::stats::RateCi;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    #[default]
    Performance,
    Controllable,
}

impl TrainMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Performance => "performance",
            TrainMode::Controllable => "controllable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Opponent {
    Random,
    #[default]
    Heuristic,
    /// A frozen policy checkpoint.
    Checkpoint(PathBuf),
    /// A snapshot of the learner, refreshed every `snapshot_every` waves.
    SelfPlay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub waves: usize,
    pub games_per_wave: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub clip: f64,
    pub surrogate: Surrogate,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    /// `None` keeps the one-step TD advantage.
    pub gae_lambda: Option<f64>,
    pub normalize_advantages: bool,
    pub wr_schedule: Vec<f64>,
    pub seed: u64,
    pub control: ControlGroup,
    pub opponent: Opponent,
    pub opponent_noise: f64,
    pub snapshot_every: usize,
    pub use_predictor: bool,
    pub use_chain_reward: bool,
    /// Set from the `[policy]` section.
    #[serde(skip)]
    pub per_role: bool,
    #[serde(skip)]
    pub net: NetConfig,
    /// Save a checkpoint every this many waves (0 = final only).
    pub checkpoint_every: usize,
    /// Games per constraint (or per ablation arm) in evaluations.
    pub eval_games: usize,
    /// Size of the simulated corpus behind the chain database when no
    /// database file is given.
    pub chain_corpus_games: usize,
    pub min_count: u64,
    pub default_wr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Performance,
            waves: 200,
            games_per_wave: 64,
            epochs: 4,
            minibatch: 256,
            lr: 3e-4,
            clip: 0.2,
            surrogate: Surrogate::Clipped,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            gae_lambda: None,
            normalize_advantages: false,
            wr_schedule: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            seed: 0,
            control: ControlGroup::Village,
            opponent: Opponent::Heuristic,
            opponent_noise: 0.0,
            snapshot_every: 10,
            use_predictor: true,
            use_chain_reward: true,
            per_role: false,
            net: NetConfig::default(),
            checkpoint_every: 0,
            eval_games: 200,
            chain_corpus_games: 3000,
            min_count: 30,
            default_wr: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("waves", self.waves),
            ("games_per_wave", self.games_per_wave),
            ("epochs", self.epochs),
            ("minibatch", self.minibatch),
            ("net.embed", self.net.embed),
            ("net.hidden", self.net.hidden),
            ("snapshot_every", self.snapshot_every),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(format!("train.{name} must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err("train.lr must be positive".into());
        }
        if !(self.clip > 0.0 && self.clip <= 1.0) {
            return Err(format!("train.clip must lie in (0, 1], got {}", self.clip));
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 || self.max_grad_norm < 0.0 {
            return Err("train coefficients must be non-negative".into());
        }
        if let Some(l) = self.gae_lambda {
            if !(0.0..=1.0).contains(&l) {
                return Err(format!("train.gae_lambda must lie in [0, 1], got {l}"));
            }
        }
        if !(0.0..=1.0).contains(&self.default_wr) {
            return Err("train.default_wr must lie in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.opponent_noise) {
            return Err("train.opponent_noise must lie in [0, 1]".into());
        }
        if self.mode == TrainMode::Controllable && self.wr_schedule.is_empty() {
            return Err("train.wr_schedule must not be empty in controllable mode".into());
        }
        if let Some(w) = self.wr_schedule.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(format!("train.wr_schedule entry {w} outside [0, 1]"));
        }
        Ok(())
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            clip: self.clip,
            surrogate: self.surrogate,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }
}

/// One decision of a trained seat.
#[derive(Debug, Clone)]
pub struct TrajectoryStep {
    pub features: FeatureVector,
    pub mask: ActionMask,
    pub net: usize,
    pub action: usize,
    pub behavior_prob: f64,
    pub value: f64,
    /// 0 at the terminal step.
    pub next_value: f64,
    pub sr: f64,
    /// 0 except at the terminal step.
    pub cr: f64,
    pub advantage: f64,
    pub ret: f64,
}

impl TrajectoryStep {
    pub fn reward(&self) -> f64 {
        self.sr + self.cr
    }
}

/// One seat's decisions over a game.
pub type Episode = Vec<TrajectoryStep>;

#[derive(Debug, Clone)]
pub struct GameOutcome {
    pub seed: u64,
    pub wr_cons: f64,
    pub winner: Camp,
}

/// Fills `advantage` and `ret`. One-step TD `r + gamma V' - V` by default;
/// with `lambda` the GAE recursion over each episode.
pub fn compute_advantages(episodes: &mut [Episode], gamma: f64, lambda: Option<f64>) {
    for ep in episodes.iter_mut() {
        for i in 0..ep.len() {
            let next = if i + 1 < ep.len() { ep[i + 1].value } else { 0.0 };
            ep[i].next_value = next;
        }
        match lambda {
            None => {
                for s in ep.iter_mut() {
                    s.advantage = s.reward() + gamma * s.next_value - s.value;
                    s.ret = s.advantage + s.value;
                }
            }
            Some(l) => {
                let mut acc = 0.0;
                for s in ep.iter_mut().rev() {
                    let delta = s.reward() + gamma * s.next_value - s.value;
                    acc = delta + gamma * l * acc;
                    s.advantage = acc;
                    s.ret = acc + s.value;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateStats {
    pub mean_ratio: f64,
    /// Ratios of every sample before the first gradient step.
    pub first_ratios: Vec<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub samples: usize,
}

/// Optimizer state per net of a bank.
#[derive(Debug, Clone)]
pub struct Optimizer {
    adams: Vec<Adam>,
}

impl Optimizer {
    pub fn new(bank: &PolicyBank, lr: f64, max_grad_norm: f64) -> Self {
        Optimizer {
            adams: bank
                .nets
                .iter()
                .map(|n| {
                    let mut a = Adam::new(n.len(), lr);
                    a.max_grad_norm = max_grad_norm;
                    a
                })
                .collect(),
        }
    }
}

/// PPO epochs over a batch of steps. Minibatch order comes from `rng`.
pub fn ppo_update<R: Rng>(
    bank: &mut PolicyBank,
    opt: &mut Optimizer,
    steps: &[TrajectoryStep],
    cfg: &TrainConfig,
    rng: &mut R,
    wave: usize,
) -> Result<UpdateStats, TrainError> {
    let loss = cfg.loss();
    let mut stats = UpdateStats {
        samples: steps.len(),
        ..UpdateStats::default()
    };
    if steps.is_empty() {
        return Ok(stats);
    }
    let advantages: Vec<f64> = if cfg.normalize_advantages && steps.len() > 1 {
        let n = steps.len() as f64;
        let mean = steps.iter().map(|s| s.advantage).sum::<f64>() / n;
        let var = steps.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt().max(1e-8);
        steps.iter().map(|s| (s.advantage - mean) / sd).collect()
    } else {
        steps.iter().map(|s| s.advantage).collect()
    };
    let target = |i: usize| SampleTarget {
        action: steps[i].action,
        behavior_prob: steps[i].behavior_prob,
        advantage: advantages[i],
        value_target: steps[i].ret,
    };

    let mut sums = [0.0; 4];
    for (i, s) in steps.iter().enumerate() {
        let parts = sample_loss(&bank.nets[s.net], &s.features, &s.mask, &target(i), &loss, None)?;
        stats.first_ratios.push(parts.ratio);
        sums[0] += parts.ratio;
        sums[1] += parts.policy;
        sums[2] += parts.value;
        sums[3] += parts.entropy;
    }
    let n = steps.len() as f64;
    stats.mean_ratio = sums[0] / n;
    stats.policy_loss = sums[1] / n;
    stats.value_loss = sums[2] / n;
    stats.entropy = sums[3] / n;
    if !(stats.policy_loss.is_finite() && stats.value_loss.is_finite()) {
        return Err(TrainError::NonFinite {
            wave,
            epoch: 0,
            detail: format!("policy loss {} value loss {}", stats.policy_loss, stats.value_loss),
        });
    }

    let mut order: Vec<usize> = (0..steps.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            let mut grads: Vec<Vec<f64>> = bank.nets.iter().map(|n| vec![0.0; n.len()]).collect();
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let s = &steps[i];
                let parts = sample_loss(
                    &bank.nets[s.net],
                    &s.features,
                    &s.mask,
                    &target(i),
                    &loss,
                    Some((&mut grads[s.net], scale)),
                )?;
                let total = parts.total(&loss);
                if !total.is_finite() {
                    return Err(TrainError::NonFinite {
                        wave,
                        epoch,
                        detail: format!("sample {i}: loss {total}, ratio {}", parts.ratio),
                    });
                }
            }
            for (k, g) in grads.iter().enumerate() {
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(TrainError::NonFinite {
                        wave,
                        epoch,
                        detail: format!("non-finite gradient for net {k}"),
                    });
                }
                if g.iter().any(|&v| v != 0.0) {
                    opt.adams[k].step(&mut bank.nets[k].data, g);
                }
            }
        }
    }
    Ok(stats)
}

/// Per-game seed from the run seed, wave and game index.
pub fn game_seed(seed: u64, wave: usize, game: usize) -> u64 {
    let mut z = seed ^ (wave as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (game as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seats for the controlled group and its opponents.
pub struct Setup<'a> {
    pub cfg: &'a TrainConfig,
    pub rewards: &'a RewardConfig,
    pub db: &'a ChainDb,
    pub sim: &'a SimOptions,
    pub opponent: Option<&'a PolicyBank>,
}

impl Setup<'_> {
    fn lineup(&self) -> Lineup {
        let others = match (&self.cfg.opponent, self.opponent) {
            (_, Some(_)) => SeatKind::Policy(1),
            (Opponent::Random, None) => SeatKind::Random,
            _ => SeatKind::Heuristic(Heuristic::new(self.cfg.opponent_noise)),
        };
        self.cfg.control.lineup(others)
    }

    fn play(&self, bank: &PolicyBank, seed: u64, wr_cons: f64, record: bool, greedy: bool) -> Result<GameRecord, TrainError> {
        let learner = PolicySeat {
            bank,
            wr_cons,
            greedy,
            record,
            use_predictor: self.cfg.use_predictor,
        };
        let mut seats = vec![learner];
        if let Some(opp) = self.opponent {
            seats.push(PolicySeat {
                bank: opp,
                wr_cons: 0.5,
                greedy: false,
                record: false,
                use_predictor: true,
            });
        }
        play_game(seed, &self.lineup(), &seats, self.sim).map_err(|source| TrainError::Env { game: seed, source })
    }

    /// Terminal `cr` for a seat given its chain's database win rate.
    pub fn terminal_cr(&self, wr_cons: f64, wr_dc: f64) -> f64 {
        if !self.cfg.use_chain_reward {
            return 0.0;
        }
        match self.cfg.mode {
            TrainMode::Performance => chain_reward(wr_dc, self.rewards.alpha),
            TrainMode::Controllable => ctrl_reward(wr_cons, wr_dc, self.rewards),
        }
    }

    fn wr_cons_for(&self, seed: u64) -> f64 {
        match self.cfg.mode {
            TrainMode::Performance => 1.0,
            TrainMode::Controllable => {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(3);
                *self.cfg.wr_schedule.choose(&mut r).expect("schedule is validated")
            }
        }
    }
}

/// Converts one recorded game into per-seat episodes.
pub fn episodes_from(record: &GameRecord, wr_cons: f64, setup: &Setup<'_>, bank: &PolicyBank) -> Vec<Episode> {
    let mut players: Vec<PlayerId> = record.steps.iter().map(|s| s.player).collect();
    players.sort_unstable();
    players.dedup();
    players
        .into_iter()
        .map(|p| {
            let role = record.log.roles[p as usize];
            let mut ep: Episode = record
                .steps
                .iter()
                .filter(|s| s.player == p)
                .map(|s| TrajectoryStep {
                    features: s.features.clone(),
                    mask: s.mask,
                    net: bank.net_index(s.role),
                    action: s.action,
                    behavior_prob: s.prob,
                    value: s.value,
                    next_value: 0.0,
                    sr: 0.0,
                    cr: 0.0,
                    advantage: 0.0,
                    ret: 0.0,
                })
                .collect();
            if let Some(last) = ep.last_mut() {
                last.sr = step_reward(true, role.camp(), Some(record.log.winner), setup.rewards);
                let wr_dc = setup.db.lookup(&extract_chain(&record.log, p)).win_rate;
                last.cr = setup.terminal_cr(wr_cons, wr_dc);
            }
            ep
        })
        .collect()
}

/// Plays `games_per_wave` games in parallel; results keep game order.
pub fn collect_wave(bank: &PolicyBank, setup: &Setup<'_>, wave: usize) -> Result<(Vec<Episode>, Vec<GameOutcome>), TrainError> {
    let results: Vec<Result<(Vec<Episode>, GameOutcome), TrainError>> = (0..setup.cfg.games_per_wave)
        .into_par_iter()
        .map(|g| {
            let seed = game_seed(setup.cfg.seed, wave, g);
            let wr_cons = setup.wr_cons_for(seed);
            let rec = setup.play(bank, seed, wr_cons, true, false)?;
            let eps = episodes_from(&rec, wr_cons, setup, bank);
            Ok((
                eps,
                GameOutcome {
                    seed,
                    wr_cons,
                    winner: rec.log.winner,
                },
            ))
        })
        .collect();
    let mut episodes = Vec::new();
    let mut outcomes = Vec::new();
    for r in results {
        let (e, o) = r?;
        episodes.extend(e);
        outcomes.push(o);
    }
    Ok((episodes, outcomes))
}

/// Win rate of the controlled camp over `n` games at a fixed target.
pub fn evaluate(bank: &PolicyBank, setup: &Setup<'_>, wr_cons: f64, n: usize, seed: u64) -> Result<RateCi, TrainError> {
    let camp = setup.cfg.control.camp();
    let wins: Result<Vec<bool>, TrainError> = (0..n)
        .into_par_iter()
        .map(|g| {
            let rec = setup.play(bank, game_seed(seed, usize::MAX, g), wr_cons, false, false)?;
            Ok(rec.log.winner == camp)
        })
        .collect();
    Ok(RateCi::new(wins?.into_iter().filter(|&w| w).count(), n))
}

/// Win rate of a scripted lineup (no policy seats) for `camp`.
pub fn baseline_rate(lineup: &Lineup, camp: Camp, n: usize, seed: u64, sim: &SimOptions) -> Result<RateCi, TrainError> {
    let wins: Result<Vec<bool>, TrainError> = (0..n)
        .into_par_iter()
        .map(|g| {
            let s = game_seed(seed, usize::MAX - 1, g);
            let rec = play_game(s, lineup, &[], sim).map_err(|source| TrainError::Env { game: s, source })?;
            Ok(rec.log.winner == camp)
        })
        .collect();
    Ok(RateCi::new(wins?.into_iter().filter(|&w| w).count(), n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveRow {
    pub wave: usize,
    pub mode: TrainMode,
    pub wr_cons: f64,
    pub achieved_wr: f64,
    pub mean_ratio: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<WaveRow>,
}

impl TrainReport {
    pub const HEADER: &'static str = "wave,mode,wr_cons,achieved_wr,mean_ratio,policy_loss,value_loss,entropy";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.wave,
                r.mode.as_str(),
                r.wr_cons,
                r.achieved_wr,
                r.mean_ratio,
                r.policy_loss,
                r.value_loss,
                r.entropy
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn wave_rows(wave: usize, cfg: &TrainConfig, outcomes: &[GameOutcome], stats: &UpdateStats) -> Vec<WaveRow> {
    let camp = cfg.control.camp();
    let row = |wr_cons: f64, games: Vec<&GameOutcome>| {
        let wins = games.iter().filter(|g| g.winner == camp).count();
        WaveRow {
            wave,
            mode: cfg.mode,
            wr_cons,
            achieved_wr: if games.is_empty() { 0.0 } else { wins as f64 / games.len() as f64 },
            mean_ratio: stats.mean_ratio,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
        }
    };
    match cfg.mode {
        TrainMode::Performance => vec![row(1.0, outcomes.iter().collect())],
        TrainMode::Controllable => cfg
            .wr_schedule
            .iter()
            .map(|&c| row(c, outcomes.iter().filter(|g| g.wr_cons == c).collect()))
            .collect(),
    }
}

pub struct TrainOutcome {
    pub bank: PolicyBank,
    pub report: TrainReport,
}

/// Full training run. Checkpoints go to `out_dir` when given.
pub fn train(
    cfg: &TrainConfig,
    rewards: &RewardConfig,
    db: &ChainDb,
    sim: &SimOptions,
    out_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate().map_err(TrainError::Config)?;
    rewards.validate().map_err(TrainError::Config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut bank = PolicyBank::init(cfg.net, cfg.per_role, &mut rng);
    let mut opt = Optimizer::new(&bank, cfg.lr, cfg.max_grad_norm);
    let frozen = match &cfg.opponent {
        Opponent::Checkpoint(p) => Some(PolicyBank::load_json(p)?),
        _ => None,
    };
    let mut snapshot = (cfg.opponent == Opponent::SelfPlay).then(|| bank.clone());
    let mut report = TrainReport::default();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(DataError::from)?;
    }
    for wave in 0..cfg.waves {
        let setup = Setup {
            cfg,
            rewards,
            db,
            sim,
            opponent: frozen.as_ref().or(snapshot.as_ref()),
        };
        let (mut episodes, outcomes) = collect_wave(&bank, &setup, wave)?;
        compute_advantages(&mut episodes, rewards.gamma, cfg.gae_lambda);
        let steps: Vec<TrajectoryStep> = episodes.into_iter().flatten().collect();
        let stats = ppo_update(&mut bank, &mut opt, &steps, cfg, &mut rng, wave)?;
        report.rows.extend(wave_rows(wave, cfg, &outcomes, &stats));
        if snapshot.is_some() && (wave + 1) % cfg.snapshot_every == 0 {
            snapshot = Some(bank.clone());
        }
        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && (wave + 1) % cfg.checkpoint_every == 0 {
                bank.save_json(&dir.join(format!("wave_{:04}.json", wave + 1)))?;
            }
        }
    }
    if let Some(dir) = out_dir {
        bank.save_json(&dir.join("final.json"))?;
        report.write_csv(&dir.join("train.csv"))?;
    }
    Ok(TrainOutcome { bank, report })
}

/// Roles a control group acts for, in role order.
pub fn controlled_roles(group: ControlGroup) -> Vec<Role> {
    Role::ALL.into_iter().filter(|&r| group.controls(r)).collect()
}

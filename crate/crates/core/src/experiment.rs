//! Experiment drivers behind the CLI: chain databases, controllability
//! sweeps, prediction evaluation and the ablation table.

use std::fmt::{self, Write as _};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chains::{build_db, ChainDb};
use crate::config::ExperimentConfig;
use crate::engine::{GameLog, Phase, PlayerId, Role, Verb};
use crate::error::{DataError, TrainError};
use crate::policy::PolicyBank;
use crate::predictor::{
    exact_random_acc, predict_identities, predict_werewolves, random_identities, random_werewolves, AccTable,
    LikelihoodModel,
};
use crate::sim::{mixed_corpus, BeliefTracker, ControlGroup};
use crate::stats::{spearman, RateCi};
use crate::train::{evaluate, train, Setup, TrainMode, TrainOutcome};

/// Database from `[paths].chains` if set, otherwise from a simulated
/// mixed-skill corpus.
pub fn prepare_db(cfg: &ExperimentConfig) -> Result<ChainDb, DataError> {
    if let Some(path) = &cfg.paths.chains {
        return ChainDb::load(path);
    }
    let t = &cfg.train;
    let logs = mixed_corpus(t.chain_corpus_games, t.seed ^ 0xC0FF_EE00, t.opponent_noise, &cfg.sim_options())
        .map_err(|e| DataError::Invalid(format!("corpus simulation failed: {e}")))?;
    Ok(build_db(logs.iter(), t.min_count, t.default_wr).0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub constraint: f64,
    pub result: RateCi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn rho(&self) -> Option<f64> {
        let xs: Vec<f64> = self.rows.iter().map(|r| r.constraint).collect();
        let ys: Vec<f64> = self.rows.iter().map(|r| r.result.rate).collect();
        spearman(&xs, &ys)
    }

    /// achieved(last) - achieved(first).
    pub fn spread(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => b.result.rate - a.result.rate,
            _ => 0.0,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("constraint,achieved_wr,ci_lo,ci_hi,games\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{}",
                r.constraint, r.result.rate, r.result.lo, r.result.hi, r.result.n
            );
        }
        out
    }
}

impl fmt::Display for SweepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>10}  {:>8}  {:>17}  {:>5}", "constraint", "achieved", "95% CI", "games")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>10.2}  {:>8.3}  [{:.3}, {:.3}]  {:>5}",
                r.constraint, r.result.rate, r.result.lo, r.result.hi, r.result.n
            )?;
        }
        match self.rho() {
            Some(rho) => write!(f, "spearman rho = {rho:.3}"),
            None => write!(f, "spearman rho = n/a"),
        }
    }
}

/// Evaluates each `(constraint, bank)` pair for the controlled camp.
pub fn sweep(
    arms: &[(f64, &PolicyBank)],
    setup: &Setup<'_>,
    n_games: usize,
    seed: u64,
) -> Result<SweepReport, TrainError> {
    let rows = arms
        .iter()
        .map(|&(c, bank)| {
            Ok(SweepRow {
                constraint: c,
                result: evaluate(bank, setup, c, n_games, seed)?,
            })
        })
        .collect::<Result<_, TrainError>>()?;
    Ok(SweepReport { rows })
}

/// Trains one conditional policy and sweeps it over the schedule.
pub fn controllability(cfg: &ExperimentConfig, db: &ChainDb) -> Result<(TrainOutcome, SweepReport), TrainError> {
    let mut tc = cfg.train_config();
    tc.mode = TrainMode::Controllable;
    let sim = cfg.sim_options();
    let out = train(&tc, &cfg.rewards, db, &sim, cfg.paths.out_dir.as_deref())?;
    let setup = Setup {
        cfg: &tc,
        rewards: &cfg.rewards,
        db,
        sim: &sim,
        opponent: None,
    };
    let arms: Vec<(f64, &PolicyBank)> = tc.wr_schedule.iter().map(|&c| (c, &out.bank)).collect();
    let report = sweep(&arms, &setup, tc.eval_games, tc.seed ^ 0xE7A1)?;
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictRow {
    pub label: String,
    /// ACC@1/2/3 for the three werewolves.
    pub werewolf: [f64; 3],
    /// ACC@1/3/5 for the eight identities.
    pub identity: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictReport {
    pub snapshots: usize,
    pub rows: Vec<PredictRow>,
}

/// Published reference rows: random guessing and the full agent.
pub const REFERENCE_ROWS: [(&str, [f64; 3], [f64; 3]); 2] = [
    ("ref:random", [0.748, 0.206, 0.008], [0.908, 0.344, 0.031]),
    ("ref:DVM", [0.908, 0.462, 0.090], [0.972, 0.633, 0.170]),
];

impl PredictReport {
    pub fn row(&self, label: &str) -> Option<&PredictRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

impl fmt::Display for PredictReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} | {:^23} | {:^23}", "", "werewolf", "identity")?;
        writeln!(
            f,
            "{:<12} | {:>7}{:>8}{:>8} | {:>7}{:>8}{:>8}",
            "predictor", "ACC@1", "ACC@2", "ACC@3", "ACC@1", "ACC@3", "ACC@5"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<12} | {:>7.3}{:>8.3}{:>8.3} | {:>7.3}{:>8.3}{:>8.3}",
                r.label, r.werewolf[0], r.werewolf[1], r.werewolf[2], r.identity[0], r.identity[1], r.identity[2]
            )?;
        }
        write!(
            f,
            "{} snapshots; exact random werewolf ACC@1 = {:.4}",
            self.snapshots,
            exact_random_acc(8, 3, 3, 1)
        )
    }
}

/// Indices where a day vote starts, i.e. the decision points snapshotted.
fn vote_starts(log: &GameLog) -> Vec<usize> {
    let mut out = Vec::new();
    let mut last_round = None;
    for (i, e) in log.events.iter().enumerate() {
        if e.phase == Phase::DayVote && last_round != Some(e.round) {
            out.push(i);
            last_round = Some(e.round);
        }
    }
    out
}

fn died_before(log: &GameLog, p: PlayerId, end: usize) -> bool {
    log.events[..end]
        .iter()
        .any(|e| e.is_system() && e.verb == Verb::Die && e.object.player() == Some(p))
}

/// Villager observers, snapshotted at the start of every day vote they are
/// alive for; random and Bayesian predictors scored on the same snapshots.
pub fn predict_eval(logs: &[GameLog], model: &LikelihoodModel, seed: u64) -> PredictReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tables = [
        (AccTable::new(&[1, 2, 3]), AccTable::new(&[1, 3, 5])),
        (AccTable::new(&[1, 2, 3]), AccTable::new(&[1, 3, 5])),
    ];
    let mut snapshots = 0;
    for log in logs {
        if log.roles.len() != crate::engine::NUM_PLAYERS {
            continue;
        }
        let wolves: Vec<PlayerId> = (0..log.roles.len() as PlayerId)
            .filter(|&p| log.roles[p as usize] == Role::Werewolf)
            .collect();
        let starts = vote_starts(log);
        for observer in (0..log.roles.len() as PlayerId).filter(|&p| log.roles[p as usize] == Role::Villager) {
            let truth: Vec<(PlayerId, Role)> = (0..log.roles.len() as PlayerId)
                .filter(|&p| p != observer)
                .map(|p| (p, log.roles[p as usize]))
                .collect();
            let mut tracker = BeliefTracker::new(observer, &log.roles);
            for &k in &starts {
                if died_before(log, observer, k) {
                    break;
                }
                tracker.catch_up(&log.events[..k], &log.roles, model);
                snapshots += 1;
                let guess = random_werewolves(observer, log.roles.len(), 3, &mut rng);
                tables[0].0.record(&guess, &wolves);
                let ids = random_identities(observer, Role::Villager, &log.roles, &mut rng);
                tables[0].1.record(&ids, &truth);
                tables[1].0.record(&predict_werewolves(&tracker.belief, 3), &wolves);
                tables[1].1.record(&predict_identities(&tracker.belief), &truth);
            }
        }
    }
    let to_row = |label: &str, (w, i): &(AccTable, AccTable)| {
        let (w, i) = (w.rates(), i.rates());
        PredictRow {
            label: label.into(),
            werewolf: [w[0], w[1], w[2]],
            identity: [i[0], i[1], i[2]],
        }
    };
    let mut rows = vec![to_row("random", &tables[0]), to_row("bayesian", &tables[1])];
    rows.extend(REFERENCE_ROWS.iter().map(|(l, w, i)| PredictRow {
        label: l.to_string(),
        werewolf: *w,
        identity: *i,
    }));
    PredictReport { snapshots, rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationArm {
    pub name: &'static str,
    pub use_chain_reward: bool,
    pub use_predictor: bool,
}

pub const ABLATION_ARMS: [AblationArm; 3] = [
    AblationArm {
        name: "full",
        use_chain_reward: true,
        use_predictor: true,
    },
    AblationArm {
        name: "-DCR",
        use_chain_reward: false,
        use_predictor: true,
    },
    AblationArm {
        name: "-Predictor",
        use_chain_reward: true,
        use_predictor: false,
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub arm: AblationArm,
    pub groups: Vec<(ControlGroup, RateCi)>,
    pub overall: RateCi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.arm.name == name)
    }
}

fn group_label(g: ControlGroup) -> &'static str {
    match g {
        ControlGroup::Wolves => "Werewolf",
        ControlGroup::Villagers => "Villager",
        ControlGroup::Specials => "Other Roles",
        ControlGroup::Village => "Village",
    }
}

impl fmt::Display for AblationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(first) = self.rows.first() else {
            return Ok(());
        };
        write!(f, "{:<12}", "method")?;
        for (g, _) in &first.groups {
            write!(f, " | {:>20}", group_label(*g))?;
        }
        writeln!(f, " | {:>20}", "Overall")?;
        for r in &self.rows {
            write!(f, "{:<12}", r.arm.name)?;
            for (_, c) in r.groups.iter().chain(std::iter::once(&(ControlGroup::Village, r.overall))) {
                write!(f, " | {:>5.3} [{:.3},{:.3}]", c.rate, c.lo, c.hi)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Trains and evaluates every arm for every control group in performance
/// mode. `progress` receives one line per finished run.
pub fn ablate(
    cfg: &ExperimentConfig,
    db: &ChainDb,
    groups: &[ControlGroup],
    mut progress: impl FnMut(&str),
) -> Result<AblationReport, TrainError> {
    let sim = cfg.sim_options();
    let mut rows = Vec::new();
    for arm in ABLATION_ARMS {
        let mut results = Vec::new();
        let (mut wins, mut n) = (0, 0);
        for &group in groups {
            let mut tc = cfg.train_config();
            tc.mode = TrainMode::Performance;
            tc.control = group;
            tc.use_chain_reward = arm.use_chain_reward;
            tc.use_predictor = arm.use_predictor;
            let out = train(&tc, &cfg.rewards, db, &sim, None)?;
            let setup = Setup {
                cfg: &tc,
                rewards: &cfg.rewards,
                db,
                sim: &sim,
                opponent: None,
            };
            let r = evaluate(&out.bank, &setup, 1.0, tc.eval_games, tc.seed ^ 0xAB1A)?;
            progress(&format!("{} / {}: {:.3}", arm.name, group_label(group), r.rate));
            wins += r.wins;
            n += r.n;
            results.push((group, r));
        }
        rows.push(AblationRow {
            arm,
            groups: results,
            overall: RateCi::new(wins, n),
        });
    }
    Ok(AblationReport { rows })
}

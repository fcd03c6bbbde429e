//! Command implementations behind the `wolfctl` binary.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use wolfctl_core::chains::{build_db, ChainDb};
use wolfctl_core::config::ExperimentConfig;
use wolfctl_core::engine::{
    is_visible, write_jsonl, Action, ActionMask, Camp, GameLog, GameState, PlayerId, Role, StateView,
};
use wolfctl_core::experiment::{ablate, predict_eval, prepare_db, sweep, SweepReport};
use wolfctl_core::fixtures::appendix_corpus;
use wolfctl_core::policy::PolicyBank;
use wolfctl_core::predictor::Belief;
use wolfctl_core::sim::{
    mixed_corpus, play_game, play_with_external, ControlGroup, ExternalSeat, Lineup, PlayOutcome, PolicySeat,
    SeatKind,
};
use wolfctl_core::agents::Heuristic;
use wolfctl_core::train::{train, Setup, TrainOutcome};
use wolfctl_core::{ConfigError, DataError, TrainError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Run(_) => 1,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Data(d) => CliError::Data(d),
            TrainError::Config(m) => CliError::Config(ConfigError::Invalid(m)),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(DataError::Io(e))
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn load_config(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    })
}

/// Who sits in a group of seats: `random`, `heuristic`, `heuristic:<noise>`
/// or a checkpoint path.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentSpec {
    Random,
    Heuristic(f64),
    Checkpoint(PathBuf),
}

impl FromStr for AgentSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(AgentSpec::Random),
            "heuristic" => Ok(AgentSpec::Heuristic(0.0)),
            _ => {
                if let Some(noise) = s.strip_prefix("heuristic:") {
                    let n: f64 = noise.parse().map_err(|_| format!("bad heuristic noise `{noise}`"))?;
                    if !(0.0..=1.0).contains(&n) {
                        return Err(format!("heuristic noise must lie in [0, 1], got {n}"));
                    }
                    Ok(AgentSpec::Heuristic(n))
                } else if s.ends_with(".json") {
                    Ok(AgentSpec::Checkpoint(PathBuf::from(s)))
                } else {
                    Err(format!("unknown agent `{s}`: expected random, heuristic[:noise] or a .json checkpoint"))
                }
            }
        }
    }
}

/// Loaded seat assignments plus any checkpoints they refer to.
pub struct Seating {
    pub lineup: Lineup,
    pub banks: Vec<PolicyBank>,
}

impl Seating {
    pub fn resolve(wolves: &AgentSpec, village: &AgentSpec) -> CliResult<Seating> {
        let mut banks = Vec::new();
        let mut kind = |spec: &AgentSpec| -> CliResult<SeatKind> {
            Ok(match spec {
                AgentSpec::Random => SeatKind::Random,
                AgentSpec::Heuristic(n) => SeatKind::Heuristic(Heuristic::new(*n)),
                AgentSpec::Checkpoint(p) => {
                    banks.push(PolicyBank::load_json(p)?);
                    SeatKind::Policy(banks.len() - 1)
                }
            })
        };
        let lineup = Lineup::camps(kind(wolves)?, kind(village)?);
        Ok(Seating { lineup, banks })
    }

    pub fn seats(&self, wr_cons: f64) -> Vec<PolicySeat<'_>> {
        self.banks
            .iter()
            .map(|bank| PolicySeat {
                bank,
                wr_cons,
                greedy: false,
                record: false,
                use_predictor: true,
            })
            .collect()
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub struct SimulateArgs {
    pub games: usize,
    pub seed: u64,
    pub wolves: AgentSpec,
    pub village: AgentSpec,
    pub wr_cons: f64,
    pub out: PathBuf,
}

pub fn simulate(cfg: &ExperimentConfig, args: &SimulateArgs, out: &mut dyn Write) -> CliResult<Vec<GameLog>> {
    let seating = Seating::resolve(&args.wolves, &args.village)?;
    let seats = seating.seats(args.wr_cons);
    let opts = cfg.sim_options();
    let logs = (0..args.games as u64)
        .map(|i| play_game(args.seed + i, &seating.lineup, &seats, &opts).map(|r| r.log))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Run(e.to_string()))?;
    let mut w = create(&args.out)?;
    write_jsonl(&mut w, &logs)?;
    w.flush()?;
    let village = logs.iter().filter(|l| l.winner == Camp::VillageSide).count();
    let n = logs.len().max(1) as f64;
    writeln!(
        out,
        "{} games -> {}: village {:.3}, wolves {:.3}",
        logs.len(),
        args.out.display(),
        village as f64 / n,
        (logs.len() - village) as f64 / n
    )?;
    Ok(logs)
}

pub fn read_corpus(paths: &[PathBuf]) -> CliResult<Vec<GameLog>> {
    let mut logs = Vec::new();
    for p in paths {
        let file = File::open(p).map_err(|e| DataError::Invalid(format!("{}: {e}", p.display())))?;
        for log in wolfctl_core::engine::read_jsonl(BufReader::new(file)) {
            logs.push(log.map_err(|e| DataError::Invalid(format!("{}: {e}", p.display())))?);
        }
    }
    Ok(logs)
}

pub fn build_chains(
    logs: &[GameLog],
    min_count: u64,
    default_wr: f64,
    path: &Path,
    out: &mut dyn Write,
) -> CliResult<ChainDb> {
    let (db, report) = build_db(logs, min_count, default_wr);
    if report.games == 0 {
        return Err(DataError::Invalid("no usable game logs".into()).into());
    }
    let mut w = create(path)?;
    db.write_to(&mut w)?;
    w.flush()?;
    let qualified = db.entries().iter().filter(|(_, s)| s.count >= min_count).count();
    writeln!(
        out,
        "{} games, {} player chains, {} distinct entries ({} with >= {} games) -> {}",
        report.games,
        report.chains,
        db.len(),
        qualified,
        min_count,
        path.display()
    )?;
    Ok(db)
}

pub fn fixture(path: &Path, out: &mut dyn Write) -> CliResult<usize> {
    let logs = appendix_corpus();
    let mut w = create(path)?;
    write_jsonl(&mut w, &logs)?;
    w.flush()?;
    writeln!(out, "{} fixture logs -> {}", logs.len(), path.display())?;
    Ok(logs.len())
}

/// `<out>/<mode>-seed<seed>`.
pub fn run_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    let base = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.paths.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    base.join(format!("{}-seed{}", cfg.train.mode.as_str(), cfg.train.seed))
}

/// Trains one conditional policy, or with `per_constraint` one policy per
/// scheduled constraint saved as `wr-<c>.json`.
pub fn train_cmd(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    per_constraint: bool,
    out: &mut dyn Write,
) -> CliResult<Vec<PathBuf>> {
    let dir = run_dir(cfg, out_dir);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let db = prepare_db(cfg)?;
    let sim = cfg.sim_options();
    let tc = cfg.train_config();
    let mut written = Vec::new();
    if per_constraint {
        for &c in &tc.wr_schedule {
            let sub = dir.join(format!("wr-{c:.2}"));
            let one = wolfctl_core::train::TrainConfig {
                wr_schedule: vec![c],
                ..tc.clone()
            };
            let TrainOutcome { bank, report } = train(&one, &cfg.rewards, &db, &sim, Some(&sub))?;
            let path = dir.join(format!("wr-{c:.2}.json"));
            bank.save_json(&path)?;
            writeln!(out, "constraint {c:.2}: {} waves -> {}", report.rows.len(), path.display())?;
            written.push(path);
        }
    } else {
        let outcome = train(&tc, &cfg.rewards, &db, &sim, Some(&dir))?;
        let last = outcome.report.rows.last();
        writeln!(
            out,
            "{} waves, last achieved win rate {:.3} -> {}",
            outcome.report.rows.len(),
            last.map_or(f64::NAN, |r| r.achieved_wr),
            dir.display()
        )?;
        written.push(dir.join("final.json"));
    }
    Ok(written)
}

/// `path` or `c=path`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointArg {
    pub constraint: Option<f64>,
    pub path: PathBuf,
}

impl FromStr for CheckpointArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('=') {
            Some((c, p)) => Ok(CheckpointArg {
                constraint: Some(c.parse().map_err(|_| format!("bad constraint `{c}`"))?),
                path: p.into(),
            }),
            None => Ok(CheckpointArg {
                constraint: None,
                path: s.into(),
            }),
        }
    }
}

pub struct SweepArgs {
    pub checkpoints: Vec<CheckpointArg>,
    pub constraints: Option<Vec<f64>>,
    pub games: Option<usize>,
    pub seed: u64,
    pub csv: Option<PathBuf>,
}

pub fn sweep_cmd(cfg: &ExperimentConfig, args: &SweepArgs, out: &mut dyn Write) -> CliResult<SweepReport> {
    let tc = cfg.train_config();
    let banks: Vec<(Option<f64>, PolicyBank)> = args
        .checkpoints
        .iter()
        .map(|c| Ok((c.constraint, PolicyBank::load_json(&c.path)?)))
        .collect::<Result<_, DataError>>()?;
    let arms: Vec<(f64, &PolicyBank)> = match banks.as_slice() {
        [] => return Err(CliError::Usage("sweep needs at least one --checkpoint".into())),
        [(None, bank)] => args
            .constraints
            .clone()
            .unwrap_or_else(|| tc.wr_schedule.clone())
            .into_iter()
            .map(|c| (c, bank))
            .collect(),
        many => many
            .iter()
            .map(|(c, b)| {
                c.map(|c| (c, b))
                    .ok_or_else(|| CliError::Usage("with several checkpoints each needs a `c=path` constraint".into()))
            })
            .collect::<CliResult<_>>()?,
    };
    let db = prepare_db(cfg)?;
    let sim = cfg.sim_options();
    let setup = Setup {
        cfg: &tc,
        rewards: &cfg.rewards,
        db: &db,
        sim: &sim,
        opponent: None,
    };
    let report = sweep(&arms, &setup, args.games.unwrap_or(tc.eval_games), args.seed)?;
    writeln!(out, "{report}")?;
    if let Some(path) = &args.csv {
        let mut w = create(path)?;
        w.write_all(report.to_csv().as_bytes())?;
        w.flush()?;
    }
    Ok(report)
}

pub fn predict_eval_cmd(
    cfg: &ExperimentConfig,
    logs: Option<Vec<GameLog>>,
    games: usize,
    seed: u64,
    out: &mut dyn Write,
) -> CliResult<()> {
    let logs = match logs {
        Some(l) => l,
        None => mixed_corpus(games, seed, cfg.train.opponent_noise, &cfg.sim_options())
            .map_err(|e| CliError::Run(e.to_string()))?,
    };
    let report = predict_eval(&logs, &cfg.game.likelihood, seed);
    writeln!(out, "{report}")?;
    Ok(())
}

pub fn ablate_cmd(cfg: &ExperimentConfig, groups: &[ControlGroup], out: &mut dyn Write) -> CliResult<()> {
    let db = prepare_db(cfg)?;
    let mut lines = Vec::new();
    let report = ablate(cfg, &db, groups, |l| lines.push(l.to_string()))?;
    for l in lines {
        writeln!(out, "{l}")?;
    }
    writeln!(out, "{report}")?;
    Ok(())
}

/// A human at a text terminal.
pub struct TerminalSeat<R, W> {
    input: R,
    output: W,
    shown: usize,
}

impl<R: BufRead, W: Write> TerminalSeat<R, W> {
    pub fn new(input: R, output: W) -> Self {
        TerminalSeat { input, output, shown: 0 }
    }

    fn show(&mut self, view: &StateView, mask: &ActionMask) -> io::Result<Vec<Action>> {
        let out = &mut self.output;
        for e in &view.events[self.shown.min(view.events.len())..] {
            writeln!(out, "  {e}")?;
        }
        self.shown = view.events.len();
        let alive: Vec<String> = (0..view.alive.len())
            .filter(|&i| view.alive[i])
            .map(|i| format!("p{i}"))
            .collect();
        writeln!(out, "round {} {} | you are p{} ({})", view.round, view.phase, view.observer, view.role)?;
        writeln!(out, "alive: {}", alive.join(" "))?;
        if view.role == Role::Werewolf {
            let pack: Vec<String> = view.known_roles.iter().map(|(p, _)| format!("p{p}")).collect();
            writeln!(out, "pack: {}", pack.join(" "))?;
        }
        for (p, wolf) in &view.seer_checks {
            writeln!(out, "check: p{p} is {}", if *wolf { "a werewolf" } else { "not a werewolf" })?;
        }
        if let Some(v) = view.night_victim {
            writeln!(out, "tonight's victim: p{v}")?;
        }
        let legal: Vec<Action> = mask.legal_actions().collect();
        let listing: Vec<String> = legal.iter().enumerate().map(|(i, a)| format!("[{i}] {a}")).collect();
        writeln!(out, "actions: {}", listing.join("  "))?;
        Ok(legal)
    }
}

/// An input line as a legal action: its list index or its spelled form.
pub fn parse_choice(line: &str, legal: &[Action]) -> Option<Action> {
    let line = line.trim().to_ascii_lowercase();
    if let Ok(i) = line.parse::<usize>() {
        return legal.get(i).copied();
    }
    let normalized = line.replace(" p", " ");
    legal.iter().copied().find(|a| a.to_string() == normalized)
}

impl<R: BufRead, W: Write> ExternalSeat for TerminalSeat<R, W> {
    fn decide(&mut self, view: &StateView, _belief: &Belief, mask: &ActionMask) -> Option<Action> {
        let legal = self.show(view, mask).ok()?;
        loop {
            write!(self.output, "> ").ok()?;
            self.output.flush().ok()?;
            let mut line = String::new();
            if self.input.read_line(&mut line).ok()? == 0 {
                return None;
            }
            match parse_choice(&line, &legal) {
                Some(a) => return Some(a),
                None => writeln!(self.output, "illegal action `{}`; pick one listed above", line.trim()).ok()?,
            }
        }
    }
}

pub struct PlayArgs {
    pub role: Role,
    pub opponents: AgentSpec,
    pub wr_cons: f64,
    pub seed: u64,
    pub log: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlayResult {
    Finished { winner: Camp, seat: PlayerId },
    Aborted { events: usize },
}

/// First seed at or after `seed` whose deal has a seat with `role`.
fn seat_for(role: Role, seed: u64, cfg: &ExperimentConfig) -> CliResult<(GameState, PlayerId)> {
    let game = cfg.sim_options().game;
    for s in seed..seed + 1000 {
        let state = GameState::new(s, &game).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let seat = state.players_with(role).next();
        if let Some(p) = seat {
            return Ok((state, p));
        }
    }
    Err(CliError::Usage(format!("no seat holds role {role}")))
}

pub fn play<R: BufRead, W: Write>(
    cfg: &ExperimentConfig,
    args: &PlayArgs,
    input: R,
    mut output: W,
) -> CliResult<PlayResult> {
    let seating = Seating::resolve(&args.opponents, &args.opponents)?;
    let seats = seating.seats(args.wr_cons);
    let (state, seat) = seat_for(args.role, args.seed, cfg)?;
    writeln!(output, "seed {}: you are p{seat}, {}", state.rng_seed, args.role)?;
    let mut human = TerminalSeat::new(input, &mut output);
    let outcome = play_with_external(
        state,
        &seating.lineup,
        &seats,
        &cfg.sim_options(),
        Some((seat, &mut human as &mut dyn ExternalSeat)),
    )
    .map_err(|e| CliError::Run(e.to_string()))?;
    let shown = human.shown;
    drop(human);
    let mut w = create(&args.log)?;
    let result = match outcome {
        PlayOutcome::Finished(record) => {
            let log = record.log;
            for e in log.events.iter().filter(|e| is_visible(e, seat, &log.roles)).skip(shown) {
                writeln!(output, "  {e}")?;
            }
            writeln!(w, "{}", log.to_json_line())?;
            writeln!(output, "game over: {} win", log.winner)?;
            PlayResult::Finished {
                winner: log.winner,
                seat,
            }
        }
        PlayOutcome::Aborted(state) => {
            let partial = serde_json::json!({
                "seed": state.rng_seed,
                "roles": state.roles,
                "events": state.history,
                "aborted": true,
            });
            writeln!(w, "{partial}")?;
            writeln!(output, "input closed; game aborted, log saved")?;
            PlayResult::Aborted {
                events: state.history.len(),
            }
        }
    };
    w.flush()?;
    Ok(result)
}

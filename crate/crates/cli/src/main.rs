use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wolfctl_cli::{
    ablate_cmd, build_chains, fixture, load_config, play, predict_eval_cmd, read_corpus, simulate, sweep_cmd,
    train_cmd, AgentSpec, CheckpointArg, CliError, CliResult, PlayArgs, SimulateArgs, SweepArgs,
};
use wolfctl_core::chains::{DEFAULT_MIN_COUNT, DEFAULT_WIN_RATE};
use wolfctl_core::sim::ControlGroup;
use wolfctl_core::train::TrainMode;
use wolfctl_core::Role;

/// Controllable 9-player Werewolf agents: simulation, chain statistics,
/// PPO training and evaluation.
///
/// Experiment settings come from a TOML file with sections [game], [rewards],
/// [policy], [train] and [paths]; every key is optional. `wolfctl defaults`
/// prints the full default document.
///
/// Exit codes: 0 success, 1 runtime failure, 2 config or usage error,
/// 3 data error.
#[derive(Parser)]
#[command(name = "wolfctl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default config document (or the controllable preset).
    Defaults {
        #[arg(long)]
        controllable: bool,
    },
    /// Simulate games and write a JSONL corpus.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(short = 'n', long, default_value_t = 100)]
        games: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// random | heuristic | heuristic:<noise> | <checkpoint>.json
        #[arg(long, default_value = "heuristic")]
        wolves: AgentSpec,
        #[arg(long, default_value = "heuristic")]
        village: AgentSpec,
        /// Win-rate constraint fed to checkpoint seats.
        #[arg(long, default_value_t = 0.5)]
        wr_cons: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Aggregate decision chains of one or more corpora into a database.
    BuildChains {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
        min_count: u64,
        #[arg(long, default_value_t = DEFAULT_WIN_RATE)]
        default_wr: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write the constructed reference-chain corpus.
    Fixture {
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train a policy; artifacts go to <out>/<mode>-seed<seed>.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<TrainMode>,
        #[arg(long)]
        waves: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Train one policy per scheduled constraint instead of one
        /// conditional policy.
        #[arg(long)]
        per_constraint: bool,
    },
    /// Evaluate achieved win rates across win-rate constraints.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// A conditional checkpoint, or several `c=path` pairs.
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<CheckpointArg>,
        #[arg(long, value_delimiter = ',')]
        constraints: Option<Vec<f64>>,
        #[arg(long)]
        games: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Werewolf and identity prediction accuracy of random and Bayesian
    /// predictors.
    PredictEval {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Corpora to evaluate; simulated when absent.
        logs: Vec<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        games: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train and evaluate the full, -DCR and -Predictor variants.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        waves: Option<usize>,
        #[arg(long)]
        eval_games: Option<usize>,
    },
    /// Play one seat from the terminal.
    Play {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "villager")]
        role: Role,
        /// random | heuristic | heuristic:<noise> | <checkpoint>.json
        #[arg(long, default_value = "heuristic")]
        opponents: AgentSpec,
        #[arg(long, default_value_t = 0.5)]
        wr_cons: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "wolfctl-play.jsonl")]
        log: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<TrainMode, String> {
    match s {
        "performance" => Ok(TrainMode::Performance),
        "controllable" => Ok(TrainMode::Controllable),
        _ => Err(format!("unknown mode `{s}`")),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Defaults { controllable } => {
            let cfg = if controllable {
                wolfctl_core::config::ExperimentConfig::controllable_defaults()
            } else {
                wolfctl_core::config::ExperimentConfig::default()
            };
            write!(out, "{}", cfg.to_toml())?;
        }
        Command::Simulate {
            config,
            games,
            seed,
            wolves,
            village,
            wr_cons,
            out: path,
        } => {
            let cfg = load_config(config.as_deref())?;
            let args = SimulateArgs {
                games,
                seed,
                wolves,
                village,
                wr_cons,
                out: path,
            };
            simulate(&cfg, &args, &mut out)?;
        }
        Command::BuildChains {
            logs,
            min_count,
            default_wr,
            out: path,
        } => {
            if !(0.0..=1.0).contains(&default_wr) {
                return Err(CliError::Usage(format!("--default-wr must lie in [0, 1], got {default_wr}")));
            }
            let corpus = read_corpus(&logs)?;
            build_chains(&corpus, min_count, default_wr, &path, &mut out)?;
        }
        Command::Fixture { out: path } => {
            fixture(&path, &mut out)?;
        }
        Command::Train {
            config,
            out: dir,
            mode,
            waves,
            seed,
            per_constraint,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(m) = mode {
                cfg.train.mode = m;
            }
            if let Some(w) = waves {
                cfg.train.waves = w;
            }
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            cfg.validate()?;
            train_cmd(&cfg, dir.as_deref(), per_constraint, &mut out)?;
        }
        Command::Sweep {
            config,
            checkpoints,
            constraints,
            games,
            seed,
            csv,
        } => {
            let cfg = load_config(config.as_deref())?;
            let args = SweepArgs {
                checkpoints,
                constraints,
                games,
                seed,
                csv,
            };
            sweep_cmd(&cfg, &args, &mut out)?;
        }
        Command::PredictEval {
            config,
            logs,
            games,
            seed,
        } => {
            let cfg = load_config(config.as_deref())?;
            let corpus = if logs.is_empty() { None } else { Some(read_corpus(&logs)?) };
            predict_eval_cmd(&cfg, corpus, games, seed, &mut out)?;
        }
        Command::Ablate {
            config,
            waves,
            eval_games,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(w) = waves {
                cfg.train.waves = w;
            }
            if let Some(n) = eval_games {
                cfg.train.eval_games = n;
            }
            cfg.validate()?;
            let groups = [ControlGroup::Wolves, ControlGroup::Villagers, ControlGroup::Specials];
            ablate_cmd(&cfg, &groups, &mut out)?;
        }
        Command::Play {
            config,
            role,
            opponents,
            wr_cons,
            seed,
            log,
        } => {
            let cfg = load_config(config.as_deref())?;
            let args = PlayArgs {
                role,
                opponents,
                wr_cons,
                seed,
                log,
            };
            let stdin = io::stdin();
            play(&cfg, &args, stdin.lock(), &mut out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

use wolfctl_cli::{parse_choice, play, AgentSpec, PlayArgs, PlayResult};
use wolfctl_core::chains::{ChainDb, DecisionChain};
use wolfctl_core::config::ExperimentConfig;
use wolfctl_core::engine::{read_jsonl, replay, Action, GameLog};
use wolfctl_core::fixtures::APPENDIX_CHAINS;
use wolfctl_core::{Camp, Role};

fn wolfctl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wolfctl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn wolfctl_stdin(args: &[&str], dir: &Path, input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_wolfctl"))
        .args(args)
        .current_dir(dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn logs(path: &Path) -> Vec<GameLog> {
    read_jsonl(std::io::BufReader::new(fs::File::open(path).unwrap()))
        .map(Result::unwrap)
        .collect()
}

const SMOKE: &str = r#"
[policy]
embed = 4
hidden = 8

[train]
waves = 5
games_per_wave = 4
epochs = 1
minibatch = 64
eval_games = 10
chain_corpus_games = 40
opponent_noise = 0.5
"#;

#[test]
fn simulate_is_replayable_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let args = ["simulate", "-n", "100", "--wolves", "random", "--village", "random", "--seed", "9"];
    let a = wolfctl(&[&args[..], &["-o", "a.jsonl"]].concat(), dir.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(stdout(&a).contains("100 games"));
    wolfctl(&[&args[..], &["-o", "b.jsonl"]].concat(), dir.path());
    let bytes_a = fs::read(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(bytes_a, fs::read(dir.path().join("b.jsonl")).unwrap());
    let corpus = logs(&dir.path().join("a.jsonl"));
    assert_eq!(corpus.len(), 100);
    for log in &corpus {
        replay(log).unwrap();
    }
}

#[test]
fn simulate_large_corpus_has_both_winners() {
    let dir = TempDir::new().unwrap();
    let o = wolfctl(&["simulate", "-n", "2000", "--wolves", "random", "--village", "random", "-o", "c.jsonl"], dir.path());
    assert!(o.status.success());
    let corpus = logs(&dir.path().join("c.jsonl"));
    let village = corpus.iter().filter(|l| l.winner == Camp::VillageSide).count();
    assert!(village > 0 && village < corpus.len());
}

#[test]
fn bad_agent_spec_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let o = wolfctl(&["simulate", "--wolves", "genius", "-o", "x.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = wolfctl(&["simulate", "--wolves", "missing.json", "-o", "x.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn fixture_chains_roundtrip_through_the_database() {
    let dir = TempDir::new().unwrap();
    assert!(wolfctl(&["fixture", "-o", "f.jsonl"], dir.path()).status.success());
    let o = wolfctl(&["build-chains", "f.jsonl", "-o", "db.tsv"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("15 distinct entries"));
    let db = ChainDb::load(&dir.path().join("db.tsv")).unwrap();
    for &(role, chain, wr, count) in &APPENDIX_CHAINS {
        let s = db.get(&DecisionChain::parse(role, chain).unwrap()).unwrap();
        assert_eq!(s.count, count);
        assert!((s.win_rate - wr).abs() <= 0.005);
    }
}

#[test]
fn huge_min_count_sends_every_lookup_to_the_default() {
    let dir = TempDir::new().unwrap();
    wolfctl(&["fixture", "-o", "f.jsonl"], dir.path());
    let o = wolfctl(
        &["build-chains", "f.jsonl", "--min-count", "1000000000", "--default-wr", "0.37", "-o", "db.tsv"],
        dir.path(),
    );
    assert!(o.status.success());
    let db = ChainDb::load(&dir.path().join("db.tsv")).unwrap();
    for &(role, chain, _, _) in &APPENDIX_CHAINS {
        let s = db.lookup(&DecisionChain::parse(role, chain).unwrap());
        assert_eq!((s.win_rate, s.count), (0.37, 0));
    }
}

#[test]
fn empty_corpus_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("e.jsonl"), "").unwrap();
    let o = wolfctl(&["build-chains", "e.jsonl", "-o", "db.tsv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = wolfctl(&["build-chains", "nope.jsonl", "-o", "db.tsv"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.toml"), "[rewards]\nepsilon = 1.5\n").unwrap();
    let o = wolfctl(&["train", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon"));
}

#[test]
fn defaults_document_parses_back() {
    let dir = TempDir::new().unwrap();
    for extra in [&[][..], &["--controllable"][..]] {
        let o = wolfctl(&[&["defaults"][..], extra].concat(), dir.path());
        assert!(o.status.success());
        ExperimentConfig::from_toml(&stdout(&o)).unwrap();
    }
}

#[test]
fn train_smoke_writes_report_and_checkpoint_then_sweeps() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("smoke.toml"), SMOKE).unwrap();
    let o = wolfctl(&["train", "--config", "smoke.toml", "--out", "runs", "--seed", "3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run: PathBuf = dir.path().join("runs/performance-seed3");
    let csv = fs::read_to_string(run.join("train.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("wave,mode,wr_cons,achieved_wr"));
    assert!(run.join("final.json").exists());

    let ckpt = "runs/performance-seed3/final.json";
    let o = wolfctl(
        &["sweep", "--config", "smoke.toml", "--checkpoint", ckpt, "--games", "8", "--csv", "sweep.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
    assert!(stdout(&o).contains("spearman rho"));

    let o = wolfctl(
        &["sweep", "--config", "smoke.toml", "--checkpoint", ckpt, "--constraints", "0.5", "--games", "4"],
        dir.path(),
    );
    assert!(stdout(&o).contains("rho = n/a"));
}

#[test]
fn per_constraint_training_writes_one_checkpoint_each() {
    let dir = TempDir::new().unwrap();
    let cfg = format!("{SMOKE}mode = \"controllable\"\nwr_schedule = [0.2, 0.8]\n");
    fs::write(dir.path().join("c.toml"), cfg.replace("waves = 5", "waves = 2")).unwrap();
    let o = wolfctl(&["train", "--config", "c.toml", "--out", "runs", "--per-constraint"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = dir.path().join("runs/controllable-seed0");
    assert!(run.join("wr-0.20.json").exists() && run.join("wr-0.80.json").exists());
    let o = wolfctl(
        &[
            "sweep",
            "--config",
            "c.toml",
            "--checkpoint",
            "0.2=runs/controllable-seed0/wr-0.20.json",
            "--checkpoint",
            "0.8=runs/controllable-seed0/wr-0.80.json",
            "--games",
            "4",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn predict_eval_prints_reference_rows() {
    let dir = TempDir::new().unwrap();
    let o = wolfctl(&["predict-eval", "--games", "30"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let dvm = text.lines().find(|l| l.starts_with("ref:DVM")).unwrap();
    for v in ["0.908", "0.462", "0.090"] {
        assert!(dvm.contains(v));
    }
    assert!(text.lines().any(|l| l.starts_with("bayesian")));
}

#[test]
fn ablate_smoke_has_three_rows() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("smoke.toml"), SMOKE).unwrap();
    let o = wolfctl(&["ablate", "--config", "smoke.toml", "--waves", "1", "--eval-games", "4"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text
        .lines()
        .skip_while(|l| !l.starts_with("method"))
        .filter_map(|l| l.split_whitespace().next())
        .filter(|w| ["full", "-DCR", "-Predictor"].contains(w))
        .collect();
    assert_eq!(rows, ["full", "-DCR", "-Predictor"]);
}

#[test]
fn scripted_game_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let script = "0\n".repeat(400);
    let args = ["play", "--role", "seer", "--seed", "11"];
    let a = wolfctl_stdin(&[&args[..], &["--log", "a.jsonl"]].concat(), dir.path(), &script);
    let b = wolfctl_stdin(&[&args[..], &["--log", "b.jsonl"]].concat(), dir.path(), &script);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("game over"));
    let log = &logs(&dir.path().join("a.jsonl"))[0];
    assert_eq!(log, &logs(&dir.path().join("b.jsonl"))[0]);
    replay(log).unwrap();
}

#[test]
fn illegal_input_reprompts_and_eof_aborts_with_log() {
    let dir = TempDir::new().unwrap();
    let o = wolfctl_stdin(&["play", "--role", "witch", "--log", "w.jsonl"], dir.path(), "fly away\n99\n");
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.matches("illegal action").count(), 2);
    assert!(text.contains("aborted"));
    let saved: serde_json::Value = serde_json::from_str(fs::read_to_string(dir.path().join("w.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(saved["aborted"], true);
    // nothing past the first witch decision was applied
    assert!(saved["events"].as_array().unwrap().iter().all(|e| e["phase"] != "night_witch"));
}

#[test]
fn choices_parse_by_index_or_name() {
    let legal = [Action::Vote(2), Action::Vote(5), Action::Pass];
    assert_eq!(parse_choice("1", &legal), Some(Action::Vote(5)));
    assert_eq!(parse_choice(" vote p2 ", &legal), Some(Action::Vote(2)));
    assert_eq!(parse_choice("VOTE 5", &legal), Some(Action::Vote(5)));
    assert_eq!(parse_choice("pass", &legal), Some(Action::Pass));
    assert_eq!(parse_choice("vote 3", &legal), None);
    assert_eq!(parse_choice("7", &legal), None);
}

#[test]
fn play_in_process_reports_seat_and_winner() {
    let dir = TempDir::new().unwrap();
    let args = PlayArgs {
        role: Role::Hunter,
        opponents: "random".parse::<AgentSpec>().unwrap(),
        wr_cons: 0.5,
        seed: 4,
        log: dir.path().join("h.jsonl"),
    };
    let script = "0\n".repeat(400);
    let mut out = Vec::new();
    let result = play(&ExperimentConfig::default(), &args, script.as_bytes(), &mut out).unwrap();
    let PlayResult::Finished { seat, winner } = result else {
        panic!("game did not finish");
    };
    let log = &logs(&args.log)[0];
    assert_eq!(log.roles[seat as usize], Role::Hunter);
    assert_eq!(log.winner, winner);
}

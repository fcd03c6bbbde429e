//! TOML experiment configuration with sections `[game]`, `[rewards]`,
//! `[policy]`, `[train]` and `[paths]`. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discussor::{ClaimPolicy, WolfClaim};
use crate::engine::{GameConfig, DEFAULT_MAX_ROUNDS};
use crate::error::ConfigError;
use crate::policy::{NetConfig, DENSE_DIM};
use crate::predictor::LikelihoodModel;
use crate::rewards::RewardConfig;
use crate::sim::SimOptions;
use crate::train::{TrainConfig, TrainMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameSection {
    pub max_rounds: u32,
    pub wolf_claim: WolfClaim,
    pub seer_reveals: bool,
    pub likelihood: LikelihoodModel,
}

impl Default for GameSection {
    fn default() -> Self {
        GameSection {
            max_rounds: DEFAULT_MAX_ROUNDS,
            wolf_claim: WolfClaim::default(),
            seer_reveals: true,
            likelihood: LikelihoodModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub embed: usize,
    pub hidden: usize,
    /// One net per role instead of a shared net.
    pub per_role: bool,
}

impl Default for PolicySection {
    fn default() -> Self {
        let n = NetConfig::default();
        PolicySection {
            embed: n.embed,
            hidden: n.hidden,
            per_role: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Chain database file; simulated from scratch when absent.
    pub chains: Option<PathBuf>,
    /// Output directory for runs.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSection,
    pub rewards: RewardConfig,
    pub policy: PolicySection,
    pub train: TrainConfig,
    pub paths: PathsSection,
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        ExperimentConfig::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.game.max_rounds == 0 {
            return Err(ConfigError::Invalid("game.max_rounds must be positive".into()));
        }
        self.game
            .likelihood
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("game.likelihood: {e}")))?;
        self.rewards.validate().map_err(ConfigError::Invalid)?;
        if self.policy.embed == 0 || self.policy.hidden == 0 {
            return Err(ConfigError::Invalid("policy.embed and policy.hidden must be positive".into()));
        }
        self.train_config().validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    /// `[train]` merged with the network shape from `[policy]`.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            net: NetConfig {
                embed: self.policy.embed,
                hidden: self.policy.hidden,
                dense: DENSE_DIM,
            },
            per_role: self.policy.per_role,
            ..self.train.clone()
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            game: GameConfig {
                max_rounds: self.game.max_rounds,
                ..GameConfig::default()
            },
            model: self.game.likelihood.clone(),
            claims: ClaimPolicy {
                wolf: self.game.wolf_claim,
                seer_reveals: self.game.seer_reveals,
            },
            ..SimOptions::default()
        }
    }

    /// Settings used for win-rate-conditioned training: the outcome reward
    /// is switched off so the constrained reward drives learning.
    pub fn controllable_defaults() -> Self {
        let mut cfg = ExperimentConfig::default();
        cfg.rewards.terminal_win = 0.0;
        cfg.rewards.terminal_loss = 0.0;
        cfg.train.mode = TrainMode::Controllable;
        cfg.train.waves = 300;
        cfg.train.lr = 1e-3;
        cfg.train.gae_lambda = Some(0.95);
        cfg.train.normalize_advantages = true;
        cfg.train.opponent_noise = 0.8;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_all_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
    }

    #[test]
    fn sections_parse() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            [game]
            max_rounds = 7
            wolf_claim = "always-hide"

            [game.likelihood]
            wolf_votes_wolf = 0.3

            [rewards]
            epsilon = 0.2

            [policy]
            hidden = 32
            per_role = true

            [train]
            mode = "controllable"
            waves = 5
            gae_lambda = 0.9
            opponent = "self-play"

            [paths]
            out_dir = "runs"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.game.max_rounds, 7);
        assert_eq!(cfg.game.wolf_claim, WolfClaim::AlwaysHide);
        assert_eq!(cfg.game.likelihood.wolf_votes_wolf, 0.3);
        assert_eq!(cfg.rewards.epsilon, 0.2);
        let t = cfg.train_config();
        assert_eq!(t.net.hidden, 32);
        assert!(t.per_role);
        assert_eq!(t.mode, TrainMode::Controllable);
        assert_eq!(t.gae_lambda, Some(0.9));
        assert_eq!(cfg.paths.out_dir, Some(PathBuf::from("runs")));
        assert_eq!(cfg.sim_options().game.max_rounds, 7);
    }

    #[test]
    fn checkpoint_opponent_parses() {
        let cfg = ExperimentConfig::from_toml("[train]\nopponent = { checkpoint = \"a.json\" }\n").unwrap();
        assert_eq!(cfg.train.opponent, crate::train::Opponent::Checkpoint("a.json".into()));
    }

    #[test]
    fn rejects_bad_values_with_field_names() {
        let err = ExperimentConfig::from_toml("[rewards]\nepsilon = 1.5\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(ref m) if m.contains("epsilon")), "{err}");
        let err = ExperimentConfig::from_toml("[train]\nclip = 0.0\n").unwrap_err();
        assert!(err.to_string().contains("clip"));
        let err = ExperimentConfig::from_toml("[train]\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(ref m) if m.contains("bogus")), "{err}");
        assert!(ExperimentConfig::from_toml("[weird]\n").is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = ExperimentConfig::controllable_defaults();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}

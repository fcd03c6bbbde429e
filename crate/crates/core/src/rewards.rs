//! Scalar rewards: terminal step reward, decision-chain reward and the
//! win-rate-constrained reward used for controllable training.

use serde::{Deserialize, Serialize};

use crate::engine::Camp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Chain reward amplitude.
    pub alpha: f64,
    /// Deviation threshold of the controllable reward.
    pub epsilon: f64,
    /// tanh smoothing factor.
    pub k: f64,
    /// Output scale.
    pub s: f64,
    pub gamma: f64,
    pub terminal_win: f64,
    pub terminal_loss: f64,
    /// Forces the controllable reward to carry the sign of the tanh term.
    pub strict_sign: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            alpha: 1.0,
            epsilon: 0.15,
            k: 0.1,
            s: 1.0,
            gamma: 0.99,
            terminal_win: 1.0,
            terminal_loss: -1.0,
            strict_sign: false,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            ("alpha", self.alpha),
            ("epsilon", self.epsilon),
            ("k", self.k),
            ("s", self.s),
            ("gamma", self.gamma),
            ("terminal_win", self.terminal_win),
            ("terminal_loss", self.terminal_loss),
        ];
        if let Some((name, _)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(format!("rewards.{name} must be finite"));
        }
        if self.alpha <= 0.0 {
            return Err("rewards.alpha must be > 0".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(format!("rewards.epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if self.k <= 0.0 {
            return Err("rewards.k must be > 0".into());
        }
        if self.s <= 0.0 {
            return Err("rewards.s must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("rewards.gamma must lie in [0, 1], got {}", self.gamma));
        }
        Ok(())
    }
}

/// Win-rate target for one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConstraint {
    pub wr_cons: f64,
}

/// Zero mid-game; at the agent's last decision, the camp outcome.
pub fn step_reward(is_final: bool, agent_camp: Camp, winner: Option<Camp>, cfg: &RewardConfig) -> f64 {
    match (is_final, winner) {
        (true, Some(w)) if w == agent_camp => cfg.terminal_win,
        (true, Some(_)) => cfg.terminal_loss,
        _ => 0.0,
    }
}

/// `alpha * (wr - 0.5)`.
pub fn chain_reward(wr: f64, alpha: f64) -> f64 {
    alpha * (wr - 0.5)
}

/// Controllable reward on the squared deviation `d` between the constraint
/// and the chain's win rate. Positive inside `d < epsilon^2`, negative far out.
pub fn ctrl_reward(wr_cons: f64, wr_dc: f64, cfg: &RewardConfig) -> f64 {
    let eps = cfg.epsilon;
    let d = (wr_cons - wr_dc).powi(2);
    let r = -((d - eps * eps) / cfg.k).tanh();
    let cr = if r >= 0.0 {
        r * (1.0 - d / eps) * cfg.s
    } else {
        r * (d - eps) / (1.0 - eps) * cfg.s
    };
    if cfg.strict_sign {
        cr.abs().copysign(r)
    } else {
        cr
    }
}

pub fn total_reward(sr: f64, cr: f64) -> f64 {
    sr + cr
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> RewardConfig {
        RewardConfig::default()
    }

    #[test]
    fn step_reward_terminal_only() {
        let c = cfg();
        assert_eq!(step_reward(false, Camp::VillageSide, None, &c), 0.0);
        assert_eq!(step_reward(true, Camp::VillageSide, Some(Camp::VillageSide), &c), 1.0);
        assert_eq!(step_reward(true, Camp::VillageSide, Some(Camp::WolfSide), &c), -1.0);
    }

    #[test]
    fn chain_reward_values() {
        assert!((chain_reward(0.98, 1.0) - 0.48).abs() < 1e-12);
        assert_eq!(chain_reward(0.5, 3.7), 0.0);
        assert_eq!(chain_reward(0.0, 2.0), -1.0);
    }

    #[test]
    fn ctrl_reward_closed_forms() {
        let c = cfg();
        // d = 0: tanh(0.0225 / 0.1)
        let v = ctrl_reward(0.4, 0.4, &c);
        assert!((v - 0.225f64.tanh()).abs() < 1e-15);
        assert!((v - 0.221278).abs() < 1e-6);
        // d = eps^2
        assert!(ctrl_reward(0.65, 0.5, &c).abs() < 1e-12);
        // d = 1
        let far = ctrl_reward(1.0, 0.0, &c);
        assert!((far - (-(9.775f64).tanh())).abs() < 1e-12);
    }

    #[test]
    fn strict_sign_flips_the_mixed_regime() {
        // d in (eps^2, eps): printed formula yields a positive value with r < 0
        let mut c = cfg();
        let wr_dc = 0.5 + 0.2; // d = 0.04
        let loose = ctrl_reward(0.5, wr_dc, &c);
        assert!(loose > 0.0);
        c.strict_sign = true;
        let strict = ctrl_reward(0.5, wr_dc, &c);
        assert_eq!(strict, -loose);
    }

    #[test]
    fn validate_rejects_bad_epsilon() {
        let mut c = cfg();
        c.epsilon = 1.5;
        assert!(c.validate().unwrap_err().contains("epsilon"));
        c.epsilon = 0.15;
        c.k = f64::NAN;
        assert!(c.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    #[test]
    fn total_reward_sums() {
        assert!((total_reward(1.0, 0.48) - 1.48).abs() < 1e-12);
        assert_eq!(total_reward(0.0, 0.0), 0.0);
        assert_eq!(total_reward(-1.0, -0.5), -1.5);
    }

    #[test]
    fn ctrl_reward_peaks_at_the_constraint() {
        let c = cfg();
        for ci in 0..=10 {
            let wr_cons = ci as f64 / 10.0;
            let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
            let best = grid
                .iter()
                .copied()
                .max_by(|a, b| ctrl_reward(wr_cons, *a, &c).total_cmp(&ctrl_reward(wr_cons, *b, &c)))
                .unwrap();
            assert!((best - wr_cons).abs() < 1e-9, "wr_cons {wr_cons}: argmax {best}");
        }
    }

    proptest! {
        #[test]
        fn chain_reward_is_odd(x in 0.0f64..=0.5, alpha in 0.01f64..10.0) {
            let a = chain_reward(0.5 + x, alpha);
            let b = chain_reward(0.5 - x, alpha);
            prop_assert!((a + b).abs() < 1e-12);
        }

        #[test]
        fn ctrl_reward_symmetric_and_bounded(a in 0.0f64..=1.0, b in 0.0f64..=1.0,
                                             eps in 0.01f64..0.99, k in 0.01f64..5.0, s in 0.1f64..5.0) {
            let c = RewardConfig { epsilon: eps, k, s, ..RewardConfig::default() };
            let x = ctrl_reward(a, b, &c);
            let y = ctrl_reward(b, a, &c);
            prop_assert!((x - y).abs() < 1e-12);
            prop_assert!(x.abs() <= s * (1.0 + 1.0 / eps) + 1e-12);
        }

        #[test]
        fn ctrl_reward_positive_inside_threshold(a in 0.0f64..=1.0, delta in -0.999f64..0.999) {
            let c = cfg();
            let b = (a + delta * c.epsilon).clamp(0.0, 1.0);
            let d = (a - b).powi(2);
            if d < c.epsilon * c.epsilon * (1.0 - 1e-9) {
                prop_assert!(ctrl_reward(a, b, &c) > 0.0);
            }
        }
    }
}

//! Pre-training the bandit so it shows a named behavior before any live
//! feedback.
//!
//! Each profile is a target linear payoff per arm: arm `a` should earn
//! `w_a · x` on context `x`. Every arm is fed the same synthetic contexts,
//! scaled unit vectors `c·e_j` over a grid of `c`, with reward `c·w_a[j]`.
//! Because the contexts are one-hot the arm matrices stay diagonal and equal
//! across arms, so the learned `θ_a` is exactly `κ·w_a` for a shared `κ > 0`
//! and the exploration bonus is the same for every arm. The profile's
//! ordering of arms therefore holds for any `alpha`.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::bandit::{BanditError, BanditState, NOOP_ARM};

/// Synthetic samples fed to each arm (rounded up to a multiple of the
/// context dimension so every direction gets the same weight).
pub const WARM_START_SAMPLES: usize = 100;

/// Payoff multiplier applied to the dispreferred skill under
/// [`WarmStartProfile::PreferSkill`].
pub const PREFERENCE_DISCOUNT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "kebab-case")]
pub enum WarmStartProfile {
    /// Always let commands through untouched.
    IgnoreClai,
    /// Pick the most confident skill.
    MaxOrchestrator,
    /// Max-confidence, except the listed skills never win.
    IgnoreSkill { skills: Vec<String> },
    /// Max-confidence, with `over`'s confidence discounted so `prefer` beats it.
    PreferSkill { prefer: String, over: String },
}

impl WarmStartProfile {
    /// Parses the short textual forms `ignore-clai`, `max-orchestrator`,
    /// `ignore-skill:<a>[,<b>...]` and `prefer-skill:<a>><b>`.
    pub fn parse(text: &str) -> Result<Self, WarmStartError> {
        let (name, arg) = match text.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (text.trim(), None),
        };
        match (name, arg) {
            ("ignore-clai", None) => Ok(Self::IgnoreClai),
            ("max-orchestrator", None) => Ok(Self::MaxOrchestrator),
            ("ignore-skill", Some(list)) if !list.is_empty() => Ok(Self::IgnoreSkill {
                skills: list.split(',').map(|s| String::from(s.trim())).collect(),
            }),
            ("prefer-skill", Some(pair)) => match pair.split_once('>') {
                Some((a, b)) if !a.trim().is_empty() && !b.trim().is_empty() => {
                    Ok(Self::PreferSkill {
                        prefer: String::from(a.trim()),
                        over: String::from(b.trim()),
                    })
                }
                _ => Err(WarmStartError::UnknownProfile(String::from(text))),
            },
            _ => Err(WarmStartError::UnknownProfile(String::from(text))),
        }
    }

    /// Target payoff weights for `arm` (noop is arm 0).
    fn weights(&self, state: &BanditState, arm: usize) -> Vec<f64> {
        let d = state.dimension();
        let mut w = alloc::vec![0.0; d];
        if arm == NOOP_ARM {
            if *self == Self::IgnoreClai {
                w.iter_mut().for_each(|v| *v = 1.0);
            }
            return w;
        }
        let Some(skill) = state.skill_of(arm) else {
            return w;
        };
        let slot = arm - 1;
        w[slot] = match self {
            Self::IgnoreClai => 0.0,
            Self::MaxOrchestrator => 1.0,
            Self::IgnoreSkill { skills } => {
                if skills.iter().any(|s| s == skill) {
                    0.0
                } else {
                    1.0
                }
            }
            Self::PreferSkill { over, .. } => {
                if over == skill {
                    PREFERENCE_DISCOUNT
                } else {
                    1.0
                }
            }
        };
        w
    }

    fn referenced_skills(&self) -> Vec<&str> {
        match self {
            Self::IgnoreClai | Self::MaxOrchestrator => Vec::new(),
            Self::IgnoreSkill { skills } => skills.iter().map(String::as_str).collect(),
            Self::PreferSkill { prefer, over } => alloc::vec![prefer.as_str(), over.as_str()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WarmStartError {
    #[error("unknown warm-start profile `{0}`")]
    UnknownProfile(String),
    #[error("warm-start profile names unknown skill `{0}`")]
    UnknownSkill(String),
    #[error("prefer-skill needs two different skills, got `{0}` twice")]
    SamePreference(String),
    #[error(transparent)]
    Bandit(#[from] BanditError),
}

/// Trains `state` in place with the profile's synthetic samples.
pub fn apply_warm_start(
    state: &mut BanditState,
    profile: &WarmStartProfile,
    samples_per_arm: usize,
) -> Result<(), WarmStartError> {
    for skill in profile.referenced_skills() {
        if state.slot_of(skill).is_none() {
            return Err(WarmStartError::UnknownSkill(String::from(skill)));
        }
    }
    if let WarmStartProfile::PreferSkill { prefer, over } = profile {
        if prefer == over {
            return Err(WarmStartError::SamePreference(prefer.clone()));
        }
    }
    let d = state.dimension();
    if d == 0 {
        return Ok(());
    }
    let weights: Vec<Vec<f64>> = (0..state.arm_count())
        .map(|arm| profile.weights(state, arm))
        .collect();
    let rounds = samples_per_arm.div_ceil(d).max(1);
    let mut context = alloc::vec![0.0; d];
    for r in 0..rounds {
        let c = (r + 1) as f64 / rounds as f64;
        for j in 0..d {
            context.iter_mut().for_each(|v| *v = 0.0);
            context[j] = c;
            for (arm, w) in weights.iter().enumerate() {
                state.update(&context, arm, c * w[j])?;
            }
        }
    }
    Ok(())
}

/// Fresh bandit over `skills` pre-trained with `profile`.
pub fn warm_start<S: AsRef<str>>(
    profile: &WarmStartProfile,
    skills: &[S],
    capacity: usize,
    alpha: f64,
) -> Result<BanditState, WarmStartError> {
    let mut state = BanditState::with_capacity(skills, capacity, alpha)?;
    apply_warm_start(&mut state, profile, WARM_START_SAMPLES)?;
    Ok(state)
}

//! Disjoint LinUCB over the vector of skill confidences.
//!
//! Arm 0 is the noop arm ("leave the command alone"); arm `i + 1` belongs to
//! skill slot `i`. Every arm keeps `A` (d × d, starts at the identity) and
//! `b` (d, starts at zero). Scoring uses `θ = A⁻¹ b` and
//! `p = θᵀx + α·sqrt(xᵀ A⁻¹ x)`.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::events::NOOP;
use crate::linalg;

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const NOOP_ARM: usize = 0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BanditError {
    #[error("context has {got} entries, bandit expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("arm {0} does not exist")]
    UnknownArm(usize),
    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),
    #[error("exploration weight {0} must be finite and non-negative")]
    InvalidAlpha(f64),
    #[error("no free slot for skill `{0}`")]
    NoFreeSlot(String),
    #[error("skill `{0}` registered twice")]
    DuplicateSkill(String),
    #[error("arm matrix for `{0}` is not positive definite")]
    NotPositiveDefinite(String),
    #[error("persisted bandit state is malformed: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmStats {
    /// Row-major d × d.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ArmStats {
    fn fresh(d: usize) -> Self {
        Self {
            a: linalg::identity(d),
            b: alloc::vec![0.0; d],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditState {
    slots: Vec<Option<String>>,
    arms: Vec<ArmStats>,
    alpha: f64,
}

impl BanditState {
    /// One slot per skill, in the given (registry) order.
    pub fn new<S: AsRef<str>>(skills: &[S], alpha: f64) -> Result<Self, BanditError> {
        Self::with_capacity(skills, skills.len(), alpha)
    }

    /// Like [`BanditState::new`] with `capacity - skills.len()` spare slots
    /// for skills registered later.
    pub fn with_capacity<S: AsRef<str>>(
        skills: &[S],
        capacity: usize,
        alpha: f64,
    ) -> Result<Self, BanditError> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(BanditError::InvalidAlpha(alpha));
        }
        let d = capacity.max(skills.len());
        let mut state = Self {
            slots: alloc::vec![None; d],
            arms: alloc::vec![ArmStats::fresh(d); d + 1],
            alpha,
        };
        for skill in skills {
            state.claim_slot(skill.as_ref())?;
        }
        Ok(state)
    }

    pub fn dimension(&self) -> usize {
        self.slots.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<(), BanditError> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(BanditError::InvalidAlpha(alpha));
        }
        self.alpha = alpha;
        Ok(())
    }

    pub fn slots(&self) -> &[Option<String>] {
        &self.slots
    }

    pub fn arm_count(&self) -> usize {
        self.arms.len()
    }

    pub fn arm(&self, arm: usize) -> Option<&ArmStats> {
        self.arms.get(arm)
    }

    /// Assigns `skill` to the first unused slot; a no-op if it already has one.
    pub fn claim_slot(&mut self, skill: &str) -> Result<usize, BanditError> {
        if let Some(slot) = self.slot_of(skill) {
            return Ok(slot);
        }
        let free = self
            .slots
            .iter()
            .position(Option::is_none)
            .ok_or_else(|| BanditError::NoFreeSlot(String::from(skill)))?;
        self.slots[free] = Some(String::from(skill));
        Ok(free)
    }

    pub fn slot_of(&self, skill: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.as_deref() == Some(skill))
    }

    /// Arm index for a skill name, with `"noop"` mapping to [`NOOP_ARM`].
    pub fn arm_of(&self, skill: &str) -> Option<usize> {
        if skill == NOOP {
            return Some(NOOP_ARM);
        }
        self.slot_of(skill).map(|s| s + 1)
    }

    /// Skill name behind an arm; `None` for the noop arm and unused slots.
    pub fn skill_of(&self, arm: usize) -> Option<&str> {
        arm.checked_sub(1)
            .and_then(|s| self.slots.get(s))
            .and_then(|s| s.as_deref())
    }

    fn check_context(&self, context: &[f64]) -> Result<(), BanditError> {
        if context.len() != self.dimension() {
            return Err(BanditError::DimensionMismatch {
                expected: self.dimension(),
                got: context.len(),
            });
        }
        Ok(())
    }

    /// `θ = A⁻¹ b` for one arm.
    pub fn theta(&self, arm: usize) -> Result<Vec<f64>, BanditError> {
        let stats = self.arms.get(arm).ok_or(BanditError::UnknownArm(arm))?;
        let d = self.dimension();
        let l = linalg::cholesky(&stats.a, d)
            .ok_or_else(|| BanditError::NotPositiveDefinite(self.arm_label(arm)))?;
        Ok(linalg::cholesky_solve(&l, d, &stats.b))
    }

    /// Upper-confidence score of every arm for `context`.
    pub fn scores(&self, context: &[f64]) -> Result<Vec<f64>, BanditError> {
        self.check_context(context)?;
        let d = self.dimension();
        self.arms
            .iter()
            .enumerate()
            .map(|(i, stats)| {
                let l = linalg::cholesky(&stats.a, d)
                    .ok_or_else(|| BanditError::NotPositiveDefinite(self.arm_label(i)))?;
                let theta = linalg::cholesky_solve(&l, d, &stats.b);
                let ainv_x = linalg::cholesky_solve(&l, d, context);
                let width = linalg::dot(context, &ainv_x).max(0.0);
                Ok(linalg::dot(&theta, context) + self.alpha * libm::sqrt(width))
            })
            .collect()
    }

    /// Highest-scoring arm; ties go to the lowest index.
    pub fn select(&self, context: &[f64]) -> Result<usize, BanditError> {
        self.select_among(context, |_| true)
            .map(|arm| arm.expect("the noop arm is always eligible"))
    }

    /// Highest-scoring arm among those `eligible` accepts, or `None` if it
    /// accepts none.
    pub fn select_among(
        &self,
        context: &[f64],
        eligible: impl Fn(usize) -> bool,
    ) -> Result<Option<usize>, BanditError> {
        let scores = self.scores(context)?;
        let mut best: Option<(usize, f64)> = None;
        for (arm, score) in scores.into_iter().enumerate() {
            if !eligible(arm) {
                continue;
            }
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((arm, score));
            }
        }
        Ok(best.map(|(arm, _)| arm))
    }

    /// Rank-one update of the chosen arm: `A += x xᵀ`, `b += r x`.
    pub fn update(&mut self, context: &[f64], arm: usize, reward: f64) -> Result<(), BanditError> {
        self.check_context(context)?;
        if !(0.0..=1.0).contains(&reward) {
            return Err(BanditError::RewardOutOfRange(reward));
        }
        let d = self.dimension();
        let stats = self.arms.get_mut(arm).ok_or(BanditError::UnknownArm(arm))?;
        for i in 0..d {
            for j in 0..d {
                stats.a[i * d + j] += context[i] * context[j];
            }
            stats.b[i] += reward * context[i];
        }
        Ok(())
    }

    /// Whether every arm matrix is symmetric and admits a Cholesky factor.
    pub fn is_well_conditioned(&self) -> bool {
        let d = self.dimension();
        self.arms
            .iter()
            .all(|s| linalg::is_symmetric(&s.a, d) && linalg::cholesky(&s.a, d).is_some())
    }

    fn arm_label(&self, arm: usize) -> String {
        match self.skill_of(arm) {
            Some(name) => String::from(name),
            None if arm == NOOP_ARM => String::from(NOOP),
            None => alloc::format!("slot {}", arm - 1),
        }
    }

    pub fn to_persisted(&self) -> PersistedBandit {
        let mut arms = BTreeMap::new();
        for (i, stats) in self.arms.iter().enumerate() {
            if i == NOOP_ARM || self.skill_of(i).is_some() {
                arms.insert(
                    self.arm_label(i),
                    PersistedArm {
                        a: stats.a.clone(),
                        b: stats.b.clone(),
                    },
                );
            }
        }
        PersistedBandit {
            d: self.dimension(),
            alpha: self.alpha,
            slots: self.slots.clone(),
            arms,
        }
    }

    pub fn from_persisted(p: PersistedBandit) -> Result<Self, BanditError> {
        let d = p.d;
        if p.slots.len() != d {
            return Err(BanditError::Malformed(alloc::format!(
                "{} slots for d = {d}",
                p.slots.len()
            )));
        }
        let mut state = Self::with_capacity::<&str>(&[], d, p.alpha)?;
        for (i, slot) in p.slots.iter().enumerate() {
            if let Some(name) = slot {
                if state.slot_of(name).is_some() {
                    return Err(BanditError::DuplicateSkill(name.clone()));
                }
                state.slots[i] = Some(name.clone());
            }
        }
        for (name, arm) in p.arms {
            let idx = state.arm_of(&name).ok_or_else(|| {
                BanditError::Malformed(alloc::format!("arm `{name}` has no slot"))
            })?;
            if arm.a.len() != d * d || arm.b.len() != d {
                return Err(BanditError::Malformed(alloc::format!(
                    "arm `{name}` has the wrong shape"
                )));
            }
            state.arms[idx] = ArmStats { a: arm.a, b: arm.b };
        }
        if !state.is_well_conditioned() {
            return Err(BanditError::Malformed(String::from(
                "arm matrix is not symmetric positive definite",
            )));
        }
        Ok(state)
    }
}

/// On-disk form: arm name → `A` (row-major) and `b`, plus `d` and `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedBandit {
    pub d: usize,
    pub alpha: f64,
    pub slots: Vec<Option<String>>,
    pub arms: BTreeMap<String, PersistedArm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedArm {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

//! Rule-based selection: max-confidence, adaptive threshold and partial-order
//! preferences layered over max.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{OrchestratorChoice, OrchestratorMode};
use crate::events::{FeedbackEvent, SkillResponse, UserResponse};

pub const DEFAULT_THRESHOLD_STEP: f64 = 0.05;
pub const DEFAULT_THRESHOLD_MIN: f64 = 0.1;
pub const DEFAULT_THRESHOLD_MAX: f64 = 0.95;

/// Picks the most confident candidate response if it reaches `threshold`.
/// Ties go to the lexicographically smallest skill name.
pub fn max_select(responses: &[SkillResponse], threshold: f64) -> OrchestratorChoice {
    max_select_as(responses, threshold, OrchestratorMode::Max)
}

pub(crate) fn max_select_as(
    responses: &[SkillResponse],
    threshold: f64,
    mode: OrchestratorMode,
) -> OrchestratorChoice {
    let best =
        responses
            .iter()
            .filter(|r| r.is_candidate())
            .fold(None::<&SkillResponse>, |best, r| match best {
                Some(b) if b.confidence > r.confidence => Some(b),
                Some(b) if b.confidence == r.confidence && b.skill <= r.skill => Some(b),
                _ => Some(r),
            });
    match best {
        Some(r) if r.confidence >= threshold => OrchestratorChoice {
            chosen: Some(r.clone()),
            mode,
            rationale: format!(
                "{} confidence {:.3} >= threshold {:.3}",
                r.skill, r.confidence, threshold
            ),
        },
        Some(r) => OrchestratorChoice::noop(
            mode,
            format!(
                "best {} confidence {:.3} below threshold {:.3}",
                r.skill, r.confidence, threshold
            ),
        ),
        None => OrchestratorChoice::noop(mode, String::from("no skill responded")),
    }
}

/// Step size and bounds of the feedback-adjusted threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParams {
    pub step: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        Self {
            step: DEFAULT_THRESHOLD_STEP,
            min: DEFAULT_THRESHOLD_MIN,
            max: DEFAULT_THRESHOLD_MAX,
        }
    }
}

/// Rejections raise the bar, acceptances lower it; other responses leave it.
pub fn threshold_update(threshold: f64, feedback: &FeedbackEvent, params: &ThresholdParams) -> f64 {
    if feedback.is_noop() {
        return threshold;
    }
    match feedback.user_response {
        UserResponse::Rejected => (threshold + params.step).min(params.max),
        UserResponse::Accepted => (threshold - params.step).max(params.min),
        UserResponse::Explained | UserResponse::Ignored => threshold,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreferenceError {
    #[error("preference order contains a cycle through `{0}`")]
    Cycle(String),
    #[error("a skill cannot be preferred over itself: `{0}`")]
    SelfPreference(String),
}

/// Acyclic "preferred over" relation between skills, stored with its
/// transitive closure.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreferenceOrder {
    pairs: Vec<(String, String)>,
    closure: BTreeSet<(String, String)>,
}

impl PreferenceOrder {
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self, PreferenceError> {
        let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (hi, lo) in &pairs {
            if hi == lo {
                return Err(PreferenceError::SelfPreference(hi.clone()));
            }
            edges.entry(hi.as_str()).or_default().insert(lo.as_str());
        }
        let mut closure = BTreeSet::new();
        for &start in edges.keys() {
            // Every skill reachable from `start` is dominated by it.
            let mut stack: Vec<&str> = edges[start].iter().copied().collect();
            let mut seen = BTreeSet::new();
            while let Some(node) = stack.pop() {
                if node == start {
                    return Err(PreferenceError::Cycle(String::from(start)));
                }
                if seen.insert(node) {
                    closure.insert((String::from(start), String::from(node)));
                    if let Some(next) = edges.get(node) {
                        stack.extend(next.iter().copied());
                    }
                }
            }
        }
        Ok(Self { pairs, closure })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Whether `a` is (transitively) preferred over `b`.
    pub fn prefers(&self, a: &str, b: &str) -> bool {
        self.closure.contains(&(String::from(a), String::from(b)))
    }
}

/// Drops every above-threshold candidate dominated by another
/// above-threshold candidate, then applies max selection.
pub fn preference_select(
    responses: &[SkillResponse],
    order: &PreferenceOrder,
    threshold: f64,
) -> OrchestratorChoice {
    let above: Vec<&SkillResponse> = responses
        .iter()
        .filter(|r| r.is_candidate() && r.confidence >= threshold)
        .collect();
    let survivors: Vec<SkillResponse> = above
        .iter()
        .filter(|r| {
            !above
                .iter()
                .any(|other| order.prefers(&other.skill, &r.skill))
        })
        .map(|r| (*r).clone())
        .collect();
    max_select_as(&survivors, threshold, OrchestratorMode::Preference)
}

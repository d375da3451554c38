//! Arbitration between skill responses.
//!
//! All skills answer every event; an orchestrator then picks at most one
//! response or none ("noop"). Four modes ship: plain max-confidence,
//! feedback-adjusted threshold, partial-order preferences over max, and a
//! LinUCB contextual bandit over the skill confidences.

pub mod bandit;
pub mod rules;
pub mod warm_start;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bandit::{BanditError, BanditState, PersistedBandit, DEFAULT_ALPHA, NOOP_ARM};
pub use rules::{
    max_select, preference_select, threshold_update, PreferenceError, PreferenceOrder,
    ThresholdParams,
};
pub use warm_start::{
    apply_warm_start, warm_start, WarmStartError, WarmStartProfile, WARM_START_SAMPLES,
};

use crate::events::{DecisionRecord, FeedbackEvent, SkillResponse, UserResponse, NOOP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrchestratorMode {
    Max,
    Threshold,
    Preference,
    Bandit,
}

impl OrchestratorMode {
    pub const ALL: [OrchestratorMode; 4] =
        [Self::Max, Self::Threshold, Self::Preference, Self::Bandit];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Max => "max",
            Self::Threshold => "threshold",
            Self::Preference => "preference",
            Self::Bandit => "bandit",
        }
    }
}

impl fmt::Display for OrchestratorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown orchestrator `{0}` (expected max, threshold, preference or bandit)")]
pub struct UnknownMode(pub String);

impl FromStr for OrchestratorMode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownMode(String::from(s)))
    }
}

/// Outcome of one arbitration. `chosen == None` means noop.
#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorChoice {
    pub chosen: Option<SkillResponse>,
    pub mode: OrchestratorMode,
    pub rationale: String,
}

impl OrchestratorChoice {
    pub fn noop(mode: OrchestratorMode, rationale: String) -> Self {
        Self {
            chosen: None,
            mode,
            rationale,
        }
    }

    pub fn chosen_skill(&self) -> &str {
        self.chosen.as_ref().map_or(NOOP, |r| r.skill.as_str())
    }
}

/// Reward for the bandit: 1 for an accepted suggestion, 0 for a rejected
/// one, the suggestion-to-next-command similarity for an ignored one, and no
/// reward for explanation requests.
pub fn reward_from_feedback(feedback: &FeedbackEvent) -> Option<f64> {
    match feedback.user_response {
        UserResponse::Accepted => Some(1.0),
        UserResponse::Rejected => Some(0.0),
        UserResponse::Explained => None,
        UserResponse::Ignored => feedback.indirect_similarity,
    }
}

/// Bandit context: each slot's confidence, 0 when its skill is absent,
/// silent or failed.
pub fn context_vector(state: &BanditState, responses: &[SkillResponse]) -> Vec<f64> {
    let mut x = alloc::vec![0.0; state.dimension()];
    for r in responses.iter().filter(|r| r.is_candidate()) {
        if let Some(slot) = state.slot_of(&r.skill) {
            x[slot] = r.confidence;
        }
    }
    x
}

/// All orchestration state of a session. Switching modes keeps the state of
/// the others.
#[derive(Debug, Clone, PartialEq)]
pub struct Orchestrator {
    pub mode: OrchestratorMode,
    pub threshold: f64,
    pub threshold_params: ThresholdParams,
    pub preferences: PreferenceOrder,
    pub bandit: BanditState,
}

impl Orchestrator {
    pub fn new(mode: OrchestratorMode, threshold: f64, bandit: BanditState) -> Self {
        Self {
            mode,
            threshold: threshold.clamp(0.0, 1.0),
            threshold_params: ThresholdParams::default(),
            preferences: PreferenceOrder::empty(),
            bandit,
        }
    }

    pub fn with_preferences(mut self, preferences: PreferenceOrder) -> Self {
        self.preferences = preferences;
        self
    }

    pub fn with_threshold_params(mut self, params: ThresholdParams) -> Self {
        self.threshold_params = params;
        self
    }

    /// Picks at most one response. `explicit` requests bypass the relevance
    /// threshold (and, for the bandit, the noop arm).
    pub fn decide(&self, responses: &[SkillResponse], explicit: bool) -> OrchestratorChoice {
        let threshold = if explicit { 0.0 } else { self.threshold };
        match self.mode {
            OrchestratorMode::Max => max_select(responses, threshold),
            OrchestratorMode::Threshold => {
                rules::max_select_as(responses, threshold, OrchestratorMode::Threshold)
            }
            OrchestratorMode::Preference => {
                preference_select(responses, &self.preferences, threshold)
            }
            OrchestratorMode::Bandit => self.bandit_decide(responses, explicit),
        }
    }

    fn bandit_decide(&self, responses: &[SkillResponse], explicit: bool) -> OrchestratorChoice {
        let mode = OrchestratorMode::Bandit;
        let x = context_vector(&self.bandit, responses);
        let responding = |arm: usize| {
            self.bandit
                .skill_of(arm)
                .and_then(|name| responses.iter().find(|r| r.skill == name))
                .filter(|r| r.is_candidate())
        };
        let eligible = |arm: usize| {
            if arm == NOOP_ARM {
                !explicit
            } else {
                responding(arm).is_some()
            }
        };
        match self.bandit.select_among(&x, eligible) {
            Ok(Some(arm)) if arm != NOOP_ARM => {
                let r = responding(arm).expect("eligible arms have a response");
                OrchestratorChoice {
                    chosen: Some(r.clone()),
                    mode,
                    rationale: format!("bandit arm {arm} ({})", r.skill),
                }
            }
            Ok(Some(_)) => OrchestratorChoice::noop(mode, String::from("bandit chose noop")),
            Ok(None) => OrchestratorChoice::noop(mode, String::from("no skill responded")),
            Err(e) => {
                log::warn!("bandit selection failed: {e}");
                OrchestratorChoice::noop(mode, format!("bandit error: {e}"))
            }
        }
    }

    /// Applies one piece of user feedback to the state of the mode that made
    /// the decision described by `decision`.
    pub fn learn(
        &mut self,
        decision_mode: OrchestratorMode,
        decision: &DecisionRecord,
        feedback: &FeedbackEvent,
    ) {
        match decision_mode {
            OrchestratorMode::Threshold => {
                self.threshold = threshold_update(self.threshold, feedback, &self.threshold_params);
            }
            OrchestratorMode::Bandit => {
                let Some(reward) = reward_from_feedback(feedback) else {
                    return;
                };
                let Some(arm) = self.bandit.arm_of(&feedback.chosen_skill) else {
                    return;
                };
                let x = context_vector(&self.bandit, &decision.to_responses());
                if let Err(e) = self.bandit.update(&x, arm, reward.clamp(0.0, 1.0)) {
                    log::warn!("bandit update skipped: {e}");
                }
            }
            OrchestratorMode::Max | OrchestratorMode::Preference => {}
        }
    }
}

/// One decision reproduced from the journal.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayedDecision {
    pub command_id: u64,
    pub recorded: String,
    pub replayed: String,
}

impl ReplayedDecision {
    pub fn matches(&self) -> bool {
        self.recorded == self.replayed
    }
}

/// Re-runs a journal against `orchestrator`.
///
/// Every event is learned from in journal order. An event carrying a
/// decision record is re-decided once exactly `journal_position` earlier
/// events have been learned, which is the state the live decision saw.
pub fn replay(orchestrator: &mut Orchestrator, events: &[FeedbackEvent]) -> Vec<ReplayedDecision> {
    let mut decided: Vec<(u64, usize)> = events
        .iter()
        .enumerate()
        .filter_map(|(i, ev)| ev.decision.as_ref().map(|d| (d.journal_position, i)))
        .collect();
    decided.sort();
    let mut learned = 0usize;
    let mut learn_upto = |orchestrator: &mut Orchestrator, n: usize| {
        while learned < n.min(events.len()) {
            let ev = &events[learned];
            if let (Some(d), true) = (&ev.decision, ev.is_final()) {
                orchestrator.learn(d.mode, d, ev);
            }
            learned += 1;
        }
    };
    let mut out = Vec::with_capacity(decided.len());
    for (position, i) in decided {
        learn_upto(orchestrator, position as usize);
        let ev = &events[i];
        let decision = ev.decision.as_ref().expect("filtered above");
        orchestrator.mode = decision.mode;
        let choice = orchestrator.decide(&decision.to_responses(), decision.explicit);
        out.push(ReplayedDecision {
            command_id: ev.command_id,
            recorded: ev.chosen_skill.clone(),
            replayed: String::from(choice.chosen_skill()),
        });
    }
    learn_upto(orchestrator, events.len());
    out
}

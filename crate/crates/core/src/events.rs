//! Value types that flow between the terminal, skills, orchestrators and the
//! feedback journal.
//!
//! Everything here is an immutable value object. Confidences are clamped into
//! `[0, 1]` at construction time and output tails are kept to the most recent
//! [`TAIL_LIMIT`] bytes.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::orchestration::OrchestratorMode;

/// Maximum number of bytes kept in `stdout_tail` / `stderr_tail`.
pub const TAIL_LIMIT: usize = 8192;

/// Default per-skill timeout.
pub const DEFAULT_SKILL_TIMEOUT_MS: u64 = 1500;

/// Smallest timeout a skill may declare.
pub const MIN_SKILL_TIMEOUT_MS: u64 = 50;

/// Name used in feedback records when the orchestrator let the command through.
pub const NOOP: &str = "noop";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EventError {
    #[error("action sequence must contain at least one action")]
    EmptySequence,
    #[error("action sequence mixes skills `{0}` and `{1}`")]
    MixedOrigin(String, String),
    #[error("invalid skill name `{0}`: names are non-empty lowercase identifiers")]
    InvalidSkillName(String),
    #[error("skill `{name}` timeout {timeout_ms} ms is below the {min} ms minimum", min = MIN_SKILL_TIMEOUT_MS)]
    TimeoutTooSmall { name: String, timeout_ms: u64 },
    #[error("external skill `{0}` declares no entry executable")]
    MissingEntry(String),
    #[error("malformed state json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreExecution,
    PostExecution,
}

/// The percept handed to every active skill.
///
/// In `PreExecution` the output tails and exit code describe the previous
/// command; in `PostExecution` they describe the command just run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalState {
    pub session_id: String,
    pub command_id: u64,
    pub user_input: String,
    pub cwd: String,
    pub previous_exit_code: Option<i32>,
    pub stdout_tail: String,
    pub stderr_tail: String,
    pub phase: Phase,
    pub timestamp: u64,
}

impl TerminalState {
    pub fn new(
        session_id: impl Into<String>,
        command_id: u64,
        user_input: impl Into<String>,
        cwd: impl Into<String>,
        phase: Phase,
    ) -> Self {
        let mut user_input = user_input.into();
        while user_input.ends_with('\n') || user_input.ends_with('\r') {
            user_input.pop();
        }
        Self {
            session_id: session_id.into(),
            command_id,
            user_input,
            cwd: cwd.into(),
            previous_exit_code: None,
            stdout_tail: String::new(),
            stderr_tail: String::new(),
            phase,
            timestamp: 0,
        }
    }

    pub fn with_exit_code(mut self, code: Option<i32>) -> Self {
        self.previous_exit_code = code;
        self
    }

    pub fn with_timestamp(mut self, millis: u64) -> Self {
        self.timestamp = millis;
        self
    }

    /// Sets both output tails, keeping only the most recent [`TAIL_LIMIT`] bytes of each.
    pub fn with_output(mut self, stdout: &str, stderr: &str) -> Self {
        self.stdout_tail = String::from(tail(stdout, TAIL_LIMIT));
        self.stderr_tail = String::from(tail(stderr, TAIL_LIMIT));
        self
    }

    /// First whitespace-separated token of the user input.
    pub fn first_token(&self) -> Option<&str> {
        self.user_input.split_whitespace().next()
    }
}

/// Returns the suffix of `text` no longer than `limit` bytes.
///
/// The cut is moved forward to the next character boundary, so a multi-byte
/// character straddling the limit is dropped rather than split.
pub fn tail(text: &str, limit: usize) -> &str {
    if text.len() <= limit {
        return text;
    }
    let mut start = text.len() - limit;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    &text[start..]
}

/// Same as [`tail`] for raw bytes, decoded lossily.
pub fn tail_lossy(bytes: &[u8], limit: usize) -> String {
    let start = bytes.len().saturating_sub(limit);
    let decoded = String::from_utf8_lossy(&bytes[start..]);
    String::from(tail(&decoded, limit))
}

/// Wire form of a [`TerminalState`]: a single-line JSON object.
pub fn serialize_state(state: &TerminalState) -> String {
    let over = state.stdout_tail.len() > TAIL_LIMIT || state.stderr_tail.len() > TAIL_LIMIT;
    let encoded = if over {
        let mut bounded = state.clone();
        bounded.stdout_tail = String::from(tail(&state.stdout_tail, TAIL_LIMIT));
        bounded.stderr_tail = String::from(tail(&state.stderr_tail, TAIL_LIMIT));
        serde_json::to_string(&bounded)
    } else {
        serde_json::to_string(state)
    };
    // serde_json escapes control characters, so the output never spans lines.
    encoded.expect("terminal state is always representable as json")
}

pub fn deserialize_state(text: &str) -> Result<TerminalState, EventError> {
    serde_json::from_str(text).map_err(|e| EventError::Json(alloc::format!("{e}")))
}

/// Clamps a confidence into `[0, 1]`, logging a warning when it had to.
/// NaN maps to 0.
pub fn clamp_confidence(value: f64, origin: &str) -> f64 {
    if value.is_nan() {
        log::warn!("skill `{origin}` reported NaN confidence; using 0");
        return 0.0;
    }
    if !(0.0..=1.0).contains(&value) {
        log::warn!("skill `{origin}` reported confidence {value} outside [0, 1]; clamping");
        return value.clamp(0.0, 1.0);
    }
    value
}

/// A directive from a skill to the terminal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub suggested_command: Option<String>,
    pub description: Option<String>,
    pub explanation: Option<String>,
    pub confidence: f64,
    /// Permission to run without confirmation. Only honored pre-execution
    /// and only when auto-execution is enabled.
    pub execute: bool,
    pub origin_skill: String,
}

impl Action {
    pub fn new(origin_skill: impl Into<String>) -> Self {
        Self {
            suggested_command: None,
            description: None,
            explanation: None,
            confidence: 0.0,
            execute: false,
            origin_skill: origin_skill.into(),
        }
    }

    pub fn suggest(origin_skill: impl Into<String>, command: impl Into<String>) -> Self {
        Self::new(origin_skill).with_command(command)
    }

    pub fn with_command(mut self, command: impl Into<String>) -> Self {
        self.suggested_command = Some(command.into());
        self
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }

    pub fn with_explanation(mut self, explanation: impl Into<String>) -> Self {
        self.explanation = Some(explanation.into());
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = clamp_confidence(confidence, &self.origin_skill);
        self
    }

    pub fn with_execute(mut self, execute: bool) -> Self {
        self.execute = execute;
        self
    }

    /// Re-establishes the type invariants on a value built from untrusted
    /// input: confidence in range, and no confidence without content.
    pub fn normalized(mut self) -> Self {
        self.confidence = clamp_confidence(self.confidence, &self.origin_skill);
        if self.confidence > 0.0 && self.suggested_command.is_none() && self.description.is_none() {
            log::warn!(
                "skill `{}` sent a confident action with no command or description; zeroing",
                self.origin_skill
            );
            self.confidence = 0.0;
        }
        self
    }
}

/// Ordered, non-empty list of actions coming from one skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Action>", into = "Vec<Action>")]
pub struct ActionSequence {
    actions: Vec<Action>,
}

impl ActionSequence {
    pub fn new(actions: Vec<Action>) -> Result<Self, EventError> {
        let first = actions.first().ok_or(EventError::EmptySequence)?;
        if let Some(other) = actions
            .iter()
            .find(|a| a.origin_skill != first.origin_skill)
        {
            return Err(EventError::MixedOrigin(
                first.origin_skill.clone(),
                other.origin_skill.clone(),
            ));
        }
        let actions = actions.into_iter().map(Action::normalized).collect();
        Ok(Self { actions })
    }

    pub fn single(action: Action) -> Self {
        Self {
            actions: alloc::vec![action.normalized()],
        }
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn first(&self) -> &Action {
        &self.actions[0]
    }

    pub fn origin_skill(&self) -> &str {
        &self.actions[0].origin_skill
    }

    /// Highest confidence over the sequence.
    pub fn confidence(&self) -> f64 {
        self.actions
            .iter()
            .map(|a| a.confidence)
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<Action>> for ActionSequence {
    type Error = EventError;

    fn try_from(actions: Vec<Action>) -> Result<Self, Self::Error> {
        Self::new(actions)
    }
}

impl From<ActionSequence> for Vec<Action> {
    fn from(seq: ActionSequence) -> Self {
        seq.actions
    }
}

/// One skill's answer to one event, as collected by fan-out dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillResponse {
    pub skill: String,
    pub result: Option<ActionSequence>,
    pub confidence: f64,
    pub latency_ms: u64,
    pub failed: bool,
}

impl SkillResponse {
    pub fn answered(
        skill: impl Into<String>,
        result: Option<ActionSequence>,
        latency_ms: u64,
    ) -> Self {
        let confidence = result.as_ref().map_or(0.0, ActionSequence::confidence);
        Self {
            skill: skill.into(),
            result,
            confidence,
            latency_ms,
            failed: false,
        }
    }

    pub fn failed(skill: impl Into<String>, latency_ms: u64) -> Self {
        Self {
            skill: skill.into(),
            result: None,
            confidence: 0.0,
            latency_ms,
            failed: true,
        }
    }

    /// A response the orchestrator may pick: not failed and carrying actions.
    pub fn is_candidate(&self) -> bool {
        !self.failed && self.result.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserResponse {
    Accepted,
    Rejected,
    Explained,
    Ignored,
}

/// Confidence a skill reported for the event an orchestration decision was made on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillConfidence {
    pub skill: String,
    pub confidence: f64,
    pub responded: bool,
}

/// Inputs an orchestrator saw when it made a decision, kept in the journal
/// so the decision sequence can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub mode: OrchestratorMode,
    pub phase: Phase,
    /// Explicit invocation bypasses the relevance threshold.
    pub explicit: bool,
    pub responses: Vec<SkillConfidence>,
    /// Number of journal lines already written when the decision was made.
    /// Learning happens in journal order, so this pins the orchestrator
    /// state the decision saw.
    #[serde(default)]
    pub journal_position: u64,
}

impl DecisionRecord {
    pub fn from_responses(
        mode: OrchestratorMode,
        phase: Phase,
        explicit: bool,
        responses: &[SkillResponse],
    ) -> Self {
        let responses = responses
            .iter()
            .map(|r| SkillConfidence {
                skill: r.skill.clone(),
                confidence: r.confidence,
                responded: r.is_candidate(),
            })
            .collect();
        Self {
            mode,
            phase,
            explicit,
            responses,
            journal_position: 0,
        }
    }

    pub fn at_position(mut self, journal_position: u64) -> Self {
        self.journal_position = journal_position;
        self
    }

    /// Rebuilds stand-in responses carrying only the recorded confidences.
    pub fn to_responses(&self) -> Vec<SkillResponse> {
        self.responses
            .iter()
            .map(|r| {
                let result = r.responded.then(|| {
                    ActionSequence::single(
                        Action::new(r.skill.clone())
                            .with_description("replayed")
                            .with_confidence(r.confidence),
                    )
                });
                let mut resp = SkillResponse::answered(r.skill.clone(), result, 0);
                resp.confidence = r.confidence;
                resp
            })
            .collect()
    }
}

/// One line of the feedback journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub command_id: u64,
    pub chosen_skill: String,
    pub user_response: UserResponse,
    pub next_command: Option<String>,
    pub indirect_similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested_command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<DecisionRecord>,
}

impl FeedbackEvent {
    pub fn new(
        command_id: u64,
        chosen_skill: impl Into<String>,
        user_response: UserResponse,
    ) -> Self {
        Self {
            command_id,
            chosen_skill: chosen_skill.into(),
            user_response,
            next_command: None,
            indirect_similarity: None,
            suggested_command: None,
            decision: None,
        }
    }

    pub fn with_suggestion(mut self, command: Option<String>) -> Self {
        self.suggested_command = command;
        self
    }

    pub fn with_decision(mut self, decision: DecisionRecord) -> Self {
        self.decision = Some(decision);
        self
    }

    pub fn is_noop(&self) -> bool {
        self.chosen_skill == NOOP
    }

    /// Completes an `ignored` event once the user's next command is known.
    pub fn finalize_ignored(&mut self, next_command: &str) {
        self.next_command = Some(String::from(next_command));
        if let Some(suggested) = self.suggested_command.as_deref() {
            if !suggested.is_empty() && !next_command.is_empty() {
                self.indirect_similarity =
                    Some(crate::edit::indirect_similarity(suggested, next_command));
            }
        }
    }

    /// An event is final unless it is an `ignored` event still waiting for
    /// the next command.
    pub fn is_final(&self) -> bool {
        self.user_response != UserResponse::Ignored || self.next_command.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    InProcess,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillDescriptor {
    pub name: String,
    pub kind: SkillKind,
    #[serde(default)]
    pub active: bool,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub entry: Option<String>,
}

fn default_timeout() -> u64 {
    DEFAULT_SKILL_TIMEOUT_MS
}

impl SkillDescriptor {
    pub fn in_process(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: SkillKind::InProcess,
            active: false,
            timeout_ms: DEFAULT_SKILL_TIMEOUT_MS,
            entry: None,
        }
    }

    pub fn external(name: impl Into<String>, entry: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: SkillKind::External,
            active: false,
            timeout_ms: DEFAULT_SKILL_TIMEOUT_MS,
            entry: Some(entry.into()),
        }
    }

    pub fn with_timeout(mut self, timeout_ms: u64) -> Self {
        self.timeout_ms = timeout_ms;
        self
    }

    pub fn validate(&self) -> Result<(), EventError> {
        let valid_name = !self.name.is_empty()
            && self
                .name
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_');
        if !valid_name || self.name == NOOP {
            return Err(EventError::InvalidSkillName(self.name.clone()));
        }
        if self.timeout_ms < MIN_SKILL_TIMEOUT_MS {
            return Err(EventError::TimeoutTooSmall {
                name: self.name.clone(),
                timeout_ms: self.timeout_ms,
            });
        }
        if self.kind == SkillKind::External && self.entry.as_deref().is_none_or(str::is_empty) {
            return Err(EventError::MissingEntry(self.name.clone()));
        }
        Ok(())
    }
}

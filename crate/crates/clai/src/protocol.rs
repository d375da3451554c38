//! Newline-delimited JSON spoken between the runtime and external skills.
//!
//! ```text
//! runtime -> skill  {"type":"hello","protocol":1}
//! skill -> runtime  {"type":"ready","name":"echo-ai"}
//! runtime -> skill  {"type":"event","state":{...}}
//! skill -> runtime  {"type":"response","confidence":1.0,"actions":[...]}
//! skill -> runtime  {"type":"error","reason":"..."}
//! ```

use clai_core::events::{serialize_state, Action, ActionSequence, TerminalState};
use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

/// An action as it travels on the wire; the origin is implied by the sender.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireAction {
    #[serde(default)]
    pub suggested_command: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub explanation: Option<String>,
    #[serde(default)]
    pub confidence: Option<f64>,
    #[serde(default)]
    pub execute: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum WireMessage {
    Hello {
        protocol: u32,
    },
    Ready {
        name: String,
    },
    Event {
        state: TerminalState,
    },
    Response {
        confidence: f64,
        #[serde(default)]
        actions: Vec<WireAction>,
    },
    Error {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unexpected `{0}` message")]
    Unexpected(&'static str),
    #[error("skill reported an error: {0}")]
    Skill(String),
    #[error("response actions are inconsistent: {0}")]
    Actions(String),
}

impl WireMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Hello { .. } => "hello",
            Self::Ready { .. } => "ready",
            Self::Event { .. } => "event",
            Self::Response { .. } => "response",
            Self::Error { .. } => "error",
        }
    }

    /// One line of JSON, newline included.
    pub fn to_line(&self) -> String {
        let mut line = match self {
            // The state goes through the canonical serializer so tails are
            // truncated exactly as everywhere else.
            Self::Event { state } => format!(
                "{{\"type\":\"event\",\"state\":{}}}",
                serialize_state(state)
            ),
            other => serde_json::to_string(other).expect("wire messages serialize"),
        };
        line.push('\n');
        line
    }

    pub fn parse(line: &str) -> Result<Self, WireError> {
        serde_json::from_str(line.trim_end_matches(['\n', '\r']))
            .map_err(|e| WireError::Malformed(e.to_string()))
    }

    pub fn response(result: Option<&ActionSequence>) -> Self {
        match result {
            None => Self::Response {
                confidence: 0.0,
                actions: Vec::new(),
            },
            Some(seq) => Self::Response {
                confidence: seq.confidence(),
                actions: seq
                    .actions()
                    .iter()
                    .map(|a| WireAction {
                        suggested_command: a.suggested_command.clone(),
                        description: a.description.clone(),
                        explanation: a.explanation.clone(),
                        confidence: Some(a.confidence),
                        execute: a.execute,
                    })
                    .collect(),
            },
        }
    }
}

/// Turns a skill's reply into an action sequence attributed to `skill`.
/// An action without its own confidence inherits the message's.
pub fn decode_response(
    skill: &str,
    message: WireMessage,
) -> Result<Option<ActionSequence>, WireError> {
    match message {
        WireMessage::Response {
            confidence,
            actions,
        } => {
            if actions.is_empty() {
                return Ok(None);
            }
            let actions = actions
                .into_iter()
                .map(|w| {
                    let mut a = Action::new(skill)
                        .with_confidence(w.confidence.unwrap_or(confidence))
                        .with_execute(w.execute);
                    a.suggested_command = w.suggested_command;
                    a.description = w.description;
                    a.explanation = w.explanation;
                    a
                })
                .collect();
            ActionSequence::new(actions)
                .map(Some)
                .map_err(|e| WireError::Actions(e.to_string()))
        }
        WireMessage::Error { reason } => Err(WireError::Skill(reason)),
        other => Err(WireError::Unexpected(other.kind())),
    }
}

/// Name and trigger of the reference echo skill.
pub const ECHO_SKILL_NAME: &str = "echo-ai";
pub const ECHO_TRIGGER: &str = "echo-ai ";

/// The echo skill's decision, shared by the in-process and external forms.
pub fn echo_response(state: &TerminalState) -> Option<ActionSequence> {
    let rest = state.user_input.strip_prefix(ECHO_TRIGGER)?;
    Some(ActionSequence::single(
        Action::suggest(ECHO_SKILL_NAME, format!("echo {rest}"))
            .with_description("echo the rest of the line")
            .with_confidence(1.0),
    ))
}

/// One step of the external echo skill: a reply line for every input line.
pub fn echo_handle(line: &str) -> String {
    match WireMessage::parse(line) {
        Ok(WireMessage::Hello { .. }) => WireMessage::Ready {
            name: ECHO_SKILL_NAME.to_string(),
        }
        .to_line(),
        Ok(WireMessage::Event { state }) => {
            WireMessage::response(echo_response(&state).as_ref()).to_line()
        }
        Ok(other) => WireMessage::Error {
            reason: format!("unexpected `{}` message", other.kind()),
        }
        .to_line(),
        Err(e) => WireMessage::Error {
            reason: e.to_string(),
        }
        .to_line(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clai_core::events::Phase;

    #[test]
    fn messages_are_single_lines() {
        let state = TerminalState::new("s", 3, "echo-ai a\nb", "/tmp", Phase::PreExecution);
        let line = WireMessage::Event {
            state: state.clone(),
        }
        .to_line();
        assert_eq!(line.matches('\n').count(), 1);
        assert!(line.ends_with('\n'));
        assert_eq!(
            WireMessage::parse(&line).unwrap(),
            WireMessage::Event { state }
        );
    }

    #[test]
    fn handshake_shapes() {
        assert_eq!(
            WireMessage::Hello {
                protocol: PROTOCOL_VERSION
            }
            .to_line(),
            "{\"type\":\"hello\",\"protocol\":1}\n"
        );
        assert_eq!(
            WireMessage::parse("{\"type\":\"ready\",\"name\":\"x\"}\r\n").unwrap(),
            WireMessage::Ready { name: "x".into() }
        );
        assert!(matches!(
            WireMessage::parse("{\"type\":\"bogus\"}"),
            Err(WireError::Malformed(_))
        ));
    }

    #[test]
    fn actions_inherit_the_message_confidence() {
        let msg = WireMessage::parse(
            r#"{"type":"response","confidence":0.4,"actions":[{"suggested_command":"ls"},{"description":"d","confidence":0.9}]}"#,
        )
        .unwrap();
        let seq = decode_response("ext", msg).unwrap().unwrap();
        assert_eq!(seq.actions()[0].confidence, 0.4);
        assert_eq!(seq.actions()[1].confidence, 0.9);
        assert!(seq.actions().iter().all(|a| a.origin_skill == "ext"));
    }

    #[test]
    fn empty_response_is_silence() {
        let msg = WireMessage::parse(r#"{"type":"response","confidence":0.0}"#).unwrap();
        assert_eq!(decode_response("ext", msg).unwrap(), None);
    }

    #[test]
    fn non_responses_are_errors() {
        assert_eq!(
            decode_response(
                "ext",
                WireMessage::Error {
                    reason: "boom".into()
                }
            ),
            Err(WireError::Skill("boom".into()))
        );
        assert_eq!(
            decode_response("ext", WireMessage::Ready { name: "ext".into() }),
            Err(WireError::Unexpected("ready"))
        );
    }

    #[test]
    fn echo_round_trip() {
        let ready = echo_handle(&WireMessage::Hello { protocol: 1 }.to_line());
        assert_eq!(
            WireMessage::parse(&ready).unwrap(),
            WireMessage::Ready {
                name: ECHO_SKILL_NAME.into()
            }
        );
        let state = TerminalState::new("s", 1, "echo-ai hi there", "/", Phase::PreExecution);
        let reply = echo_handle(
            &WireMessage::Event {
                state: state.clone(),
            }
            .to_line(),
        );
        let seq = decode_response(ECHO_SKILL_NAME, WireMessage::parse(&reply).unwrap()).unwrap();
        assert_eq!(seq, echo_response(&state));
        assert!(matches!(
            WireMessage::parse(&echo_handle("{{{")),
            Ok(WireMessage::Error { .. })
        ));
    }
}

//! Classification of a raw input line into a [`Directive`].

use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

/// Prefix that routes a line to the assistant instead of the shell.
pub const CLAI_PREFIX: &str = "clai";

/// Verbs reserved for meta commands. They win over skills of the same name.
pub const META_VERBS: [&str; 6] = [
    "skills",
    "activate",
    "deactivate",
    "orchestrate",
    "manual",
    "auto",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectiveKind {
    PassThrough,
    MetaCommand,
    ExplicitClai,
    ForcedSkill,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Directive {
    pub kind: DirectiveKind,
    /// Target skill, set only for `ForcedSkill`.
    pub skill: Option<String>,
    /// For meta commands the verb followed by its arguments; otherwise the
    /// text left to act on.
    pub payload: String,
}

impl Directive {
    pub fn pass_through(line: &str) -> Self {
        Self {
            kind: DirectiveKind::PassThrough,
            skill: None,
            payload: line.to_string(),
        }
    }

    /// Parses a meta-command payload. Returns `None` for other kinds.
    pub fn meta(&self) -> Option<MetaCommand> {
        if self.kind != DirectiveKind::MetaCommand {
            return None;
        }
        let mut parts = self.payload.split_whitespace();
        let verb = parts.next()?.to_ascii_lowercase();
        let arg = parts.next().map(|s| s.to_string());
        Some(match verb.as_str() {
            "skills" => MetaCommand::Skills,
            "activate" => MetaCommand::Activate(arg),
            "deactivate" => MetaCommand::Deactivate(arg),
            "orchestrate" => MetaCommand::Orchestrate(arg),
            "manual" => MetaCommand::Manual,
            "auto" => MetaCommand::Auto,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetaCommand {
    Skills,
    Activate(Option<String>),
    Deactivate(Option<String>),
    Orchestrate(Option<String>),
    Manual,
    Auto,
}

/// Read-only view of the skill registry used during interception.
pub trait SkillCatalog {
    /// `Some(active)` when a skill with this name is registered.
    fn skill_status(&self, name: &str) -> Option<bool>;
}

impl<F> SkillCatalog for F
where
    F: Fn(&str) -> Option<bool>,
{
    fn skill_status(&self, name: &str) -> Option<bool> {
        self(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InterceptError {
    #[error("empty command line")]
    Empty,
    #[error("skill not active: {0}")]
    SkillNotActive(String),
}

/// Splits `text` after its first whitespace-delimited token.
fn split_token(text: &str) -> (&str, &str) {
    let text = text.trim_start();
    match text.find(char::is_whitespace) {
        Some(idx) => (&text[..idx], text[idx..].trim_start()),
        None => (text, ""),
    }
}

pub fn intercept(raw_line: &str, catalog: &dyn SkillCatalog) -> Result<Directive, InterceptError> {
    let line = raw_line.trim_end_matches(['\n', '\r']);
    if line.trim().is_empty() {
        return Err(InterceptError::Empty);
    }
    let (first, rest) = split_token(line);
    if !first.eq_ignore_ascii_case(CLAI_PREFIX) {
        return Ok(Directive::pass_through(line));
    }
    let (second, after_second) = split_token(rest);
    let verb = second.to_ascii_lowercase();
    if META_VERBS.contains(&verb.as_str()) {
        return Ok(Directive {
            kind: DirectiveKind::MetaCommand,
            skill: None,
            payload: rest.to_string(),
        });
    }
    if !second.is_empty() {
        match catalog.skill_status(second) {
            Some(true) => {
                return Ok(Directive {
                    kind: DirectiveKind::ForcedSkill,
                    skill: Some(second.to_string()),
                    payload: after_second.to_string(),
                })
            }
            Some(false) => return Err(InterceptError::SkillNotActive(second.to_string())),
            None => {}
        }
    }
    Ok(Directive {
        kind: DirectiveKind::ExplicitClai,
        skill: None,
        payload: rest.to_string(),
    })
}

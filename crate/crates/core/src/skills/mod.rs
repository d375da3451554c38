//! The skill contract and the built-in skills.

pub mod fixit;
pub mod manx;
pub mod nlc2cmd;
pub mod qa;

use alloc::collections::BTreeSet;
use alloc::string::String;

use crate::events::{ActionSequence, TerminalState};
use crate::intercept::CLAI_PREFIX;

pub use fixit::{FixIt, FixRules};
pub use manx::ManExplorer;
pub use nlc2cmd::{CommandTemplate, Nlc2Cmd};
pub use qa::{QaMode, QaSkill};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct SkillError(pub String);

/// A plugin that sees every terminal event and may answer with actions.
///
/// Returning `Ok(None)` means "nothing to add"; the command goes on as
/// typed. Implementations must be cheap to call concurrently.
pub trait Skill: Send + Sync {
    fn name(&self) -> &str;

    fn on_event(&self, state: &TerminalState) -> Result<Option<ActionSequence>, SkillError>;
}

/// What a skill should act on, after stripping a leading `clai` and, for
/// forced invocations, the skill's own name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Invocation<'a> {
    pub query: &'a str,
    pub explicit: bool,
}

pub fn invocation<'a>(input: &'a str, skill: &str) -> Invocation<'a> {
    let trimmed = input.trim();
    let Some(rest) = strip_word(trimmed, CLAI_PREFIX) else {
        return Invocation {
            query: trimmed,
            explicit: false,
        };
    };
    let query = strip_word(rest, skill).unwrap_or(rest);
    Invocation {
        query,
        explicit: true,
    }
}

/// `text` without its first word if that word equals `word` (ASCII case-insensitive).
fn strip_word<'a>(text: &'a str, word: &str) -> Option<&'a str> {
    let end = text.find(char::is_whitespace).unwrap_or(text.len());
    text[..end]
        .eq_ignore_ascii_case(word)
        .then(|| text[end..].trim_start())
}

/// Shell builtins and keywords that never appear on the search path.
pub const SHELL_BUILTINS: [&str; 24] = [
    "alias", "bg", "cd", "command", "echo", "eval", "exec", "exit", "export", "fg", "jobs", "kill",
    "printf", "pwd", "read", "set", "shift", "source", "test", "trap", "type", "ulimit", "umask",
    "unset",
];

/// Names the user can run: search-path executables plus shell builtins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnownCommands {
    names: BTreeSet<String>,
}

impl KnownCommands {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: BTreeSet<String> = names.into_iter().map(Into::into).collect();
        names.extend(SHELL_BUILTINS.iter().map(|s| String::from(*s)));
        Self { names }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    pub fn insert(&mut self, name: impl Into<String>) {
        self.names.insert(name.into());
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Whether `token` is something the shell runs without a path lookup
/// (an assignment, a path, an expansion) and so can never be a typo.
pub(crate) fn is_non_command_word(token: &str) -> bool {
    token.contains([
        '/', '=', '$', '`', '(', ')', '{', '}', '[', ']', '<', '>', '|', '&', ';', '\'', '"', '\\',
        '*', '?', '~', '!', '#',
    ])
}

//! Rule engine for fixing mistyped or failed commands.
//!
//! Rules, in priority order:
//!
//! 1. unknown first word close to a known command (pre-execution)
//! 2. "Permission denied" on a failed command → retry under sudo (post-execution)
//! 3. per-utility subcommand and flag typos (pre-execution)

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{invocation, is_non_command_word, KnownCommands, Skill, SkillError};
use crate::edit::levenshtein;
use crate::events::{Action, ActionSequence, Phase, TerminalState};

pub const NAME: &str = "fixit";

pub const DISTANCE_ONE_CONFIDENCE: f64 = 0.8;
pub const DISTANCE_TWO_CONFIDENCE: f64 = 0.6;
pub const SUDO_CONFIDENCE: f64 = 0.7;
pub const FLAG_TYPO_CONFIDENCE: f64 = 0.8;
/// Confidence of a listed whole-command typo (such as `sl` for `ls`).
pub const COMMAND_TYPO_CONFIDENCE: f64 = 0.8;

const MAX_DISTANCE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixRuleId {
    UnknownCommand,
    PermissionDenied,
    FlagTypo,
}

/// A well-known misspelling of a whole command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandTypo {
    pub typo: String,
    pub correction: String,
}

/// A misspelled subcommand or flag of one utility.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagTypo {
    pub utility: String,
    pub typo: String,
    pub correction: String,
}

/// The data-driven part of the rules, loadable from JSON.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixRules {
    #[serde(default)]
    pub command_typos: Vec<CommandTypo>,
    #[serde(default)]
    pub flag_typos: Vec<FlagTypo>,
}

impl Default for FixRules {
    fn default() -> Self {
        let command_typos = [
            ("sl", "ls"),
            ("cd..", "cd .."),
            ("gerp", "grep"),
            ("claer", "clear"),
        ]
        .into_iter()
        .map(|(t, c)| CommandTypo {
            typo: t.to_string(),
            correction: c.to_string(),
        })
        .collect();
        let flag_typos = [
            ("git", "stats", "status"),
            ("git", "stauts", "status"),
            ("git", "comit", "commit"),
            ("git", "commti", "commit"),
            ("git", "pus", "push"),
            ("git", "psuh", "push"),
            ("git", "pul", "pull"),
            ("git", "chekout", "checkout"),
            ("git", "checkotu", "checkout"),
            ("git", "brnach", "branch"),
            ("git", "branh", "branch"),
            ("git", "ad", "add"),
            ("git", "lgo", "log"),
            ("git", "dif", "diff"),
            ("tar", "-xvzf", "-xzvf"),
            ("tar", "--extarct", "--extract"),
            ("tar", "--gzp", "--gzip"),
            ("grep", "--ignorecase", "--ignore-case"),
            ("grep", "--recusive", "--recursive"),
            ("grep", "--line-numbers", "--line-number"),
            ("grep", "--invert", "--invert-match"),
        ]
        .into_iter()
        .map(|(u, t, c)| FlagTypo {
            utility: u.to_string(),
            typo: t.to_string(),
            correction: c.to_string(),
        })
        .collect();
        Self {
            command_typos,
            flag_typos,
        }
    }
}

/// Error-correction skill.
#[derive(Debug, Clone)]
pub struct FixIt {
    known: Arc<KnownCommands>,
    rules: FixRules,
}

struct Fix {
    rule: FixRuleId,
    command: String,
    confidence: f64,
    explanation: String,
}

impl FixIt {
    pub fn new(known: Arc<KnownCommands>, rules: FixRules) -> Self {
        Self { known, rules }
    }

    pub fn known(&self) -> &KnownCommands {
        &self.known
    }

    /// Applies the rules to `state`. `history` lists extra commands the user
    /// has run successfully this session; they count as known and win ties.
    pub fn suggest(
        &self,
        state: &TerminalState,
        history: &KnownCommands,
    ) -> Option<ActionSequence> {
        let inv = invocation(&state.user_input, NAME);
        let query = inv.query;
        let fix = match state.phase {
            Phase::PreExecution => self
                .unknown_command(query, history)
                .or_else(|| self.flag_typo(query)),
            Phase::PostExecution => self.permission_denied(state, query),
        }?;
        debug_assert!(fix.command != query && !fix.command.is_empty());
        let action = Action::suggest(NAME, fix.command.clone())
            .with_description(format!("did you mean `{}`?", fix.command))
            .with_explanation(format!("[{:?}] {}", fix.rule, fix.explanation))
            .with_confidence(fix.confidence);
        Some(ActionSequence::single(action))
    }

    fn is_known(&self, history: &KnownCommands, name: &str) -> bool {
        self.known.contains(name) || history.contains(name)
    }

    fn unknown_command(&self, query: &str, history: &KnownCommands) -> Option<Fix> {
        let (first, rest) = split_first_word(query)?;
        if is_non_command_word(first) || self.is_known(history, first) {
            return None;
        }
        let rebuild = |cmd: &str| {
            if rest.is_empty() {
                cmd.to_string()
            } else {
                format!("{cmd} {rest}")
            }
        };

        if let Some(t) = self.rules.command_typos.iter().find(|t| t.typo == first) {
            let head = t.correction.split_whitespace().next().unwrap_or_default();
            if self.is_known(history, head) {
                return Some(Fix {
                    rule: FixRuleId::UnknownCommand,
                    command: rebuild(&t.correction),
                    confidence: COMMAND_TYPO_CONFIDENCE,
                    explanation: format!("`{first}` is a common misspelling of `{}`", t.correction),
                });
            }
        }

        let len = first.chars().count();
        let in_history = |c: &str| history.contains(c);
        let mut best: Option<(usize, bool, bool, usize, &str)> = None;
        for cand in self.known.iter().chain(history.iter()) {
            let clen = cand.chars().count();
            if clen.abs_diff(len) > MAX_DISTANCE {
                continue;
            }
            let d = levenshtein(first, cand);
            // A distance equal to the word length means "replace everything".
            if d == 0 || d > MAX_DISTANCE || d >= len {
                continue;
            }
            let key = (
                d,
                !in_history(cand),
                !same_letters(first, cand),
                clen.abs_diff(len),
                cand,
            );
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
        let (d, _, _, _, cand) = best?;
        let confidence = if d == 1 {
            DISTANCE_ONE_CONFIDENCE
        } else {
            DISTANCE_TWO_CONFIDENCE
        };
        Some(Fix {
            rule: FixRuleId::UnknownCommand,
            command: rebuild(cand),
            confidence,
            explanation: format!("`{first}` is not a known command; `{cand}` is {d} edit(s) away"),
        })
    }

    fn permission_denied(&self, state: &TerminalState, query: &str) -> Option<Fix> {
        let failed = state.previous_exit_code.is_some_and(|c| c != 0);
        if !failed || !state.stderr_tail.contains("Permission denied") || query.is_empty() {
            return None;
        }
        if query.split_whitespace().next() == Some("sudo") {
            return None;
        }
        Some(Fix {
            rule: FixRuleId::PermissionDenied,
            command: format!("sudo {query}"),
            confidence: SUDO_CONFIDENCE,
            explanation: String::from(
                "the command failed with \"Permission denied\"; retry with elevated privileges",
            ),
        })
    }

    fn flag_typo(&self, query: &str) -> Option<Fix> {
        let words: Vec<&str> = query.split_whitespace().collect();
        let (&utility, args) = words.split_first()?;
        for (i, word) in args.iter().enumerate() {
            if let Some(t) = self
                .rules
                .flag_typos
                .iter()
                .find(|t| t.utility == utility && t.typo == *word)
            {
                let mut fixed: Vec<&str> = words.clone();
                fixed[i + 1] = &t.correction;
                return Some(Fix {
                    rule: FixRuleId::FlagTypo,
                    command: fixed.join(" "),
                    confidence: FLAG_TYPO_CONFIDENCE,
                    explanation: format!(
                        "`{utility} {}` is a common misspelling of `{utility} {}`",
                        t.typo, t.correction
                    ),
                });
            }
        }
        None
    }
}

impl Skill for FixIt {
    fn name(&self) -> &str {
        NAME
    }

    fn on_event(&self, state: &TerminalState) -> Result<Option<ActionSequence>, SkillError> {
        Ok(self.suggest(state, &KnownCommands::default()))
    }
}

fn split_first_word(text: &str) -> Option<(&str, &str)> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    Some(match text.find(char::is_whitespace) {
        Some(i) => (&text[..i], text[i..].trim_start()),
        None => (text, ""),
    })
}

/// Same multiset of characters, i.e. a pure reordering.
fn same_letters(a: &str, b: &str) -> bool {
    let mut x: Vec<char> = a.chars().collect();
    let mut y: Vec<char> = b.chars().collect();
    x.sort_unstable();
    y.sort_unstable();
    x == y
}

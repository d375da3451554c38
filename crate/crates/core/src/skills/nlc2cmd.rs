//! Keyword-grammar translation of short English requests into `tar` and
//! `grep` invocations.
//!
//! Each [`CommandTemplate`] names the keyword sets that signal its intent and
//! the slots it needs. Slots are filled from the raw words of the request;
//! a slot with a default may be left out at a lower confidence, a slot
//! without one must be found or the template does not apply.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{invocation, Skill, SkillError};
use crate::events::{Action, ActionSequence, Phase, TerminalState};
use crate::retrieval::tokenize::{is_stopword, tokenize};

pub const NAME: &str = "nlc2cmd";

pub const FILLED_CONFIDENCE: f64 = 0.9;
pub const DEFAULTED_CONFIDENCE: f64 = 0.5;

pub const ARCHIVE_EXTENSIONS: [&str; 8] = [
    ".tar.gz", ".tgz", ".tar.bz2", ".tbz2", ".tar.xz", ".txz", ".tar", ".zip",
];

const PATTERN_MARKERS: [&str; 2] = ["containing", "matching"];
const DIRECTORY_MARKERS: [&str; 3] = ["in", "into", "under"];
const DIRECTORY_NOUNS: [&str; 3] = ["directory", "folder", "dir"];
const FILLER: [&str; 10] = [
    "the", "a", "an", "word", "string", "text", "pattern", "term", "phrase", "lines",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotKind {
    Archive,
    Pattern,
    File,
    Directory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub name: String,
    pub kind: SlotKind,
    /// For archive slots: accepted file-name endings. Empty means any archive.
    #[serde(default)]
    pub extensions: Vec<String>,
    /// Used when the slot is not found. May reference other slots as `{name}`.
    #[serde(default)]
    pub default: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandTemplate {
    pub utility: String,
    /// The intent matches when every keyword of any one set is present.
    pub intent_patterns: Vec<Vec<String>>,
    pub slots: Vec<SlotSpec>,
    /// Shell command with `{slot}` placeholders.
    pub render: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub explanation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template `{render}` uses undeclared slot `{slot}`")]
    UndeclaredSlot { render: String, slot: String },
    #[error("template `{0}` has an unterminated placeholder")]
    Unterminated(String),
    #[error("template `{0}` has no intent pattern")]
    NoIntent(String),
}

/// Names inside `{...}` in `text`, in order.
fn placeholders(text: &str) -> Result<Vec<&str>, ()> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('{') {
        let end = rest[start..].find('}').ok_or(())?;
        out.push(&rest[start + 1..start + end]);
        rest = &rest[start + end + 1..];
    }
    Ok(out)
}

impl CommandTemplate {
    pub fn validate(&self) -> Result<(), TemplateError> {
        if self.intent_patterns.iter().all(Vec::is_empty) {
            return Err(TemplateError::NoIntent(self.render.clone()));
        }
        let declared: BTreeSet<&str> = self.slots.iter().map(|s| s.name.as_str()).collect();
        let texts = core::iter::once(self.render.as_str())
            .chain(self.slots.iter().filter_map(|s| s.default.as_deref()));
        for text in texts {
            let names =
                placeholders(text).map_err(|_| TemplateError::Unterminated(String::from(text)))?;
            if let Some(missing) = names.into_iter().find(|n| !declared.contains(n)) {
                return Err(TemplateError::UndeclaredSlot {
                    render: self.render.clone(),
                    slot: missing.to_string(),
                });
            }
        }
        Ok(())
    }

    fn intent_matches(&self, tokens: &BTreeSet<String>) -> bool {
        self.intent_patterns
            .iter()
            .any(|p| !p.is_empty() && p.iter().all(|k| tokens.contains(k.as_str())))
    }

    fn keywords(&self) -> BTreeSet<&str> {
        self.intent_patterns
            .iter()
            .flatten()
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Word {
    text: String,
    lower: String,
    quoted: bool,
}

/// Splits on whitespace, keeping quoted spans whole and dropping sentence
/// punctuation from the ends of unquoted words.
fn words(input: &str) -> Vec<Word> {
    let mut out = Vec::new();
    let mut chars = input.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '"' || c == '\'' {
            chars.next();
            let text: String = chars.by_ref().take_while(|&d| d != c).collect();
            out.push(Word {
                lower: text.to_lowercase(),
                text,
                quoted: true,
            });
            continue;
        }
        let mut text = String::new();
        while let Some(&d) = chars.peek() {
            if d.is_whitespace() {
                break;
            }
            text.push(d);
            chars.next();
        }
        if text != "." && text != ".." {
            let trimmed = text.trim_end_matches(['?', '!', ',', ';', ':', '.']);
            text = trimmed.to_string();
        }
        if !text.is_empty() {
            out.push(Word {
                lower: text.to_lowercase(),
                text,
                quoted: false,
            });
        }
    }
    out
}

/// The translation of one request.
#[derive(Debug, Clone, PartialEq)]
pub struct Translation {
    pub command: String,
    pub confidence: f64,
    pub template: usize,
    /// Slot values taken from the input, as `(slot, value)`.
    pub filled: Vec<(String, String)>,
}

struct Filler<'a> {
    words: &'a [Word],
    used: Vec<bool>,
    keywords: BTreeSet<&'a str>,
}

impl<'a> Filler<'a> {
    fn is_reserved(&self, w: &Word) -> bool {
        !w.quoted
            && (self.keywords.contains(w.lower.as_str())
                || is_stopword(&w.lower)
                || FILLER.contains(&w.lower.as_str())
                || PATTERN_MARKERS.contains(&w.lower.as_str())
                || DIRECTORY_MARKERS.contains(&w.lower.as_str())
                || DIRECTORY_NOUNS.contains(&w.lower.as_str()))
    }

    fn take(&mut self, i: usize) -> String {
        self.used[i] = true;
        self.words[i].text.clone()
    }

    fn free(&self, i: usize) -> bool {
        i < self.words.len() && !self.used[i]
    }

    fn archive(&mut self, extensions: &[String]) -> Option<String> {
        let i = (0..self.words.len()).find(|&i| {
            let w = &self.words[i];
            self.free(i)
                && !w.quoted
                && if extensions.is_empty() {
                    ARCHIVE_EXTENSIONS
                        .iter()
                        .any(|e| w.lower.ends_with(e) && w.lower.len() > e.len())
                } else {
                    extensions
                        .iter()
                        .any(|e| w.lower.ends_with(e.as_str()) && w.lower.len() > e.len())
                }
        })?;
        Some(self.take(i))
    }

    fn pattern(&mut self) -> Option<String> {
        if let Some(i) = (0..self.words.len())
            .find(|&i| self.free(i) && self.words[i].quoted && !self.words[i].text.is_empty())
        {
            return Some(self.take(i));
        }
        let marker = self
            .words
            .iter()
            .position(|w| !w.quoted && PATTERN_MARKERS.contains(&w.lower.as_str()))?;
        let i = (marker + 1..self.words.len()).find(|&i| {
            !(FILLER.contains(&self.words[i].lower.as_str()) && !self.words[i].quoted)
        })?;
        let w = &self.words[i];
        if !self.free(i)
            || (!w.quoted
                && (is_stopword(&w.lower) || DIRECTORY_MARKERS.contains(&w.lower.as_str())))
        {
            return None;
        }
        Some(self.take(i))
    }

    fn file(&mut self) -> Option<String> {
        let i = (0..self.words.len()).find(|&i| {
            let w = &self.words[i];
            self.free(i) && !w.quoted && (w.text.contains('.') || w.text.contains('/'))
        })?;
        Some(self.take(i))
    }

    fn directory(&mut self) -> Option<String> {
        let n = self.words.len();
        let usable = |s: &Self, i: usize| s.free(i) && !s.is_reserved(&s.words[i]);
        let after_marker = (0..n)
            .filter(|&i| {
                !self.words[i].quoted && DIRECTORY_MARKERS.contains(&self.words[i].lower.as_str())
            })
            .map(|i| i + 1)
            .find(|&i| usable(self, i));
        let by_noun = || {
            let nouns: Vec<usize> = (0..n)
                .filter(|&i| {
                    !self.words[i].quoted && DIRECTORY_NOUNS.contains(&self.words[i].lower.as_str())
                })
                .collect();
            nouns
                .iter()
                .map(|&i| i + 1)
                .find(|&i| usable(self, i))
                .or_else(|| {
                    nouns
                        .iter()
                        .filter_map(|&i| i.checked_sub(1))
                        .find(|&i| usable(self, i))
                })
        };
        let i = after_marker.or_else(by_noun)?;
        Some(self.take(i))
    }
}

/// Characters that never need quoting in a shell word.
fn is_shell_safe(c: char) -> bool {
    c.is_ascii_alphanumeric() || "._/-+,:@%=^".contains(c)
}

fn quote_for_shell(value: &str, inside_double_quotes: bool) -> String {
    if inside_double_quotes {
        let mut out = String::with_capacity(value.len());
        for c in value.chars() {
            if matches!(c, '"' | '\\' | '$' | '`') {
                out.push('\\');
            }
            out.push(c);
        }
        out
    } else if !value.is_empty() && value.chars().all(is_shell_safe) {
        value.to_string()
    } else {
        format!("'{}'", value.replace('\'', "'\\''"))
    }
}

fn render(template: &str, values: &[(String, String)]) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let end = start + rest[start..].find('}').expect("validated template");
        out.push_str(&rest[..start]);
        let name = &rest[start + 1..end];
        let value = values
            .iter()
            .find(|(n, _)| n == name)
            .map_or("", |(_, v)| v.as_str());
        let inside_quotes = out.ends_with('"');
        out.push_str(&quote_for_shell(value, inside_quotes));
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    out
}

/// Substitutes already-resolved slot values into a default, without quoting.
fn expand_default(default: &str, values: &[(String, String)]) -> String {
    let mut out = default.to_string();
    for (name, value) in values {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

fn template(
    utility: &str,
    intents: &[&[&str]],
    slots: &[(&str, SlotKind, &[&str], Option<&str>)],
    render: &str,
    description: &str,
    explanation: &str,
) -> CommandTemplate {
    CommandTemplate {
        utility: utility.to_string(),
        intent_patterns: intents
            .iter()
            .map(|p| p.iter().map(|s| s.to_string()).collect())
            .collect(),
        slots: slots
            .iter()
            .map(|(name, kind, ext, default)| SlotSpec {
                name: name.to_string(),
                kind: *kind,
                extensions: ext.iter().map(|s| s.to_string()).collect(),
                default: default.map(str::to_string),
            })
            .collect(),
        render: render.to_string(),
        description: Some(description.to_string()),
        explanation: Some(explanation.to_string()),
    }
}

/// The shipped template table, most specific first.
pub fn default_templates() -> Vec<CommandTemplate> {
    use SlotKind::*;
    const EXTRACT: &[&[&str]] = &[
        &["extract"],
        &["unpack"],
        &["untar"],
        &["decompress"],
        &["uncompress"],
    ];
    const SEARCH: &[&[&str]] = &[
        &["search"],
        &["find", "containing"],
        &["find", "matching"],
        &["lines", "containing"],
        &["lines", "matching"],
    ];
    alloc::vec![
        template(
            "tar",
            EXTRACT,
            &[("archive", Archive, &[".tar.gz", ".tgz"], None)],
            "tar -xzf {archive}",
            "extract a gzip-compressed tar archive",
            "-x extracts, -z filters the archive through gzip, -f names the archive file"
        ),
        template(
            "tar",
            EXTRACT,
            &[("archive", Archive, &[".tar.bz2", ".tbz2", ".tbz"], None)],
            "tar -xjf {archive}",
            "extract a bzip2-compressed tar archive",
            "-x extracts, -j filters the archive through bzip2, -f names the archive file"
        ),
        template(
            "tar",
            EXTRACT,
            &[("archive", Archive, &[".tar"], None)],
            "tar -xf {archive}",
            "extract a tar archive",
            "-x extracts, -f names the archive file"
        ),
        template(
            "tar",
            &[
                &["list", "contents"],
                &["list", "archive"],
                &["show", "contents"],
                &["contents"]
            ],
            &[("archive", Archive, &[], None)],
            "tar -tf {archive}",
            "list the contents of an archive",
            "-t lists the archive members without extracting, -f names the archive file"
        ),
        template(
            "tar",
            &[&["compress"], &["pack"], &["tarball"]],
            &[
                ("directory", Directory, &[], None),
                (
                    "archive",
                    Archive,
                    &[".tar.gz", ".tgz"],
                    Some("{directory}.tar.gz")
                )
            ],
            "tar -czf {archive} {directory}",
            "compress a directory into a gzip-compressed tar archive",
            "-c creates an archive, -z compresses it with gzip, -f names the archive file"
        ),
        template(
            "grep",
            &[&["count"]],
            &[
                ("pattern", Pattern, &[], None),
                ("file", File, &[], Some("*"))
            ],
            "grep -c \"{pattern}\" {file}",
            "count matching lines",
            "-c prints the number of matching lines instead of the lines"
        ),
        template(
            "grep",
            &[
                &["case", "insensitive"],
                &["ignore", "case"],
                &["ignoring", "case"],
                &["insensitive"]
            ],
            &[
                ("pattern", Pattern, &[], None),
                ("file", File, &[], Some("*"))
            ],
            "grep -i \"{pattern}\" {file}",
            "search text ignoring case",
            "-i matches upper and lower case alike"
        ),
        template(
            "grep",
            &[&["recursive"], &["recursively"]],
            &[
                ("pattern", Pattern, &[], None),
                ("directory", Directory, &[], Some("."))
            ],
            "grep -r \"{pattern}\" {directory}",
            "search text in every file below a directory",
            "-r descends into subdirectories"
        ),
        template(
            "grep",
            SEARCH,
            &[
                ("pattern", Pattern, &[], None),
                ("file", File, &[], Some("*"))
            ],
            "grep \"{pattern}\" {file}",
            "print lines matching a pattern",
            "grep prints every line of the file that contains the pattern"
        ),
    ]
}

/// Natural-language-to-command skill.
#[derive(Debug, Clone)]
pub struct Nlc2Cmd {
    templates: Vec<CommandTemplate>,
}

impl Default for Nlc2Cmd {
    fn default() -> Self {
        Self {
            templates: default_templates(),
        }
    }
}

impl Nlc2Cmd {
    pub fn new(templates: Vec<CommandTemplate>) -> Result<Self, TemplateError> {
        templates.iter().try_for_each(CommandTemplate::validate)?;
        Ok(Self { templates })
    }

    pub fn templates(&self) -> &[CommandTemplate] {
        &self.templates
    }

    /// First template whose intent matches and whose required slots resolve.
    pub fn translate(&self, request: &str) -> Option<Translation> {
        let tokens: BTreeSet<String> = tokenize(request).into_iter().collect();
        let ws = words(request);
        self.templates.iter().enumerate().find_map(|(idx, t)| {
            if !t.intent_matches(&tokens) {
                return None;
            }
            self.fill(idx, t, &ws)
        })
    }

    fn fill(&self, idx: usize, t: &CommandTemplate, ws: &[Word]) -> Option<Translation> {
        let mut filler = Filler {
            words: ws,
            used: alloc::vec![false; ws.len()],
            keywords: t.keywords(),
        };
        let mut order: Vec<&SlotSpec> = t.slots.iter().collect();
        order.sort_by_key(|s| s.kind);
        let mut values: Vec<(String, String)> = Vec::new();
        let mut filled = Vec::new();
        let mut pending_defaults = Vec::new();
        for slot in order {
            let found = match slot.kind {
                SlotKind::Archive => filler.archive(&slot.extensions),
                SlotKind::Pattern => filler.pattern(),
                SlotKind::File => filler.file(),
                SlotKind::Directory => filler.directory(),
            };
            match (found, &slot.default) {
                (Some(v), _) => {
                    filled.push((slot.name.clone(), v.clone()));
                    values.push((slot.name.clone(), v));
                }
                (None, Some(default)) => {
                    pending_defaults.push((slot.name.clone(), default.clone()))
                }
                (None, None) => return None,
            }
        }
        let defaulted = !pending_defaults.is_empty();
        for (name, default) in pending_defaults {
            let v = expand_default(&default, &values);
            values.push((name, v));
        }
        Some(Translation {
            command: render(&t.render, &values),
            confidence: if defaulted {
                DEFAULTED_CONFIDENCE
            } else {
                FILLED_CONFIDENCE
            },
            template: idx,
            filled,
        })
    }
}

impl Skill for Nlc2Cmd {
    fn name(&self) -> &str {
        NAME
    }

    fn on_event(&self, state: &TerminalState) -> Result<Option<ActionSequence>, SkillError> {
        if state.phase != Phase::PreExecution {
            return Ok(None);
        }
        let inv = invocation(&state.user_input, NAME);
        let Some(tr) = self.translate(inv.query) else {
            return Ok(None);
        };
        let t = &self.templates[tr.template];
        let mut action = Action::suggest(NAME, tr.command).with_confidence(tr.confidence);
        if let Some(d) = &t.description {
            action = action.with_description(d.clone());
        }
        if let Some(e) = &t.explanation {
            action = action.with_explanation(e.clone());
        }
        Ok(Some(ActionSequence::single(action)))
    }
}

//! Documents to search over, and parsers for the two corpus sources: plain
//! text man pages and JSON-lines Q&A dumps.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    pub answer: Option<String>,
    pub score: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    Empty,
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("document `{0}` has an empty body")]
    EmptyBody(String),
    #[error("no valid lines in q&a input ({malformed} malformed)")]
    NoValidLines { malformed: usize },
}

/// Documents with unique ids and non-empty bodies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    docs: Vec<Document>,
}

impl Corpus {
    pub fn new(docs: Vec<Document>) -> Result<Self, CorpusError> {
        let mut seen = BTreeMap::new();
        for d in &docs {
            if d.body.trim().is_empty() {
                return Err(CorpusError::EmptyBody(d.doc_id.clone()));
            }
            if seen.insert(d.doc_id.as_str(), ()).is_some() {
                return Err(CorpusError::DuplicateId(d.doc_id.clone()));
            }
        }
        Ok(Self { docs })
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.docs.iter().find(|d| d.doc_id == doc_id)
    }
}

/// A section header: starts at column 0, contains a letter and no lowercase.
fn is_header(line: &str) -> bool {
    let trimmed = line.trim_end();
    !trimmed.is_empty()
        && !line.starts_with(char::is_whitespace)
        && trimmed.chars().any(|c| c.is_ascii_uppercase())
        && trimmed
            .chars()
            .all(|c| c.is_ascii_uppercase() || c == ' ' || c == '-' || c == '_')
}

/// Lines of the named section, without the header, up to the next header.
pub fn man_section<'a>(text: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let mut lines = text.lines();
    lines
        .by_ref()
        .find(|l| is_header(l) && l.trim_end() == name)?;
    Some(lines.take_while(|l| !is_header(l)).collect())
}

/// Builds a document from a pre-rendered man page. The title is the first
/// line of the NAME section, falling back to the first non-empty line.
pub fn parse_man_page(command: &str, text: &str) -> Document {
    let from_name = man_section(text, "NAME")
        .and_then(|lines| lines.into_iter().map(str::trim).find(|l| !l.is_empty()));
    let title = from_name
        .or_else(|| text.lines().map(str::trim).find(|l| !l.is_empty()))
        .unwrap_or(command);
    Document {
        doc_id: command.to_string(),
        title: title.to_string(),
        body: text.to_string(),
        answer: None,
        score: None,
    }
}

/// First `n` non-empty lines of the DESCRIPTION section, trimmed.
pub fn man_description(text: &str, n: usize) -> Vec<&str> {
    man_section(text, "DESCRIPTION")
        .unwrap_or_default()
        .into_iter()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .take(n)
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PostId {
    Text(String),
    Number(i64),
}

#[derive(Debug, Deserialize)]
struct QaLine {
    id: PostId,
    title: String,
    question: String,
    answer: String,
    #[serde(default)]
    score: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QaReport {
    pub malformed: usize,
    pub duplicates: usize,
}

/// Parses JSON lines of `{id, title, question, answer, score}`.
///
/// Blank lines are ignored, malformed lines are skipped and counted, and a
/// repeated id replaces the earlier post in place.
pub fn parse_qa(text: &str) -> Result<(Corpus, QaReport), CorpusError> {
    let mut report = QaReport::default();
    let mut docs: Vec<Document> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let parsed: QaLine = match serde_json::from_str(line) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("skipping malformed q&a line: {e}");
                report.malformed += 1;
                continue;
            }
        };
        let doc_id = match parsed.id {
            PostId::Text(s) => s,
            PostId::Number(n) => alloc::format!("{n}"),
        };
        let mut body = parsed.title.clone();
        body.push('\n');
        body.push_str(&parsed.question);
        if body.trim().is_empty() {
            report.malformed += 1;
            continue;
        }
        let doc = Document {
            doc_id: doc_id.clone(),
            title: parsed.title,
            body,
            answer: Some(parsed.answer),
            score: parsed.score,
        };
        match index.get(&doc_id) {
            Some(&i) => {
                log::warn!("duplicate q&a id `{doc_id}`; keeping the later post");
                report.duplicates += 1;
                docs[i] = doc;
            }
            None => {
                index.insert(doc_id, docs.len());
                docs.push(doc);
            }
        }
    }
    if docs.is_empty() {
        return Err(CorpusError::NoValidLines {
            malformed: report.malformed,
        });
    }
    Ok((Corpus::new(docs)?, report))
}

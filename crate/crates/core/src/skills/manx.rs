use alloc::format;
use alloc::sync::Arc;

use super::{invocation, KnownCommands, Skill, SkillError};
use crate::events::{Action, ActionSequence, Phase, TerminalState};
use crate::retrieval::{man_description, Corpus, CorpusError, TfIdfModel};

pub const NAME: &str = "manx";

/// Lines of the DESCRIPTION section shown as the explanation.
pub const EXPLANATION_LINES: usize = 5;

/// Answers natural-language questions with the best matching man page.
#[derive(Debug, Clone)]
pub struct ManExplorer {
    corpus: Arc<Corpus>,
    model: Arc<TfIdfModel>,
    known: Arc<KnownCommands>,
}

impl ManExplorer {
    pub fn new(corpus: Arc<Corpus>, known: Arc<KnownCommands>) -> Result<Self, CorpusError> {
        let model = Arc::new(TfIdfModel::build(&corpus)?);
        Ok(Self {
            corpus,
            model,
            known,
        })
    }

    /// Uses an already built (for example cached) model.
    pub fn with_model(
        corpus: Arc<Corpus>,
        model: Arc<TfIdfModel>,
        known: Arc<KnownCommands>,
    ) -> Self {
        Self {
            corpus,
            model,
            known,
        }
    }

    pub fn model(&self) -> &TfIdfModel {
        &self.model
    }
}

impl Skill for ManExplorer {
    fn name(&self) -> &str {
        NAME
    }

    fn on_event(&self, state: &TerminalState) -> Result<Option<ActionSequence>, SkillError> {
        if state.phase != Phase::PreExecution {
            return Ok(None);
        }
        let inv = invocation(&state.user_input, NAME);
        let first = inv.query.split_whitespace().next();
        if !inv.explicit && first.is_none_or(|w| self.known.contains(w)) {
            return Ok(None);
        }
        let Some((doc_id, score)) = self.model.rank(inv.query, 1).into_iter().next() else {
            return Ok(None);
        };
        let doc = self
            .corpus
            .get(&doc_id)
            .ok_or_else(|| SkillError(format!("model and corpus disagree on `{doc_id}`")))?;
        let explanation = man_description(&doc.body, EXPLANATION_LINES).join("\n");
        let mut action = Action::new(NAME)
            .with_description(format!("command: {} ({})", doc.doc_id, doc.title))
            .with_confidence(score);
        if !explanation.is_empty() {
            action = action.with_explanation(explanation);
        }
        Ok(Some(ActionSequence::single(action)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::parse_man_page;
    use alloc::vec;

    fn explorer() -> ManExplorer {
        let corpus = Corpus::new(vec![
            parse_man_page("tar", "NAME\n tar - an archiving utility\nDESCRIPTION\n Stores and extracts files from a tape or disk archive.\n"),
            parse_man_page("grep", "NAME\n grep - print lines that match patterns\nDESCRIPTION\n grep searches for a pattern in each file.\n Lines that match are printed.\n"),
            parse_man_page("ls", "NAME\n ls - list directory contents\nDESCRIPTION\n List information about the files in a directory.\n"),
        ])
        .unwrap();
        ManExplorer::new(
            Arc::new(corpus),
            Arc::new(KnownCommands::new(["tar", "grep", "ls"])),
        )
        .unwrap()
    }

    fn ask(input: &str) -> Option<ActionSequence> {
        explorer()
            .on_event(&TerminalState::new("s", 1, input, "/", Phase::PreExecution))
            .unwrap()
    }

    #[test]
    fn finds_grep() {
        let seq = ask("search for a pattern in files").unwrap();
        let a = seq.first();
        assert!(a
            .description
            .as_deref()
            .unwrap()
            .starts_with("command: grep (grep - print lines"));
        assert_eq!(
            a.explanation.as_deref(),
            Some("grep searches for a pattern in each file.\nLines that match are printed.")
        );
        let expected = explorer().model().rank("search for a pattern in files", 1)[0].1;
        assert_eq!(a.confidence, expected);
    }

    #[test]
    fn known_commands_are_ignored_unless_forced() {
        assert!(ask("ls -la").is_none());
        assert!(ask("clai manx ls directory").is_some());
    }

    #[test]
    fn nothing_for_unknown_vocabulary() {
        assert!(ask("qqqq zzzz").is_none());
        assert!(ask("clai manx qqqq").is_none());
    }
}

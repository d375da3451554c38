use alloc::format;
use alloc::sync::Arc;

use super::{invocation, Skill, SkillError};
use crate::events::{Action, ActionSequence, Phase, TerminalState};
use crate::retrieval::{Corpus, CorpusError, TfIdfModel};

/// Retrieval scores are scaled down by this factor: a forum answer is a
/// weaker signal than a man page.
pub const QA_CONFIDENCE_SCALE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QaMode {
    /// Answers explicit natural-language questions.
    HowDoI,
    /// Looks up the error text of a failed command.
    HelpMe,
}

impl QaMode {
    pub fn skill_name(self) -> &'static str {
        match self {
            Self::HowDoI => "howdoi",
            Self::HelpMe => "helpme",
        }
    }
}

/// Q&A lookup over an offline post corpus.
#[derive(Debug, Clone)]
pub struct QaSkill {
    mode: QaMode,
    corpus: Arc<Corpus>,
    model: Arc<TfIdfModel>,
}

impl QaSkill {
    pub fn new(mode: QaMode, corpus: Arc<Corpus>) -> Result<Self, CorpusError> {
        let model = Arc::new(TfIdfModel::build(&corpus)?);
        Ok(Self {
            mode,
            corpus,
            model,
        })
    }

    pub fn with_model(mode: QaMode, corpus: Arc<Corpus>, model: Arc<TfIdfModel>) -> Self {
        Self {
            mode,
            corpus,
            model,
        }
    }

    fn query<'a>(&self, state: &'a TerminalState) -> Option<&'a str> {
        match self.mode {
            QaMode::HowDoI => {
                let inv = invocation(&state.user_input, self.mode.skill_name());
                (state.phase == Phase::PreExecution && inv.explicit).then_some(inv.query)
            }
            QaMode::HelpMe => {
                let failed = state.previous_exit_code.is_some_and(|c| c != 0);
                let fires = state.phase == Phase::PostExecution
                    && failed
                    && !state.stderr_tail.trim().is_empty();
                fires.then_some(state.stderr_tail.as_str())
            }
        }
    }
}

impl Skill for QaSkill {
    fn name(&self) -> &str {
        self.mode.skill_name()
    }

    fn on_event(&self, state: &TerminalState) -> Result<Option<ActionSequence>, SkillError> {
        let Some(query) = self.query(state) else {
            return Ok(None);
        };
        let Some((doc_id, score)) = self.model.rank(query, 1).into_iter().next() else {
            return Ok(None);
        };
        let post = self
            .corpus
            .get(&doc_id)
            .ok_or_else(|| SkillError(format!("model and corpus disagree on `{doc_id}`")))?;
        let mut description = post.title.clone();
        if let Some(answer) = &post.answer {
            description.push('\n');
            description.push_str(answer);
        }
        let explanation = match post.score {
            Some(votes) => format!("post {} ({votes} votes)", post.doc_id),
            None => format!("post {}", post.doc_id),
        };
        let action = Action::new(self.mode.skill_name())
            .with_description(description)
            .with_explanation(explanation)
            .with_confidence(score * QA_CONFIDENCE_SCALE);
        Ok(Some(ActionSequence::single(action)))
    }
}

//! Wiring of the built-in skills, plus the echo and mock skills used by the
//! contract tests and the profiler.

use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use clai_core::events::{Action, ActionSequence, Phase, SkillDescriptor, TerminalState};
use clai_core::retrieval::{Corpus, TfIdfModel};
use clai_core::skills::{
    CommandTemplate, FixIt, FixRules, KnownCommands, ManExplorer, Nlc2Cmd, QaMode, QaSkill, Skill,
    SkillError,
};

use crate::config::Config;
use crate::ingest::{ingest_man_pages, ingest_qa};
use crate::protocol::{echo_response, ECHO_SKILL_NAME};
use crate::registry::{Registry, RegistryError, SkillFactory};
use crate::store::ModelCache;

/// fixit with the commands the user ran successfully this session counted
/// as known.
pub struct HistoryFixIt {
    inner: FixIt,
    history: Arc<RwLock<KnownCommands>>,
}

impl HistoryFixIt {
    pub fn new(inner: FixIt, history: Arc<RwLock<KnownCommands>>) -> Self {
        Self { inner, history }
    }
}

impl Skill for HistoryFixIt {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn on_event(&self, state: &TerminalState) -> Result<Option<ActionSequence>, SkillError> {
        let history = self.history.read().unwrap_or_else(|p| p.into_inner());
        Ok(self.inner.suggest(state, &history))
    }
}

/// In-process twin of the external echo skill.
#[derive(Debug, Default, Clone, Copy)]
pub struct EchoSkill;

impl Skill for EchoSkill {
    fn name(&self) -> &str {
        ECHO_SKILL_NAME
    }

    fn on_event(&self, state: &TerminalState) -> Result<Option<ActionSequence>, SkillError> {
        Ok(echo_response(state))
    }
}

/// A skill that spends a fixed time per event before answering with a
/// constant suggestion. Used to separate platform overhead from skill cost.
#[derive(Debug, Clone)]
pub struct MockSkill {
    name: String,
    compute: Duration,
    confidence: f64,
    phases: Vec<Phase>,
}

impl MockSkill {
    /// Computes only before execution, as a typical suggesting skill does.
    pub fn new(name: impl Into<String>, compute: Duration) -> Self {
        Self {
            name: name.into(),
            compute,
            confidence: 0.0,
            phases: vec![Phase::PreExecution],
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn in_phases(mut self, phases: &[Phase]) -> Self {
        self.phases = phases.to_vec();
        self
    }
}

impl Skill for MockSkill {
    fn name(&self) -> &str {
        &self.name
    }

    fn on_event(&self, state: &TerminalState) -> Result<Option<ActionSequence>, SkillError> {
        if !self.phases.contains(&state.phase) {
            return Ok(None);
        }
        std::thread::sleep(self.compute);
        if self.confidence <= 0.0 {
            return Ok(None);
        }
        Ok(Some(ActionSequence::single(
            Action::suggest(self.name.clone(), "true")
                .with_description("mock")
                .with_confidence(self.confidence),
        )))
    }
}

pub fn factory_of<S: Skill + Clone + 'static>(skill: S) -> SkillFactory {
    Arc::new(move || Ok(Arc::new(skill.clone()) as Arc<dyn Skill>))
}

type Indexed = (Arc<Corpus>, Arc<TfIdfModel>);

/// Shared inputs of the built-in skills. Corpora and models are loaded on
/// first activation and kept for reactivation.
pub struct BuiltinContext {
    pub known: Arc<KnownCommands>,
    pub history: Arc<RwLock<KnownCommands>>,
    pub man_dir: PathBuf,
    pub qa_path: PathBuf,
    pub cache: Option<ModelCache>,
    pub fix_rules: FixRules,
    pub templates: Vec<CommandTemplate>,
    man: Mutex<Option<Indexed>>,
    qa: Mutex<Option<Indexed>>,
}

#[derive(Debug, thiserror::Error)]
pub enum BuiltinError {
    #[error("{path}: {reason}")]
    Table { path: PathBuf, reason: String },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, BuiltinError> {
    let text = std::fs::read_to_string(path).map_err(|e| BuiltinError::Table {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| BuiltinError::Table {
        path: path.clone(),
        reason: e.to_string(),
    })
}

impl BuiltinContext {
    pub fn new(
        known: KnownCommands,
        man_dir: PathBuf,
        qa_path: PathBuf,
        cache: Option<ModelCache>,
    ) -> Self {
        Self {
            known: Arc::new(known),
            history: Arc::new(RwLock::new(KnownCommands::default())),
            man_dir,
            qa_path,
            cache,
            fix_rules: FixRules::default(),
            templates: clai_core::skills::nlc2cmd::default_templates(),
            man: Mutex::new(None),
            qa: Mutex::new(None),
        }
    }

    pub fn from_config(config: &Config, known: KnownCommands) -> Result<Self, BuiltinError> {
        let mut ctx = Self::new(
            known,
            config.man_dir(),
            config.qa_path(),
            Some(ModelCache::new(config.model_cache_dir())),
        );
        if let Some(path) = &config.fix_rules_path {
            ctx.fix_rules = read_json(path)?;
        }
        if let Some(path) = &config.templates_path {
            let templates: Vec<CommandTemplate> = read_json(path)?;
            Nlc2Cmd::new(templates.clone()).map_err(|e| BuiltinError::Table {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            ctx.templates = templates;
        }
        Ok(ctx)
    }

    fn index(&self, corpus: Corpus) -> Result<Indexed, String> {
        let model = match &self.cache {
            Some(cache) => cache.get_or_build(&corpus).map_err(|e| e.to_string())?,
            None => TfIdfModel::build(&corpus).map_err(|e| e.to_string())?,
        };
        Ok((Arc::new(corpus), Arc::new(model)))
    }

    fn man_index(&self) -> Result<Indexed, String> {
        let mut slot = self.man.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(ix) = slot.as_ref() {
            return Ok(ix.clone());
        }
        let corpus = ingest_man_pages(&self.man_dir).map_err(|e| e.to_string())?;
        let ix = self.index(corpus)?;
        *slot = Some(ix.clone());
        Ok(ix)
    }

    fn qa_index(&self) -> Result<Indexed, String> {
        let mut slot = self.qa.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(ix) = slot.as_ref() {
            return Ok(ix.clone());
        }
        let (corpus, _) = ingest_qa(&self.qa_path).map_err(|e| e.to_string())?;
        let ix = self.index(corpus)?;
        *slot = Some(ix.clone());
        Ok(ix)
    }
}

/// Registers fixit, manx, nlc2cmd, howdoi and helpme, all inactive.
pub fn register_builtins(
    registry: &mut Registry,
    ctx: Arc<BuiltinContext>,
    timeout_ms: u64,
) -> Result<(), RegistryError> {
    let descriptor = |name: &str| SkillDescriptor::in_process(name).with_timeout(timeout_ms);

    let c = Arc::clone(&ctx);
    registry.register(
        descriptor(clai_core::skills::fixit::NAME),
        Arc::new(move || {
            let fixit = FixIt::new(Arc::clone(&c.known), c.fix_rules.clone());
            Ok(Arc::new(HistoryFixIt::new(fixit, Arc::clone(&c.history))) as Arc<dyn Skill>)
        }),
    )?;

    let c = Arc::clone(&ctx);
    registry.register(
        descriptor(clai_core::skills::manx::NAME),
        Arc::new(move || {
            let (corpus, model) = c.man_index()?;
            Ok(
                Arc::new(ManExplorer::with_model(corpus, model, Arc::clone(&c.known)))
                    as Arc<dyn Skill>,
            )
        }),
    )?;

    let c = Arc::clone(&ctx);
    registry.register(
        descriptor(clai_core::skills::nlc2cmd::NAME),
        Arc::new(move || {
            let skill = Nlc2Cmd::new(c.templates.clone()).map_err(|e| e.to_string())?;
            Ok(Arc::new(skill) as Arc<dyn Skill>)
        }),
    )?;

    for mode in [QaMode::HowDoI, QaMode::HelpMe] {
        let c = Arc::clone(&ctx);
        registry.register(
            descriptor(mode.skill_name()),
            Arc::new(move || {
                let (corpus, model) = c.qa_index()?;
                Ok(Arc::new(QaSkill::with_model(mode, corpus, model)) as Arc<dyn Skill>)
            }),
        )?;
    }
    Ok(())
}

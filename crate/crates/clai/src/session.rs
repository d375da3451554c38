//! One interactive session: interception, the skill pipeline, confirmation,
//! execution and feedback.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clai_core::events::{
    tail_lossy, ActionSequence, DecisionRecord, FeedbackEvent, Phase, SkillResponse, TerminalState,
    UserResponse, NOOP, TAIL_LIMIT,
};
use clai_core::intercept::{intercept, Directive, DirectiveKind, InterceptError, MetaCommand};
use clai_core::orchestration::{
    warm_start, BanditState, Orchestrator, OrchestratorMode, WarmStartProfile,
};
use clai_core::skills::KnownCommands;

use crate::builtins::{register_builtins, BuiltinContext, BuiltinError};
use crate::config::{Config, ConfigError, SPARE_BANDIT_SLOTS};
use crate::dispatch::{deadline_for, dispatch, ActiveSkill};
use crate::journal::{Journal, JournalError};
use crate::registry::{Registry, RegistryError};
use crate::shell::{Builtin, ExecutionOutcome, Shell};
use crate::store::{load_bandit, save_bandit, StoreError};
use clai_core::events::SkillDescriptor;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Builtin(#[from] BuiltinError),
    #[error("warm start: {0}")]
    WarmStart(String),
}

/// Source of confirmation answers, one line at a time.
pub trait LineSource: Send {
    /// `None` at end of input.
    fn next_line(&mut self) -> Option<String>;
}

impl<R: BufRead + Send> LineSource for R {
    fn next_line(&mut self) -> Option<String> {
        let mut line = String::new();
        match self.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(line),
        }
    }
}

/// The process's stdin, read through its shared buffer so the REPL and the
/// confirmation prompt never steal each other's input.
#[derive(Debug, Default, Clone, Copy)]
pub struct StdinLines;

impl LineSource for StdinLines {
    fn next_line(&mut self) -> Option<String> {
        let mut line = String::new();
        match std::io::stdin().read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(line),
        }
    }
}

/// Where confirmations are read from and where the wrapper's own messages
/// go. Command output does not pass through here.
pub struct SessionIo {
    pub input: Box<dyn LineSource>,
    pub ui: Box<dyn Write + Send>,
}

impl SessionIo {
    pub fn new(input: impl LineSource + 'static, ui: impl Write + Send + 'static) -> Self {
        Self {
            input: Box::new(input),
            ui: Box::new(ui),
        }
    }
}

/// Persistent files a session writes to. Each is optional so tests and the
/// profiler can run without touching disk.
#[derive(Debug, Default)]
pub struct Storage {
    pub journal: Option<Journal>,
    pub bandit_path: Option<PathBuf>,
    pub config_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub directive: Directive,
    pub pre_responses: Vec<SkillResponse>,
    /// Skill whose pre-execution answer was used, if any.
    pub chosen: Option<String>,
    pub user_response: Option<UserResponse>,
    pub executions: Vec<ExecutionOutcome>,
    pub post_responses: Vec<SkillResponse>,
    /// Printed after the command, never run.
    pub post_suggestion: Option<ActionSequence>,
    /// Set when the line was `exit`.
    pub exit: Option<i32>,
    pub pre_dispatch_ms: f64,
    pub post_dispatch_ms: f64,
}

impl PipelineOutcome {
    pub fn execution(&self) -> Option<&ExecutionOutcome> {
        self.executions.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LineOutcome {
    Empty,
    /// A meta command or an interception error; the text was printed.
    Message(String),
    Ran(Box<PipelineOutcome>),
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Creates the bandit for `skills` from the saved state if there is one,
/// else by warm start. Skills missing from a saved state get free slots.
pub fn initial_bandit(
    skills: &[String],
    profile: Option<&WarmStartProfile>,
    alpha: f64,
    saved: Option<&std::path::Path>,
) -> Result<BanditState, SessionError> {
    if let Some(path) = saved {
        if let Some(mut state) = load_bandit(path)? {
            for s in skills {
                if state.slot_of(s).is_none() {
                    if let Err(e) = state.claim_slot(s) {
                        log::warn!("skill {s} gets no bandit slot: {e}");
                    }
                }
            }
            return Ok(state);
        }
    }
    let profile = profile
        .cloned()
        .unwrap_or(WarmStartProfile::MaxOrchestrator);
    warm_start(&profile, skills, skills.len() + SPARE_BANDIT_SLOTS, alpha)
        .map_err(|e| SessionError::WarmStart(e.to_string()))
}

pub struct Session {
    pub config: Config,
    pub registry: Registry,
    pub orchestrator: Orchestrator,
    pub shell: Shell,
    pub history: Arc<RwLock<KnownCommands>>,
    storage: Storage,
    journal_len: u64,
    io: SessionIo,
    session_id: String,
    command_id: u64,
    last: Option<ExecutionOutcome>,
    pending: Vec<FeedbackEvent>,
    /// Every event journaled this session, in order.
    pub feedback: Vec<FeedbackEvent>,
}

impl Session {
    pub fn new(
        config: Config,
        registry: Registry,
        orchestrator: Orchestrator,
        shell: Shell,
        io: SessionIo,
        storage: Storage,
    ) -> Self {
        let journal_len = storage.journal.as_ref().map_or(0, Journal::len);
        Self {
            config,
            registry,
            orchestrator,
            shell,
            history: Arc::new(RwLock::new(KnownCommands::default())),
            storage,
            journal_len,
            io,
            session_id: format!("{}-{}", std::process::id(), now_ms()),
            command_id: 0,
            last: None,
            pending: Vec::new(),
            feedback: Vec::new(),
        }
    }

    /// A full session as the `clai` binary runs it: built-in and configured
    /// external skills registered, configured skills activated, bandit loaded
    /// or warm-started, journal opened.
    pub fn from_config(
        config: Config,
        config_path: Option<PathBuf>,
        known: KnownCommands,
        shell: Shell,
        io: SessionIo,
        persist: bool,
    ) -> Result<Self, SessionError> {
        config.validate()?;
        let ctx = Arc::new(BuiltinContext::from_config(&config, known)?);
        let history = Arc::clone(&ctx.history);
        let mut registry = Registry::new();
        register_builtins(&mut registry, ctx, config.skill_timeout_ms)?;
        for ext in &config.external_skills {
            let descriptor =
                SkillDescriptor::external(ext.name.clone(), ext.entry.to_string_lossy())
                    .with_timeout(ext.timeout_ms);
            registry.register_external(descriptor, ext.args.clone())?;
        }
        let names = registry.names();
        let bandit_path = persist.then(|| config.bandit_path());
        let bandit = initial_bandit(
            &names,
            config.warm_start_profile()?.as_ref(),
            config.bandit_alpha,
            bandit_path.as_deref(),
        )?;
        let orchestrator = Orchestrator::new(config.mode()?, config.threshold, bandit)
            .with_preferences(config.preference_order()?);
        let journal = if persist {
            Some(Journal::open(&config.journal_path())?)
        } else {
            None
        };
        let storage = Storage {
            journal,
            bandit_path,
            config_path,
        };
        let active = config.active_skills.clone();
        let mut session = Self::new(config, registry, orchestrator, shell, io, storage);
        session.history = history;
        for name in active {
            if let Err(e) = session.registry.activate(&name) {
                session.say(&format!("cannot activate {name}: {e}"));
            }
        }
        Ok(session)
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    /// Journal lines written so far (this session and earlier ones).
    pub fn journal_len(&self) -> u64 {
        self.journal_len
    }

    fn say(&mut self, text: &str) {
        for line in text.lines() {
            let _ = writeln!(self.io.ui, "clai: {line}");
        }
        let _ = self.io.ui.flush();
    }

    /// Handles one typed line.
    pub fn handle_line(&mut self, raw: &str) -> LineOutcome {
        let line = raw.trim_end_matches(['\n', '\r']);
        let directive = match intercept(line, &self.registry) {
            Ok(d) => d,
            Err(InterceptError::Empty) => return LineOutcome::Empty,
            Err(e) => {
                let msg = e.to_string();
                self.say(&msg);
                return LineOutcome::Message(msg);
            }
        };
        if let Some(meta) = directive.meta() {
            let msg = self.meta(meta);
            self.say(&msg);
            return LineOutcome::Message(msg);
        }
        if directive.kind == DirectiveKind::MetaCommand {
            let msg = format!("unknown command: {}", directive.payload);
            self.say(&msg);
            return LineOutcome::Message(msg);
        }
        LineOutcome::Ran(Box::new(self.run_pipeline(line, directive)))
    }

    fn meta(&mut self, meta: MetaCommand) -> String {
        let msg = match meta {
            MetaCommand::Skills => {
                let rows: Vec<String> = self
                    .registry
                    .list()
                    .into_iter()
                    .map(|s| format!("{} {}", if s.active { "*" } else { " " }, s.name))
                    .collect();
                return rows.join("\n");
            }
            MetaCommand::Activate(None) => return "usage: clai activate <skill>".into(),
            MetaCommand::Deactivate(None) => return "usage: clai deactivate <skill>".into(),
            MetaCommand::Activate(Some(name)) => match self.registry.activate(&name) {
                Ok(()) => {
                    if self.orchestrator.bandit.slot_of(&name).is_none() {
                        if let Err(e) = self.orchestrator.bandit.claim_slot(&name) {
                            log::warn!("{name} gets no bandit slot: {e}");
                        }
                    }
                    if !self.config.active_skills.contains(&name) {
                        self.config.active_skills.push(name.clone());
                    }
                    format!("activated {name}")
                }
                Err(e) => return e.to_string(),
            },
            MetaCommand::Deactivate(Some(name)) => match self.registry.deactivate(&name) {
                Ok(()) => {
                    self.config.active_skills.retain(|n| n != &name);
                    format!("deactivated {name}")
                }
                Err(e) => return e.to_string(),
            },
            MetaCommand::Orchestrate(None) => {
                return format!("orchestrator: {}", self.orchestrator.mode)
            }
            MetaCommand::Orchestrate(Some(mode)) => match mode.parse::<OrchestratorMode>() {
                Ok(m) => {
                    self.orchestrator.mode = m;
                    self.config.orchestrator = m.as_str().to_string();
                    format!("orchestrator: {m}")
                }
                Err(e) => return e.to_string(),
            },
            MetaCommand::Manual => {
                self.config.auto_execute = false;
                "manual mode: every suggestion asks first".into()
            }
            MetaCommand::Auto => {
                self.config.auto_execute = true;
                "auto mode: skills may run their suggestions directly".into()
            }
        };
        self.save_config();
        msg
    }

    fn save_config(&mut self) {
        if let Some(path) = &self.storage.config_path {
            if let Err(e) = self.config.save(path) {
                log::warn!("{e}");
            }
        }
    }

    fn state(&self, input: &str, phase: Phase) -> TerminalState {
        let mut s = TerminalState::new(
            self.session_id.clone(),
            self.command_id,
            input,
            self.shell.cwd.to_string_lossy(),
            phase,
        )
        .with_timestamp(now_ms());
        if let Some(last) = &self.last {
            s = s.with_exit_code(Some(last.exit_code)).with_output(
                &tail_lossy(&last.stdout, TAIL_LIMIT),
                &tail_lossy(&last.stderr, TAIL_LIMIT),
            );
        }
        s
    }

    fn record(&mut self, event: FeedbackEvent) {
        if let Some(journal) = self.storage.journal.as_mut() {
            if let Err(e) = journal.append(&event) {
                log::warn!("{e}");
            }
        }
        self.journal_len += 1;
        if let (Some(decision), true) = (&event.decision, event.is_final()) {
            self.orchestrator.learn(decision.mode, decision, &event);
            if decision.mode == OrchestratorMode::Bandit {
                if let Some(path) = &self.storage.bandit_path {
                    if let Err(e) = save_bandit(path, &self.orchestrator.bandit) {
                        log::warn!("{e}");
                    }
                }
            }
        }
        self.feedback.push(event);
    }

    fn finalize_pending(&mut self, next_command: &str) {
        for mut event in std::mem::take(&mut self.pending) {
            event.finalize_ignored(next_command);
            self.record(event);
        }
    }

    /// Writes out events still waiting for a next command. They stay
    /// non-final and teach nothing.
    pub fn close(&mut self) {
        for event in std::mem::take(&mut self.pending) {
            if let Some(journal) = self.storage.journal.as_mut() {
                if let Err(e) = journal.append(&event) {
                    log::warn!("{e}");
                }
            }
            self.journal_len += 1;
            self.feedback.push(event);
        }
    }

    fn reap(&mut self) {
        for name in self.registry.reap_dead() {
            self.say(&format!("{name} stopped responding and was deactivated"));
        }
    }

    fn timed_dispatch(
        &mut self,
        state: &TerminalState,
        skills: &[ActiveSkill],
    ) -> (Vec<SkillResponse>, f64) {
        let start = Instant::now();
        let responses = dispatch(state, skills, deadline_for(skills));
        let ms = start.elapsed().as_secs_f64() * 1000.0;
        self.reap();
        (responses, ms)
    }

    fn show(&mut self, seq: &ActionSequence, heading: &str) {
        let mut text = format!("{heading} ({})", seq.origin_skill());
        for a in seq.actions() {
            if let Some(cmd) = &a.suggested_command {
                text.push_str(&format!("\n  {cmd}"));
            }
            if let Some(d) = &a.description {
                for line in d.lines() {
                    text.push_str(&format!("\n  {line}"));
                }
            }
        }
        self.say(&text);
    }

    /// The y/n/e loop. Each `e` is journaled as an explained event.
    fn confirm(&mut self, seq: &ActionSequence) -> UserResponse {
        let commands: Vec<&str> = seq
            .actions()
            .iter()
            .filter_map(|a| a.suggested_command.as_deref())
            .collect();
        let prompt = format!("clai: {}? [y/n/e] ", commands.join(" && "));
        if let Some(d) = seq.first().description.as_deref() {
            self.say(d);
        }
        loop {
            let _ = write!(self.io.ui, "{prompt}");
            let _ = self.io.ui.flush();
            let Some(answer) = self.io.input.next_line() else {
                let _ = writeln!(self.io.ui);
                return UserResponse::Rejected;
            };
            match answer.trim().to_ascii_lowercase().as_str() {
                "y" | "yes" => return UserResponse::Accepted,
                "n" | "no" => return UserResponse::Rejected,
                "e" => {
                    let explanation: Vec<String> = seq
                        .actions()
                        .iter()
                        .filter_map(|a| a.explanation.clone())
                        .collect();
                    if explanation.is_empty() {
                        self.say("no explanation available");
                    } else {
                        self.say(&explanation.join("\n"));
                    }
                    let event = FeedbackEvent::new(
                        self.command_id,
                        seq.origin_skill(),
                        UserResponse::Explained,
                    )
                    .with_suggestion(commands.first().map(|c| c.to_string()));
                    self.record(event);
                }
                _ => {}
            }
        }
    }

    /// Runs each command in turn, stopping at the first failure.
    fn execute_all(&mut self, commands: &[String]) -> (Vec<ExecutionOutcome>, Option<i32>) {
        let mut done = Vec::new();
        for cmd in commands {
            let outcome = match self.shell.builtin(cmd) {
                Some(Builtin::Exit(code)) => return (done, Some(code)),
                Some(Builtin::Ran(o)) => o,
                None => self.shell.run(cmd),
            };
            let ok = outcome.exit_code == 0;
            if ok {
                if let Some(first) = cmd.split_whitespace().next() {
                    self.history
                        .write()
                        .unwrap_or_else(|p| p.into_inner())
                        .insert(first);
                }
            }
            self.last = Some(outcome.clone());
            done.push(outcome);
            if !ok {
                break;
            }
        }
        (done, None)
    }

    pub fn run_pipeline(&mut self, raw: &str, directive: Directive) -> PipelineOutcome {
        self.command_id += 1;
        self.finalize_pending(raw);
        let pass_through = directive.kind == DirectiveKind::PassThrough;
        let explicit = !pass_through;

        let pre = self.state(raw, Phase::PreExecution);
        let skills: Vec<ActiveSkill> = match (&directive.kind, &directive.skill) {
            (DirectiveKind::ForcedSkill, Some(name)) => {
                self.registry.active_skill(name).into_iter().collect()
            }
            _ => self.registry.active(),
        };
        let (pre_responses, pre_dispatch_ms) = self.timed_dispatch(&pre, &skills);

        // A forced skill is used whatever its confidence; everything else
        // goes through the orchestrator.
        let (chosen, decision) = if directive.kind == DirectiveKind::ForcedSkill {
            (
                pre_responses.iter().find(|r| r.is_candidate()).cloned(),
                None,
            )
        } else {
            let record = DecisionRecord::from_responses(
                self.orchestrator.mode,
                Phase::PreExecution,
                explicit,
                &pre_responses,
            )
            .at_position(self.journal_len);
            (
                self.orchestrator.decide(&pre_responses, explicit).chosen,
                Some(record),
            )
        };

        let mut to_run: Vec<String> = Vec::new();
        let mut user_response = None;
        let chosen_name = chosen.as_ref().map(|r| r.skill.clone());
        match chosen.and_then(|r| r.result) {
            None => {
                if pass_through {
                    to_run.push(raw.to_string());
                } else {
                    self.say("no skill had an answer");
                }
                if let Some(d) = decision {
                    self.pending.push(
                        FeedbackEvent::new(self.command_id, NOOP, UserResponse::Ignored)
                            .with_decision(d),
                    );
                }
            }
            Some(seq) => {
                let commands: Vec<String> = seq
                    .actions()
                    .iter()
                    .filter_map(|a| a.suggested_command.clone())
                    .collect();
                let skill = seq.origin_skill().to_string();
                if commands.is_empty() {
                    self.show(&seq, "note");
                    if pass_through {
                        to_run.push(raw.to_string());
                    }
                    let mut ev = FeedbackEvent::new(self.command_id, skill, UserResponse::Ignored);
                    ev.decision = decision;
                    self.pending.push(ev);
                } else {
                    let auto = self.config.auto_execute && seq.first().execute;
                    let answer = if auto {
                        UserResponse::Accepted
                    } else {
                        self.confirm(&seq)
                    };
                    match answer {
                        UserResponse::Accepted => to_run = commands.clone(),
                        _ if pass_through => to_run.push(raw.to_string()),
                        _ => {}
                    }
                    user_response = Some(answer);
                    let mut ev = FeedbackEvent::new(self.command_id, skill, answer)
                        .with_suggestion(commands.first().cloned());
                    ev.decision = decision;
                    self.record(ev);
                }
            }
        }

        let (executions, exit) = self.execute_all(&to_run);
        let mut outcome = PipelineOutcome {
            directive,
            pre_responses,
            chosen: chosen_name,
            user_response,
            executions,
            post_responses: Vec::new(),
            post_suggestion: None,
            exit,
            pre_dispatch_ms,
            post_dispatch_ms: 0.0,
        };
        if exit.is_some() {
            return outcome;
        }
        let Some(last) = outcome.executions.last() else {
            return outcome;
        };

        let post = self.state(&last.executed_command, Phase::PostExecution);
        let skills = self.registry.active();
        let (post_responses, post_dispatch_ms) = self.timed_dispatch(&post, &skills);
        let record = DecisionRecord::from_responses(
            self.orchestrator.mode,
            Phase::PostExecution,
            false,
            &post_responses,
        )
        .at_position(self.journal_len);
        let choice = self.orchestrator.decide(&post_responses, false);
        let suggestion = choice.chosen.as_ref().and_then(|r| r.result.clone());
        let event = match &suggestion {
            Some(seq) => {
                self.show(seq, "suggestion");
                FeedbackEvent::new(self.command_id, seq.origin_skill(), UserResponse::Ignored)
                    .with_suggestion(
                        seq.actions()
                            .iter()
                            .find_map(|a| a.suggested_command.clone()),
                    )
            }
            None => FeedbackEvent::new(self.command_id, NOOP, UserResponse::Ignored),
        };
        self.pending.push(event.with_decision(record));
        outcome.post_responses = post_responses;
        outcome.post_suggestion = suggestion;
        outcome.post_dispatch_ms = post_dispatch_ms;
        outcome
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.close();
    }
}

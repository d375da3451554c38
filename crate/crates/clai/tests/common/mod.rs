#![allow(dead_code)]

use std::io::{Cursor, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use clai::builtins::{factory_of, MockSkill};
use clai::config::Config;
use clai::journal::Journal;
use clai::registry::{Registry, SkillFactory};
use clai::session::{initial_bandit, Session, SessionIo, Storage};
use clai::shell::{sink, Shell};
use clai_core::events::SkillDescriptor;
use clai_core::orchestration::{Orchestrator, OrchestratorMode};

/// A writer whose bytes can be read back while it is still in use.
#[derive(Clone, Default)]
pub struct SharedBuf(pub Arc<Mutex<Vec<u8>>>);

impl SharedBuf {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.0.lock().unwrap()).into_owned()
    }

    pub fn bytes(&self) -> Vec<u8> {
        self.0.lock().unwrap().clone()
    }

    pub fn clear(&self) {
        self.0.lock().unwrap().clear();
    }
}

impl Write for SharedBuf {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

pub struct Harness {
    pub session: Session,
    pub ui: SharedBuf,
    pub stdout: SharedBuf,
    pub stderr: SharedBuf,
}

pub fn shell_in(dir: &Path) -> (Shell, SharedBuf, SharedBuf) {
    let (out, err) = (SharedBuf::default(), SharedBuf::default());
    (
        Shell::new(dir.to_path_buf(), sink(out.clone()), sink(err.clone())),
        out,
        err,
    )
}

pub fn mock(name: &str, confidence: f64) -> (SkillDescriptor, SkillFactory) {
    let skill = MockSkill::new(name, std::time::Duration::ZERO).with_confidence(confidence);
    (SkillDescriptor::in_process(name), factory_of(skill))
}

/// A session over the given skills (all active), answering confirmations
/// from `answers`, journaling to `journal` when given.
pub fn harness(
    skills: Vec<(SkillDescriptor, SkillFactory)>,
    mode: OrchestratorMode,
    answers: &str,
    dir: &Path,
    journal: Option<&Path>,
) -> Harness {
    let mut registry = Registry::new();
    for (descriptor, factory) in skills {
        let name = descriptor.name.clone();
        registry.register(descriptor, factory).unwrap();
        registry.activate(&name).unwrap();
    }
    let config = Config {
        active_skills: registry.names(),
        ..Config::default()
    };
    let bandit = initial_bandit(&registry.names(), None, config.bandit_alpha, None).unwrap();
    let orchestrator = Orchestrator::new(mode, config.threshold, bandit);
    let (shell, stdout, stderr) = shell_in(dir);
    let ui = SharedBuf::default();
    let io = SessionIo::new(Cursor::new(answers.as_bytes().to_vec()), ui.clone());
    let storage = Storage {
        journal: journal.map(|p| Journal::open(p).unwrap()),
        ..Storage::default()
    };
    let session = Session::new(config, registry, orchestrator, shell, io, storage);
    Harness {
        session,
        ui,
        stdout,
        stderr,
    }
}

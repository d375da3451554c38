//! Skills running as child processes behind the line protocol.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Mutex, MutexGuard};
use std::time::Duration;

use clai_core::events::{ActionSequence, TerminalState};
use clai_core::skills::{Skill, SkillError};

use crate::protocol::{decode_response, WireMessage, PROTOCOL_VERSION};

pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_millis(1000);

#[derive(Debug, thiserror::Error)]
pub enum ExternalError {
    #[error("cannot start {entry}: {source}")]
    Spawn {
        entry: PathBuf,
        source: std::io::Error,
    },
    #[error("handshake failed: {0}")]
    Handshake(String),
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl Process {
    fn spawn(entry: &Path, args: &[String]) -> Result<Self, ExternalError> {
        let mut child = Command::new(entry)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| ExternalError::Spawn {
                entry: entry.to_owned(),
                source,
            })?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines,
        })
    }

    fn send(&mut self, message: &WireMessage) -> std::io::Result<()> {
        self.stdin.write_all(message.to_line().as_bytes())?;
        self.stdin.flush()
    }

    fn handshake(&mut self, name: &str) -> Result<(), ExternalError> {
        self.send(&WireMessage::Hello {
            protocol: PROTOCOL_VERSION,
        })
        .map_err(|e| ExternalError::Handshake(format!("cannot send hello: {e}")))?;
        let line = self
            .lines
            .recv_timeout(HANDSHAKE_TIMEOUT)
            .map_err(|e| match e {
                RecvTimeoutError::Timeout => {
                    ExternalError::Handshake(format!("no reply within {HANDSHAKE_TIMEOUT:?}"))
                }
                RecvTimeoutError::Disconnected => ExternalError::Handshake("process exited".into()),
            })?;
        match WireMessage::parse(&line) {
            Ok(WireMessage::Ready { name: got }) if got == name => Ok(()),
            Ok(WireMessage::Ready { name: got }) => Err(ExternalError::Handshake(format!(
                "expected `{name}`, skill says `{got}`"
            ))),
            Ok(other) => Err(ExternalError::Handshake(format!(
                "expected ready, got {}",
                other.kind()
            ))),
            Err(e) => Err(ExternalError::Handshake(e.to_string())),
        }
    }

    fn start(name: &str, entry: &Path, args: &[String]) -> Result<Self, ExternalError> {
        let mut p = Self::spawn(entry, args)?;
        if let Err(e) = p.handshake(name) {
            p.kill();
            return Err(e);
        }
        Ok(p)
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Process {
    fn drop(&mut self) {
        self.kill();
    }
}

enum Exchange {
    Reply(String),
    TimedOut,
    Crashed(String),
}

/// A child-process skill. Restarted once per session after a crash; a
/// second crash leaves it dead until it is activated again.
pub struct ExternalSkill {
    name: String,
    entry: PathBuf,
    args: Vec<String>,
    timeout: Duration,
    process: Mutex<Option<Process>>,
    restarted: AtomicBool,
    dead: AtomicBool,
}

impl std::fmt::Debug for ExternalSkill {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalSkill")
            .field("name", &self.name)
            .field("entry", &self.entry)
            .finish()
    }
}

impl ExternalSkill {
    /// Starts the process and waits for its handshake.
    pub fn start(
        name: &str,
        entry: &Path,
        args: &[String],
        timeout: Duration,
    ) -> Result<Self, ExternalError> {
        let process = Process::start(name, entry, args)?;
        Ok(Self {
            name: name.to_string(),
            entry: entry.to_owned(),
            args: args.to_vec(),
            timeout,
            process: Mutex::new(Some(process)),
            restarted: AtomicBool::new(false),
            dead: AtomicBool::new(false),
        })
    }

    /// True once the skill has crashed after its one restart.
    pub fn is_dead(&self) -> bool {
        self.dead.load(Ordering::SeqCst)
    }

    pub fn has_restarted(&self) -> bool {
        self.restarted.load(Ordering::SeqCst)
    }

    fn lock(&self) -> MutexGuard<'_, Option<Process>> {
        self.process.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn exchange(&self, p: &mut Process, event: &WireMessage) -> Exchange {
        // Replies to events that already timed out must not be taken for
        // the answer to this one.
        while p.lines.try_recv().is_ok() {}
        if let Err(e) = p.send(event) {
            return Exchange::Crashed(format!("write failed: {e}"));
        }
        match p.lines.recv_timeout(self.timeout) {
            Ok(line) => Exchange::Reply(line),
            Err(RecvTimeoutError::Timeout) => Exchange::TimedOut,
            Err(RecvTimeoutError::Disconnected) => Exchange::Crashed("process exited".into()),
        }
    }
}

impl Skill for ExternalSkill {
    fn name(&self) -> &str {
        &self.name
    }

    fn on_event(&self, state: &TerminalState) -> Result<Option<ActionSequence>, SkillError> {
        let event = WireMessage::Event {
            state: state.clone(),
        };
        let mut guard = self.lock();
        loop {
            if self.is_dead() {
                return Err(SkillError(format!("{} is no longer running", self.name)));
            }
            let Some(p) = guard.as_mut() else {
                return Err(SkillError(format!("{} is not running", self.name)));
            };
            let reason = match self.exchange(p, &event) {
                Exchange::Reply(line) => {
                    let message =
                        WireMessage::parse(&line).map_err(|e| SkillError(e.to_string()))?;
                    return decode_response(&self.name, message)
                        .map_err(|e| SkillError(e.to_string()));
                }
                Exchange::TimedOut => {
                    return Err(SkillError(format!("no reply within {:?}", self.timeout)))
                }
                Exchange::Crashed(reason) => reason,
            };
            *guard = None;
            if self.restarted.swap(true, Ordering::SeqCst) {
                self.dead.store(true, Ordering::SeqCst);
                return Err(SkillError(format!(
                    "{} crashed again ({reason})",
                    self.name
                )));
            }
            log::warn!("skill {} crashed ({reason}); restarting", self.name);
            match Process::start(&self.name, &self.entry, &self.args) {
                Ok(fresh) => *guard = Some(fresh),
                Err(e) => {
                    self.dead.store(true, Ordering::SeqCst);
                    return Err(SkillError(format!(
                        "{} could not be restarted: {e}",
                        self.name
                    )));
                }
            }
        }
    }
}

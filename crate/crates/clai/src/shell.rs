//! Running commands through the platform shell.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};
use std::time::Instant;

/// Exit code reported when the shell itself cannot be started.
pub const SPAWN_FAILURE_EXIT: i32 = 127;

pub const SHELL: &str = "/bin/sh";

/// Full-screen programs that need the real terminal; they run attached to
/// it and their output is not captured.
pub const TERMINAL_PROGRAMS: [&str; 12] = [
    "vi", "vim", "nvim", "nano", "emacs", "less", "more", "man", "top", "htop", "ssh", "tmux",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionOutcome {
    pub executed_command: String,
    pub exit_code: i32,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub wall_ms: u64,
}

/// Where a child's output goes besides the capture buffer.
pub type Sink = Arc<Mutex<dyn Write + Send>>;

pub fn sink<W: Write + Send + 'static>(w: W) -> Sink {
    Arc::new(Mutex::new(w))
}

/// Shell state the wrapper itself must own: the working directory and
/// exported variables survive from one command to the next.
#[derive(Clone)]
pub struct Shell {
    pub cwd: PathBuf,
    pub env: BTreeMap<String, String>,
    pub stdout: Sink,
    pub stderr: Sink,
    /// Whether children read the wrapper's stdin. Off for batch use.
    pub inherit_stdin: bool,
    /// Whether terminal programs may take over the terminal.
    pub attach_terminal_programs: bool,
    /// The platform shell, run as `<program> -c <command>`.
    pub program: PathBuf,
    previous_dir: Option<PathBuf>,
}

/// Result of a wrapper builtin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Builtin {
    Ran(ExecutionOutcome),
    Exit(i32),
}

fn has_shell_syntax(command: &str) -> bool {
    command.contains([
        ';', '&', '|', '<', '>', '`', '$', '(', ')', '\'', '"', '\\', '*', '?', '\n', '#',
    ])
}

impl Shell {
    pub fn new(cwd: PathBuf, stdout: Sink, stderr: Sink) -> Self {
        Self {
            cwd,
            env: BTreeMap::new(),
            stdout,
            stderr,
            inherit_stdin: false,
            attach_terminal_programs: false,
            program: PathBuf::from(SHELL),
            previous_dir: None,
        }
    }

    /// Output goes to the process's own stdout and stderr.
    pub fn interactive(cwd: PathBuf) -> Self {
        let mut shell = Self::new(cwd, sink(std::io::stdout()), sink(std::io::stderr()));
        shell.inherit_stdin = true;
        shell.attach_terminal_programs = true;
        shell
    }

    /// Handles `cd`, `export` and `exit` when they are the whole command.
    /// Anything more complex (`cd x && make`) goes to the shell, where it
    /// cannot affect the wrapper.
    pub fn builtin(&mut self, command: &str) -> Option<Builtin> {
        let trimmed = command.trim();
        let mut words = trimmed.split_whitespace();
        let first = words.next()?;
        if !matches!(first, "cd" | "export" | "exit") || has_shell_syntax(trimmed) {
            return None;
        }
        let args: Vec<&str> = words.collect();
        let start = Instant::now();
        let (code, stderr) = match first {
            "exit" => {
                let code = match args.first() {
                    None => 0,
                    Some(a) => match a.parse::<i32>() {
                        Ok(c) => c,
                        Err(_) => {
                            return Some(self.finish(
                                command,
                                2,
                                format!("exit: {a}: numeric argument required\n"),
                                start,
                            ))
                        }
                    },
                };
                return Some(Builtin::Exit(code));
            }
            "cd" => self.cd(args.first().copied()),
            _ => self.export(&args),
        };
        Some(self.finish(command, code, stderr, start))
    }

    fn finish(&self, command: &str, code: i32, stderr: String, start: Instant) -> Builtin {
        if !stderr.is_empty() {
            let mut sink = self.stderr.lock().unwrap_or_else(|p| p.into_inner());
            let _ = sink.write_all(stderr.as_bytes());
            let _ = sink.flush();
        }
        Builtin::Ran(ExecutionOutcome {
            executed_command: command.to_string(),
            exit_code: code,
            stdout: Vec::new(),
            stderr: stderr.into_bytes(),
            wall_ms: start.elapsed().as_millis() as u64,
        })
    }

    fn home(&self) -> Option<PathBuf> {
        self.env
            .get("HOME")
            .cloned()
            .or_else(|| std::env::var("HOME").ok())
            .map(PathBuf::from)
    }

    fn cd(&mut self, arg: Option<&str>) -> (i32, String) {
        let target = match arg {
            None | Some("~") => match self.home() {
                Some(home) => home,
                None => return (1, "cd: HOME not set\n".into()),
            },
            Some(dir) if dir.starts_with("~/") => match self.home() {
                Some(home) => home.join(&dir[2..]),
                None => return (1, "cd: HOME not set\n".into()),
            },
            Some("-") => match &self.previous_dir {
                Some(p) => p.clone(),
                None => return (1, "cd: OLDPWD not set\n".into()),
            },
            Some(dir) => self.cwd.join(dir),
        };
        match target.canonicalize() {
            Ok(p) if p.is_dir() => {
                self.previous_dir = Some(std::mem::replace(&mut self.cwd, p));
                (0, String::new())
            }
            Ok(_) => (
                1,
                format!("cd: {}: Not a directory\n", arg.unwrap_or_default()),
            ),
            Err(_) => (
                1,
                format!(
                    "cd: {}: No such file or directory\n",
                    arg.unwrap_or_default()
                ),
            ),
        }
    }

    fn export(&mut self, args: &[&str]) -> (i32, String) {
        let mut errors = String::new();
        for arg in args {
            let (name, value) = match arg.split_once('=') {
                Some((n, v)) => (n, Some(v)),
                None => (*arg, None),
            };
            let valid = !name.is_empty()
                && !name.starts_with(|c: char| c.is_ascii_digit())
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid {
                errors.push_str(&format!("export: `{arg}': not a valid identifier\n"));
                continue;
            }
            match value {
                Some(v) => {
                    self.env.insert(name.to_string(), v.to_string());
                }
                None => {
                    if let Ok(v) = std::env::var(name) {
                        self.env.entry(name.to_string()).or_insert(v);
                    }
                }
            }
        }
        (i32::from(!errors.is_empty()), errors)
    }

    fn wants_terminal(&self, command: &str) -> bool {
        self.attach_terminal_programs
            && command
                .split_whitespace()
                .next()
                .is_some_and(|w| TERMINAL_PROGRAMS.contains(&w))
    }

    /// Runs `command` with `sh -c`, streaming output to the sinks while
    /// capturing it.
    pub fn run(&self, command: &str) -> ExecutionOutcome {
        let start = Instant::now();
        let mut cmd = Command::new(&self.program);
        cmd.arg("-c")
            .arg(command)
            .current_dir(&self.cwd)
            .envs(&self.env);
        cmd.stdin(if self.inherit_stdin {
            Stdio::inherit()
        } else {
            Stdio::null()
        });
        let attached = self.wants_terminal(command);
        if attached {
            cmd.stdout(Stdio::inherit()).stderr(Stdio::inherit());
        } else {
            cmd.stdout(Stdio::piped()).stderr(Stdio::piped());
        }
        let mut child = match cmd.spawn() {
            Ok(c) => c,
            Err(e) => {
                let msg = format!("clai: cannot start {}: {e}\n", self.program.display());
                let mut sink = self.stderr.lock().unwrap_or_else(|p| p.into_inner());
                let _ = sink.write_all(msg.as_bytes());
                return ExecutionOutcome {
                    executed_command: command.to_string(),
                    exit_code: SPAWN_FAILURE_EXIT,
                    stdout: Vec::new(),
                    stderr: msg.into_bytes(),
                    wall_ms: start.elapsed().as_millis() as u64,
                };
            }
        };
        let out_pump = child
            .stdout
            .take()
            .map(|s| pump(s, Arc::clone(&self.stdout)));
        let err_pump = child
            .stderr
            .take()
            .map(|s| pump(s, Arc::clone(&self.stderr)));
        let status = child.wait();
        let stdout = out_pump
            .map(|h| h.join().unwrap_or_default())
            .unwrap_or_default();
        let stderr = err_pump
            .map(|h| h.join().unwrap_or_default())
            .unwrap_or_default();
        ExecutionOutcome {
            executed_command: command.to_string(),
            exit_code: status.map(|s| exit_code(&s)).unwrap_or(SPAWN_FAILURE_EXIT),
            stdout,
            stderr,
            wall_ms: start.elapsed().as_millis() as u64,
        }
    }

    pub fn cwd(&self) -> &Path {
        &self.cwd
    }
}

#[cfg(unix)]
fn exit_code(status: &std::process::ExitStatus) -> i32 {
    use std::os::unix::process::ExitStatusExt;
    // Same convention as the shell: 128 + signal number.
    status
        .code()
        .unwrap_or_else(|| 128 + status.signal().unwrap_or(0))
}

#[cfg(not(unix))]
fn exit_code(status: &std::process::ExitStatus) -> i32 {
    status.code().unwrap_or(1)
}

fn pump<R: Read + Send + 'static>(mut from: R, to: Sink) -> std::thread::JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut captured = Vec::new();
        let mut buf = [0u8; 8192];
        loop {
            match from.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    captured.extend_from_slice(&buf[..n]);
                    let mut sink = to.lock().unwrap_or_else(|p| p.into_inner());
                    let _ = sink.write_all(&buf[..n]);
                    let _ = sink.flush();
                }
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(_) => break,
            }
        }
        captured
    })
}

//! End-to-end latency measurement of the core paths.

use std::str::FromStr;
use std::time::{Duration, Instant};

use clai_core::events::{SkillDescriptor, DEFAULT_SKILL_TIMEOUT_MS};
use clai_core::orchestration::{Orchestrator, OrchestratorMode};
use clai_core::profile::{attribute, Attribution, LatencySample, ProfileError};
use clai_core::skills::KnownCommands;

use crate::builtins::{factory_of, register_builtins, BuiltinContext, MockSkill};
use crate::config::{fixture_dir, Config};
use crate::known::scan_env_path;
use crate::registry::{Registry, RegistryError};
use crate::session::{initial_bandit, LineOutcome, Session, SessionError, SessionIo, Storage};
use crate::shell::{sink, Shell};

pub const WARMUP_RUNS: usize = 2;
pub const MIN_RUNS: usize = 10;

/// Built-in skill activated by the `activate` scenario.
pub const ACTIVATED_SKILL: &str = "manx";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    /// `clai skills`, from session start-up to the printed list.
    CoreList,
    /// `clai activate manx`, including corpus loading and model building.
    Activate,
    /// A trivial command (`true`) through the whole pipeline with active
    /// mock skills.
    DispatchWithSkills,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Self::CoreList, Self::Activate, Self::DispatchWithSkills];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::CoreList => "core_list",
            Self::Activate => "activate",
            Self::DispatchWithSkills => "dispatch_with_skills",
        }
    }
}

impl FromStr for Scenario {
    type Err = ProfilerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| ProfilerError::UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProfilerError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("need at least {MIN_RUNS} runs, got {0}")]
    TooFewRuns(usize),
    #[error("scenario setup failed: {0}")]
    Setup(String),
    #[error(transparent)]
    Sample(#[from] ProfileError),
}

impl From<SessionError> for ProfilerError {
    fn from(e: SessionError) -> Self {
        Self::Setup(e.to_string())
    }
}

impl From<RegistryError> for ProfilerError {
    fn from(e: RegistryError) -> Self {
        Self::Setup(e.to_string())
    }
}

/// A measured scenario plus, per run, the latency of each skill that ran.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRun {
    pub sample: LatencySample,
    pub skill_timings: Vec<Vec<f64>>,
}

impl ProfileRun {
    pub fn attribution(&self) -> Attribution {
        attribute(&self.sample, &self.skill_timings)
    }
}

/// Resident set size of this process in KiB, 0 where unavailable.
pub fn rss_kib() -> u64 {
    std::fs::read_to_string("/proc/self/status")
        .ok()
        .and_then(|s| {
            s.lines()
                .find_map(|l| l.strip_prefix("VmRSS:"))
                .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
        })
        .unwrap_or(0)
}

fn mock_name(i: usize) -> String {
    format!("mock-{i}")
}

/// A session with no disk state, quiet output and `n_skills` mock skills
/// registered (and active when `activate_mocks`).
fn quiet_session(
    known: KnownCommands,
    n_skills: usize,
    compute: Duration,
    activate_mocks: bool,
) -> Result<Session, ProfilerError> {
    let config = Config {
        active_skills: Vec::new(),
        ..Config::default()
    };
    let fixtures = fixture_dir();
    let ctx = std::sync::Arc::new(BuiltinContext::new(
        known,
        fixtures.join("man"),
        fixtures.join("qa.jsonl"),
        None,
    ));
    let mut registry = Registry::new();
    register_builtins(&mut registry, ctx, config.skill_timeout_ms)?;
    // Mock skills must be allowed to finish their compute.
    let timeout = DEFAULT_SKILL_TIMEOUT_MS.max(compute.as_millis() as u64 + 500);
    for i in 0..n_skills {
        let mock = MockSkill::new(mock_name(i), compute);
        registry.register(
            SkillDescriptor::in_process(mock_name(i)).with_timeout(timeout),
            factory_of(mock),
        )?;
        if activate_mocks {
            registry.activate(&mock_name(i))?;
        }
    }
    let bandit = initial_bandit(&registry.names(), None, config.bandit_alpha, None)?;
    let orchestrator = Orchestrator::new(OrchestratorMode::Max, config.threshold, bandit);
    let cwd = std::env::current_dir().unwrap_or_else(|_| std::env::temp_dir());
    let shell = Shell::new(cwd, sink(std::io::sink()), sink(std::io::sink()));
    let io = SessionIo::new(std::io::empty(), std::io::sink());
    Ok(Session::new(
        config,
        registry,
        orchestrator,
        shell,
        io,
        Storage::default(),
    ))
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

/// Runs `scenario` `runs` times after [`WARMUP_RUNS`] discarded runs.
/// `compute` is how long each mock skill works per event.
pub fn time_scenario(
    scenario: Scenario,
    n_skills: usize,
    runs: usize,
    compute: Duration,
) -> Result<ProfileRun, ProfilerError> {
    if runs < MIN_RUNS {
        return Err(ProfilerError::TooFewRuns(runs));
    }
    let mut wall = Vec::with_capacity(runs);
    let mut timings = Vec::with_capacity(runs);
    for i in 0..WARMUP_RUNS + runs {
        let (elapsed, skills) = match scenario {
            Scenario::CoreList => {
                let start = Instant::now();
                let mut session = quiet_session(scan_env_path(), n_skills, compute, false)?;
                let out = session.handle_line("clai skills");
                let elapsed = start.elapsed();
                if !matches!(out, LineOutcome::Message(_)) {
                    return Err(ProfilerError::Setup(format!("`clai skills` gave {out:?}")));
                }
                (elapsed, Vec::new())
            }
            Scenario::Activate => {
                let mut session = quiet_session(scan_env_path(), n_skills, compute, true)?;
                let start = Instant::now();
                let out = session.handle_line(&format!("clai activate {ACTIVATED_SKILL}"));
                let elapsed = start.elapsed();
                if session.registry.is_active(ACTIVATED_SKILL) != Some(true) {
                    return Err(ProfilerError::Setup(format!("activation failed: {out:?}")));
                }
                (elapsed, Vec::new())
            }
            Scenario::DispatchWithSkills => {
                let mut session = quiet_session(KnownCommands::default(), n_skills, compute, true)?;
                let start = Instant::now();
                let out = session.handle_line("true");
                let elapsed = start.elapsed();
                let LineOutcome::Ran(p) = out else {
                    return Err(ProfilerError::Setup(format!("`true` gave {out:?}")));
                };
                // Skills of one phase overlap; the phases follow each other.
                let phase_max = |rs: &[clai_core::SkillResponse]| {
                    rs.iter().map(|r| r.latency_ms as f64).fold(0.0, f64::max)
                };
                let skills = if n_skills == 0 {
                    Vec::new()
                } else {
                    vec![phase_max(&p.pre_responses) + phase_max(&p.post_responses)]
                };
                (elapsed, skills)
            }
        };
        if i >= WARMUP_RUNS {
            wall.push(ms(elapsed));
            timings.push(skills);
        }
    }
    let sample = LatencySample::new(scenario.as_str(), n_skills, wall, rss_kib())?;
    Ok(ProfileRun {
        sample,
        skill_timings: timings,
    })
}

mod common;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use clai::builtins::factory_of;
use clai::journal::read_journal;
use clai::registry::SkillFactory;
use clai_core::events::{
    Action, ActionSequence, Phase, SkillDescriptor, TerminalState, UserResponse,
};
use clai_core::orchestration::{replay, OrchestratorMode};
use clai_core::skills::{Skill, SkillError};
use common::harness;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Answers with a confidence derived from the input, so decisions vary from
/// command to command but never between runs.
#[derive(Clone)]
struct Hashed(&'static str);

impl Skill for Hashed {
    fn name(&self) -> &str {
        self.0
    }

    fn on_event(&self, state: &TerminalState) -> Result<Option<ActionSequence>, SkillError> {
        let mut h = DefaultHasher::new();
        (
            self.0,
            &state.user_input,
            state.phase == Phase::PreExecution,
        )
            .hash(&mut h);
        let v = h.finish();
        if v.is_multiple_of(5) {
            return Ok(None);
        }
        let confidence = (v % 1000) as f64 / 1000.0;
        let command = format!("echo {} {}", self.0, v % 3);
        Ok(Some(ActionSequence::single(
            Action::suggest(self.0, command).with_confidence(confidence),
        )))
    }
}

fn skills() -> Vec<(SkillDescriptor, SkillFactory)> {
    ["fixit", "manx", "nlc2cmd"]
        .into_iter()
        .map(|n| (SkillDescriptor::in_process(n), factory_of(Hashed(n))))
        .collect()
}

fn answers(seed: u64, n: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for _ in 0..n {
        match rng.gen_range(0..5) {
            0 => out.push_str("e\n"),
            1 | 2 => out.push_str("y\n"),
            _ => out.push_str("n\n"),
        }
    }
    out
}

/// Runs a session, then replays its journal from the session's starting
/// orchestrator.
fn run(mode: OrchestratorMode, seed: u64, switch: Option<(usize, &str)>) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("journal.jsonl");
    let mut h = harness(skills(), mode, &answers(seed, 400), dir.path(), Some(&path));
    let start = h.session.orchestrator.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5);
    for i in 0..120 {
        if let Some((at, to)) = switch {
            if i == at {
                h.session.handle_line(&format!("clai orchestrate {to}"));
            }
        }
        let line = match rng.gen_range(0..4) {
            0 => format!("echo fixit {}", i % 3),
            1 => "clai manx list files".to_string(),
            _ => format!("echo line {i}"),
        };
        h.session.handle_line(&line);
    }
    h.session.close();
    let live = h.session.orchestrator.clone();
    drop(h);

    let events = read_journal(&path).unwrap();
    let decided = events.iter().filter(|e| e.decision.is_some()).count();
    assert!(decided >= 120, "only {decided} decisions journaled");
    for r in [
        UserResponse::Accepted,
        UserResponse::Rejected,
        UserResponse::Explained,
        UserResponse::Ignored,
    ] {
        assert!(
            events.iter().any(|e| e.user_response == r),
            "no {r:?} in the journal"
        );
    }

    let mut replayed = start;
    let decisions = replay(&mut replayed, &events);
    assert_eq!(decisions.len(), decided);
    let mismatches: Vec<_> = decisions.iter().filter(|d| !d.matches()).collect();
    assert!(mismatches.is_empty(), "{mismatches:?}");
    replayed.mode = live.mode;
    assert_eq!(replayed, live);
}

#[test]
fn bandit_session_replays_exactly() {
    for seed in 0..3 {
        run(OrchestratorMode::Bandit, seed, None);
    }
}

#[test]
fn threshold_session_replays_exactly() {
    for seed in 0..3 {
        run(OrchestratorMode::Threshold, seed, None);
    }
}

#[test]
fn mode_switches_replay_exactly() {
    run(OrchestratorMode::Threshold, 11, Some((40, "bandit")));
    run(OrchestratorMode::Bandit, 12, Some((60, "threshold")));
}

//! Parallel fan-out of one event to the active skills.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clai_core::events::{SkillResponse, TerminalState, MIN_SKILL_TIMEOUT_MS};
use clai_core::skills::Skill;

/// A skill ready to receive events.
#[derive(Clone)]
pub struct ActiveSkill {
    pub name: String,
    pub skill: Arc<dyn Skill>,
    pub timeout_ms: u64,
}

impl std::fmt::Debug for ActiveSkill {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ActiveSkill")
            .field("name", &self.name)
            .field("timeout_ms", &self.timeout_ms)
            .finish()
    }
}

fn millis(d: Duration) -> u64 {
    d.as_millis().try_into().unwrap_or(u64::MAX)
}

/// Sends `state` to every skill at once and collects one response per
/// skill, in the order given.
///
/// Each skill runs on its own detached thread. A skill that panics, errors,
/// or has not answered by `min(its timeout, deadline_ms)` gets a failed
/// response; a late thread is left to finish on its own and its answer is
/// dropped.
pub fn dispatch(
    state: &TerminalState,
    skills: &[ActiveSkill],
    deadline_ms: u64,
) -> Vec<SkillResponse> {
    if skills.is_empty() {
        return Vec::new();
    }
    let deadline_ms = deadline_ms.max(MIN_SKILL_TIMEOUT_MS);
    let start = Instant::now();
    let state = Arc::new(state.clone());
    let (tx, rx) = mpsc::channel();
    for (idx, active) in skills.iter().enumerate() {
        let tx = tx.clone();
        let state = Arc::clone(&state);
        let skill = Arc::clone(&active.skill);
        let name = active.name.clone();
        let spawned = std::thread::Builder::new()
            .name(format!("skill-{name}"))
            .spawn(move || {
                let began = Instant::now();
                let result = catch_unwind(AssertUnwindSafe(|| skill.on_event(&state)));
                let _ = tx.send((idx, result, millis(began.elapsed())));
            });
        if let Err(e) = spawned {
            log::warn!("cannot start a worker for {name}: {e}");
        }
    }
    drop(tx);

    let limits: Vec<u64> = skills
        .iter()
        .map(|s| s.timeout_ms.min(deadline_ms))
        .collect();
    let mut out: Vec<Option<SkillResponse>> = vec![None; skills.len()];
    let mut pending = skills.len();
    while pending > 0 {
        let elapsed = millis(start.elapsed());
        // Time out everything whose limit has passed.
        for (idx, slot) in out.iter_mut().enumerate() {
            if slot.is_none() && elapsed >= limits[idx] {
                log::info!(
                    "skill {} timed out after {} ms",
                    skills[idx].name,
                    limits[idx]
                );
                *slot = Some(SkillResponse::failed(skills[idx].name.clone(), limits[idx]));
                pending -= 1;
            }
        }
        if pending == 0 {
            break;
        }
        let next = (0..skills.len())
            .filter(|&i| out[i].is_none())
            .map(|i| limits[i])
            .min()
            .unwrap_or(0);
        let wait = Duration::from_millis(next.saturating_sub(elapsed));
        match rx.recv_timeout(wait) {
            Ok((idx, result, latency_ms)) => {
                if out[idx].is_some() {
                    continue;
                }
                let name = skills[idx].name.clone();
                let response = match result {
                    Ok(Ok(seq)) if latency_ms <= limits[idx] => {
                        SkillResponse::answered(name, seq, latency_ms)
                    }
                    Ok(Ok(_)) => SkillResponse::failed(name, latency_ms),
                    Ok(Err(e)) => {
                        log::info!("skill {name} failed: {e}");
                        SkillResponse::failed(name, latency_ms)
                    }
                    Err(_) => {
                        log::warn!("skill {name} panicked");
                        SkillResponse::failed(name, latency_ms)
                    }
                };
                out[idx] = Some(response);
                pending -= 1;
            }
            Err(mpsc::RecvTimeoutError::Timeout) => {}
            // Every worker is gone; whatever is missing never started.
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                for (idx, slot) in out.iter_mut().enumerate() {
                    if slot.is_none() {
                        *slot = Some(SkillResponse::failed(
                            skills[idx].name.clone(),
                            millis(start.elapsed()),
                        ));
                    }
                }
                pending = 0;
            }
        }
    }
    out.into_iter()
        .map(|r| r.expect("every slot is filled"))
        .collect()
}

/// Global deadline for a set of skills: the largest of their timeouts.
pub fn deadline_for(skills: &[ActiveSkill]) -> u64 {
    skills
        .iter()
        .map(|s| s.timeout_ms)
        .max()
        .unwrap_or(MIN_SKILL_TIMEOUT_MS)
}

//! Exit criteria of the wrapper, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so every criterion is reported even when
//! an earlier one fails. The process exits non-zero if any criterion fails.

mod common;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};
use std::io::Cursor;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clai::builtins::{factory_of, register_builtins, BuiltinContext};
use clai::config::{fixture_dir, Config};
use clai::ingest::{ingest_man_pages, ingest_qa};
use clai::journal::read_journal;
use clai::known::scan_env_path;
use clai::profiler::{time_scenario, Scenario};
use clai::registry::{Registry, SkillFactory};
use clai::session::{initial_bandit, LineOutcome, Session, SessionIo, Storage};
use clai_core::events::{
    Action, ActionSequence, DecisionRecord, FeedbackEvent, Phase, SkillDescriptor, SkillResponse,
    TerminalState, UserResponse, NOOP,
};
use clai_core::orchestration::{
    max_select, preference_select, replay, threshold_update, warm_start, BanditState, Orchestrator,
    OrchestratorMode, PreferenceOrder, ThresholdParams, WarmStartProfile, DEFAULT_ALPHA, NOOP_ARM,
};
use clai_core::retrieval::{tokenize, Corpus, TfIdfModel};
use clai_core::skills::{FixIt, FixRules, KnownCommands, Skill, SkillError};
use common::{harness, shell_in};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORE_LATENCY_P50_MS: f64 = 100.0;
const CORE_LATENCY_RUNS: usize = 20;
const ACTIVATION_P50_MS: f64 = 1000.0;
const FAN_OUT_COMPUTE_MS: u64 = 300;
const FAN_OUT_KS: [usize; 4] = [1, 2, 4, 8];
const FAN_OUT_WINDOW_MS: (f64, f64) = (300.0, 450.0);
const FAN_OUT_MAX_GROWTH: f64 = 0.5;
const ATTRIBUTION_COMPUTE_MS: u64 = 1600;
const ATTRIBUTION_TARGET: f64 = 0.80;
const ATTRIBUTION_TOLERANCE: f64 = 0.05;
const GOLDEN_COMMANDS: usize = 30;
const PURITY_BUDGET: Duration = Duration::from_secs(30);
const TFIDF_MAX_DOCS: usize = 10;
const TFIDF_TOLERANCE: f64 = 1e-9;
const TFIDF_BUDGET: Duration = Duration::from_secs(5);
const NLC2CMD_CONFIDENCE: f64 = 0.9;
const FIXIT_DISTANCE_TWO: f64 = 0.6;
const FIXIT_LISTED_TYPO: f64 = 0.8;
const ORCHESTRATOR_CASES: u32 = 10_000;
const EMPTY_PREFERENCE_SETS: usize = 100;
const BANDIT_ROUNDS: usize = 200;
const BANDIT_WINDOW: usize = 50;
const BANDIT_MIN_RATE: f64 = 0.9;
const BANDIT_BUDGET: Duration = Duration::from_secs(10);
const WARM_START_CONTEXTS: usize = 100;
const BANDIT_UPDATES: usize = 50;
const THETA_TOLERANCE: f64 = 1e-9;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Latency.

fn core_latency() -> Verdict {
    let run = time_scenario(Scenario::CoreList, 0, CORE_LATENCY_RUNS, Duration::ZERO)
        .map_err(|e| e.to_string())?;
    let p = run.sample.p50();
    check(p <= CORE_LATENCY_P50_MS, format!("`clai skills` p50 {p:.2} ms over {CORE_LATENCY_RUNS} runs (limit {CORE_LATENCY_P50_MS} ms)"))
}

fn activation_latency() -> Verdict {
    let run = time_scenario(Scenario::Activate, 0, CORE_LATENCY_RUNS, Duration::ZERO)
        .map_err(|e| e.to_string())?;
    let p = run.sample.p50();
    check(
        p <= ACTIVATION_P50_MS,
        format!("activating manx p50 {p:.2} ms (limit {ACTIVATION_P50_MS} ms)"),
    )
}

fn fan_out() -> Verdict {
    let mut p50s = Vec::new();
    for k in FAN_OUT_KS {
        let run = time_scenario(
            Scenario::DispatchWithSkills,
            k,
            CORE_LATENCY_RUNS,
            Duration::from_millis(FAN_OUT_COMPUTE_MS),
        )
        .map_err(|e| e.to_string())?;
        p50s.push(run.sample.p50());
    }
    let in_window = p50s
        .iter()
        .all(|p| (FAN_OUT_WINDOW_MS.0..=FAN_OUT_WINDOW_MS.1).contains(p));
    let growth = p50s[p50s.len() - 1] / p50s[0] - 1.0;
    let shown: Vec<String> = FAN_OUT_KS
        .iter()
        .zip(&p50s)
        .map(|(k, p)| format!("k={k}: {p:.1}"))
        .collect();
    check(
        in_window && growth < FAN_OUT_MAX_GROWTH,
        format!(
            "p50 ms {} (window {:?}); growth k=1..8 {:.1}% (limit {}%)",
            shown.join(", "),
            FAN_OUT_WINDOW_MS,
            growth * 100.0,
            FAN_OUT_MAX_GROWTH * 100.0
        ),
    )
}

fn attribution() -> Verdict {
    let run = time_scenario(
        Scenario::DispatchWithSkills,
        1,
        10,
        Duration::from_millis(ATTRIBUTION_COMPUTE_MS),
    )
    .map_err(|e| e.to_string())?;
    let a = run.attribution();
    check(
        (a.skill_fraction - ATTRIBUTION_TARGET).abs() <= ATTRIBUTION_TOLERANCE,
        format!(
            "skill fraction {:.3} (skill {:.1} ms of {:.1} ms; target {ATTRIBUTION_TARGET} +/- {ATTRIBUTION_TOLERANCE})",
            a.skill_fraction, a.skill_ms, a.total_ms
        ),
    )
}

// Pass-through.

fn builtin_session(dir: &Path) -> (Session, common::SharedBuf, common::SharedBuf) {
    let fixtures = fixture_dir();
    let ctx = BuiltinContext::new(
        scan_env_path(),
        fixtures.join("man"),
        fixtures.join("qa.jsonl"),
        None,
    );
    let mut registry = Registry::new();
    register_builtins(&mut registry, Arc::new(ctx), 1000).unwrap();
    for name in registry.names() {
        registry.activate(&name).unwrap();
    }
    let config = Config {
        active_skills: registry.names(),
        ..Config::default()
    };
    let bandit = initial_bandit(&registry.names(), None, config.bandit_alpha, None).unwrap();
    let orchestrator = Orchestrator::new(OrchestratorMode::Max, config.threshold, bandit);
    let (shell, out, err) = shell_in(dir);
    let io = SessionIo::new(Cursor::new(Vec::new()), std::io::sink());
    (
        Session::new(
            config,
            registry,
            orchestrator,
            shell,
            io,
            Storage::default(),
        ),
        out,
        err,
    )
}

fn pass_through_purity() -> Verdict {
    let start = Instant::now();
    let golden = std::fs::read_to_string(fixture_dir().join("golden_commands.txt"))
        .map_err(|e| e.to_string())?;
    let commands: Vec<&str> = golden.lines().filter(|l| !l.trim().is_empty()).collect();
    if commands.len() != GOLDEN_COMMANDS {
        return Err(format!(
            "golden corpus has {} commands, expected {GOLDEN_COMMANDS}",
            commands.len()
        ));
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (mut session, out, err) = builtin_session(dir.path());
    let mut diffs = Vec::new();
    for cmd in &commands {
        out.clear();
        err.clear();
        let LineOutcome::Ran(p) = session.handle_line(cmd) else {
            diffs.push(format!("`{cmd}` did not run"));
            continue;
        };
        let exec = p.execution().ok_or("no execution")?;
        let plain = Command::new("/bin/sh")
            .arg("-c")
            .arg(cmd)
            .current_dir(dir.path())
            .stdin(Stdio::null())
            .output()
            .map_err(|e| e.to_string())?;
        let same = exec.executed_command == *cmd
            && p.executions.len() == 1
            && out.bytes() == plain.stdout
            && err.bytes() == plain.stderr
            && exec.stdout == plain.stdout
            && exec.exit_code == plain.status.code().unwrap_or(-1)
            && exec.stderr == plain.stderr;
        if !same {
            diffs.push(format!("`{cmd}`"));
        }
    }
    let elapsed = start.elapsed();
    check(
        diffs.is_empty() && elapsed < PURITY_BUDGET,
        format!(
            "{} of {} commands identical to /bin/sh in {:.1} s (limit {} s){}",
            commands.len() - diffs.len(),
            commands.len(),
            elapsed.as_secs_f64(),
            PURITY_BUDGET.as_secs(),
            if diffs.is_empty() {
                String::new()
            } else {
                format!("; differ: {}", diffs.join(", "))
            }
        ),
    )
}

// Retrieval.

/// Dense weights computed term by term from the definitions.
fn tfidf_oracle(bodies: &[&str]) -> BTreeMap<String, Vec<f64>> {
    let tokens: Vec<Vec<String>> = bodies.iter().map(|b| tokenize(b)).collect();
    let vocab: BTreeSet<&String> = tokens.iter().flatten().collect();
    let n = bodies.len() as f64;
    let mut weights: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for term in vocab {
        let df = tokens.iter().filter(|t| t.contains(term)).count() as f64;
        let idf = ((1.0 + n) / (1.0 + df)).ln() + 1.0;
        let column = tokens
            .iter()
            .map(|t| match t.iter().filter(|x| *x == term).count() {
                0 => 0.0,
                c => (1.0 + (c as f64).ln()) * idf,
            })
            .collect();
        weights.insert(term.clone(), column);
    }
    for d in 0..bodies.len() {
        let norm = weights.values().map(|c| c[d] * c[d]).sum::<f64>().sqrt();
        if norm > 0.0 {
            weights.values_mut().for_each(|c| c[d] /= norm);
        }
    }
    weights
}

fn bundled_small_corpora() -> Result<Vec<(String, Corpus)>, String> {
    let mut out = Vec::new();
    let dir = fixture_dir().join("corpora");
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|e| e.to_string())?
        .flatten()
        .map(|e| e.path())
        .collect();
    paths.sort();
    for path in paths {
        let (corpus, _) = ingest_qa(&path).map_err(|e| e.to_string())?;
        out.push((
            path.file_name().unwrap().to_string_lossy().into_owned(),
            corpus,
        ));
    }
    out.push((
        "toy_man".into(),
        ingest_man_pages(&fixture_dir().join("toy_man")).map_err(|e| e.to_string())?,
    ));
    Ok(out
        .into_iter()
        .filter(|(_, c)| c.len() <= TFIDF_MAX_DOCS)
        .collect())
}

fn tfidf_oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let corpora = bundled_small_corpora()?;
    let mut worst = 0.0f64;
    let mut cells = 0usize;
    for (name, corpus) in &corpora {
        let model = TfIdfModel::build(corpus).map_err(|e| e.to_string())?;
        let bodies: Vec<&str> = corpus.docs().iter().map(|d| d.body.as_str()).collect();
        let want = tfidf_oracle(&bodies);
        if model.vocabulary().keys().ne(want.keys()) {
            return Err(format!("{name}: vocabulary differs from the oracle"));
        }
        for (term, column) in &want {
            for (d, w) in column.iter().enumerate() {
                worst = worst.max((model.weight(d, term) - w).abs());
                cells += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        corpora.len() >= 6 && worst <= TFIDF_TOLERANCE && elapsed < TFIDF_BUDGET,
        format!("{} corpora, {cells} weights, max error {worst:.2e} (limit {TFIDF_TOLERANCE:e}) in {:.2} s", corpora.len(), elapsed.as_secs_f64()),
    )
}

fn retrieval_behavior() -> Verdict {
    let fixtures = fixture_dir();
    let man = ingest_man_pages(&fixtures.join("man")).map_err(|e| e.to_string())?;
    if man.len() != 50 {
        return Err(format!("man fixture has {} pages", man.len()));
    }
    let ctx = BuiltinContext::new(
        scan_env_path(),
        fixtures.join("man"),
        fixtures.join("qa.jsonl"),
        None,
    );
    let mut registry = Registry::new();
    register_builtins(&mut registry, Arc::new(ctx), 1000).map_err(|e| e.to_string())?;
    registry.activate("manx").map_err(|e| e.to_string())?;
    registry.activate("nlc2cmd").map_err(|e| e.to_string())?;

    let query = "search for a pattern in files";
    let model = TfIdfModel::build(&man).map_err(|e| e.to_string())?;
    let top = model
        .rank(query, 1)
        .into_iter()
        .next()
        .map(|(id, _)| id)
        .unwrap_or_default();
    let manx = registry.active_skill("manx").ok_or("manx inactive")?;
    let state = TerminalState::new(
        "s",
        1,
        format!("clai manx {query}"),
        "/",
        Phase::PreExecution,
    );
    let described = manx
        .skill
        .on_event(&state)
        .map_err(|e| e.0)?
        .and_then(|s| s.first().description.clone())
        .unwrap_or_default();

    let request = "how do I extract file.tar.bz2";
    let nlc = registry.active_skill("nlc2cmd").ok_or("nlc2cmd inactive")?;
    let state = TerminalState::new("s", 2, request, "/", Phase::PreExecution);
    let action = nlc
        .skill
        .on_event(&state)
        .map_err(|e| e.0)?
        .map(|s| s.first().clone());
    let (command, confidence) = action
        .map(|a| (a.suggested_command.unwrap_or_default(), a.confidence))
        .unwrap_or_default();

    check(
        top == "grep"
            && described.starts_with("command: grep ")
            && command == "tar -xjf file.tar.bz2"
            && confidence == NLC2CMD_CONFIDENCE,
        format!("`{query}` ranks {top} first; `{request}` gives `{command}` at {confidence}"),
    )
}

// fixit.

fn one_edit(w: &str, alphabet: &BTreeSet<char>) -> BTreeSet<String> {
    let chars: Vec<char> = w.chars().collect();
    let mut out = BTreeSet::new();
    for i in 0..=chars.len() {
        for &c in alphabet {
            let mut v = chars.clone();
            v.insert(i, c);
            out.insert(v.into_iter().collect());
        }
        if i < chars.len() {
            let mut v = chars.clone();
            v.remove(i);
            out.insert(v.iter().collect());
            for &c in alphabet {
                let mut v = chars.clone();
                v[i] = c;
                out.insert(v.into_iter().collect());
            }
        }
    }
    out.remove(w);
    out
}

/// Edit distance from `word` to `target` when at most 2, by enumeration.
fn enumerated_distance(word: &str, target: &str) -> Option<usize> {
    let alphabet: BTreeSet<char> = word.chars().chain(target.chars()).collect();
    let d1 = one_edit(word, &alphabet);
    if d1.contains(target) {
        return Some(1);
    }
    d1.iter()
        .any(|w| one_edit(w, &alphabet).contains(target))
        .then_some(2)
}

fn fixit() -> Verdict {
    let known = Arc::new(KnownCommands::new([
        "git", "ls", "grep", "cat", "tar", "make",
    ]));
    let f = FixIt::new(known, FixRules::default());
    let fix = |input: &str| {
        f.suggest(
            &TerminalState::new("s", 1, input, "/", Phase::PreExecution),
            &KnownCommands::default(),
        )
        .map(|s| {
            (
                s.first().suggested_command.clone().unwrap_or_default(),
                s.confidence(),
            )
        })
    };
    let gti = fix("gti status");
    let sl = fix("sl -la");
    let d_gti = enumerated_distance("gti", "git");
    let d_sl = enumerated_distance("sl", "ls");
    check(
        gti == Some(("git status".into(), FIXIT_DISTANCE_TWO))
            && d_gti == Some(2)
            && sl == Some(("ls -la".into(), FIXIT_LISTED_TYPO))
            && d_sl == Some(2),
        format!("gti status -> {gti:?} (oracle distance {d_gti:?}); sl -la -> {sl:?} (oracle distance {d_sl:?}, listed typo)"),
    )
}

// Orchestrators.

const POOL: [&str; 6] = ["fixit", "helpme", "howdoi", "manx", "nlc2cmd", "zeta"];

fn response(skill: &str, kind: u8, twentieths: u8) -> SkillResponse {
    match kind {
        0 => SkillResponse::answered(skill, None, 1),
        1 => SkillResponse::failed(skill, 1),
        _ => {
            let seq = ActionSequence::single(
                Action::suggest(skill, "true").with_confidence(f64::from(twentieths) / 20.0),
            );
            SkillResponse::answered(skill, Some(seq), 1)
        }
    }
}

fn responses() -> impl Strategy<Value = Vec<SkillResponse>> {
    (
        proptest::sample::subsequence(POOL.to_vec(), 0..=POOL.len()),
        proptest::collection::vec((0u8..8, 0u8..=20), POOL.len()),
    )
        .prop_flat_map(|(skills, answers)| {
            let rs: Vec<SkillResponse> = skills
                .iter()
                .zip(&answers)
                .map(|(s, (k, c))| response(s, *k, *c))
                .collect();
            Just(rs).prop_shuffle()
        })
}

fn max_oracle(rs: &[SkillResponse], threshold: f64) -> String {
    let mut cands: Vec<&SkillResponse> = rs.iter().filter(|r| r.is_candidate()).collect();
    cands.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.skill.cmp(&b.skill))
    });
    match cands.first() {
        Some(r) if r.confidence >= threshold => r.skill.clone(),
        _ => NOOP.to_string(),
    }
}

fn runner() -> TestRunner {
    TestRunner::new(RunnerConfig {
        cases: ORCHESTRATOR_CASES,
        failure_persistence: None,
        ..RunnerConfig::default()
    })
}

fn orchestrator_contracts() -> Verdict {
    let twentieths = (0u8..=20).prop_map(|t| f64::from(t) / 20.0);

    runner()
        .run(&(responses(), twentieths.clone()), |(rs, t)| {
            prop_assert_eq!(
                max_select(&rs, t).chosen_skill().to_string(),
                max_oracle(&rs, t)
            );
            Ok(())
        })
        .map_err(|e| format!("max: {e}"))?;

    let params = ThresholdParams::default();
    runner()
        .run(
            &(
                responses(),
                twentieths.clone(),
                proptest::collection::vec(0u8..4, 0..30),
            ),
            |(rs, start, history)| {
                let bandit = BanditState::new(&POOL, DEFAULT_ALPHA).unwrap();
                let mut o = Orchestrator::new(
                    OrchestratorMode::Threshold,
                    start.clamp(params.min, params.max),
                    bandit,
                );
                for r in history {
                    let response = [
                        UserResponse::Accepted,
                        UserResponse::Rejected,
                        UserResponse::Explained,
                        UserResponse::Ignored,
                    ][r as usize];
                    let before = o.threshold;
                    o.threshold = threshold_update(
                        o.threshold,
                        &FeedbackEvent::new(0, "fixit", response),
                        &params,
                    );
                    let want = match response {
                        UserResponse::Accepted => (before - params.step).max(params.min),
                        UserResponse::Rejected => (before + params.step).min(params.max),
                        _ => before,
                    };
                    prop_assert!((o.threshold - want).abs() < 1e-12);
                }
                prop_assert_eq!(
                    o.decide(&rs, false).chosen_skill().to_string(),
                    max_oracle(&rs, o.threshold)
                );
                Ok(())
            },
        )
        .map_err(|e| format!("threshold: {e}"))?;

    let order = (
        Just(POOL.to_vec()).prop_shuffle(),
        proptest::collection::vec((0usize..6, 0usize..6), 0..8),
    )
        .prop_map(|(perm, edges)| {
            edges
                .into_iter()
                .filter(|(a, b)| a < b)
                .map(|(a, b)| (perm[a].to_string(), perm[b].to_string()))
                .collect::<Vec<_>>()
        });
    runner()
        .run(&(responses(), order, twentieths), |(rs, pairs, t)| {
            let order = PreferenceOrder::new(pairs).unwrap();
            let above: Vec<SkillResponse> = rs
                .iter()
                .filter(|r| r.is_candidate() && r.confidence >= t)
                .cloned()
                .collect();
            let undominated: Vec<SkillResponse> = above
                .iter()
                .filter(|r| !above.iter().any(|o| order.prefers(&o.skill, &r.skill)))
                .cloned()
                .collect();
            prop_assert_eq!(
                preference_select(&rs, &order, t).chosen_skill().to_string(),
                max_oracle(&undominated, t)
            );
            Ok(())
        })
        .map_err(|e| format!("preference: {e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let empty = PreferenceOrder::empty();
    for _ in 0..EMPTY_PREFERENCE_SETS {
        let n = rng.gen_range(0..=POOL.len());
        let rs: Vec<SkillResponse> = POOL[..n]
            .iter()
            .map(|s| response(s, rng.gen_range(0..8), rng.gen_range(0..=20)))
            .collect();
        let t = f64::from(rng.gen_range(0u8..=20)) / 20.0;
        if preference_select(&rs, &empty, t).chosen != max_select(&rs, t).chosen {
            return Err(format!(
                "empty preference differs from max on {rs:?} at {t}"
            ));
        }
    }
    Ok(format!("max, threshold and preference hold on {ORCHESTRATOR_CASES} cases each; empty order equals max on {EMPTY_PREFERENCE_SETS} sets"))
}

// Bandit.

const SKILLS: [&str; 4] = ["fixit", "manx", "nlc2cmd", "howdoi"];

fn suggest(skill: &str, confidence: f64) -> SkillResponse {
    let seq = ActionSequence::single(
        Action::suggest(skill, format!("{skill}-cmd")).with_confidence(confidence),
    );
    SkillResponse::answered(skill, Some(seq), 1)
}

fn simulate(seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bandit = warm_start(
        &WarmStartProfile::MaxOrchestrator,
        &SKILLS[..3],
        3,
        DEFAULT_ALPHA,
    )
    .unwrap();
    let mut o = Orchestrator::new(OrchestratorMode::Bandit, 0.0, bandit);
    let mut picks = Vec::with_capacity(BANDIT_ROUNDS);
    for i in 0..BANDIT_ROUNDS {
        let rs: Vec<SkillResponse> = SKILLS[..3]
            .iter()
            .map(|s| suggest(s, rng.gen_range(0.05..1.0)))
            .collect();
        let skill = o.decide(&rs, false).chosen_skill().to_string();
        if skill != NOOP {
            let rec = DecisionRecord::from_responses(o.mode, Phase::PreExecution, false, &rs);
            let response = if skill == "fixit" {
                UserResponse::Accepted
            } else {
                UserResponse::Rejected
            };
            o.learn(
                o.mode,
                &rec,
                &FeedbackEvent::new(i as u64, skill.clone(), response).with_decision(rec.clone()),
            );
        }
        picks.push(skill);
    }
    picks
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

fn warm_start_holds(
    profile: &WarmStartProfile,
    seed: u64,
    expected: impl Fn(&[f64]) -> String,
) -> Result<(), String> {
    let state =
        warm_start(profile, &SKILLS, SKILLS.len(), DEFAULT_ALPHA).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..WARM_START_CONTEXTS {
        let x: Vec<f64> = (0..SKILLS.len())
            .map(|_| rng.gen_range(0.01..1.0))
            .collect();
        let arm = state.select(&x).map_err(|e| e.to_string())?;
        let got = if arm == NOOP_ARM {
            NOOP.to_string()
        } else {
            state.skill_of(arm).unwrap_or(NOOP).to_string()
        };
        if got != expected(&x) {
            return Err(format!(
                "{profile:?} on {x:?}: picked {got}, expected {}",
                expected(&x)
            ));
        }
    }
    Ok(())
}

fn bandit_convergence() -> Verdict {
    let start = Instant::now();
    let picks = simulate(2024);
    let rate = picks[BANDIT_ROUNDS - BANDIT_WINDOW..]
        .iter()
        .filter(|s| *s == "fixit")
        .count() as f64
        / BANDIT_WINDOW as f64;
    let elapsed = start.elapsed();
    let deterministic = picks == simulate(2024);

    warm_start_holds(&WarmStartProfile::IgnoreClai, 1, |_| NOOP.to_string())?;
    warm_start_holds(&WarmStartProfile::MaxOrchestrator, 2, |x| {
        SKILLS[argmax(x)].to_string()
    })?;
    warm_start_holds(
        &WarmStartProfile::IgnoreSkill {
            skills: vec!["nlc2cmd".into()],
        },
        3,
        |x| {
            let mut m = x.to_vec();
            m[2] = f64::NEG_INFINITY;
            SKILLS[argmax(&m)].to_string()
        },
    )?;
    warm_start_holds(
        &WarmStartProfile::PreferSkill {
            prefer: "manx".into(),
            over: "nlc2cmd".into(),
        },
        4,
        |x| {
            let mut m = x.to_vec();
            m[2] *= 0.5;
            SKILLS[argmax(&m)].to_string()
        },
    )?;

    check(
        rate >= BANDIT_MIN_RATE && elapsed < BANDIT_BUDGET && deterministic,
        format!(
            "accepted skill chosen {:.0}% of the last {BANDIT_WINDOW} rounds (limit {:.0}%) in {:.2} s; 4 warm-start profiles hold on {WARM_START_CONTEXTS} contexts each",
            rate * 100.0,
            BANDIT_MIN_RATE * 100.0,
            elapsed.as_secs_f64()
        ),
    )
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn bandit_numerics() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut bandit = BanditState::new(&SKILLS, DEFAULT_ALPHA).map_err(|e| e.to_string())?;
    let (d, arms) = (bandit.dimension(), bandit.arm_count());
    let mut a: Vec<Vec<Vec<f64>>> = vec![
        (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        arms
    ];
    let mut b = vec![vec![0.0; d]; arms];
    for _ in 0..BANDIT_UPDATES {
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let arm = rng.gen_range(0..arms);
        let r: f64 = rng.gen_range(0.0..=1.0);
        bandit.update(&x, arm, r).map_err(|e| e.to_string())?;
        for i in 0..d {
            for j in 0..d {
                a[arm][i][j] += x[i] * x[j];
            }
            b[arm][i] += r * x[i];
        }
    }
    let mut worst = 0.0f64;
    for arm in 0..arms {
        let want = gauss_solve(a[arm].clone(), b[arm].clone());
        let got = bandit.theta(arm).map_err(|e| e.to_string())?;
        worst = got
            .iter()
            .zip(&want)
            .map(|(g, w)| (g - w).abs())
            .fold(worst, f64::max);
    }
    check(worst <= THETA_TOLERANCE, format!("{arms} arms after {BANDIT_UPDATES} updates, max theta error {worst:.2e} (limit {THETA_TOLERANCE:e})"))
}

// Journal.

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
        let action = Action::suggest(self.0, format!("echo {} {}", self.0, v % 3))
            .with_confidence((v % 1000) as f64 / 1000.0);
        Ok(Some(ActionSequence::single(action)))
    }
}

fn journal_determinism() -> Verdict {
    let mut total = 0;
    for (mode, seed) in [
        (OrchestratorMode::Bandit, 1u64),
        (OrchestratorMode::Threshold, 2),
    ] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("journal.jsonl");
        let skills: Vec<(SkillDescriptor, SkillFactory)> = ["fixit", "manx", "nlc2cmd"]
            .into_iter()
            .map(|n| (SkillDescriptor::in_process(n), factory_of(Hashed(n))))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let answers: String = (0..300)
            .map(|_| ["y\n", "n\n", "e\n", "y\n", "n\n"][rng.gen_range(0..5)])
            .collect();
        let mut h = harness(skills, mode, &answers, dir.path(), Some(&path));
        let start = h.session.orchestrator.clone();
        let mut live = Vec::new();
        for i in 0..100 {
            let line = if rng.gen_bool(0.3) {
                format!("echo fixit {}", i % 3)
            } else {
                format!("echo line {i}")
            };
            if let LineOutcome::Ran(p) = h.session.handle_line(&line) {
                live.push(p);
            }
        }
        h.session.close();
        let end = h.session.orchestrator.clone();
        drop(h);
        let events = read_journal(&path).map_err(|e| e.to_string())?;
        let mut replayed = start;
        let decisions = replay(&mut replayed, &events);
        if let Some(bad) = decisions.iter().find(|d| !d.matches()) {
            return Err(format!(
                "{mode:?}: command {} recorded {} but replayed {}",
                bad.command_id, bad.recorded, bad.replayed
            ));
        }
        if decisions.len() != events.iter().filter(|e| e.decision.is_some()).count()
            || decisions.len() < live.len()
        {
            return Err(format!(
                "{mode:?}: {} decisions replayed for {} commands",
                decisions.len(),
                live.len()
            ));
        }
        if replayed != end {
            return Err(format!(
                "{mode:?}: replayed orchestrator state differs from the live one"
            ));
        }
        total += decisions.len();
    }
    Ok(format!(
        "{total} journaled decisions reproduced exactly in bandit and threshold sessions"
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("core latency", core_latency),
        ("activation latency", activation_latency),
        ("parallel fan-out", fan_out),
        ("attribution", attribution),
        ("pass-through purity", pass_through_purity),
        ("tf-idf oracle equivalence", tfidf_oracle_equivalence),
        ("retrieval behavior", retrieval_behavior),
        ("fixit", fixit),
        ("orchestrator contracts", orchestrator_contracts),
        ("bandit convergence", bandit_convergence),
        ("bandit numerics", bandit_numerics),
        ("journal determinism", journal_determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, criterion) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let verdict = catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match verdict {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

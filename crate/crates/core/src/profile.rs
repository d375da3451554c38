//! Latency bookkeeping: percentiles, skill-time attribution and the CSV
//! report. Measurement itself lives in the std crate.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

pub const CSV_HEADER: &str = "scenario,n_skills,p50_ms,p95_ms,rss_kib";

/// Allowed excess of skill time over wall time, from clock granularity.
pub const ATTRIBUTION_SLACK: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProfileError {
    #[error("sample has no measurements")]
    NoRuns,
    #[error("negative or non-finite measurement {0}")]
    BadMeasurement(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub scenario: String,
    pub n_skills: usize,
    pub wall_ms: Vec<f64>,
    pub rss_kib: u64,
}

impl LatencySample {
    pub fn new(
        scenario: impl Into<String>,
        n_skills: usize,
        wall_ms: Vec<f64>,
        rss_kib: u64,
    ) -> Result<Self, ProfileError> {
        if wall_ms.is_empty() {
            return Err(ProfileError::NoRuns);
        }
        if let Some(bad) = wall_ms.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(ProfileError::BadMeasurement(format!("{bad}")));
        }
        Ok(Self {
            scenario: scenario.into(),
            n_skills,
            wall_ms,
            rss_kib,
        })
    }

    pub fn p50(&self) -> f64 {
        percentile(&self.wall_ms, 50.0)
    }

    pub fn p95(&self) -> f64 {
        percentile(&self.wall_ms, 95.0)
    }
}

/// Nearest-rank percentile. `values` must be non-empty.
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of nothing");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = libm::ceil(pct / 100.0 * sorted.len() as f64) as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub total_ms: f64,
    pub skill_ms: f64,
    pub skill_fraction: f64,
    pub overhead_fraction: f64,
}

/// Splits wall time into skill time and platform overhead.
///
/// `skill_timings[i]` holds the per-skill latencies of run `i`. Skills run
/// in parallel, so a run's skill time is its slowest skill, not the sum.
pub fn attribute(sample: &LatencySample, skill_timings: &[Vec<f64>]) -> Attribution {
    let total_ms: f64 = sample.wall_ms.iter().sum();
    let skill_ms: f64 = skill_timings
        .iter()
        .take(sample.wall_ms.len())
        .map(|run| run.iter().copied().fold(0.0, f64::max))
        .sum();
    let skill_fraction = if total_ms > 0.0 {
        skill_ms / total_ms
    } else {
        0.0
    };
    Attribution {
        total_ms,
        skill_ms,
        skill_fraction,
        overhead_fraction: (1.0 - skill_fraction).max(0.0),
    }
}

/// CSV with one row per sample, ordered by scenario then skill count.
pub fn emit_csv(samples: &[LatencySample]) -> String {
    let mut rows: Vec<&LatencySample> = samples.iter().collect();
    rows.sort_by(|a, b| {
        a.scenario
            .cmp(&b.scenario)
            .then(a.n_skills.cmp(&b.n_skills))
    });
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for s in rows {
        let _ = writeln!(
            out,
            "{},{},{:.3},{:.3},{}",
            s.scenario,
            s.n_skills,
            s.p50(),
            s.p95(),
            s.rss_kib
        );
    }
    out
}

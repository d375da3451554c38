use std::path::PathBuf;
use std::time::Duration;

use clai::profiler::{time_scenario, Scenario};
use clai_core::profile::emit_csv;
use clap::Parser;

/// Measures latency of the core paths and writes a CSV report.
#[derive(Debug, Parser)]
#[command(name = "clai-profile", version)]
struct Args {
    /// core_list, activate or dispatch_with_skills.
    #[arg(long)]
    scenario: Scenario,
    /// Mock skill counts; repeat or separate with commas.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    skills: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    runs: usize,
    /// Per-event compute time of each mock skill, in milliseconds.
    #[arg(long, default_value_t = 300)]
    compute_ms: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let mut samples = Vec::new();
    for n in &args.skills {
        let run = time_scenario(
            args.scenario,
            *n,
            args.runs,
            Duration::from_millis(args.compute_ms),
        )?;
        let a = run.attribution();
        eprintln!(
            "{} n={} p50={:.1} ms p95={:.1} ms skill share {:.2}",
            args.scenario.as_str(),
            n,
            run.sample.p50(),
            run.sample.p95(),
            a.skill_fraction
        );
        samples.push(run.sample);
    }
    let csv = emit_csv(&samples);
    match args.csv {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clai::config::{default_config_path, Config};
use clai::journal::read_journal;
use clai::known::scan_env_path;
use clai::session::{initial_bandit, LineOutcome, Session, SessionIo, StdinLines};
use clai::Shell;
use clai_core::orchestration::{replay, Orchestrator};
use clap::Parser;

/// A shell wrapper that lets assistant skills see, fix and explain commands.
#[derive(Debug, Parser)]
#[command(name = "clai", version)]
struct Args {
    /// Run one line and exit.
    #[arg(short = 'c', long = "command")]
    command: Option<String>,
    /// Configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the journal, bandit state and model cache.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Keep nothing on disk.
    #[arg(long)]
    ephemeral: bool,
    /// Replay the feedback journal and report whether every recorded
    /// decision is reproduced.
    #[arg(long)]
    replay: bool,
}

fn run_replay(config: &Config) -> anyhow::Result<ExitCode> {
    let events = read_journal(&config.journal_path())?;
    let mut names: Vec<String> = clai::config::BUILTIN_SKILLS
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend(config.external_skills.iter().map(|e| e.name.clone()));
    let bandit = initial_bandit(
        &names,
        config.warm_start_profile()?.as_ref(),
        config.bandit_alpha,
        None,
    )?;
    let mut orchestrator = Orchestrator::new(config.mode()?, config.threshold, bandit)
        .with_preferences(config.preference_order()?);
    let replayed = replay(&mut orchestrator, &events);
    let mismatches: Vec<_> = replayed.iter().filter(|r| !r.matches()).collect();
    println!(
        "{} decisions replayed, {} differ",
        replayed.len(),
        mismatches.len()
    );
    for m in &mismatches {
        println!(
            "command {}: recorded {}, replayed {}",
            m.command_id, m.recorded, m.replayed
        );
    }
    Ok(if mismatches.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> anyhow::Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let config_path = args.config.clone().unwrap_or_else(default_config_path);
    let mut config = Config::load_or_default(&config_path)?;
    if let Some(dir) = args.data_dir {
        config.data_dir = Some(dir);
    }
    if args.replay {
        return run_replay(&config);
    }
    let cwd = std::env::current_dir()?;
    let shell = Shell::interactive(cwd);
    let interactive = args.command.is_none();
    let io = SessionIo::new(StdinLines, std::io::stderr());
    let persist = !args.ephemeral;
    let mut session = Session::from_config(
        config,
        persist.then_some(config_path),
        scan_env_path(),
        shell,
        io,
        persist,
    )?;

    if let Some(line) = args.command {
        let code = match session.handle_line(&line) {
            LineOutcome::Ran(p) => p
                .exit
                .or_else(|| p.execution().map(|e| e.exit_code))
                .unwrap_or(0),
            LineOutcome::Message(_) | LineOutcome::Empty => 0,
        };
        session.close();
        return Ok(ExitCode::from(code.clamp(0, 255) as u8));
    }

    let stdin = std::io::stdin();
    let mut code = 0;
    loop {
        if interactive {
            eprint!("clai {}$ ", session.shell.cwd.display());
            let _ = std::io::stderr().flush();
        }
        let mut line = String::new();
        if stdin.read_line(&mut line)? == 0 {
            break;
        }
        if let LineOutcome::Ran(p) = session.handle_line(&line) {
            if let Some(c) = p.exit {
                code = c;
                break;
            }
            if let Some(e) = p.execution() {
                code = e.exit_code;
            }
        }
    }
    session.close();
    Ok(ExitCode::from(code.clamp(0, 255) as u8))
}

//! `dataset validate | filter | synth`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use searchsim::session::io::{load_dataset, render_issue_report, save_dataset};
use searchsim::session::filter_sessions;
use searchsim::synth::synth_dataset;

use crate::config::RunConfig;

pub fn validate(sessions: &Path, tasks: Option<&Path>) -> Result<()> {
    let loaded = load_dataset(sessions, tasks)?;
    if loaded.issues.is_empty() {
        println!("ok: {} sessions, {} tasks, no parse errors", loaded.dataset.sessions.len(), loaded.dataset.tasks.len());
        return Ok(());
    }
    println!("{}", render_issue_report(&loaded.issues));
    bail!("{} parse errors in {}", loaded.issues.len(), sessions.display());
}

pub fn filter(sessions: &Path, tasks: Option<&Path>, exclude: &[String], out_dir: &Path) -> Result<()> {
    let loaded = load_dataset(sessions, tasks)?;
    if !loaded.issues.is_empty() {
        println!("{}", render_issue_report(&loaded.issues));
        bail!("refusing to filter a dataset with {} parse errors", loaded.issues.len());
    }
    let excluded: BTreeSet<String> = exclude.iter().cloned().collect();
    let (filtered, summary) = filter_sessions(&loaded.dataset, &excluded);

    std::fs::create_dir_all(out_dir)?;
    save_dataset(&out_dir.join("sessions.jsonl"), &out_dir.join("tasks.jsonl"), &filtered)?;
    std::fs::write(out_dir.join("filter_summary.txt"), format!("{summary}\n"))?;
    println!("{summary}");
    println!("wrote {}", out_dir.join("sessions.jsonl").display());
    Ok(())
}

pub fn synth(config_path: &Path, seed_override: Option<u64>, out_dir: &Path) -> Result<()> {
    let (config, _dir) = RunConfig::load(config_path)?;
    let section = config.synth.as_ref().context("config is missing the [synth] section")?;
    let seed = seed_override.unwrap_or_else(|| config.run.seeds.first().copied().unwrap_or(7));
    let dataset = synth_dataset(&section.to_spec(), seed)?;

    std::fs::create_dir_all(out_dir)?;
    save_dataset(&out_dir.join("sessions.jsonl"), &out_dir.join("tasks.jsonl"), &dataset)?;
    println!(
        "wrote {} sessions over {} tasks (seed {seed}) to {}",
        dataset.sessions.len(),
        dataset.tasks.len(),
        out_dir.display()
    );
    Ok(())
}

/// Resolves the output directory shared by several commands.
pub fn out_dir(cli_out: Option<&Path>, config_out: Option<&PathBuf>, default: &str) -> PathBuf {
    cli_out
        .map(Path::to_owned)
        .or_else(|| config_out.cloned())
        .unwrap_or_else(|| PathBuf::from(default))
}

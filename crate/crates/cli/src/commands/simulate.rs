//! `simulate`: run the agent once per (task, seed), replaying the first
//! logged session of each task as the SERP source, and write per-session
//! transcripts plus a run summary.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};
use searchsim::agent::{Agent, replay_serp_provider};
use searchsim::session::StopKind;
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
struct SequenceRecord {
    task_id: String,
    seed: u64,
    rounds: usize,
    stop: Option<String>,
    error: Option<String>,
    queries: Vec<String>,
    clicks: Vec<Vec<usize>>,
    llm_calls: usize,
    step_units: usize,
}

pub fn run(
    config_path: &Path,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
    backend_override: Option<crate::config::BackendKind>,
) -> Result<()> {
    let (mut config, config_dir) = RunConfig::load(config_path)?;
    if let Some(kind) = backend_override {
        config.backend.kind = kind;
    }
    let (dataset, _path) = config.load_dataset(&config_dir)?;
    let agent_cfg = config.agent.build(&config_dir)?;
    let out_dir = super::dataset::out_dir(out_override, config.run.out_dir.as_ref(), "out");
    std::fs::create_dir_all(&out_dir)?;

    let seeds: Vec<u64> = seed_override.map(|s| vec![s]).unwrap_or_else(|| config.run.seeds.clone());

    let mut sequences = Vec::new();
    let mut summary = String::new();
    let mut total = 0usize;
    let mut failures = 0usize;
    let (mut natural, mut capped) = (0usize, 0usize);

    for &seed in &seeds {
        // One client per seed: a list-mode mock is consumed across the
        // seed's tasks in dataset order.
        let client = config
            .backend
            .client(&config_dir)?
            .with_transcript(&out_dir.join(format!("llm_transcript_seed{seed}.jsonl")))?;
        let agent = Agent::new(&agent_cfg, &client);

        for task in &dataset.tasks {
            let Some(session) = dataset.sessions_for_task(&task.id).next() else { continue };
            total += 1;
            let mut provider = replay_serp_provider(session);
            let run = agent.run_session(task, &mut provider);

            let transcript_path = out_dir.join(format!("session_{}_seed{}.jsonl", task.id, seed));
            let lines: Vec<String> =
                run.transcript.iter().map(|r| serde_json::to_string(r).expect("step records serialize")).collect();
            std::fs::write(&transcript_path, lines.join("\n") + "\n")?;

            if run.error.is_some() {
                failures += 1;
            }
            match run.sequence.stop_kind() {
                Some(StopKind::Natural) => natural += 1,
                Some(StopKind::Cap) => capped += 1,
                None => {}
            }
            let record = SequenceRecord {
                task_id: task.id.clone(),
                seed,
                rounds: run.sequence.n_rounds(),
                stop: run.sequence.stop_kind().map(|k| format!("{k:?}").to_lowercase()),
                error: run.error.as_ref().map(ToString::to_string),
                queries: run.sequence.rounds().map(|(q, _)| q.text().to_owned()).collect(),
                clicks: run.sequence.rounds().map(|(_, c)| c.iter().copied().collect()).collect(),
                llm_calls: run.stats.llm_calls,
                step_units: run.stats.step_units,
            };
            let _ = writeln!(
                summary,
                "task {} seed {}: rounds {}, stop {}, llm calls {}{}",
                record.task_id,
                seed,
                record.rounds,
                record.stop.as_deref().unwrap_or("aborted"),
                record.llm_calls,
                record.error.as_deref().map(|e| format!(", error: {e}")).unwrap_or_default()
            );
            sequences.push(record);
        }
    }

    let jsonl: Vec<String> = sequences.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
    std::fs::write(out_dir.join("sequences.jsonl"), jsonl.join("\n") + "\n")?;
    let _ = writeln!(
        summary,
        "sessions: {total}, natural stops: {natural}, cap-forced: {capped}, failures: {failures}"
    );
    std::fs::write(out_dir.join("simulate_summary.txt"), &summary)?;
    print!("{summary}");

    if total > 0 && failures == total {
        bail!("all {total} simulated sessions failed");
    }
    Ok(())
}

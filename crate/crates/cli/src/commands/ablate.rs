//! `ablate`: run the agent with and without context on the same sessions and
//! report BLEU / click F1 / stop F1 side by side.

use std::path::Path;

use anyhow::{anyhow, Result};
use searchsim::agent::AgentConfig;
use searchsim::eval::harness::{run_ablation, AblationVariant};
use searchsim::eval::kfold;

use crate::artifact::file_digest;
use crate::config::RunConfig;
use crate::report::Provenance;
use crate::CliError;

pub fn run(
    config_path: &Path,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
    backend_override: Option<crate::config::BackendKind>,
) -> Result<(), CliError> {
    let (mut config, config_dir) = RunConfig::load(config_path).map_err(CliError::usage)?;
    if let Some(kind) = backend_override {
        config.backend.kind = kind;
    }
    let inner = || -> Result<()> {
        let (dataset, sessions_path) = config.load_dataset(&config_dir)?;
        let seed = seed_override.unwrap_or_else(|| config.run.seeds.first().copied().unwrap_or(7));
        let out_dir = super::dataset::out_dir(out_override, config.run.out_dir.as_ref(), "out");
        let folds = kfold(dataset.sessions.len(), config.eval.folds.min(dataset.sessions.len()), seed)
            .map_err(|e| anyhow!("cross-validation setup failed: {e}"))?;

        let base = config.agent.build(&config_dir)?;
        let variants = vec![
            AblationVariant {
                name: "full-context".into(),
                cfg: base.clone(),
                client: config.backend.client(&config_dir)?,
            },
            AblationVariant {
                name: "no-context".into(),
                cfg: AgentConfig { ablate_context: true, ..base },
                client: config.backend.client(&config_dir)?,
            },
        ];

        let report = run_ablation(variants, &dataset, &folds, config.eval.max_n)?;

        std::fs::create_dir_all(&out_dir)?;
        let provenance = Provenance::new(file_digest(&sessions_path)?, seed, folds.k(), dataset.sessions.len());
        let mut jsonl = vec![serde_json::to_string(&provenance).unwrap()];
        jsonl.extend(report.rows.iter().map(|r| serde_json::to_string(r).unwrap()));
        std::fs::write(out_dir.join("ablation.jsonl"), jsonl.join("\n") + "\n")?;

        let text = format!(
            "context ablation (identical seeds and folds per variant)\ndataset sha256: {}\n\n{report}",
            provenance.dataset_digest
        );
        std::fs::write(out_dir.join("ablation.txt"), &text)?;
        print!("{text}");
        Ok(())
    };
    inner().map_err(CliError::Runtime)
}

//! `train`: fit one click-model family, stopping rule, or the query
//! mixture model, and persist the artifact with training metadata (and, for
//! click models, the likelihood trace).

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};
use searchsim::click::{em_fit, regression_em_fit, ClickModelKind, EmOptions};
use searchsim::querygen::{fit_weights, weight_grid, QueryLengthModel};
use searchsim::session::filter_sessions;
use searchsim::session::io::load_dataset;
use searchsim::stop::{fit_rule_params, StopRuleKind};

use crate::artifact::{file_digest, save, Metadata, TrainedArtifact};
use crate::CliError;

pub enum Family {
    Click(ClickModelKind),
    RegPbm,
    Stop(StopRuleKind),
    QueryModel,
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let canon = s.to_ascii_lowercase().replace('_', "-");
        if canon == "pbm-regression" || canon == "pbm-r" {
            return Ok(Family::RegPbm);
        }
        if canon == "query-model" || canon == "query-weights" {
            return Ok(Family::QueryModel);
        }
        if let Ok(kind) = ClickModelKind::from_str(&canon) {
            return Ok(Family::Click(kind));
        }
        if let Ok(kind) = StopRuleKind::from_str(&canon) {
            return Ok(Family::Stop(kind));
        }
        Err(format!(
            "unknown family {s:?}; expected pbm, ubm, dcm, dbn, pbm-regression, fixed-depth, frustration, satisfaction, combined, or query-model"
        ))
    }
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    family: &str,
    sessions: &Path,
    tasks: Option<&Path>,
    iters: usize,
    tol: f64,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let family = Family::from_str(family).map_err(CliError::Usage)?;

    let loaded = load_dataset(sessions, tasks).map_err(|e| CliError::Runtime(e.into()))?;
    if !loaded.issues.is_empty() {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "dataset has {} parse errors; run `searchsim dataset validate` first",
            loaded.issues.len()
        )));
    }
    // Training assumes filtered data; filtering is idempotent.
    let (dataset, _) = filter_sessions(&loaded.dataset, &BTreeSet::new());
    if dataset.sessions.is_empty() {
        return Err(CliError::Runtime(anyhow::anyhow!("no usable sessions in {}", sessions.display())));
    }
    let digest = file_digest(sessions).map_err(CliError::Runtime)?;

    let result = (|| -> Result<()> {
        let opts = EmOptions { iters, tol, reciprocal_gamma_init: false };
        let (artifact, metadata, trace) = match family {
            Family::Click(kind) => {
                let fit = em_fit(kind, &dataset.sessions, &opts)?;
                let metadata = Metadata {
                    iterations: fit.trace.len() - 1,
                    final_log_likelihood: fit.trace.last().copied(),
                    data_digest: digest.clone(),
                };
                (TrainedArtifact::Click(fit.params), metadata, Some(fit.trace))
            }
            Family::RegPbm => {
                let fit = regression_em_fit(&dataset.sessions, iters, tol)?;
                let metadata = Metadata {
                    iterations: fit.trace.len() - 1,
                    final_log_likelihood: fit.trace.last().copied(),
                    data_digest: digest.clone(),
                };
                (TrainedArtifact::RegPbm(fit.params), metadata, Some(fit.trace))
            }
            Family::Stop(kind) => {
                let rule = fit_rule_params(kind, &dataset.sessions)?;
                let metadata =
                    Metadata { iterations: 0, final_log_likelihood: None, data_digest: digest.clone() };
                (TrainedArtifact::Stop(rule), metadata, None)
            }
            Family::QueryModel => {
                let grid = weight_grid(0.1);
                let weights = fit_weights(&dataset, &grid, seed)?;
                let length = QueryLengthModel::fit(&dataset.sessions)?;
                let metadata =
                    Metadata { iterations: grid.len(), final_log_likelihood: None, data_digest: digest.clone() };
                (TrainedArtifact::QueryModel { weights, length }, metadata, None)
            }
        };

        save(out, &artifact, metadata).context("saving artifact")?;
        if let Some(trace) = trace {
            let trace_path = out.with_extension("trace.txt");
            let body: String =
                trace.iter().enumerate().map(|(i, ll)| format!("{i} {ll:.9}\n")).collect();
            std::fs::write(&trace_path, body)?;
            println!("wrote likelihood trace {}", trace_path.display());
        }
        println!("wrote {} artifact {}", artifact.family(), out.display());
        Ok(())
    })();
    result.map_err(CliError::Runtime)
}

//! `eval`: score the configured subjects (term-LM query baselines, click
//! models under k-fold cross-validation, stopping rules, and optionally the
//! LLM agent) against the logged sessions and write the report pair.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use searchsim::click::{ClickModelKind, EmOptions};
use searchsim::eval::harness::{
    eval_clicks, eval_queries, eval_stops, AgentRuns, ClickEvalReport, ClickModelSubject,
    LmQuerySubject, QueryEvalReport, QuerySubject, RegPbmSubject, RuleStopSubject, StopEvalReport,
};
use searchsim::eval::{corpus_bleu, kfold};
use searchsim::querygen::{
    fit_weights, weight_grid, LmQueryGenerator, MixtureWeights, QueryLengthModel, TermSelection,
};
use searchsim::session::{Dataset, Query};
use searchsim::stop::{fit_rule_params, StopRuleKind};

use crate::artifact::{self, Metadata, TrainedArtifact};
use crate::config::{resolve, RunConfig};
use crate::report::{write_outputs, Provenance, ReportBuilder};
use crate::CliError;

fn corpus_pairs(subject: &mut dyn QuerySubject, dataset: &Dataset) -> Vec<(Query, Query)> {
    let mut pairs = Vec::new();
    for session in &dataset.sessions {
        for (idx, round) in session.rounds.iter().enumerate() {
            if let Ok(Some(candidate)) = subject.generate(session, idx) {
                pairs.push((candidate, round.query.clone()));
            }
        }
    }
    pairs
}

struct EvalOutputs {
    queries: Vec<QueryEvalReport>,
    corpus_rows: Vec<(String, f64)>,
    clicks: Vec<ClickEvalReport>,
    stops: Vec<StopEvalReport>,
    fitted_query_model: Option<(MixtureWeights, QueryLengthModel)>,
}

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

        let folds = kfold(dataset.sessions.len(), config.eval.folds, seed).map_err(|e| {
            anyhow!("cross-validation setup failed ({} sessions, {} folds): {e}", dataset.sessions.len(), config.eval.folds)
        })?;
        let mut provenance = Provenance::new(
            artifact::file_digest(&sessions_path)?,
            seed,
            config.eval.folds,
            dataset.sessions.len(),
        );

        let mut out = EvalOutputs {
            queries: Vec::new(),
            corpus_rows: Vec::new(),
            clicks: Vec::new(),
            stops: Vec::new(),
            fitted_query_model: None,
        };

        // Mixture weights for the term-LM baselines: fixed by config or
        // fitted on the dataset (and persisted alongside the reports).
        let lm_subjects: Vec<&str> = config
            .eval
            .subjects
            .iter()
            .map(String::as_str)
            .filter(|s| matches!(*s, "random-selection" | "popular-selection"))
            .collect();
        let query_model: Option<(MixtureWeights, QueryLengthModel)> = if lm_subjects.is_empty() {
            None
        } else {
            let weights = match config.eval.query_weights {
                Some([t, ti, a, b]) => MixtureWeights::new(t, ti, a, b)?,
                None => fit_weights(&dataset, &weight_grid(config.eval.weight_grid_step), seed)?,
            };
            let length = QueryLengthModel::fit(&dataset.sessions)?;
            out.fitted_query_model = Some((weights, length));
            Some((weights, length))
        };

        let em_opts = EmOptions { iters: config.eval.em_iters, tol: config.eval.em_tol, reciprocal_gamma_init: false };

        for subject in &config.eval.subjects {
            match subject.as_str() {
                "random-selection" | "popular-selection" => {
                    let (weights, length) = query_model.expect("built above");
                    let selection = if subject == "random-selection" {
                        TermSelection::Random
                    } else {
                        TermSelection::Popular
                    };
                    let build = || -> Result<LmQueryGenerator> {
                        Ok(LmQueryGenerator::build(&dataset, &weights, selection, true, seed)?
                            .with_length_model(length))
                    };
                    let mut lm_subject = LmQuerySubject::new(subject.clone(), build()?);
                    out.queries.push(eval_queries(&mut lm_subject, &dataset, config.eval.max_n));
                    if config.eval.corpus_bleu {
                        let mut fresh = LmQuerySubject::new(subject.clone(), build()?);
                        let pairs = corpus_pairs(&mut fresh, &dataset);
                        let refs: Vec<(&Query, &Query)> = pairs.iter().map(|(c, r)| (c, r)).collect();
                        out.corpus_rows.push((subject.clone(), corpus_bleu(&refs, config.eval.max_n)));
                    }
                }
                "pbm" | "ubm" | "dcm" | "dbn" => {
                    let kind: ClickModelKind = subject.parse().expect("matched above");
                    let mut click_subject = ClickModelSubject::new(kind, em_opts);
                    out.clicks.push(eval_clicks(&mut click_subject, &dataset, &folds)?);
                }
                "pbm-regression" => {
                    let mut click_subject = RegPbmSubject::new(config.eval.em_iters, config.eval.em_tol);
                    out.clicks.push(eval_clicks(&mut click_subject, &dataset, &folds)?);
                }
                "fixed-depth" | "frustration" | "satisfaction" | "combined" => {
                    let kind: StopRuleKind = subject.parse().expect("matched above");
                    let rule = fit_rule_params(kind, &dataset.sessions)?;
                    let mut stop_subject = RuleStopSubject::new(rule);
                    out.stops.push(eval_stops(&mut stop_subject, &dataset)?);
                }
                "llm-agent" => {
                    let client = config.backend.client(&config_dir)?;
                    let agent_cfg = config.agent.build(&config_dir)?;
                    let runs = AgentRuns::collect("llm-agent", &agent_cfg, &client, &dataset);
                    out.queries.push(eval_queries(&mut runs.query_subject(), &dataset, config.eval.max_n));
                    if config.eval.corpus_bleu {
                        let pairs = corpus_pairs(&mut runs.query_subject(), &dataset);
                        let refs: Vec<(&Query, &Query)> = pairs.iter().map(|(c, r)| (c, r)).collect();
                        out.corpus_rows.push((subject.clone(), corpus_bleu(&refs, config.eval.max_n)));
                    }
                    out.clicks.push(eval_clicks(&mut runs.click_subject(), &dataset, &folds)?);
                    out.stops.push(eval_stops(&mut runs.stop_subject(), &dataset)?);
                }
                other => bail!("unknown subject {other:?} in eval.subjects"),
            }
        }

        // Pre-fitted artifacts from `train`.
        for path in &config.eval.artifacts {
            let path = resolve(&config_dir, path);
            let (loaded, _meta) = artifact::load(&path)?;
            provenance
                .artifact_digests
                .insert(path.display().to_string(), artifact::file_digest(&path)?);
            match loaded {
                TrainedArtifact::Click(params) => {
                    let mut subject = ClickModelSubject::prefitted(params);
                    let mut report = eval_clicks(&mut subject, &dataset, &folds)?;
                    report.subject = format!("{} (artifact)", report.subject);
                    out.clicks.push(report);
                }
                TrainedArtifact::RegPbm(params) => {
                    let mut subject = RegPbmSubject::prefitted(params);
                    let mut report = eval_clicks(&mut subject, &dataset, &folds)?;
                    report.subject = format!("{} (artifact)", report.subject);
                    out.clicks.push(report);
                }
                TrainedArtifact::Stop(rule) => {
                    let mut subject = RuleStopSubject::new(rule);
                    let mut report = eval_stops(&mut subject, &dataset)?;
                    report.subject = format!("{} (artifact)", report.subject);
                    out.stops.push(report);
                }
                TrainedArtifact::QueryModel { weights, length } => {
                    let generator = LmQueryGenerator::build(&dataset, &weights, TermSelection::Popular, true, seed)?
                        .with_length_model(length);
                    let mut subject = LmQuerySubject::new("popular-selection (artifact)", generator);
                    out.queries.push(eval_queries(&mut subject, &dataset, config.eval.max_n));
                }
            }
        }

        let mut builder = ReportBuilder::new(&provenance);
        if !out.queries.is_empty() {
            builder.query_section(&out.queries, &out.corpus_rows);
        }
        if !out.clicks.is_empty() {
            builder.click_section(&out.clicks);
        }
        if !out.stops.is_empty() {
            builder.stop_section(&out.stops);
        }
        builder.note("reference rows report published results for side-by-side comparison; they are never asserted.");

        let (text, jsonl) = builder.finish();
        write_outputs(&out_dir, &text, &jsonl)?;
        if let Some((weights, length)) = out.fitted_query_model {
            let meta = Metadata {
                iterations: 0,
                final_log_likelihood: None,
                data_digest: provenance.dataset_digest.clone(),
            };
            artifact::save(&out_dir.join("query_model.toml"), &TrainedArtifact::QueryModel { weights, length }, meta)
                .context("persisting fitted query model")?;
        }
        println!("{text}");
        println!("wrote {} and {}", out_dir.join("reports.txt").display(), out_dir.join("results.jsonl").display());
        Ok(())
    };
    inner().map_err(CliError::Runtime)
}

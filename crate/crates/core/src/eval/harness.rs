//! Session-level evaluation harness.
//!
//! Three behaviors are scored against logged sessions through small subject
//! traits: query generation (mean sentence BLEU per round, averaged over
//! rounds then sessions), click prediction (per-rank binary classification
//! with pooled confusion counts across folds; every SERP position of every
//! round is one instance, so a correct non-click on a skipped rank counts as
//! a true negative), and stop prediction (one decision per round boundary,
//! with the gold stop exactly at each session's final round).
//!
//! The LLM agent is evaluated by replaying each logged session's SERPs
//! through one agent run and reading all three behaviors off the result;
//! baselines plug in per behavior. Rounds or boundaries a subject cannot
//! answer (an agent that stopped earlier than the log, a failed generation)
//! are skipped and surface in the coverage statistics rather than silently
//! biasing the metrics.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::agent::{Agent, AgentConfig};
use crate::click::{predict_click_probs, ClickModelKind, ClickModelParams, EmOptions, RegPbmParams};
use crate::eval::{bleu, ConfusionCounts, EvalError, FoldAssignment, MetricReport};
use crate::llm::Client;
use crate::querygen::LmQueryGenerator;
use crate::session::{ClickSet, Dataset, Query, Session, StopKind, Task};
use crate::stop::{should_stop, SessionPrefix, StopRule};

/// Classification threshold turning click probabilities into predictions.
pub const CLICK_THRESHOLD: f64 = 0.5;

/// Scored/skipped accounting for subjects with partial coverage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Coverage {
    pub scored: usize,
    pub skipped: usize,
}

impl Coverage {
    fn score(&mut self) {
        self.scored += 1;
    }

    fn skip(&mut self) {
        self.skipped += 1;
    }
}

/// A per-round query source.
pub trait QuerySubject {
    fn name(&self) -> &str;
    /// The query this subject produces for the 0-based round of a logged
    /// session; `None` when it cannot produce one.
    fn generate(&mut self, session: &Session, round_idx: usize) -> Result<Option<Query>, String>;
}

/// A per-rank click predictor, refitted per cross-validation fold.
pub trait ClickSubject {
    fn name(&self) -> &str;
    /// (Re)fit on the training sessions. Training-free subjects ignore this.
    fn fit(&mut self, train: &[&Session]) -> Result<(), String>;
    /// One boolean per SERP rank of the round; `None` skips the round.
    fn predict_round(&mut self, session: &Session, round_idx: usize) -> Result<Option<Vec<bool>>, String>;
}

/// A stop/continue predictor over session prefixes.
pub trait StopSubject {
    fn name(&self) -> &str;
    /// One prediction per round boundary 1..=n; `None` entries are skipped.
    fn predict_stops(&mut self, session: &Session) -> Result<Vec<Option<bool>>, String>;
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryEvalReport {
    pub subject: String,
    pub mean_bleu: f64,
    /// Mean BLEU per task id.
    pub per_task: BTreeMap<String, f64>,
    pub sessions_scored: usize,
    pub rounds: Coverage,
}

/// Scores a query subject: sentence BLEU per round against the logged query
/// of the same round, averaged over rounds within a session, then over
/// sessions. Failed rounds are skipped and counted.
pub fn eval_queries(subject: &mut dyn QuerySubject, dataset: &Dataset, max_n: usize) -> QueryEvalReport {
    let mut coverage = Coverage::default();
    let mut session_means: Vec<(String, f64)> = Vec::new();
    for session in &dataset.sessions {
        let mut scores = Vec::new();
        for (idx, round) in session.rounds.iter().enumerate() {
            match subject.generate(session, idx) {
                Ok(Some(candidate)) => {
                    scores.push(bleu(&candidate, &round.query, max_n));
                    coverage.score();
                }
                Ok(None) | Err(_) => coverage.skip(),
            }
        }
        if !scores.is_empty() {
            session_means.push((session.task_id.clone(), scores.iter().sum::<f64>() / scores.len() as f64));
        }
    }

    let mut per_task_acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (task, mean) in &session_means {
        let e = per_task_acc.entry(task.clone()).or_insert((0.0, 0));
        e.0 += mean;
        e.1 += 1;
    }
    let per_task = per_task_acc.into_iter().map(|(t, (sum, n))| (t, sum / n as f64)).collect();
    let mean_bleu = if session_means.is_empty() {
        0.0
    } else {
        session_means.iter().map(|(_, m)| m).sum::<f64>() / session_means.len() as f64
    };
    QueryEvalReport {
        subject: subject.name().to_owned(),
        mean_bleu,
        per_task,
        sessions_scored: session_means.len(),
        rounds: coverage,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ClickEvalReport {
    pub subject: String,
    pub metrics: MetricReport,
    /// Confusion counts per fold; `metrics` pools them.
    pub per_fold: Vec<ConfusionCounts>,
    pub rounds: Coverage,
}

/// Cross-validated click evaluation: per fold, the subject fits on the
/// training sessions and predicts click/no-click for every SERP position of
/// every test round. Metrics are computed from pooled confusion counts.
pub fn eval_clicks(
    subject: &mut dyn ClickSubject,
    dataset: &Dataset,
    folds: &FoldAssignment,
) -> Result<ClickEvalReport, EvalError> {
    let sessions = &dataset.sessions;
    let mut per_fold = Vec::with_capacity(folds.k());
    let mut pooled = ConfusionCounts::default();
    let mut coverage = Coverage::default();

    for fold in 0..folds.k() {
        let train: Vec<&Session> = folds.train_indices(fold).into_iter().map(|i| &sessions[i]).collect();
        subject.fit(&train).map_err(|_| EvalError::Empty).ok();
        let mut counts = ConfusionCounts::default();
        for idx in folds.test_indices(fold) {
            let session = &sessions[idx];
            for (round_idx, round) in session.rounds.iter().enumerate() {
                let Some(gold_clicks) = &round.clicks else { continue };
                match subject.predict_round(session, round_idx) {
                    Ok(Some(pred)) if pred.len() == round.serp.len() => {
                        coverage.score();
                        for (i, &p) in pred.iter().enumerate() {
                            counts.add(p, gold_clicks.contains(&(i + 1)));
                        }
                    }
                    _ => coverage.skip(),
                }
            }
        }
        pooled.merge(&counts);
        per_fold.push(counts);
    }

    let metrics = MetricReport::from_counts(pooled)?;
    Ok(ClickEvalReport { subject: subject.name().to_owned(), metrics, per_fold, rounds: coverage })
}

#[derive(Debug, Clone, Serialize)]
pub struct StopEvalReport {
    pub subject: String,
    pub metrics: MetricReport,
    pub boundaries: Coverage,
}

/// Stop-prediction evaluation: at every round boundary the subject predicts
/// stop/continue given the prefix; the gold label is stop exactly at the
/// final logged round.
pub fn eval_stops(subject: &mut dyn StopSubject, dataset: &Dataset) -> Result<StopEvalReport, EvalError> {
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    let mut coverage = Coverage::default();
    for session in &dataset.sessions {
        let n = session.rounds.len();
        let decisions = subject.predict_stops(session).unwrap_or_else(|_| vec![None; n]);
        for t in 1..=n {
            match decisions.get(t - 1).copied().flatten() {
                Some(p) => {
                    pred.push(p);
                    gold.push(t == n);
                    coverage.score();
                }
                None => coverage.skip(),
            }
        }
    }
    let metrics = MetricReport::from_counts({
        let mut c = ConfusionCounts::default();
        for (&p, &g) in pred.iter().zip(&gold) {
            c.add(p, g);
        }
        c
    })?;
    Ok(StopEvalReport { subject: subject.name().to_owned(), metrics, boundaries: coverage })
}

// ---------------------------------------------------------------------------
// Baseline adapters
// ---------------------------------------------------------------------------

/// Term-LM query baseline as a subject.
pub struct LmQuerySubject {
    name: String,
    generator: LmQueryGenerator,
}

impl LmQuerySubject {
    pub fn new(name: impl Into<String>, generator: LmQueryGenerator) -> Self {
        Self { name: name.into(), generator }
    }
}

impl QuerySubject for LmQuerySubject {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&mut self, session: &Session, _round_idx: usize) -> Result<Option<Query>, String> {
        self.generator.generate(&session.task_id).map(Some).map_err(|e| e.to_string())
    }
}

/// A classical click-model family as a subject: EM-fitted per fold,
/// thresholded predictions conditioned on the logged clicks above each rank.
pub struct ClickModelSubject {
    kind: ClickModelKind,
    opts: EmOptions,
    threshold: f64,
    refit: bool,
    params: Option<ClickModelParams>,
}

impl ClickModelSubject {
    pub fn new(kind: ClickModelKind, opts: EmOptions) -> Self {
        Self { kind, opts, threshold: CLICK_THRESHOLD, refit: true, params: None }
    }

    /// Subject around already-fitted parameters (per-fold fitting disabled).
    pub fn prefitted(params: ClickModelParams) -> Self {
        Self {
            kind: params.kind(),
            opts: EmOptions::default(),
            threshold: CLICK_THRESHOLD,
            refit: false,
            params: Some(params),
        }
    }
}

impl ClickSubject for ClickModelSubject {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn fit(&mut self, train: &[&Session]) -> Result<(), String> {
        if !self.refit {
            return Ok(());
        }
        let owned: Vec<Session> = train.iter().map(|s| (*s).clone()).collect();
        let fit = crate::click::em_fit(self.kind, &owned, &self.opts).map_err(|e| e.to_string())?;
        self.params = Some(fit.params);
        Ok(())
    }

    fn predict_round(&mut self, session: &Session, round_idx: usize) -> Result<Option<Vec<bool>>, String> {
        let Some(params) = &self.params else { return Ok(None) };
        let round = &session.rounds[round_idx];
        let history = round.clicks_or_empty();
        let probs = predict_click_probs(params, &round.query, &round.serp, Some(&history));
        Ok(Some(probs.into_iter().map(|p| p >= self.threshold).collect()))
    }
}

/// The regression-EM PBM as a click subject.
pub struct RegPbmSubject {
    iters: usize,
    tol: f64,
    threshold: f64,
    refit: bool,
    params: Option<RegPbmParams>,
}

impl RegPbmSubject {
    pub fn new(iters: usize, tol: f64) -> Self {
        Self { iters, tol, threshold: CLICK_THRESHOLD, refit: true, params: None }
    }

    pub fn prefitted(params: RegPbmParams) -> Self {
        Self { iters: 0, tol: 0.0, threshold: CLICK_THRESHOLD, refit: false, params: Some(params) }
    }
}

impl ClickSubject for RegPbmSubject {
    fn name(&self) -> &str {
        "pbm-regression"
    }

    fn fit(&mut self, train: &[&Session]) -> Result<(), String> {
        if !self.refit {
            return Ok(());
        }
        let owned: Vec<Session> = train.iter().map(|s| (*s).clone()).collect();
        let fit = crate::click::regression_em_fit(&owned, self.iters, self.tol).map_err(|e| e.to_string())?;
        self.params = Some(fit.params);
        Ok(())
    }

    fn predict_round(&mut self, session: &Session, round_idx: usize) -> Result<Option<Vec<bool>>, String> {
        let Some(params) = &self.params else { return Ok(None) };
        let round = &session.rounds[round_idx];
        let probs = params.predict(&round.query, &round.serp);
        Ok(Some(probs.into_iter().map(|p| p >= self.threshold).collect()))
    }
}

/// A (fitted) stopping rule as a subject.
pub struct RuleStopSubject {
    rule: StopRule,
}

impl RuleStopSubject {
    pub fn new(rule: StopRule) -> Self {
        Self { rule }
    }
}

impl StopSubject for RuleStopSubject {
    fn name(&self) -> &str {
        self.rule.kind().name()
    }

    fn predict_stops(&mut self, session: &Session) -> Result<Vec<Option<bool>>, String> {
        Ok((1..=session.rounds.len())
            .map(|t| Some(should_stop(&self.rule, &SessionPrefix::from_rounds(&session.rounds[..t]))))
            .collect())
    }
}

// ---------------------------------------------------------------------------
// Agent adapters
// ---------------------------------------------------------------------------

/// One agent run per logged session, replayed against that session's SERPs,
/// with the three behaviors read off the run and aligned to logged rounds.
#[derive(Debug, Clone, Serialize)]
pub struct AgentSessionRecord {
    /// Generated query text per logged round index; None past the agent's stop.
    pub queries: Vec<Option<String>>,
    /// Agent click set per logged round index.
    pub clicks: Vec<Option<ClickSet>>,
    /// Stop prediction per boundary; the boundary where a cap fired is
    /// skipped (no decision was actually made there).
    pub stops: Vec<Option<bool>>,
    pub stop_kind: Option<String>,
    pub error: Option<String>,
    pub llm_calls: usize,
}

#[derive(Debug)]
pub struct AgentRuns {
    name: String,
    index: BTreeMap<(String, String, usize), usize>,
    records: Vec<AgentSessionRecord>,
    parsed_queries: Vec<Vec<Option<Query>>>,
}

impl AgentRuns {
    /// Runs the agent over every session of the dataset. Backend errors on a
    /// session are recorded, not fatal; affected rounds count as skipped.
    pub fn collect(name: impl Into<String>, cfg: &AgentConfig, client: &Client, dataset: &Dataset) -> Self {
        let agent = Agent::new(cfg, client);
        let mut index = BTreeMap::new();
        let mut records = Vec::new();
        let mut parsed_queries = Vec::new();
        for session in &dataset.sessions {
            let task = dataset
                .task(&session.task_id)
                .cloned()
                .unwrap_or_else(|| Task::new(session.task_id.clone(), format!("task {}", session.task_id)).unwrap());
            let mut provider = crate::agent::replay_serp_provider(session);
            let run = agent.run_session(&task, &mut provider);

            let n = session.rounds.len();
            let agent_rounds: Vec<(&Query, &ClickSet)> = run.sequence.rounds().collect();
            let k = agent_rounds.len();

            let mut queries: Vec<Option<Query>> = vec![None; n];
            let mut clicks: Vec<Option<ClickSet>> = vec![None; n];
            for t in 0..n.min(k) {
                queries[t] = Some(agent_rounds[t].0.clone());
                clicks[t] = Some(agent_rounds[t].1.clone());
            }

            let mut stops: Vec<Option<bool>> = vec![None; n];
            if run.error.is_none() {
                match run.sequence.stop_kind() {
                    Some(StopKind::Natural) => {
                        // Boundary t carries the decision made after round t;
                        // the agent stopped right after its k-th round.
                        for (t, stop) in stops.iter_mut().enumerate().take(n.min(k)) {
                            *stop = Some(t + 1 == k);
                        }
                    }
                    Some(StopKind::Cap) => {
                        // The cap ended the run without a decision at
                        // boundary k, so only earlier boundaries count.
                        for stop in stops.iter_mut().take(n.min(k.saturating_sub(1))) {
                            *stop = Some(false);
                        }
                    }
                    None => {}
                }
            }

            index.insert((session.user_id.clone(), session.task_id.clone(), session.ordinal), records.len());
            records.push(AgentSessionRecord {
                queries: queries.iter().map(|q| q.as_ref().map(|q| q.text().to_owned())).collect(),
                clicks,
                stops,
                stop_kind: run.sequence.stop_kind().map(|k| format!("{k:?}").to_lowercase()),
                error: run.error.as_ref().map(ToString::to_string),
                llm_calls: run.stats.llm_calls,
            });
            parsed_queries.push(queries);
        }
        Self { name: name.into(), index, records, parsed_queries }
    }

    fn lookup(&self, session: &Session) -> Option<usize> {
        self.index.get(&(session.user_id.clone(), session.task_id.clone(), session.ordinal)).copied()
    }

    pub fn records(&self) -> &[AgentSessionRecord] {
        &self.records
    }

    /// Sessions whose run ended in an error.
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn query_subject(&self) -> AgentQuerySubject<'_> {
        AgentQuerySubject { runs: self }
    }

    pub fn click_subject(&self) -> AgentClickSubject<'_> {
        AgentClickSubject { runs: self }
    }

    pub fn stop_subject(&self) -> AgentStopSubject<'_> {
        AgentStopSubject { runs: self }
    }
}

pub struct AgentQuerySubject<'a> {
    runs: &'a AgentRuns,
}

impl QuerySubject for AgentQuerySubject<'_> {
    fn name(&self) -> &str {
        &self.runs.name
    }

    fn generate(&mut self, session: &Session, round_idx: usize) -> Result<Option<Query>, String> {
        let idx = self.runs.lookup(session).ok_or("session not in agent runs")?;
        Ok(self.runs.parsed_queries[idx].get(round_idx).cloned().flatten())
    }
}

pub struct AgentClickSubject<'a> {
    runs: &'a AgentRuns,
}

impl ClickSubject for AgentClickSubject<'_> {
    fn name(&self) -> &str {
        &self.runs.name
    }

    fn fit(&mut self, _train: &[&Session]) -> Result<(), String> {
        Ok(()) // zero-shot: nothing to fit
    }

    fn predict_round(&mut self, session: &Session, round_idx: usize) -> Result<Option<Vec<bool>>, String> {
        let idx = self.runs.lookup(session).ok_or("session not in agent runs")?;
        let Some(clicks) = self.runs.records[idx].clicks.get(round_idx).cloned().flatten() else {
            return Ok(None);
        };
        let n = session.rounds[round_idx].serp.len();
        Ok(Some((1..=n).map(|rank| clicks.contains(&rank)).collect()))
    }
}

pub struct AgentStopSubject<'a> {
    runs: &'a AgentRuns,
}

impl StopSubject for AgentStopSubject<'_> {
    fn name(&self) -> &str {
        &self.runs.name
    }

    fn predict_stops(&mut self, session: &Session) -> Result<Vec<Option<bool>>, String> {
        let idx = self.runs.lookup(session).ok_or("session not in agent runs")?;
        Ok(self.runs.records[idx].stops.clone())
    }
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

/// One agent variant to compare (e.g. full context vs ablated context).
pub struct AblationVariant {
    pub name: String,
    pub cfg: AgentConfig,
    pub client: Client,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub query_bleu: f64,
    pub click_f1: f64,
    pub stop_f1: f64,
    pub session_failures: usize,
    pub query_rounds: Coverage,
    pub click_rounds: Coverage,
    pub stop_boundaries: Coverage,
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl std::fmt::Display for AblationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<24} {:>10} {:>10} {:>10} {:>9}", "variant", "query BLEU", "click F1", "stop F1", "failures")?;
        for row in &self.rows {
            writeln!(
                f,
                "{:<24} {:>10.4} {:>10.4} {:>10.4} {:>9}",
                row.variant, row.query_bleu, row.click_f1, row.stop_f1, row.session_failures
            )?;
        }
        Ok(())
    }
}

/// Runs the three evaluations for each agent variant with identical fold
/// assignments and reports them side by side (BLEU for queries, F1 for
/// clicks and stops).
pub fn run_ablation(
    variants: Vec<AblationVariant>,
    dataset: &Dataset,
    folds: &FoldAssignment,
    max_n: usize,
) -> Result<AblationReport, EvalError> {
    if variants.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut rows = Vec::new();
    for variant in &variants {
        let runs = AgentRuns::collect(variant.name.clone(), &variant.cfg, &variant.client, dataset);
        let queries = eval_queries(&mut runs.query_subject(), dataset, max_n);
        let clicks = eval_clicks(&mut runs.click_subject(), dataset, folds);
        let stops = eval_stops(&mut runs.stop_subject(), dataset);
        rows.push(AblationRow {
            variant: variant.name.clone(),
            query_bleu: queries.mean_bleu,
            click_f1: clicks.as_ref().map(|c| c.metrics.f1).unwrap_or(0.0),
            stop_f1: stops.as_ref().map(|s| s.metrics.f1).unwrap_or(0.0),
            session_failures: runs.failures(),
            query_rounds: queries.rounds,
            click_rounds: clicks.map(|c| c.rounds).unwrap_or_default(),
            stop_boundaries: stops.map(|s| s.boundaries).unwrap_or_default(),
        });
    }
    Ok(AblationReport { rows })
}

//! The LLM-driven session agent.
//!
//! Each round runs reasoning, a stop decision, query reformulation, click
//! selection over the returned SERP, and observation of the clicked
//! documents; every step is one prompted completion conditioned on the task
//! and the accumulated context. The loop ends when the stop decision fires
//! or a hard round cap forces termination (recorded as such, so evaluation
//! can tell the two apart).

pub mod prompts;

use serde::Serialize;
use thiserror::Error;

use crate::llm::{ChatMessage, Client, CompletionRequest, LlmError};
use crate::session::{
    ClickSet, InteractionSequence, Query, SearchResult, Serp, Session, StopKind, Task,
};

pub use prompts::{PromptTemplateSet, SlotValues, TemplateError};

/// Marker rendered in place of context when there is none (first round) or
/// when the ablation flag strips it.
pub const NO_CONTEXT_MARKER: &str = "(no prior searches yet)";

/// Observation synthesized without an LLM call when nothing was clicked.
pub const NO_CLICKS_OBSERVATION: &str = "No results were examined this round.";

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("agent protocol violation at {step}: {message}")]
    Protocol { step: &'static str, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Reasoning,
    Query,
    Observation,
}

/// One unit of agent memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContextEntry {
    pub kind: EntryKind,
    pub text: String,
    /// 1-based round the entry was produced in.
    pub round: usize,
}

/// The agent's ordered, append-only memory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Context {
    entries: Vec<ContextEntry>,
}

impl Context {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an entry; rounds must be non-decreasing and entries within a
    /// round must follow reasoning -> query -> observation order.
    pub fn push(&mut self, entry: ContextEntry) {
        if let Some(last) = self.entries.last() {
            assert!(entry.round >= last.round, "context rounds must be non-decreasing");
            if entry.round == last.round {
                let order = |k: EntryKind| match k {
                    EntryKind::Reasoning => 0,
                    EntryKind::Query => 1,
                    EntryKind::Observation => 2,
                };
                assert!(
                    order(entry.kind) > order(last.kind),
                    "entries within a round must follow reasoning -> query -> observation"
                );
            }
        }
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[ContextEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The parsed outcome of a stop-decision step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub model: String,
    pub templates: PromptTemplateSet,
    /// Hard cap on rounds; the loop is total because of it.
    pub max_rounds: usize,
    /// Render prompts without any accumulated context.
    pub ablate_context: bool,
    pub max_clicks_per_round: usize,
    /// Rendered context is trimmed oldest-first to this many characters.
    pub context_char_budget: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            model: "gpt-4".into(),
            templates: PromptTemplateSet::default(),
            max_rounds: 10,
            ablate_context: false,
            max_clicks_per_round: 5,
            context_char_budget: 12_000,
        }
    }
}

/// One transcript line: everything either side said in one step.
#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub round: usize,
    pub step: &'static str,
    pub prompt: String,
    pub completion: String,
    pub action: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Call accounting for one session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    /// Completed (query, clicks) rounds.
    pub rounds: usize,
    /// Rounds whose click set was non-empty.
    pub rounds_with_clicks: usize,
    /// Raw completions issued, including re-asks.
    pub llm_calls: usize,
    /// Step units where a reasoning + stop-decision pair counts once:
    /// pairs + queries + click selections + LLM-backed observations.
    pub step_units: usize,
    /// Re-ask completions included in `llm_calls`.
    pub re_asks: usize,
}

/// Everything a session run produces. `error` is set when an agent-protocol
/// failure aborted the run; the partial transcript is retained either way.
#[derive(Debug)]
pub struct SessionRun {
    pub sequence: InteractionSequence,
    pub context: Context,
    pub transcript: Vec<StepRecord>,
    pub stats: RunStats,
    pub error: Option<AgentError>,
}

impl SessionRun {
    pub fn stop_kind(&self) -> Option<StopKind> {
        self.sequence.stop_kind()
    }
}

pub struct Agent<'a> {
    cfg: &'a AgentConfig,
    client: &'a Client,
}

impl<'a> Agent<'a> {
    pub fn new(cfg: &'a AgentConfig, client: &'a Client) -> Self {
        Self { cfg, client }
    }

    fn render_context(&self, ctx: &Context) -> String {
        if self.cfg.ablate_context || ctx.is_empty() {
            return NO_CONTEXT_MARKER.to_owned();
        }
        let lines: Vec<String> = ctx
            .entries()
            .iter()
            .map(|e| {
                let kind = match e.kind {
                    EntryKind::Reasoning => "thought",
                    EntryKind::Query => "searched",
                    EntryKind::Observation => "learned",
                };
                format!("[round {}] {}: {}", e.round, kind, e.text)
            })
            .collect();
        // Newest last; drop oldest lines until the budget fits.
        let mut start = 0;
        let mut total: usize = lines.iter().map(|l| l.len() + 1).sum();
        while start + 1 < lines.len() && total > self.cfg.context_char_budget {
            total -= lines[start].len() + 1;
            start += 1;
        }
        lines[start..].join("\n")
    }

    fn render_serp(serp: &Serp) -> String {
        serp.results()
            .iter()
            .map(|r| format!("{}. {} — {}", r.rank, r.title, r.abstract_text))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn render_documents(clicked: &[&SearchResult]) -> String {
        clicked
            .iter()
            .map(|r| format!("[result {}] {}\n{}", r.rank, r.title, r.reading_text()))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    fn ask(&self, prompt: &str) -> Result<String, AgentError> {
        let req = CompletionRequest::new(&self.cfg.model, vec![ChatMessage::user(prompt)]);
        Ok(self.client.complete(&req)?)
    }

    /// Generates the round's reasoning entry. The caller appends it.
    pub fn reason(&self, task: &Task, ctx: &Context, round: usize) -> Result<(ContextEntry, StepRecord), AgentError> {
        let prompt = prompts::render(&self.cfg.templates.reasoning, &SlotValues {
            task: &task.description,
            context: &self.render_context(ctx),
            ..Default::default()
        });
        let completion = self.ask(&prompt)?;
        let text = completion.trim().to_owned();
        if text.is_empty() {
            return Err(AgentError::Protocol { step: "reason", message: "empty completion".into() });
        }
        let record = StepRecord {
            round,
            step: "reason",
            prompt,
            completion,
            action: text.clone(),
            warnings: vec![],
        };
        Ok((ContextEntry { kind: EntryKind::Reasoning, text, round }, record))
    }

    fn parse_stop(completion: &str) -> Option<StopDecision> {
        let word = completion.trim().trim_matches(|c: char| !c.is_alphanumeric()).to_ascii_uppercase();
        match word.as_str() {
            "STOP" => Some(StopDecision::Stop),
            "CONTINUE" => Some(StopDecision::Continue),
            _ => None,
        }
    }

    /// Decides whether the session ends here. Unparseable completions get
    /// one re-ask with a stricter instruction, then fail: unlike clicks,
    /// there is no legal abstention for the stop decision.
    pub fn decide_stop(
        &self,
        task: &Task,
        ctx: &Context,
        round: usize,
    ) -> Result<(StopDecision, Vec<StepRecord>, usize), AgentError> {
        let prompt = prompts::render(&self.cfg.templates.stop, &SlotValues {
            task: &task.description,
            context: &self.render_context(ctx),
            ..Default::default()
        });
        let completion = self.ask(&prompt)?;
        let mut records = Vec::new();
        let mut calls = 1;
        if let Some(decision) = Self::parse_stop(&completion) {
            records.push(StepRecord {
                round,
                step: "stop",
                prompt,
                completion,
                action: format!("{decision:?}"),
                warnings: vec![],
            });
            return Ok((decision, records, calls));
        }
        records.push(StepRecord {
            round,
            step: "stop",
            prompt: prompt.clone(),
            completion: completion.clone(),
            action: "unparseable".into(),
            warnings: vec![format!("unparseable stop decision {completion:?}; re-asking")],
        });

        let strict = format!("{prompt}\n\nAnswer with exactly one word: STOP or CONTINUE.");
        let retry = self.ask(&strict)?;
        calls += 1;
        match Self::parse_stop(&retry) {
            Some(decision) => {
                records.push(StepRecord {
                    round,
                    step: "stop(re-ask)",
                    prompt: strict,
                    completion: retry,
                    action: format!("{decision:?}"),
                    warnings: vec![],
                });
                Ok((decision, records, calls))
            }
            None => Err(AgentError::Protocol {
                step: "stop",
                message: format!("unparseable stop decision after re-ask: {retry:?}"),
            }),
        }
    }

    fn sanitize_query(completion: &str) -> String {
        let mut text = completion.trim();
        loop {
            let stripped = text
                .strip_prefix('"')
                .and_then(|t| t.strip_suffix('"'))
                .or_else(|| text.strip_prefix('\'').and_then(|t| t.strip_suffix('\'')))
                .or_else(|| text.strip_prefix('`').and_then(|t| t.strip_suffix('`')));
            match stripped {
                Some(inner) => text = inner.trim(),
                None => break,
            }
        }
        text.to_owned()
    }

    /// Produces the round's query, stripped of surrounding quotes/markup.
    pub fn generate_query(&self, task: &Task, ctx: &Context, round: usize) -> Result<(Query, StepRecord), AgentError> {
        let prompt = prompts::render(&self.cfg.templates.query, &SlotValues {
            task: &task.description,
            context: &self.render_context(ctx),
            ..Default::default()
        });
        let completion = self.ask(&prompt)?;
        let text = Self::sanitize_query(&completion);
        let query = Query::parse(&text).map_err(|_| AgentError::Protocol {
            step: "query",
            message: format!("empty query after sanitization of {completion:?}"),
        })?;
        let record = StepRecord {
            round,
            step: "query",
            prompt,
            completion,
            action: query.text().to_owned(),
            warnings: vec![],
        };
        Ok((query, record))
    }

    fn parse_clicks(completion: &str) -> Option<Vec<usize>> {
        let trimmed = completion.trim();
        if trimmed.eq_ignore_ascii_case("none") || trimmed.eq_ignore_ascii_case("no clicks") {
            return Some(Vec::new());
        }
        let mut ranks = Vec::new();
        for part in trimmed.split(|c: char| c == ',' || c.is_whitespace()) {
            let part = part.trim().trim_matches(|c: char| !c.is_ascii_digit());
            if part.is_empty() {
                continue;
            }
            ranks.push(part.parse::<usize>().ok()?);
        }
        if ranks.is_empty() { None } else { Some(ranks) }
    }

    /// Selects clicked ranks from the SERP. Out-of-range ranks are dropped
    /// with a warning; at most `max_clicks_per_round` are kept in completion
    /// order. A wholly unparseable completion (after one re-ask) abstains
    /// with a warning: not clicking is a legal user behavior.
    pub fn select_clicks(
        &self,
        task: &Task,
        ctx: &Context,
        serp: &Serp,
        round: usize,
    ) -> Result<(ClickSet, Vec<StepRecord>, usize), AgentError> {
        let prompt = prompts::render(&self.cfg.templates.click, &SlotValues {
            task: &task.description,
            context: &self.render_context(ctx),
            serp: &Self::render_serp(serp),
            ..Default::default()
        });
        let completion = self.ask(&prompt)?;
        let mut records = Vec::new();
        let mut calls = 1;

        let parsed = match Self::parse_clicks(&completion) {
            Some(ranks) => Some((prompt.clone(), completion.clone(), ranks)),
            None => {
                records.push(StepRecord {
                    round,
                    step: "click",
                    prompt: prompt.clone(),
                    completion: completion.clone(),
                    action: "unparseable".into(),
                    warnings: vec![format!("unparseable click list {completion:?}; re-asking")],
                });
                let strict = format!(
                    "{prompt}\n\nAnswer with result numbers separated by commas, or the single word none."
                );
                let retry = self.ask(&strict)?;
                calls += 1;
                Self::parse_clicks(&retry).map(|ranks| (strict.clone(), retry.clone(), ranks)).or_else(|| {
                    records.push(StepRecord {
                        round,
                        step: "click(re-ask)",
                        prompt: strict,
                        completion: retry,
                        action: "abstain".into(),
                        warnings: vec!["still unparseable; treating as no clicks".into()],
                    });
                    None
                })
            }
        };

        let clicks = match parsed {
            None => ClickSet::new(),
            Some((used_prompt, used_completion, ranks)) => {
                let mut warnings = Vec::new();
                let mut kept = Vec::new();
                for rank in ranks {
                    if serp.at_rank(rank).is_none() {
                        warnings.push(format!("dropping out-of-range rank {rank}"));
                    } else if !kept.contains(&rank) {
                        kept.push(rank);
                    }
                }
                if kept.len() > self.cfg.max_clicks_per_round {
                    warnings.push(format!(
                        "keeping first {} of {} clicks",
                        self.cfg.max_clicks_per_round,
                        kept.len()
                    ));
                    kept.truncate(self.cfg.max_clicks_per_round);
                }
                let set: ClickSet = kept.into_iter().collect();
                records.push(StepRecord {
                    round,
                    step: "click",
                    prompt: used_prompt,
                    completion: used_completion,
                    action: format!("{set:?}"),
                    warnings,
                });
                set
            }
        };
        Ok((clicks, records, calls))
    }

    /// Digests the clicked documents into an observation entry. An empty
    /// click set synthesizes a fixed observation without any LLM call.
    pub fn observe(
        &self,
        task: &Task,
        ctx: &Context,
        clicked: &[&SearchResult],
        round: usize,
    ) -> Result<(ContextEntry, StepRecord, usize), AgentError> {
        if clicked.is_empty() {
            let record = StepRecord {
                round,
                step: "observe(synthetic)",
                prompt: String::new(),
                completion: String::new(),
                action: NO_CLICKS_OBSERVATION.to_owned(),
                warnings: vec![],
            };
            let entry = ContextEntry { kind: EntryKind::Observation, text: NO_CLICKS_OBSERVATION.to_owned(), round };
            return Ok((entry, record, 0));
        }
        let prompt = prompts::render(&self.cfg.templates.observe, &SlotValues {
            task: &task.description,
            context: &self.render_context(ctx),
            documents: &Self::render_documents(clicked),
            ..Default::default()
        });
        let completion = self.ask(&prompt)?;
        let text = completion.trim().to_owned();
        if text.is_empty() {
            return Err(AgentError::Protocol { step: "observe", message: "empty completion".into() });
        }
        let record = StepRecord {
            round,
            step: "observe",
            prompt,
            completion,
            action: text.clone(),
            warnings: vec![],
        };
        Ok((ContextEntry { kind: EntryKind::Observation, text, round }, record, 1))
    }

    /// Runs one full session: reason -> stop? -> query -> clicks -> observe,
    /// until the stop decision fires or the round cap forces termination.
    pub fn run_session(&self, task: &Task, serp_provider: &mut dyn FnMut(&Query) -> Serp) -> SessionRun {
        let mut ctx = Context::new();
        let mut seq = InteractionSequence::new();
        let mut transcript = Vec::new();
        let mut stats = RunStats::default();

        macro_rules! step {
            ($expr:expr) => {
                match $expr {
                    Ok(v) => v,
                    Err(e) => {
                        return SessionRun {
                            sequence: seq,
                            context: ctx,
                            transcript,
                            stats,
                            error: Some(e),
                        }
                    }
                }
            };
        }

        for round in 1..=self.cfg.max_rounds {
            let (reasoning, record) = step!(self.reason(task, &ctx, round));
            transcript.push(record);
            ctx.push(reasoning);
            stats.llm_calls += 1;

            let (decision, records, calls) = step!(self.decide_stop(task, &ctx, round));
            transcript.extend(records);
            stats.llm_calls += calls;
            stats.re_asks += calls - 1;
            stats.step_units += 1; // the reasoning + stop pair
            if decision == StopDecision::Stop {
                seq.finish(StopKind::Natural);
                return SessionRun { sequence: seq, context: ctx, transcript, stats, error: None };
            }

            let (query, record) = step!(self.generate_query(task, &ctx, round));
            transcript.push(record);
            ctx.push(ContextEntry { kind: EntryKind::Query, text: query.text().to_owned(), round });
            seq.push_query(query.clone());
            stats.llm_calls += 1;
            stats.step_units += 1;

            let serp = serp_provider(&query);
            let clicks = if serp.is_empty() {
                transcript.push(StepRecord {
                    round,
                    step: "click(skipped)",
                    prompt: String::new(),
                    completion: String::new(),
                    action: "empty SERP".into(),
                    warnings: vec![],
                });
                ClickSet::new()
            } else {
                let (clicks, records, calls) = step!(self.select_clicks(task, &ctx, &serp, round));
                transcript.extend(records);
                stats.llm_calls += calls;
                stats.re_asks += calls - 1;
                stats.step_units += 1;
                clicks
            };
            seq.push_clicks(clicks.clone());
            stats.rounds += 1;
            if !clicks.is_empty() {
                stats.rounds_with_clicks += 1;
            }

            let clicked: Vec<&SearchResult> = clicks.iter().filter_map(|&r| serp.at_rank(r)).collect();
            let (observation, record, calls) = step!(self.observe(task, &ctx, &clicked, round));
            transcript.push(record);
            ctx.push(observation);
            stats.llm_calls += calls;
            stats.step_units += calls; // synthetic observations cost nothing
        }

        seq.finish(StopKind::Cap);
        SessionRun { sequence: seq, context: ctx, transcript, stats, error: None }
    }
}

/// SERP provider that replays a logged session: the t-th distinct query
/// receives the logged SERP of round t; queries beyond the log get an empty
/// SERP. Repeating an earlier query returns the SERP it was assigned.
pub fn replay_serp_provider(session: &Session) -> impl FnMut(&Query) -> Serp + '_ {
    let mut assigned: Vec<(String, usize)> = Vec::new();
    move |query: &Query| {
        let text = query.text().to_owned();
        let idx = match assigned.iter().find(|(t, _)| *t == text) {
            Some(&(_, idx)) => idx,
            None => {
                let idx = assigned.len();
                assigned.push((text, idx));
                idx
            }
        };
        session.rounds.get(idx).map(|r| r.serp.clone()).unwrap_or_else(Serp::empty)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::MockBackend;
    use crate::session::{Round, SequenceStep};

    fn task() -> Task {
        Task::new("t1", "find the speed of a jaguar").unwrap()
    }

    fn serp(n: usize) -> Serp {
        Serp::new(
            (1..=n)
                .map(|rank| SearchResult {
                    rank,
                    title: format!("result {rank}"),
                    abstract_text: format!("abstract {rank}"),
                    body: Some(format!("body text {rank}")),
                    url: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn mock_client(script: &[&str]) -> Client {
        Client::mock(MockBackend::from_texts(script.to_vec()))
    }

    #[test]
    fn immediate_stop_yields_empty_sequence() {
        let cfg = AgentConfig::default();
        let client = mock_client(&["I have enough already", "STOP"]);
        let agent = Agent::new(&cfg, &client);
        let run = agent.run_session(&task(), &mut |_q| serp(3));
        assert!(run.error.is_none());
        assert_eq!(run.sequence.n_rounds(), 0);
        assert_eq!(run.sequence.stop_kind(), Some(StopKind::Natural));
        assert_eq!(run.stats.llm_calls, 2);
        assert_eq!(run.stats.step_units, 1);
    }

    #[test]
    fn two_round_session_shape() {
        let script = [
            "need to search",          // reason 1
            "CONTINUE",                // stop 1
            "jaguar speed",            // query 1
            "1, 3",                    // clicks 1
            "jaguars are fast",        // observe 1
            "need exact number",       // reason 2
            "CONTINUE",                // stop 2
            "jaguar top speed mph",    // query 2
            "none",                    // clicks 2 (abstain)
            "looks done",              // reason 3
            "STOP",                    // stop 3
        ];
        let cfg = AgentConfig::default();
        let client = mock_client(&script);
        let agent = Agent::new(&cfg, &client);
        let run = agent.run_session(&task(), &mut |_q| serp(3));
        assert!(run.error.is_none(), "{:?}", run.error);

        let rounds: Vec<_> = run.sequence.rounds().collect();
        assert_eq!(rounds.len(), 2);
        assert_eq!(rounds[0].0.text(), "jaguar speed");
        assert_eq!(*rounds[0].1, ClickSet::from([1, 3]));
        assert_eq!(rounds[1].0.text(), "jaguar top speed mph");
        assert!(rounds[1].1.is_empty());
        assert_eq!(run.sequence.stop_kind(), Some(StopKind::Natural));

        // k = 2 rounds, m = 1 round with clicks: units = 1 + 3k + m = 8,
        // raw calls = units + (k + 1) pairs' second halves = 11.
        assert_eq!(run.stats.step_units, 8);
        assert_eq!(run.stats.llm_calls, 11);
        assert_eq!(run.stats.rounds_with_clicks, 1);

        // Context per round is reasoning -> query -> observation.
        let kinds: Vec<EntryKind> = run.context.entries().iter().map(|e| e.kind).collect();
        assert_eq!(kinds[0..3], [EntryKind::Reasoning, EntryKind::Query, EntryKind::Observation]);
    }

    #[test]
    fn cap_forces_stop() {
        let script = ["r", "CONTINUE", "q one", "none", "r", "CONTINUE", "q two", "none"];
        let cfg = AgentConfig { max_rounds: 2, ..Default::default() };
        let client = mock_client(&script);
        let agent = Agent::new(&cfg, &client);
        let run = agent.run_session(&task(), &mut |_q| serp(2));
        assert!(run.error.is_none());
        assert_eq!(run.sequence.n_rounds(), 2);
        assert_eq!(run.sequence.stop_kind(), Some(StopKind::Cap));
    }

    #[test]
    fn stop_parse_with_one_reask() {
        let cfg = AgentConfig::default();
        let client = mock_client(&["thinking", "maybe", "STOP"]);
        let agent = Agent::new(&cfg, &client);
        let run = agent.run_session(&task(), &mut |_q| serp(1));
        assert!(run.error.is_none());
        assert_eq!(run.stats.re_asks, 1);
        assert_eq!(run.sequence.stop_kind(), Some(StopKind::Natural));

        let client = mock_client(&["thinking", "maybe", "dunno"]);
        let agent = Agent::new(&cfg, &client);
        let run = agent.run_session(&task(), &mut |_q| serp(1));
        match run.error {
            Some(AgentError::Protocol { step, .. }) => assert_eq!(step, "stop"),
            other => panic!("expected protocol error, got {other:?}"),
        }
        assert!(!run.transcript.is_empty(), "partial transcript retained");
    }

    #[test]
    fn click_parsing_rules() {
        let cfg = AgentConfig::default();
        let ctx = Context::new();
        let client = mock_client(&["2, 14"]);
        let agent = Agent::new(&cfg, &client);
        let (clicks, records, _) = agent.select_clicks(&task(), &ctx, &serp(10), 1).unwrap();
        assert_eq!(clicks, ClickSet::from([2]));
        assert!(records.last().unwrap().warnings.iter().any(|w| w.contains("14")));

        let client = mock_client(&["none"]);
        let agent = Agent::new(&cfg, &client);
        let (clicks, _, _) = agent.select_clicks(&task(), &ctx, &serp(10), 1).unwrap();
        assert!(clicks.is_empty());

        // Wholly unparseable twice: abstain with warning.
        let client = mock_client(&["the first looks good", "sure"]);
        let agent = Agent::new(&cfg, &client);
        let (clicks, records, calls) = agent.select_clicks(&task(), &ctx, &serp(10), 1).unwrap();
        assert!(clicks.is_empty());
        assert_eq!(calls, 2);
        assert_eq!(records.last().unwrap().action, "abstain");
    }

    #[test]
    fn click_cap_keeps_completion_order() {
        let cfg = AgentConfig { max_clicks_per_round: 2, ..Default::default() };
        let ctx = Context::new();
        let client = mock_client(&["5, 1, 3"]);
        let agent = Agent::new(&cfg, &client);
        let (clicks, _, _) = agent.select_clicks(&task(), &ctx, &serp(10), 1).unwrap();
        assert_eq!(clicks, ClickSet::from([5, 1]));
    }

    #[test]
    fn query_sanitization() {
        let cfg = AgentConfig::default();
        let ctx = Context::new();
        let client = mock_client(&["\"jaguar speed\""]);
        let agent = Agent::new(&cfg, &client);
        let (q, _) = agent.generate_query(&task(), &ctx, 1).unwrap();
        assert_eq!(q.text(), "jaguar speed");
        assert_eq!(q.terms(), ["jaguar", "speed"]);

        let client = mock_client(&["``"]);
        let agent = Agent::new(&cfg, &client);
        match agent.generate_query(&task(), &ctx, 1) {
            Err(AgentError::Protocol { step, .. }) => assert_eq!(step, "query"),
            other => panic!("expected protocol error, got {other:?}"),
        }
    }

    #[test]
    fn empty_clicks_synthesize_observation_without_llm() {
        let cfg = AgentConfig::default();
        let ctx = Context::new();
        let client = mock_client(&[]);
        let agent = Agent::new(&cfg, &client);
        let (entry, record, calls) = agent.observe(&task(), &ctx, &[], 1).unwrap();
        assert_eq!(calls, 0);
        assert_eq!(entry.text, NO_CLICKS_OBSERVATION);
        assert_eq!(record.step, "observe(synthetic)");
    }

    #[test]
    fn observe_prompt_contains_bodies_in_rank_order() {
        let cfg = AgentConfig::default();
        let ctx = Context::new();
        let client = mock_client(&["learned things"]);
        let agent = Agent::new(&cfg, &client);
        let s = serp(3);
        let clicked: Vec<&SearchResult> = [1, 3].iter().map(|&r| s.at_rank(r).unwrap()).collect();
        let (_, record, _) = agent.observe(&task(), &ctx, &clicked, 1).unwrap();
        let p1 = record.prompt.find("body text 1").expect("body 1 present");
        let p3 = record.prompt.find("body text 3").expect("body 3 present");
        assert!(p1 < p3);
    }

    #[test]
    fn first_round_prompt_has_no_prior_marker() {
        let cfg = AgentConfig::default();
        let ctx = Context::new();
        let client = mock_client(&["thought"]);
        let agent = Agent::new(&cfg, &client);
        let (_, record) = agent.reason(&task(), &ctx, 1).unwrap();
        assert!(record.prompt.contains(NO_CONTEXT_MARKER));
        assert!(record.prompt.contains("jaguar"));
    }

    #[test]
    fn ablation_strips_context_entries_from_prompts() {
        let sentinel = "XYZZY-sentinel-text";
        let mut ctx = Context::new();
        ctx.push(ContextEntry { kind: EntryKind::Reasoning, text: sentinel.into(), round: 1 });
        ctx.push(ContextEntry { kind: EntryKind::Query, text: sentinel.into(), round: 1 });

        let cfg = AgentConfig { ablate_context: true, ..Default::default() };
        let client = mock_client(&["thought"]);
        let agent = Agent::new(&cfg, &client);
        let (_, record) = agent.reason(&task(), &ctx, 2).unwrap();
        assert!(!record.prompt.contains(sentinel));
        assert!(record.prompt.contains(&task().description));

        let full = AgentConfig::default();
        let client = mock_client(&["thought"]);
        let agent = Agent::new(&full, &client);
        let (_, record) = agent.reason(&task(), &ctx, 2).unwrap();
        assert!(record.prompt.contains(sentinel));
    }

    #[test]
    fn context_budget_trims_oldest_first() {
        let mut ctx = Context::new();
        ctx.push(ContextEntry { kind: EntryKind::Reasoning, text: "OLD-".repeat(50), round: 1 });
        ctx.push(ContextEntry { kind: EntryKind::Query, text: "NEW-".repeat(10), round: 1 });
        let cfg = AgentConfig { context_char_budget: 80, ..Default::default() };
        let client = mock_client(&[]);
        let agent = Agent::new(&cfg, &client);
        let rendered = agent.render_context(&ctx);
        assert!(!rendered.contains("OLD-"));
        assert!(rendered.contains("NEW-"));
    }

    #[test]
    fn replay_provider_serves_logged_serps_in_order() {
        let rounds = vec![
            Round::new(Query::parse("first").unwrap(), serp(2), ClickSet::from([1])).unwrap(),
            Round::new(Query::parse("second").unwrap(), serp(3), ClickSet::new()).unwrap(),
        ];
        let session = Session::new("u", "t1", rounds);
        let mut provider = replay_serp_provider(&session);

        let q1 = Query::parse("anything").unwrap();
        let q2 = Query::parse("something else").unwrap();
        let q3 = Query::parse("third query").unwrap();
        assert_eq!(provider(&q1).len(), 2);
        assert_eq!(provider(&q2).len(), 3);
        assert!(provider(&q3).is_empty(), "beyond the log: empty SERP");
        assert_eq!(provider(&q1).len(), 2, "repeated query gets its assigned SERP");
    }

    #[test]
    fn determinism_under_mock() {
        let script = ["r", "CONTINUE", "q", "1", "o", "r", "STOP"];
        let cfg = AgentConfig::default();
        let mut transcripts = Vec::new();
        for _ in 0..2 {
            let client = mock_client(&script);
            let agent = Agent::new(&cfg, &client);
            let run = agent.run_session(&task(), &mut |_q| serp(2));
            transcripts.push(serde_json::to_string(&run.transcript).unwrap());
        }
        assert_eq!(transcripts[0], transcripts[1]);
    }

    #[test]
    fn sequence_steps_alternate() {
        let script = ["r", "CONTINUE", "q", "1 2", "o", "r", "STOP"];
        let cfg = AgentConfig::default();
        let client = mock_client(&script);
        let agent = Agent::new(&cfg, &client);
        let run = agent.run_session(&task(), &mut |_q| serp(2));
        run.sequence.validate().unwrap();
        assert!(matches!(run.sequence.steps()[0], SequenceStep::Query(_)));
        assert!(matches!(run.sequence.steps()[1], SequenceStep::Clicks(_)));
    }
}

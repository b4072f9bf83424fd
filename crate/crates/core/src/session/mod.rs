//! Session data model: tasks, queries, SERPs, rounds, sessions, datasets,
//! and the interaction-sequence output type, plus dataset filtering.
//!
//! A logged or simulated interaction is a [`Session`]: an ordered list of
//! [`Round`]s, each pairing a query with the SERP it produced and the set of
//! clicked ranks. Datasets are line-delimited files of such sessions (see
//! [`io`]). Filtering truncates SERPs to the top ten results and drops
//! incomplete sessions.

pub mod io;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

/// Maximum SERP depth retained by [`filter_sessions`].
pub const MAX_SERP_DEPTH: usize = 10;

/// Ranks clicked within one SERP (1-based).
pub type ClickSet = BTreeSet<usize>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("query has no terms after tokenization: {0:?}")]
    EmptyQuery(String),
    #[error("SERP ranks must be contiguous 1..=n, got {0:?}")]
    BadRanks(Vec<usize>),
    #[error("result title must be non-empty")]
    EmptyTitle,
    #[error("task description must be non-empty")]
    EmptyTask,
    #[error("click at rank {rank} outside SERP of {len} results")]
    ClickOutOfRange { rank: usize, len: usize },
}

/// A search task: the statement a user (or agent) is trying to satisfy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub description: String,
}

impl Task {
    pub fn new(id: impl Into<String>, description: impl Into<String>) -> Result<Self, ModelError> {
        let description = description.into();
        if description.trim().is_empty() {
            return Err(ModelError::EmptyTask);
        }
        Ok(Self { id: id.into(), description })
    }
}

/// One entry of a SERP. `rank` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub rank: usize,
    pub title: String,
    pub abstract_text: String,
    /// Full landing-page content when available.
    pub body: Option<String>,
    pub url: Option<String>,
}

impl SearchResult {
    /// Text the agent reads after a click: the body when present, else the abstract.
    pub fn reading_text(&self) -> &str {
        self.body.as_deref().unwrap_or(&self.abstract_text)
    }
}

/// A ranked result list. Ranks are exactly `1..=len` with no gaps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Serp {
    results: Vec<SearchResult>,
}

impl Serp {
    /// Builds a SERP, validating rank contiguity and non-empty titles.
    pub fn new(results: Vec<SearchResult>) -> Result<Self, ModelError> {
        for (i, r) in results.iter().enumerate() {
            if r.rank != i + 1 {
                return Err(ModelError::BadRanks(results.iter().map(|r| r.rank).collect()));
            }
            if r.title.is_empty() {
                return Err(ModelError::EmptyTitle);
            }
        }
        Ok(Self { results })
    }

    pub fn empty() -> Self {
        Self { results: Vec::new() }
    }

    pub fn results(&self) -> &[SearchResult] {
        &self.results
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }

    /// Result at 1-based `rank`, if present.
    pub fn at_rank(&self, rank: usize) -> Option<&SearchResult> {
        rank.checked_sub(1).and_then(|i| self.results.get(i))
    }

    /// Keeps only the top `depth` results.
    pub fn truncated(&self, depth: usize) -> Self {
        Self { results: self.results.iter().take(depth).cloned().collect() }
    }
}

/// A query and its canonical tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    text: String,
    terms: Vec<String>,
}

impl Query {
    /// Parses free text into a query; fails when tokenization yields no terms.
    pub fn parse(text: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        let terms = tokenize(&text);
        if terms.is_empty() {
            return Err(ModelError::EmptyQuery(text));
        }
        Ok(Self { text, terms })
    }

    /// Builds a query directly from terms (text is the space-join).
    pub fn from_terms(terms: Vec<String>) -> Result<Self, ModelError> {
        Self::parse(terms.join(" "))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// One interaction round: a query, the SERP it returned, and the clicks on it.
///
/// `clicks` is `None` when the log is missing click information for this
/// round; such sessions are dropped by [`filter_sessions`].
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub query: Query,
    pub serp: Serp,
    pub clicks: Option<ClickSet>,
    /// Per-click dwell durations in seconds, aligned with ascending click rank.
    /// Carried through from logs; unused by the core algorithms.
    pub dwell: Option<Vec<f64>>,
}

impl Round {
    pub fn new(query: Query, serp: Serp, clicks: ClickSet) -> Result<Self, ModelError> {
        for &rank in &clicks {
            if serp.at_rank(rank).is_none() {
                return Err(ModelError::ClickOutOfRange { rank, len: serp.len() });
            }
        }
        Ok(Self { query, serp, clicks: Some(clicks), dwell: None })
    }

    /// Clicked ranks, empty when click information is missing.
    pub fn clicks_or_empty(&self) -> ClickSet {
        self.clicks.clone().unwrap_or_default()
    }
}

/// One user's full interaction with a task.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub user_id: String,
    pub task_id: String,
    /// Occurrence index among sessions sharing (user_id, task_id), in file order.
    pub ordinal: usize,
    pub rounds: Vec<Round>,
    /// True when every round has click information and a non-partial SERP.
    pub complete: bool,
}

impl Session {
    pub fn new(user_id: impl Into<String>, task_id: impl Into<String>, rounds: Vec<Round>) -> Self {
        let mut s = Self {
            user_id: user_id.into(),
            task_id: task_id.into(),
            ordinal: 0,
            rounds,
            complete: false,
        };
        s.complete = s.compute_complete();
        s
    }

    /// A round is partial when its SERP is empty or any abstract is missing.
    fn compute_complete(&self) -> bool {
        self.rounds.iter().all(|r| {
            r.clicks.is_some()
                && !r.serp.is_empty()
                && r.serp.results().iter().all(|res| !res.abstract_text.is_empty())
        })
    }

    /// Recomputes the `complete` flag after mutation.
    pub fn refresh_complete(&mut self) {
        self.complete = self.compute_complete();
    }
}

/// A set of tasks plus the sessions logged (or generated) against them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub tasks: Vec<Task>,
    pub sessions: Vec<Session>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(tasks: Vec<Task>, sessions: Vec<Session>, provenance: impl Into<String>) -> Self {
        let mut d = Self { tasks, sessions, provenance: provenance.into() };
        d.assign_ordinals();
        d
    }

    /// Reassigns per-(user, task) ordinals in session order.
    pub fn assign_ordinals(&mut self) {
        let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
        for s in &mut self.sessions {
            let n = seen.entry((s.user_id.clone(), s.task_id.clone())).or_insert(0);
            s.ordinal = *n;
            *n += 1;
        }
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// Sessions belonging to the given task.
    pub fn sessions_for_task<'a>(&'a self, task_id: &'a str) -> impl Iterator<Item = &'a Session> {
        self.sessions.iter().filter(move |s| s.task_id == task_id)
    }
}

/// Deterministic tokenization: lowercase, then split on any non-alphanumeric
/// boundary, dropping empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Why a session failed the per-round completeness checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RemovalReason {
    MissingClicks,
    PartialSerp,
    ClickBeyondDepth,
}

/// Counters reported by [`filter_sessions`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterSummary {
    pub sessions_in: usize,
    pub sessions_out: usize,
    pub serps_truncated: usize,
    pub removed_excluded_task: usize,
    pub removed_missing_clicks: usize,
    pub removed_partial_serp: usize,
    pub removed_click_beyond_depth: usize,
    pub removed_no_rounds: usize,
}

impl std::fmt::Display for FilterSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "sessions in:  {}", self.sessions_in)?;
        writeln!(f, "sessions out: {}", self.sessions_out)?;
        writeln!(f, "truncated: {}", self.serps_truncated)?;
        writeln!(f, "removed (excluded task):     {}", self.removed_excluded_task)?;
        writeln!(f, "removed (missing clicks):    {}", self.removed_missing_clicks)?;
        writeln!(f, "removed (partial SERP):      {}", self.removed_partial_serp)?;
        writeln!(f, "removed (click beyond depth): {}", self.removed_click_beyond_depth)?;
        write!(f, "removed (no rounds):         {}", self.removed_no_rounds)
    }
}

/// Applies the dataset filtering rules: drop sessions of excluded tasks,
/// truncate every SERP to its top ten results, then drop sessions that are
/// incomplete (missing clicks, partial SERPs, or clicks referencing ranks
/// beyond the truncated depth). Filtering is total: it never fails.
pub fn filter_sessions(dataset: &Dataset, excluded_tasks: &BTreeSet<String>) -> (Dataset, FilterSummary) {
    let mut summary = FilterSummary { sessions_in: dataset.sessions.len(), ..Default::default() };
    let mut kept = Vec::new();

    'sessions: for session in &dataset.sessions {
        let mut session = session.clone();
        if excluded_tasks.contains(&session.task_id) {
            summary.removed_excluded_task += 1;
            continue;
        }
        if session.rounds.is_empty() {
            summary.removed_no_rounds += 1;
            continue;
        }
        // Truncate first, then validate clicks against the truncated depth.
        let mut removal: Option<RemovalReason> = None;
        for round in &mut session.rounds {
            if round.serp.len() > MAX_SERP_DEPTH {
                round.serp = round.serp.truncated(MAX_SERP_DEPTH);
                summary.serps_truncated += 1;
            }
            match &round.clicks {
                None => removal = removal.or(Some(RemovalReason::MissingClicks)),
                Some(clicks) => {
                    if clicks.iter().any(|&r| r > round.serp.len()) {
                        removal = removal.or(Some(RemovalReason::ClickBeyondDepth));
                    }
                }
            }
            let partial = round.serp.is_empty()
                || round.serp.results().iter().any(|r| r.abstract_text.is_empty());
            if partial {
                removal = removal.or(Some(RemovalReason::PartialSerp));
            }
        }
        if let Some(reason) = removal {
            match reason {
                RemovalReason::MissingClicks => summary.removed_missing_clicks += 1,
                RemovalReason::ClickBeyondDepth => summary.removed_click_beyond_depth += 1,
                RemovalReason::PartialSerp => summary.removed_partial_serp += 1,
            }
            continue 'sessions;
        }
        session.refresh_complete();
        kept.push(session);
    }

    summary.sessions_out = kept.len();
    let mut filtered = Dataset::new(dataset.tasks.clone(), kept, dataset.provenance.clone());
    filtered.assign_ordinals();
    (filtered, summary)
}

/// Marker appended when an interaction sequence terminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopKind {
    /// The agent (or rule) chose to stop.
    Natural,
    /// The hard round cap forced termination.
    Cap,
}

/// One step of an interaction sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceStep {
    Query(Query),
    Clicks(ClickSet),
}

/// The simulator's output: alternating queries and click sets, terminated by
/// a stop marker. Steps strictly alternate query -> clicks and nothing may
/// follow the stop marker.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InteractionSequence {
    steps: Vec<SequenceStep>,
    stop: Option<StopKind>,
}

impl InteractionSequence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a query. Panics if a click set is expected or the sequence
    /// already terminated (producer bug, not a data error).
    pub fn push_query(&mut self, query: Query) {
        assert!(self.stop.is_none(), "push_query after stop marker");
        assert!(self.steps.len().is_multiple_of(2), "expected clicks, got query");
        self.steps.push(SequenceStep::Query(query));
    }

    /// Appends the click set answering the pending query.
    pub fn push_clicks(&mut self, clicks: ClickSet) {
        assert!(self.stop.is_none(), "push_clicks after stop marker");
        assert!(!self.steps.len().is_multiple_of(2), "expected query, got clicks");
        self.steps.push(SequenceStep::Clicks(clicks));
    }

    /// Appends the stop marker. Panics mid-round or when already terminated.
    pub fn finish(&mut self, kind: StopKind) {
        assert!(self.stop.is_none(), "sequence already terminated");
        assert!(self.steps.len().is_multiple_of(2), "stop marker mid-round");
        self.stop = Some(kind);
    }

    pub fn terminated(&self) -> bool {
        self.stop.is_some()
    }

    pub fn stop_kind(&self) -> Option<StopKind> {
        self.stop
    }

    pub fn steps(&self) -> &[SequenceStep] {
        &self.steps
    }

    /// Number of completed (query, clicks) rounds.
    pub fn n_rounds(&self) -> usize {
        self.steps.len() / 2
    }

    /// Completed rounds as (query, clicks) pairs.
    pub fn rounds(&self) -> impl Iterator<Item = (&Query, &ClickSet)> {
        self.steps.chunks_exact(2).map(|pair| match pair {
            [SequenceStep::Query(q), SequenceStep::Clicks(c)] => (q, c),
            _ => unreachable!("alternation enforced by construction"),
        })
    }

    /// Re-checks the alternation/termination invariants from scratch.
    pub fn validate(&self) -> Result<(), String> {
        for (i, step) in self.steps.iter().enumerate() {
            match (i % 2, step) {
                (0, SequenceStep::Query(_)) | (1, SequenceStep::Clicks(_)) => {}
                _ => return Err(format!("step {i} breaks query/clicks alternation")),
            }
        }
        if self.stop.is_some() && !self.steps.len().is_multiple_of(2) {
            return Err("stop marker appended mid-round".into());
        }
        Ok(())
    }
}

//! Dataset file I/O.
//!
//! Sessions and tasks are stored as UTF-8 line-delimited JSON, one record per
//! line. Malformed lines are collected into a parse-error report (one line per
//! error, `<line>:<field>:<message>`) instead of being silently dropped.
//!
//! Session record:
//! `{"user_id": "...", "task_id": "...", "rounds": [{"query": "...",
//!   "serp": [{"rank": 1, "title": "...", "abstract": "...", "body"?, "url"?}],
//!   "clicks": [1, 3], "dwell"?: [2.5]}]}`
//!
//! Task record: `{"id": "...", "description": "..."}`.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ClickSet, Dataset, Query, Round, SearchResult, Serp, Session, Task};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("failed to read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("failed to write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

/// One schema violation, tied to the 1-based line it occurred on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIssue {
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ParseIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.line, self.field, self.message)
    }
}

/// Formats the parse-error report, one issue per line.
pub fn render_issue_report(issues: &[ParseIssue]) -> String {
    issues.iter().map(ParseIssue::to_string).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Serialize, Deserialize)]
struct ResultRecord {
    rank: Option<usize>,
    title: Option<String>,
    #[serde(rename = "abstract")]
    abstract_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    body: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    url: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RoundRecord {
    query: Option<String>,
    serp: Option<Vec<ResultRecord>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    clicks: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dwell: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionRecord {
    user_id: Option<String>,
    task_id: Option<String>,
    rounds: Option<Vec<RoundRecord>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TaskRecord {
    id: Option<String>,
    description: Option<String>,
}

struct LineScope<'a> {
    line: usize,
    issues: &'a mut Vec<ParseIssue>,
}

impl LineScope<'_> {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ParseIssue { line: self.line, field: field.into(), message: message.into() });
    }

    fn require<T>(&mut self, value: Option<T>, field: &str) -> Option<T> {
        if value.is_none() {
            self.push(field, "missing required field");
        }
        value
    }
}

fn validate_session(record: SessionRecord, scope: &mut LineScope) -> Option<Session> {
    let user_id = scope.require(record.user_id, "user_id")?;
    let task_id = scope.require(record.task_id, "task_id")?;
    let rounds_rec = scope.require(record.rounds, "rounds")?;

    let mut rounds = Vec::with_capacity(rounds_rec.len());
    for (i, r) in rounds_rec.into_iter().enumerate() {
        let at = |suffix: &str| format!("rounds[{i}].{suffix}");

        let query_text = scope.require(r.query, &at("query"))?;
        let query = match Query::parse(query_text) {
            Ok(q) => q,
            Err(e) => {
                scope.push(at("query"), e.to_string());
                return None;
            }
        };

        let serp_rec = scope.require(r.serp, &at("serp"))?;
        let mut results = Vec::with_capacity(serp_rec.len());
        for (j, res) in serp_rec.into_iter().enumerate() {
            let rat = |suffix: &str| format!("rounds[{i}].serp[{j}].{suffix}");
            let rank = scope.require(res.rank, &rat("rank"))?;
            let title = scope.require(res.title, &rat("title"))?;
            let abstract_text = res.abstract_text.unwrap_or_default();
            results.push(SearchResult { rank, title, abstract_text, body: res.body, url: res.url });
        }
        let serp = match Serp::new(results) {
            Ok(s) => s,
            Err(e) => {
                scope.push(at("serp"), e.to_string());
                return None;
            }
        };

        // Missing clicks are loadable (the filter removes such sessions);
        // clicks pointing outside the SERP are schema violations.
        let clicks = match r.clicks {
            None => None,
            Some(list) => {
                let set: ClickSet = list.into_iter().collect();
                if let Some(&bad) = set.iter().find(|&&rank| serp.at_rank(rank).is_none()) {
                    scope.push(at("clicks"), format!("click at rank {bad} outside SERP of {} results", serp.len()));
                    return None;
                }
                Some(set)
            }
        };

        rounds.push(Round { query, serp, clicks, dwell: r.dwell });
    }

    Some(Session::new(user_id, task_id, rounds))
}

fn read_lines(path: &Path) -> Result<Vec<String>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.to_owned(), source })?;
    Ok(text.lines().map(str::to_owned).collect())
}

/// Loads a session file. Well-formed records become sessions; every schema
/// violation is reported with its line number and field.
pub fn load_sessions(path: &Path) -> Result<(Vec<Session>, Vec<ParseIssue>), IoError> {
    let mut sessions = Vec::new();
    let mut issues = Vec::new();
    for (idx, line) in read_lines(path)?.into_iter().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SessionRecord>(&line) {
            Err(e) => issues.push(ParseIssue { line: lineno, field: "-".into(), message: format!("invalid record: {e}") }),
            Ok(record) => {
                let mut scope = LineScope { line: lineno, issues: &mut issues };
                if let Some(session) = validate_session(record, &mut scope) {
                    sessions.push(session);
                }
            }
        }
    }
    Ok((sessions, issues))
}

/// Loads a task file (one task per line).
pub fn load_tasks(path: &Path) -> Result<(Vec<Task>, Vec<ParseIssue>), IoError> {
    let mut tasks = Vec::new();
    let mut issues = Vec::new();
    for (idx, line) in read_lines(path)?.into_iter().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TaskRecord>(&line) {
            Err(e) => issues.push(ParseIssue { line: lineno, field: "-".into(), message: format!("invalid record: {e}") }),
            Ok(record) => {
                let mut scope = LineScope { line: lineno, issues: &mut issues };
                let id = scope.require(record.id, "id");
                let desc = scope.require(record.description, "description");
                if let (Some(id), Some(desc)) = (id, desc) {
                    match Task::new(id, desc) {
                        Ok(t) => tasks.push(t),
                        Err(e) => scope.push("description", e.to_string()),
                    }
                }
            }
        }
    }
    Ok((tasks, issues))
}

/// A loaded dataset together with its parse-error report.
#[derive(Debug)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub issues: Vec<ParseIssue>,
}

/// Loads sessions (and optionally tasks) into a [`Dataset`]. Task-file issues
/// are appended after session-file issues.
pub fn load_dataset(sessions_path: &Path, tasks_path: Option<&Path>) -> Result<LoadedDataset, IoError> {
    let (sessions, mut issues) = load_sessions(sessions_path)?;
    let tasks = match tasks_path {
        None => Vec::new(),
        Some(p) => {
            let (tasks, task_issues) = load_tasks(p)?;
            issues.extend(task_issues);
            tasks
        }
    };
    let provenance = sessions_path.display().to_string();
    Ok(LoadedDataset { dataset: Dataset::new(tasks, sessions, provenance), issues })
}

fn session_to_record(session: &Session) -> SessionRecord {
    SessionRecord {
        user_id: Some(session.user_id.clone()),
        task_id: Some(session.task_id.clone()),
        rounds: Some(
            session
                .rounds
                .iter()
                .map(|r| RoundRecord {
                    query: Some(r.query.text().to_owned()),
                    serp: Some(
                        r.serp
                            .results()
                            .iter()
                            .map(|res| ResultRecord {
                                rank: Some(res.rank),
                                title: Some(res.title.clone()),
                                abstract_text: Some(res.abstract_text.clone()),
                                body: res.body.clone(),
                                url: res.url.clone(),
                            })
                            .collect(),
                    ),
                    clicks: r.clicks.as_ref().map(|c| c.iter().copied().collect()),
                    dwell: r.dwell.clone(),
                })
                .collect(),
        ),
    }
}

fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<(), IoError> {
    let wrap = |source| IoError::Write { path: path.to_owned(), source };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(wrap)?;
        }
    }
    let mut file = fs::File::create(path).map_err(wrap)?;
    for record in records {
        let line = serde_json::to_string(&record).expect("record serialization is infallible");
        writeln!(file, "{line}").map_err(wrap)?;
    }
    Ok(())
}

pub fn save_sessions(path: &Path, sessions: &[Session]) -> Result<(), IoError> {
    write_jsonl(path, sessions.iter().map(session_to_record))
}

pub fn save_tasks(path: &Path, tasks: &[Task]) -> Result<(), IoError> {
    write_jsonl(
        path,
        tasks.iter().map(|t| TaskRecord { id: Some(t.id.clone()), description: Some(t.description.clone()) }),
    )
}

/// Writes both halves of a dataset.
pub fn save_dataset(sessions_path: &Path, tasks_path: &Path, dataset: &Dataset) -> Result<(), IoError> {
    save_sessions(sessions_path, &dataset.sessions)?;
    save_tasks(tasks_path, &dataset.tasks)
}

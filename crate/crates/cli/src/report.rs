//! Report assembly: human-readable tables plus a machine-readable JSONL
//! results file (one record per subject x metric x fold). Every report
//! embeds provenance (dataset digest, seeds, artifact digests) and the
//! published reference rows, clearly labeled and never asserted against.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::Result;
use searchsim::eval::harness::{ClickEvalReport, QueryEvalReport, StopEvalReport};
use searchsim::eval::MetricReport;
use searchsim::reference;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub record: &'static str,
    pub dataset_digest: String,
    pub seed: u64,
    pub folds: usize,
    pub sessions: usize,
    pub artifact_digests: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(dataset_digest: String, seed: u64, folds: usize, sessions: usize) -> Self {
        Self {
            record: "provenance",
            dataset_digest,
            seed,
            folds,
            sessions,
            artifact_digests: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Serialize)]
struct MetricRecord<'a> {
    record: &'static str,
    behavior: &'a str,
    subject: &'a str,
    metric: &'a str,
    fold: Option<String>,
    value: f64,
}

#[derive(Debug, Serialize)]
struct ReferenceRecord<'a> {
    record: &'static str,
    behavior: &'a str,
    subject: &'a str,
    metric: &'a str,
    value: f64,
    label: &'static str,
}

/// Accumulates both output forms in deterministic order.
#[derive(Default)]
pub struct ReportBuilder {
    text: String,
    records: Vec<String>,
}

impl ReportBuilder {
    pub fn new(provenance: &Provenance) -> Self {
        let mut b = Self::default();
        let _ = writeln!(b.text, "search-session simulation evaluation report");
        let _ = writeln!(b.text, "dataset sha256: {}", provenance.dataset_digest);
        let _ = writeln!(b.text, "sessions: {}  seed: {}  folds: {}", provenance.sessions, provenance.seed, provenance.folds);
        for (name, digest) in &provenance.artifact_digests {
            let _ = writeln!(b.text, "artifact {name}: sha256 {digest}");
        }
        let _ = writeln!(b.text);
        b.push_json(provenance);
        b
    }

    fn push_json<T: Serialize>(&mut self, value: &T) {
        self.records.push(serde_json::to_string(value).expect("report records serialize"));
    }

    fn metric(&mut self, behavior: &str, subject: &str, metric: &str, fold: Option<String>, value: f64) {
        self.push_json(&MetricRecord { record: "metric", behavior, subject, metric, fold, value });
    }

    fn metric_set(&mut self, behavior: &str, subject: &str, fold: Option<String>, m: &MetricReport) {
        for (name, value) in
            [("accuracy", m.accuracy), ("precision", m.precision), ("recall", m.recall), ("f1", m.f1)]
        {
            self.metric(behavior, subject, name, fold.clone(), value);
        }
    }

    pub fn query_section(&mut self, reports: &[QueryEvalReport], corpus_rows: &[(String, f64)]) {
        let _ = writeln!(self.text, "== query generation (mean sentence BLEU per round, averaged over sessions) ==");
        let _ = writeln!(self.text, "{:<36} {:>10} {:>9} {:>9}", "subject", "BLEU", "scored", "skipped");
        for r in reports {
            let _ = writeln!(
                self.text,
                "{:<36} {:>10.4} {:>9} {:>9}",
                r.subject, r.mean_bleu, r.rounds.scored, r.rounds.skipped
            );
            self.metric("query", &r.subject, "bleu", None, r.mean_bleu);
            for (task, value) in &r.per_task {
                self.metric("query", &r.subject, &format!("bleu:{task}"), None, *value);
            }
        }
        for (subject, value) in corpus_rows {
            let _ = writeln!(self.text, "{:<36} {:>10.4} (corpus-level BLEU)", subject, value);
            self.metric("query", subject, "bleu-corpus", None, *value);
        }
        for (subject, value) in reference::QUERY_BLEU {
            let _ = writeln!(
                self.text,
                "{:<36} {:>10.4} [{}]",
                format!("{subject} (reference)"),
                value,
                reference::REFERENCE_LABEL
            );
            self.push_json(&ReferenceRecord {
                record: "reference",
                behavior: "query",
                subject,
                metric: "bleu",
                value: *value,
                label: reference::REFERENCE_LABEL,
            });
        }
        let _ = writeln!(self.text);
    }

    fn classification_table(
        &mut self,
        behavior: &'static str,
        title: &str,
        rows: &[(String, MetricReport, Option<Vec<MetricReport>>)],
        reference_rows: &[(&str, f64, f64, f64, f64)],
    ) {
        let _ = writeln!(self.text, "== {title} ==");
        let _ = writeln!(
            self.text,
            "{:<36} {:>9} {:>10} {:>8} {:>9}",
            "subject", "accuracy", "precision", "recall", "f1"
        );
        for (subject, pooled, per_fold) in rows {
            let _ = writeln!(
                self.text,
                "{:<36} {:>9.4} {:>10.4} {:>8.4} {:>9.4}",
                subject, pooled.accuracy, pooled.precision, pooled.recall, pooled.f1
            );
            self.metric_set(behavior, subject, Some("pooled".into()), pooled);
            if let Some(folds) = per_fold {
                for (i, m) in folds.iter().enumerate() {
                    self.metric_set(behavior, subject, Some(i.to_string()), m);
                }
            }
        }
        for (subject, a, p, r, f) in reference_rows {
            let _ = writeln!(
                self.text,
                "{:<36} {:>9.4} {:>10.4} {:>8.4} {:>9.4} [{}]",
                format!("{subject} (reference)"),
                a,
                p,
                r,
                f,
                reference::REFERENCE_LABEL
            );
            for (name, value) in [("accuracy", a), ("precision", p), ("recall", r), ("f1", f)] {
                self.push_json(&ReferenceRecord {
                    record: "reference",
                    behavior,
                    subject,
                    metric: name,
                    value: *value,
                    label: reference::REFERENCE_LABEL,
                });
            }
        }
        let _ = writeln!(self.text);
    }

    pub fn click_section(&mut self, reports: &[ClickEvalReport]) {
        let rows: Vec<(String, MetricReport, Option<Vec<MetricReport>>)> = reports
            .iter()
            .map(|r| {
                let per_fold: Vec<MetricReport> =
                    r.per_fold.iter().filter_map(|c| MetricReport::from_counts(*c).ok()).collect();
                (r.subject.clone(), r.metrics, Some(per_fold))
            })
            .collect();
        self.classification_table(
            "click",
            "click prediction (per-rank, pooled confusion counts over folds)",
            &rows,
            reference::CLICK_PREDICTION,
        );
    }

    pub fn stop_section(&mut self, reports: &[StopEvalReport]) {
        let rows: Vec<(String, MetricReport, Option<Vec<MetricReport>>)> =
            reports.iter().map(|r| (r.subject.clone(), r.metrics, None)).collect();
        self.classification_table(
            "stop",
            "stop prediction (per round boundary, gold stop at the final round)",
            &rows,
            reference::STOP_PREDICTION,
        );
    }

    pub fn note(&mut self, line: &str) {
        let _ = writeln!(self.text, "{line}");
    }

    pub fn finish(self) -> (String, String) {
        let jsonl = self.records.join("\n") + "\n";
        (self.text, jsonl)
    }
}

pub fn write_outputs(out_dir: &std::path::Path, text: &str, jsonl: &str) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("reports.txt"), text)?;
    std::fs::write(out_dir.join("results.jsonl"), jsonl)?;
    Ok(())
}

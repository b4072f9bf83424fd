//! Heuristic stopping rules: fixed depth, frustration point, satisfaction
//! point, and their combination.
//!
//! Decisions are made at round boundaries. The relevance signal defaults to
//! the click proxy: clicked results are relevant, examined-but-skipped ones
//! are not, where "examined" covers ranks down to the deepest click of a
//! round (cascade assumption) or rank 1 when nothing was clicked. Explicit
//! relevance judgments can be supplied instead when a log carries them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::classification_metrics;
use crate::session::{Round, Session};

#[derive(Debug, Error)]
pub enum StopError {
    #[error("cannot fit a stopping rule on an empty dataset")]
    EmptyTrain,
    #[error("rule parameter must be >= 1")]
    ZeroParam,
}

/// A stopping rule with exactly the parameters its kind requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopRule {
    /// Stop once this many rounds are completed.
    FixedDepth { depth: usize },
    /// Stop after this many consecutive non-relevant examined results.
    Frustration { tolerance: usize },
    /// Stop once this many relevant results have been found.
    Satisfaction { target: usize },
    /// Stop when either the frustration or the satisfaction condition fires.
    Combined { tolerance: usize, target: usize },
}

impl StopRule {
    pub fn validate(&self) -> Result<(), StopError> {
        let ok = match *self {
            StopRule::FixedDepth { depth } => depth >= 1,
            StopRule::Frustration { tolerance } => tolerance >= 1,
            StopRule::Satisfaction { target } => target >= 1,
            StopRule::Combined { tolerance, target } => tolerance >= 1 && target >= 1,
        };
        if ok { Ok(()) } else { Err(StopError::ZeroParam) }
    }

    pub fn kind(&self) -> StopRuleKind {
        match self {
            StopRule::FixedDepth { .. } => StopRuleKind::FixedDepth,
            StopRule::Frustration { .. } => StopRuleKind::Frustration,
            StopRule::Satisfaction { .. } => StopRuleKind::Satisfaction,
            StopRule::Combined { .. } => StopRuleKind::Combined,
        }
    }
}

/// Rule families, for fitting and CLI dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRuleKind {
    FixedDepth,
    Frustration,
    Satisfaction,
    Combined,
}

impl StopRuleKind {
    pub fn name(&self) -> &'static str {
        match self {
            StopRuleKind::FixedDepth => "fixed-depth",
            StopRuleKind::Frustration => "frustration",
            StopRuleKind::Satisfaction => "satisfaction",
            StopRuleKind::Combined => "combined",
        }
    }
}

impl std::str::FromStr for StopRuleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "fixed-depth" | "fixed" => Ok(StopRuleKind::FixedDepth),
            "frustration" => Ok(StopRuleKind::Frustration),
            "satisfaction" => Ok(StopRuleKind::Satisfaction),
            "combined" | "f&s" | "fs" => Ok(StopRuleKind::Combined),
            other => Err(format!("unknown stopping rule {other:?}")),
        }
    }
}

/// The state a stop decision sees: rounds completed so far plus the
/// relevance trail of examined results, in examination order.
#[derive(Debug, Clone)]
pub struct SessionPrefix<'a> {
    rounds: &'a [Round],
    trail: Vec<bool>,
}

impl<'a> SessionPrefix<'a> {
    /// Derives the relevance trail from clicks (the default proxy).
    pub fn from_rounds(rounds: &'a [Round]) -> Self {
        let mut trail = Vec::new();
        for round in rounds {
            let clicks = round.clicks_or_empty();
            let deepest = clicks.iter().max().copied().unwrap_or(1);
            let examined = deepest.min(round.serp.len().max(1));
            for rank in 1..=examined {
                trail.push(clicks.contains(&rank));
            }
        }
        Self { rounds, trail }
    }

    /// Uses an explicit relevance trail (e.g. judged labels) instead of the
    /// click proxy.
    pub fn with_trail(rounds: &'a [Round], trail: Vec<bool>) -> Self {
        Self { rounds, trail }
    }

    pub fn rounds_completed(&self) -> usize {
        self.rounds.len()
    }

    pub fn trail(&self) -> &[bool] {
        &self.trail
    }

    fn relevant_count(&self) -> usize {
        self.trail.iter().filter(|&&r| r).count()
    }

    fn trailing_non_relevant(&self) -> usize {
        self.trail.iter().rev().take_while(|&&r| !r).count()
    }
}

/// Evaluates the rule on a prefix. Total: never fails.
pub fn should_stop(rule: &StopRule, prefix: &SessionPrefix) -> bool {
    match *rule {
        StopRule::FixedDepth { depth } => prefix.rounds_completed() >= depth,
        StopRule::Frustration { tolerance } => prefix.trailing_non_relevant() >= tolerance,
        StopRule::Satisfaction { target } => prefix.relevant_count() >= target,
        StopRule::Combined { tolerance, target } => {
            should_stop(&StopRule::Frustration { tolerance }, prefix)
                || should_stop(&StopRule::Satisfaction { target }, prefix)
        }
    }
}

/// Largest parameter value tried by the fit scan; bounded by SERP depth and
/// typical session lengths.
pub const SCAN_MAX: usize = 10;

fn stop_prediction_f1(rule: &StopRule, train: &[Session]) -> f64 {
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for session in train {
        let n = session.rounds.len();
        for t in 1..=n {
            let prefix = SessionPrefix::from_rounds(&session.rounds[..t]);
            pred.push(should_stop(rule, &prefix));
            gold.push(t == n);
        }
    }
    classification_metrics(&pred, &gold).map(|m| m.f1).unwrap_or(0.0)
}

/// Fits a rule's parameters on training sessions. Fixed depth takes the
/// median round count (lower median, floor 1); the other kinds exhaustively
/// scan 1..=10 (jointly for the combined rule) maximizing F1 of the stop
/// prediction, ties breaking to the smallest parameters in scan order.
pub fn fit_rule_params(kind: StopRuleKind, train: &[Session]) -> Result<StopRule, StopError> {
    if train.is_empty() || train.iter().all(|s| s.rounds.is_empty()) {
        return Err(StopError::EmptyTrain);
    }
    let rule = match kind {
        StopRuleKind::FixedDepth => {
            let mut counts: Vec<usize> = train.iter().map(|s| s.rounds.len()).collect();
            counts.sort_unstable();
            let depth = counts[(counts.len() - 1) / 2].max(1);
            StopRule::FixedDepth { depth }
        }
        StopRuleKind::Frustration => scan(train, (1..=SCAN_MAX).map(|tolerance| StopRule::Frustration { tolerance })),
        StopRuleKind::Satisfaction => scan(train, (1..=SCAN_MAX).map(|target| StopRule::Satisfaction { target })),
        StopRuleKind::Combined => scan(
            train,
            (1..=SCAN_MAX).flat_map(|tolerance| {
                (1..=SCAN_MAX).map(move |target| StopRule::Combined { tolerance, target })
            }),
        ),
    };
    Ok(rule)
}

fn scan(train: &[Session], candidates: impl Iterator<Item = StopRule>) -> StopRule {
    let mut best: Option<(StopRule, f64)> = None;
    for rule in candidates {
        let f1 = stop_prediction_f1(&rule, train);
        if best.is_none_or(|(_, s)| f1 > s) {
            best = Some((rule, f1));
        }
    }
    best.expect("candidate iterator is non-empty").0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{ClickSet, Query, Round, SearchResult, Serp};

    fn one_result_round(clicked: bool) -> Round {
        let serp = Serp::new(vec![SearchResult {
            rank: 1,
            title: "t".into(),
            abstract_text: "a".into(),
            body: None,
            url: None,
        }])
        .unwrap();
        let clicks = if clicked { ClickSet::from([1]) } else { ClickSet::new() };
        Round::new(Query::parse("q").unwrap(), serp, clicks).unwrap()
    }

    fn rounds(pattern: &[bool]) -> Vec<Round> {
        pattern.iter().map(|&c| one_result_round(c)).collect()
    }

    fn prefix_with_trail(trail: &[bool]) -> (Vec<Round>, Vec<bool>) {
        (rounds(trail), trail.to_vec())
    }

    #[test]
    fn fixed_depth_rule() {
        let rs = rounds(&[true, false]);
        let prefix = SessionPrefix::from_rounds(&rs);
        assert!(should_stop(&StopRule::FixedDepth { depth: 2 }, &prefix));
        assert!(!should_stop(&StopRule::FixedDepth { depth: 3 }, &prefix));
    }

    #[test]
    fn frustration_counts_trailing_non_relevant() {
        let (rs, trail) = prefix_with_trail(&[true, false, false, false]);
        let prefix = SessionPrefix::with_trail(&rs, trail);
        assert!(should_stop(&StopRule::Frustration { tolerance: 3 }, &prefix));

        let (rs, trail) = prefix_with_trail(&[false, false, true]);
        let prefix = SessionPrefix::with_trail(&rs, trail);
        assert!(!should_stop(&StopRule::Frustration { tolerance: 3 }, &prefix));
    }

    #[test]
    fn combined_is_or_of_parts() {
        let (rs, trail) = prefix_with_trail(&[true, true]);
        let prefix = SessionPrefix::with_trail(&rs, trail);
        // Satisfaction fires even though frustration cannot.
        assert!(should_stop(&StopRule::Combined { tolerance: 3, target: 2 }, &prefix));
        assert!(!should_stop(&StopRule::Frustration { tolerance: 3 }, &prefix));
    }

    #[test]
    fn trail_derivation_uses_cascade_examination() {
        // Click at rank 3 of a 5-result SERP: ranks 1..=3 examined, only
        // rank 3 relevant. A clickless round examines rank 1 only.
        let serp = Serp::new(
            (1..=5)
                .map(|rank| SearchResult {
                    rank,
                    title: format!("t{rank}"),
                    abstract_text: "a".into(),
                    body: None,
                    url: None,
                })
                .collect(),
        )
        .unwrap();
        let clicked = Round::new(Query::parse("q").unwrap(), serp.clone(), ClickSet::from([3])).unwrap();
        let skipped = Round::new(Query::parse("q").unwrap(), serp, ClickSet::new()).unwrap();
        let rs = vec![clicked, skipped];
        let prefix = SessionPrefix::from_rounds(&rs);
        assert_eq!(prefix.trail(), &[false, false, true, false]);
    }

    #[test]
    fn fixed_depth_monotone_under_extension() {
        let rule = StopRule::FixedDepth { depth: 2 };
        let rs = rounds(&[true, false, true, false]);
        let mut stopped = false;
        for t in 1..=rs.len() {
            let now = should_stop(&rule, &SessionPrefix::from_rounds(&rs[..t]));
            assert!(!stopped || now, "fixed depth un-stopped at t={t}");
            stopped = now;
        }
    }

    #[test]
    fn satisfaction_stays_stopped() {
        let rule = StopRule::Satisfaction { target: 2 };
        let rs = rounds(&[true, true, false, false]);
        let mut stopped = false;
        for t in 1..=rs.len() {
            let now = should_stop(&rule, &SessionPrefix::from_rounds(&rs[..t]));
            assert!(!stopped || now, "satisfaction un-stopped at t={t}");
            stopped = now;
        }
    }

    fn session_of(pattern: &[bool]) -> Session {
        Session::new("u", "t", rounds(pattern))
    }

    #[test]
    fn median_depth_fit() {
        let train = [session_of(&[true]), session_of(&[true, false]), session_of(&[true, false, true])];
        let rule = fit_rule_params(StopRuleKind::FixedDepth, &train).unwrap();
        assert_eq!(rule, StopRule::FixedDepth { depth: 2 });

        let single = [session_of(&[true, false, true, false, true])];
        let rule = fit_rule_params(StopRuleKind::FixedDepth, &single).unwrap();
        assert_eq!(rule, StopRule::FixedDepth { depth: 5 });
    }

    #[test]
    fn scan_recovers_planted_frustration_threshold() {
        // Sessions end exactly when the last two examined results were
        // non-relevant, so tolerance 2 predicts every boundary perfectly.
        let train = [
            session_of(&[true, false, false]),
            session_of(&[true, true, false, false]),
            session_of(&[false, true, false, false]),
        ];
        let rule = fit_rule_params(StopRuleKind::Frustration, &train).unwrap();
        assert_eq!(rule, StopRule::Frustration { tolerance: 2 });
    }

    #[test]
    fn empty_train_rejected() {
        assert!(matches!(fit_rule_params(StopRuleKind::FixedDepth, &[]), Err(StopError::EmptyTrain)));
    }
}

//! Evaluation primitives: sentence/corpus BLEU for query similarity,
//! classification metrics for click and stop prediction, and seeded k-fold
//! partitioning. The session-level harness lives in [`harness`].

pub mod harness;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::Query;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction and gold vectors differ in length ({pred} vs {gold})")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("cannot compute metrics over empty vectors")]
    Empty,
    #[error("k must satisfy 2 <= k <= number of sessions, got k={k} with {n} sessions")]
    BadK { k: usize, n: usize },
    #[error("inconsistent confusion counts")]
    BadCounts,
}

/// Raw confusion-matrix counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, pred: bool, gold: bool) {
        match (pred, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

/// Accuracy/precision/recall/F1 plus the counts they were computed from.
/// Ratios with zero denominators are defined as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: ConfusionCounts,
}

impl MetricReport {
    pub fn from_counts(counts: ConfusionCounts) -> Result<Self, EvalError> {
        if counts.total() == 0 {
            return Err(EvalError::Empty);
        }
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let accuracy = ratio(counts.tp + counts.tn, counts.total());
        let precision = ratio(counts.tp, counts.tp + counts.fp);
        let recall = ratio(counts.tp, counts.tp + counts.fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Ok(Self { accuracy, precision, recall, f1, counts })
    }
}

/// Standard binary classification metrics over aligned prediction/gold vectors.
pub fn classification_metrics(pred: &[bool], gold: &[bool]) -> Result<MetricReport, EvalError> {
    if pred.len() != gold.len() {
        return Err(EvalError::LengthMismatch { pred: pred.len(), gold: gold.len() });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut counts = ConfusionCounts::default();
    for (&p, &g) in pred.iter().zip(gold) {
        counts.add(p, g);
    }
    MetricReport::from_counts(counts)
}

fn clipped_ngram_matches(cand: &[String], reference: &[String], n: usize) -> (u64, u64) {
    use std::collections::HashMap;
    if cand.len() < n {
        return (0, 0);
    }
    let mut ref_counts: HashMap<&[String], u64> = HashMap::new();
    if reference.len() >= n {
        for gram in reference.windows(n) {
            *ref_counts.entry(gram).or_insert(0) += 1;
        }
    }
    let mut cand_counts: HashMap<&[String], u64> = HashMap::new();
    for gram in cand.windows(n) {
        *cand_counts.entry(gram).or_insert(0) += 1;
    }
    let total = (cand.len() - n + 1) as u64;
    let matched = cand_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    (matched, total)
}

/// Sentence-level BLEU of a candidate query against a reference query.
///
/// Token n-grams up to `min(max_n, candidate length)` with clipped counts, a
/// brevity penalty, and add-one smoothing on the higher-order precisions
/// (n >= 2). Returns 0 when there is no unigram overlap.
pub fn bleu(candidate: &Query, reference: &Query, max_n: usize) -> f64 {
    bleu_terms(candidate.terms(), reference.terms(), max_n)
}

fn bleu_terms(cand: &[String], reference: &[String], max_n: usize) -> f64 {
    if cand.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let n_max = max_n.max(1).min(cand.len());
    let (uni_matches, _) = clipped_ngram_matches(cand, reference, 1);
    if uni_matches == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=n_max {
        let (matched, total) = clipped_ngram_matches(cand, reference, n);
        let precision = if n == 1 {
            matched as f64 / total as f64
        } else {
            (matched + 1) as f64 / (total + 1) as f64
        };
        log_sum += precision.ln();
    }
    let brevity = if cand.len() > reference.len() {
        1.0
    } else {
        (1.0 - reference.len() as f64 / cand.len() as f64).exp()
    };
    brevity * (log_sum / n_max as f64).exp()
}

/// Corpus-level BLEU: n-gram statistics pooled over all pairs before the
/// precision ratios are taken, with the brevity penalty on total lengths.
/// Exposed for comparison with the default averaged sentence-level scores.
pub fn corpus_bleu(pairs: &[(&Query, &Query)], max_n: usize) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let n_max = max_n
        .max(1)
        .min(pairs.iter().map(|(c, _)| c.terms().len()).max().unwrap_or(1));
    let mut log_sum = 0.0;
    let mut uni_matches = 0;
    for n in 1..=n_max {
        let (mut matched, mut total) = (0u64, 0u64);
        for (cand, reference) in pairs {
            let (m, t) = clipped_ngram_matches(cand.terms(), reference.terms(), n);
            matched += m;
            total += t;
        }
        if n == 1 {
            uni_matches = matched;
            if total == 0 {
                return 0.0;
            }
            log_sum += (matched as f64 / total as f64).ln();
        } else {
            log_sum += ((matched + 1) as f64 / (total + 1) as f64).ln();
        }
    }
    if uni_matches == 0 {
        return 0.0;
    }
    let cand_len: usize = pairs.iter().map(|(c, _)| c.terms().len()).sum();
    let ref_len: usize = pairs.iter().map(|(_, r)| r.terms().len()).sum();
    let brevity = if cand_len > ref_len { 1.0 } else { (1.0 - ref_len as f64 / cand_len as f64).exp() };
    brevity * (log_sum / n_max as f64).exp()
}

/// A seeded partition of sessions into k folds of near-equal size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    k: usize,
    seed: u64,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fold index of each session, in session order.
    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    /// Session indices of one fold, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.fold_of.iter().enumerate().filter(|(_, &f)| f == fold).map(|(i, _)| i).collect()
    }

    /// Session indices outside the fold, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.fold_of.iter().enumerate().filter(|(_, &f)| f != fold).map(|(i, _)| i).collect()
    }
}

/// Shuffles session indices with the seed, then deals them round-robin into
/// k folds. Deterministic per seed; fold sizes differ by at most one.
pub fn kfold(n_sessions: usize, k: usize, seed: u64) -> Result<FoldAssignment, EvalError> {
    if k < 2 || k > n_sessions {
        return Err(EvalError::BadK { k, n: n_sessions });
    }
    let mut order: Vec<usize> = (0..n_sessions).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; n_sessions];
    for (pos, &session) in order.iter().enumerate() {
        fold_of[session] = pos % k;
    }
    Ok(FoldAssignment { fold_of, k, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(text: &str) -> Query {
        Query::parse(text).unwrap()
    }

    #[test]
    fn bleu_identity_is_one() {
        for text in ["a", "a b", "jaguar speed records", "x y z w v"] {
            assert!((bleu(&q(text), &q(text), 4) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bleu_disjoint_is_zero() {
        assert_eq!(bleu(&q("a b c"), &q("x y z"), 4), 0.0);
    }

    #[test]
    fn bleu_partial_overlap_hand_traced() {
        // candidate [a,b,c] vs reference [a,b,d], max_n = 2:
        // p1 = 2/3 clipped, p2 = 1/2 pre-smoothing -> (1+1)/(2+1) smoothed,
        // brevity penalty 1 (equal lengths).
        let got = bleu(&q("a b c"), &q("a b d"), 2);
        let expected = ((2.0f64 / 3.0).ln() * 0.5 + (2.0f64 / 3.0).ln() * 0.5).exp();
        assert!((got - expected).abs() < 1e-12, "got {got}, expected {expected}");
    }

    #[test]
    fn bleu_brevity_penalizes_short_candidates() {
        let long_ref = q("a b c d e f");
        let short_cand = q("a b");
        let full_cand = q("a b c d e f");
        assert!(bleu(&short_cand, &long_ref, 4) < bleu(&full_cand, &long_ref, 4));
    }

    #[test]
    fn bleu_in_unit_interval() {
        let cases = [("a b", "a"), ("a", "a b c"), ("a b a b", "a b"), ("q", "q")];
        for (c, r) in cases {
            let v = bleu(&q(c), &q(r), 4);
            assert!((0.0..=1.0).contains(&v), "bleu({c},{r}) = {v}");
        }
    }

    #[test]
    fn corpus_bleu_pools_counts() {
        let pairs = [(q("a b"), q("a b")), (q("x y"), q("x z"))];
        let refs: Vec<(&Query, &Query)> = pairs.iter().map(|(c, r)| (c, r)).collect();
        let pooled = corpus_bleu(&refs, 2);
        // p1 = 3/4; p2 = (1+1)/(2+1); bp = 1 (equal lengths)
        let expected = ((3.0f64 / 4.0).ln() * 0.5 + (2.0f64 / 3.0).ln() * 0.5).exp();
        assert!((pooled - expected).abs() < 1e-12);
    }

    #[test]
    fn metrics_perfect_prediction() {
        let m = classification_metrics(&[true, false, true], &[true, false, true]).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn metrics_balanced_confusion() {
        // tp=1, fp=1, fn=1, tn=1 -> every metric 0.5
        let m = classification_metrics(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn metrics_zero_denominator_convention() {
        let m = classification_metrics(&[false, false], &[false, false]).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn metrics_reject_mismatched_lengths() {
        assert!(matches!(
            classification_metrics(&[true], &[true, false]),
            Err(EvalError::LengthMismatch { pred: 1, gold: 2 })
        ));
        assert!(matches!(classification_metrics(&[], &[]), Err(EvalError::Empty)));
    }

    #[test]
    fn kfold_sizes_and_determinism() {
        let a = kfold(10, 10, 42).unwrap();
        for fold in 0..10 {
            assert_eq!(a.test_indices(fold).len(), 1);
        }

        let b = kfold(11, 10, 42).unwrap();
        let mut sizes: Vec<usize> = (0..10).map(|f| b.test_indices(f).len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [1, 1, 1, 1, 1, 1, 1, 1, 1, 2]);

        assert_eq!(kfold(11, 10, 42).unwrap(), b);
        assert_ne!(kfold(11, 10, 43).unwrap().fold_of(), b.fold_of());
    }

    #[test]
    fn kfold_rejects_bad_k() {
        assert!(matches!(kfold(5, 1, 0), Err(EvalError::BadK { .. })));
        assert!(matches!(kfold(5, 6, 0), Err(EvalError::BadK { .. })));
    }

    #[test]
    fn kfold_is_exact_partition() {
        let a = kfold(23, 4, 7).unwrap();
        let mut seen = vec![false; 23];
        for fold in 0..4 {
            for idx in a.test_indices(fold) {
                assert!(!seen[idx], "session {idx} in two folds");
                seen[idx] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn report_consistent_with_counts(
                pred in proptest::collection::vec(any::<bool>(), 1..64),
                flips in proptest::collection::vec(any::<bool>(), 1..64)
            ) {
                let gold: Vec<bool> =
                    pred.iter().zip(flips.iter().cycle()).map(|(&p, &f)| p ^ f).collect();
                let m = classification_metrics(&pred, &gold).unwrap();
                let r = MetricReport::from_counts(m.counts).unwrap();
                prop_assert!((m.accuracy - r.accuracy).abs() < 1e-12);
                prop_assert!((m.precision - r.precision).abs() < 1e-12);
                prop_assert!((m.recall - r.recall).abs() < 1e-12);
                prop_assert!((m.f1 - r.f1).abs() < 1e-12);
            }

            #[test]
            fn bleu_bounds(c in "[ab ]{1,12}", r in "[ab ]{1,12}") {
                let (cq, rq) = (Query::parse(c.clone()), Query::parse(r.clone()));
                if let (Ok(cq), Ok(rq)) = (cq, rq) {
                    let v = bleu(&cq, &rq, 4);
                    prop_assert!((0.0..=1.0).contains(&v));
                    prop_assert!((bleu(&cq, &cq, 4) - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}

//! Generative term-sampling query baselines.
//!
//! Queries are simulated by drawing terms from a unigram language model built
//! by linearly weighting four component models (task description, result
//! titles, abstracts, body texts). Query lengths follow a zero-truncated
//! Poisson whose mean is fitted to the real queries. Two term-selection
//! strategies are provided: Random Selection (uniform over the vocabulary)
//! and Popular Selection (probability-proportional without replacement).

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::bleu;
use crate::session::{tokenize, Dataset, Query, Session, Task};

const PROB_SUM_TOL: f64 = 1e-9;

/// Terms removed from component models before mixing (configurable off).
/// Raw body text otherwise drowns content terms.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "from", "has", "have", "he",
    "her", "his", "i", "in", "is", "it", "its", "no", "not", "of", "on", "or", "she", "that",
    "the", "their", "they", "this", "to", "was", "we", "were", "will", "with", "you",
];

#[derive(Debug, Error)]
pub enum QueryGenError {
    #[error("empty corpus: no terms to build a language model from")]
    EmptyCorpus,
    #[error("invalid probability table: {0}")]
    BadProbs(String),
    #[error("invalid mixture weights: {0}")]
    BadWeights(String),
    #[error("vocabulary of {vocab} terms is smaller than requested length {len}")]
    VocabTooSmall { vocab: usize, len: usize },
    #[error("poisson mean must be positive, got {0}")]
    BadLambda(f64),
    #[error("weight grid must be non-empty")]
    EmptyGrid,
    #[error("no sessions available to fit on")]
    NoSessions,
    #[error("unknown task id {0:?}")]
    UnknownTask(String),
}

/// A unigram term distribution. Probabilities are non-negative and sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TermLm {
    probs: BTreeMap<String, f64>,
}

impl TermLm {
    pub fn new(probs: BTreeMap<String, f64>) -> Result<Self, QueryGenError> {
        if probs.is_empty() {
            return Err(QueryGenError::EmptyCorpus);
        }
        if let Some((t, &p)) = probs.iter().find(|(_, &p)| !p.is_finite() || p < 0.0) {
            return Err(QueryGenError::BadProbs(format!("prob of {t:?} is {p}")));
        }
        let sum: f64 = probs.values().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(QueryGenError::BadProbs(format!("probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Maximum-likelihood unigram model: prob(term) = count(term) / total.
    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Result<Self, QueryGenError> {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for term in tokenize(text.as_ref()) {
                *counts.entry(term).or_insert(0) += 1;
            }
        }
        let total: usize = counts.values().sum();
        if total == 0 {
            return Err(QueryGenError::EmptyCorpus);
        }
        let probs = counts.into_iter().map(|(t, c)| (t, c as f64 / total as f64)).collect();
        Self::new(probs)
    }

    pub fn prob(&self, term: &str) -> f64 {
        self.probs.get(term).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &BTreeMap<String, f64> {
        &self.probs
    }

    pub fn vocab_size(&self) -> usize {
        self.probs.len()
    }

    /// Drops the given terms and renormalizes. Fails if nothing remains.
    pub fn without_terms(&self, remove: &BTreeSet<&str>) -> Result<Self, QueryGenError> {
        let kept: BTreeMap<String, f64> =
            self.probs.iter().filter(|(t, _)| !remove.contains(t.as_str())).map(|(t, &p)| (t.clone(), p)).collect();
        let sum: f64 = kept.values().sum();
        if kept.is_empty() || sum <= 0.0 {
            return Err(QueryGenError::EmptyCorpus);
        }
        Self::new(kept.into_iter().map(|(t, p)| (t, p / sum)).collect())
    }
}

/// Maximum-likelihood unigram model over a text corpus.
pub fn build_component_lm<S: AsRef<str>>(texts: &[S]) -> Result<TermLm, QueryGenError> {
    TermLm::from_texts(texts)
}

/// Convex weights over the four mixture components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureWeights {
    pub task: f64,
    pub title: f64,
    #[serde(rename = "abstract")]
    pub abstract_text: f64,
    pub body: f64,
}

impl MixtureWeights {
    pub fn new(task: f64, title: f64, abstract_text: f64, body: f64) -> Result<Self, QueryGenError> {
        let w = Self { task, title, abstract_text, body };
        for v in w.as_array() {
            if !v.is_finite() || v < 0.0 {
                return Err(QueryGenError::BadWeights(format!("negative or non-finite weight {v}")));
            }
        }
        let sum: f64 = w.as_array().iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(QueryGenError::BadWeights(format!("weights sum to {sum}")));
        }
        Ok(w)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.task, self.title, self.abstract_text, self.body]
    }
}

/// Mixes four component models: prob(term) = sum_i w_i * prob_i(term).
pub fn mix_lms(components: &[&TermLm; 4], weights: &MixtureWeights) -> Result<TermLm, QueryGenError> {
    let w = weights.as_array();
    let mut probs: BTreeMap<String, f64> = BTreeMap::new();
    for (lm, wi) in components.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for (term, p) in lm.probs() {
            *probs.entry(term.clone()).or_insert(0.0) += wi * p;
        }
    }
    TermLm::new(probs)
}

/// Poisson query-length model, sampled zero-truncated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryLengthModel {
    lambda: f64,
}

impl QueryLengthModel {
    pub fn new(lambda: f64) -> Result<Self, QueryGenError> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(QueryGenError::BadLambda(lambda));
        }
        Ok(Self { lambda })
    }

    /// Mean set to the average term-length of the real queries.
    pub fn fit(sessions: &[Session]) -> Result<Self, QueryGenError> {
        let lengths: Vec<usize> =
            sessions.iter().flat_map(|s| s.rounds.iter().map(|r| r.query.terms().len())).collect();
        if lengths.is_empty() {
            return Err(QueryGenError::NoSessions);
        }
        Self::new(lengths.iter().sum::<usize>() as f64 / lengths.len() as f64)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Mean of the zero-truncated distribution: lambda / (1 - e^{-lambda}).
    pub fn truncated_mean(&self) -> f64 {
        self.lambda / (1.0 - (-self.lambda).exp())
    }
}

/// Draws a query length: Poisson(lambda), resampled until >= 1.
pub fn sample_length<R: Rng + ?Sized>(model: &QueryLengthModel, rng: &mut R) -> usize {
    let poisson = Poisson::new(model.lambda).expect("lambda validated at construction");
    loop {
        let draw = poisson.sample(rng) as usize;
        if draw >= 1 {
            return draw;
        }
    }
}

/// Random Selection: `len` distinct terms drawn uniformly from the
/// vocabulary (probabilities ignored), joined in draw order.
pub fn gen_query_random<R: Rng + ?Sized>(lm: &TermLm, len: usize, rng: &mut R) -> Result<Query, QueryGenError> {
    if lm.vocab_size() < len || len == 0 {
        return Err(QueryGenError::VocabTooSmall { vocab: lm.vocab_size(), len });
    }
    let mut vocab: Vec<&str> = lm.probs().keys().map(String::as_str).collect();
    let (chosen, _) = vocab.partial_shuffle(rng, len);
    let terms = chosen.iter().map(|t| t.to_string()).collect();
    Ok(Query::from_terms(terms).expect("len >= 1 distinct non-empty terms"))
}

/// Popular Selection: `len` distinct terms drawn without replacement with
/// probability proportional to the model, renormalizing after each draw.
pub fn gen_query_popular<R: Rng + ?Sized>(lm: &TermLm, len: usize, rng: &mut R) -> Result<Query, QueryGenError> {
    if lm.vocab_size() < len || len == 0 {
        return Err(QueryGenError::VocabTooSmall { vocab: lm.vocab_size(), len });
    }
    let mut remaining: Vec<(&str, f64)> = lm.probs().iter().map(|(t, &p)| (t.as_str(), p)).collect();
    let mut terms = Vec::with_capacity(len);
    for _ in 0..len {
        // Terms with zero probability are unreachable through WeightedIndex;
        // if only those remain, fall back to uniform over what's left.
        let total: f64 = remaining.iter().map(|(_, p)| p).sum();
        let idx = if total > 0.0 {
            let dist = WeightedIndex::new(remaining.iter().map(|(_, p)| *p))
                .map_err(|e| QueryGenError::BadProbs(e.to_string()))?;
            dist.sample(rng)
        } else {
            rng.random_range(0..remaining.len())
        };
        terms.push(remaining.swap_remove(idx).0.to_string());
    }
    Ok(Query::from_terms(terms).expect("len >= 1 distinct non-empty terms"))
}

/// The four component corpora backing one task's language model.
#[derive(Debug, Default)]
pub struct TaskCorpus {
    pub task_texts: Vec<String>,
    pub titles: Vec<String>,
    pub abstracts: Vec<String>,
    pub bodies: Vec<String>,
}

impl TaskCorpus {
    /// Collects the corpora from a task and its sessions. Bodies fall back to
    /// abstracts when no result carries body text, so all four components are
    /// buildable on filtered data.
    pub fn collect<'a>(task: &Task, sessions: impl IntoIterator<Item = &'a Session>) -> Self {
        let mut corpus = Self { task_texts: vec![task.description.clone()], ..Default::default() };
        for session in sessions {
            for round in &session.rounds {
                for result in round.serp.results() {
                    corpus.titles.push(result.title.clone());
                    corpus.abstracts.push(result.abstract_text.clone());
                    if let Some(body) = &result.body {
                        corpus.bodies.push(body.clone());
                    }
                }
            }
        }
        if corpus.bodies.is_empty() {
            corpus.bodies = corpus.abstracts.clone();
        }
        corpus
    }

    /// Builds the mixed model for this task.
    pub fn build_lm(&self, weights: &MixtureWeights, remove_stopwords: bool) -> Result<TermLm, QueryGenError> {
        let mut components = [
            build_component_lm(&self.task_texts)?,
            build_component_lm(&self.titles)?,
            build_component_lm(&self.abstracts)?,
            build_component_lm(&self.bodies)?,
        ];
        if remove_stopwords {
            let stop: BTreeSet<&str> = STOPWORDS.iter().copied().collect();
            for lm in &mut components {
                // Keep the raw component if stopword removal would empty it.
                if let Ok(reduced) = lm.without_terms(&stop) {
                    *lm = reduced;
                }
            }
        }
        let [t, ti, a, b] = &components;
        mix_lms(&[t, ti, a, b], weights)
    }
}

/// Which term-selection strategy a generator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermSelection {
    Random,
    Popular,
}

/// A fitted per-task query simulator: mixed term models plus a length model.
#[derive(Debug, Clone)]
pub struct LmQueryGenerator {
    per_task: BTreeMap<String, TermLm>,
    length: QueryLengthModel,
    selection: TermSelection,
    rng: ChaCha8Rng,
}

impl LmQueryGenerator {
    /// Builds per-task models from a dataset. Tasks without sessions are
    /// skipped (nothing to build a document model from).
    pub fn build(
        dataset: &Dataset,
        weights: &MixtureWeights,
        selection: TermSelection,
        remove_stopwords: bool,
        seed: u64,
    ) -> Result<Self, QueryGenError> {
        let length = QueryLengthModel::fit(&dataset.sessions)?;
        let mut per_task = BTreeMap::new();
        for task in &dataset.tasks {
            let sessions: Vec<&Session> = dataset.sessions_for_task(&task.id).collect();
            if sessions.is_empty() {
                continue;
            }
            let corpus = TaskCorpus::collect(task, sessions);
            per_task.insert(task.id.clone(), corpus.build_lm(weights, remove_stopwords)?);
        }
        if per_task.is_empty() {
            return Err(QueryGenError::NoSessions);
        }
        Ok(Self { per_task, length, selection, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn length_model(&self) -> QueryLengthModel {
        self.length
    }

    /// Replaces the fitted length model (e.g. with one from a saved artifact).
    pub fn with_length_model(mut self, length: QueryLengthModel) -> Self {
        self.length = length;
        self
    }

    /// Generates one query for the task. Lengths beyond the vocabulary are
    /// clamped to the vocabulary size to keep generation total.
    pub fn generate(&mut self, task_id: &str) -> Result<Query, QueryGenError> {
        let lm = self.per_task.get(task_id).ok_or_else(|| QueryGenError::UnknownTask(task_id.to_owned()))?;
        let len = sample_length(&self.length, &mut self.rng).min(lm.vocab_size());
        match self.selection {
            TermSelection::Random => gen_query_random(lm, len, &mut self.rng),
            TermSelection::Popular => gen_query_popular(lm, len, &mut self.rng),
        }
    }
}

/// All weight combinations on the 4-simplex at the given step (default 0.1).
pub fn weight_grid(step: f64) -> Vec<MixtureWeights> {
    let n = (1.0 / step).round() as i64;
    let mut grid = Vec::new();
    for i in 0..=n {
        for j in 0..=(n - i) {
            for k in 0..=(n - i - j) {
                let l = n - i - j - k;
                let w = |x: i64| x as f64 / n as f64;
                grid.push(MixtureWeights::new(w(i), w(j), w(k), w(l)).expect("grid point on simplex"));
            }
        }
    }
    grid
}

/// Mean BLEU of Popular-Selection queries against the real queries, averaged
/// over rounds within a session and then over sessions. Generation is
/// re-seeded identically per weight candidate so scores are comparable.
fn mean_bleu_for_weights(train: &Dataset, weights: &MixtureWeights, seed: u64) -> Result<f64, QueryGenError> {
    let mut generator = LmQueryGenerator::build(train, weights, TermSelection::Popular, true, seed)?;
    let mut session_means = Vec::new();
    for session in &train.sessions {
        let mut round_scores = Vec::new();
        for round in &session.rounds {
            let candidate = generator.generate(&session.task_id)?;
            round_scores.push(bleu(&candidate, &round.query, 4));
        }
        if !round_scores.is_empty() {
            session_means.push(round_scores.iter().sum::<f64>() / round_scores.len() as f64);
        }
    }
    if session_means.is_empty() {
        return Err(QueryGenError::NoSessions);
    }
    Ok(session_means.iter().sum::<f64>() / session_means.len() as f64)
}

/// Grid-searches mixture weights, maximizing mean BLEU of Popular-Selection
/// queries on the training sessions. Ties break to the earlier grid point.
pub fn fit_weights(train: &Dataset, grid: &[MixtureWeights], seed: u64) -> Result<MixtureWeights, QueryGenError> {
    if grid.is_empty() {
        return Err(QueryGenError::EmptyGrid);
    }
    let mut best: Option<(MixtureWeights, f64)> = None;
    for &weights in grid {
        let score = mean_bleu_for_weights(train, &weights, seed)?;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((weights, score));
        }
    }
    Ok(best.expect("grid non-empty").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{ClickSet, Round, SearchResult, Serp};

    fn lm(pairs: &[(&str, f64)]) -> TermLm {
        TermLm::new(pairs.iter().map(|(t, p)| (t.to_string(), *p)).collect()).unwrap()
    }

    #[test]
    fn component_lm_counts() {
        let lm = build_component_lm(&["a a b"]).unwrap();
        assert!((lm.prob("a") - 2.0 / 3.0).abs() < 1e-12);
        assert!((lm.prob("b") - 1.0 / 3.0).abs() < 1e-12);

        let lm = build_component_lm(&["x"]).unwrap();
        assert_eq!(lm.prob("x"), 1.0);

        let lm = build_component_lm(&["a b", "b c"]).unwrap();
        assert!((lm.prob("a") - 0.25).abs() < 1e-12);
        assert!((lm.prob("b") - 0.5).abs() < 1e-12);
        assert!((lm.prob("c") - 0.25).abs() < 1e-12);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(build_component_lm(&[""]), Err(QueryGenError::EmptyCorpus)));
        assert!(matches!(build_component_lm::<&str>(&[]), Err(QueryGenError::EmptyCorpus)));
    }

    #[test]
    fn mixing_rules() {
        let a = lm(&[("a", 1.0)]);
        let b = lm(&[("b", 1.0)]);
        let w = MixtureWeights::new(0.5, 0.5, 0.0, 0.0).unwrap();
        let mixed = mix_lms(&[&a, &b, &a, &a], &w).unwrap();
        assert!((mixed.prob("a") - 0.5).abs() < 1e-12);
        assert!((mixed.prob("b") - 0.5).abs() < 1e-12);

        // Convexity fixed point: identical components give back the same LM.
        let x = lm(&[("x", 1.0)]);
        let mixed = mix_lms(&[&x, &x, &x, &x], &MixtureWeights::new(0.25, 0.25, 0.25, 0.25).unwrap()).unwrap();
        assert_eq!(mixed.prob("x"), 1.0);
    }

    #[test]
    fn truncated_sampling_never_zero() {
        let model = QueryLengthModel::new(0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            assert!(sample_length(&model, &mut rng) >= 1);
        }
    }

    #[test]
    fn truncated_mean_formula() {
        let model = QueryLengthModel::new(3.0).unwrap();
        assert!((model.truncated_mean() - 3.0 / (1.0 - (-3.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn random_selection_forced_and_support() {
        let single = lm(&[("a", 1.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(gen_query_random(&single, 1, &mut rng).unwrap().text(), "a");

        let two = lm(&[("a", 0.5), ("b", 0.5)]);
        let mut seen = BTreeSet::new();
        for seed in 0..64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            seen.insert(gen_query_random(&two, 2, &mut rng).unwrap().text().to_owned());
        }
        assert_eq!(seen, BTreeSet::from(["a b".to_owned(), "b a".to_owned()]));
    }

    #[test]
    fn random_selection_rejects_small_vocab() {
        let single = lm(&[("a", 1.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            gen_query_random(&single, 2, &mut rng),
            Err(QueryGenError::VocabTooSmall { vocab: 1, len: 2 })
        ));
    }

    #[test]
    fn popular_selection_proportional() {
        let skewed = lm(&[("a", 0.9), ("b", 0.1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut a_first = 0;
        let n = 2000;
        for _ in 0..n {
            let q = gen_query_popular(&skewed, 2, &mut rng).unwrap();
            assert_eq!(q.terms().len(), 2, "both terms always drawn");
            if q.terms()[0] == "a" {
                a_first += 1;
            }
        }
        let frac = a_first as f64 / n as f64;
        assert!((frac - 0.9).abs() < 0.03, "a first in {frac} of draws");

        let forced = lm(&[("x", 1.0)]);
        assert_eq!(gen_query_popular(&forced, 1, &mut rng).unwrap().text(), "x");
    }

    #[test]
    fn generated_queries_have_distinct_terms() {
        let lm = lm(&[("a", 0.4), ("b", 0.3), ("c", 0.2), ("d", 0.1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let q = gen_query_popular(&lm, 3, &mut rng).unwrap();
            let set: BTreeSet<_> = q.terms().iter().collect();
            assert_eq!(set.len(), q.terms().len());
        }
    }

    #[test]
    fn grid_covers_simplex() {
        let grid = weight_grid(0.1);
        assert_eq!(grid.len(), 286); // C(13,3) compositions of 10 into 4 parts
        for w in &grid {
            assert!((w.as_array().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    fn doc(rank: usize, title: &str, abs: &str) -> SearchResult {
        SearchResult { rank, title: title.into(), abstract_text: abs.into(), body: None, url: None }
    }

    fn tiny_dataset(query_texts: &[&str]) -> Dataset {
        let task = Task::new("t1", "galaxy formation history").unwrap();
        let sessions = query_texts
            .iter()
            .map(|q| {
                let serp = Serp::new(vec![doc(1, "unrelated title words", "generic abstract words")]).unwrap();
                let round = Round::new(Query::parse(*q).unwrap(), serp, ClickSet::from([1])).unwrap();
                Session::new("u1", "t1", vec![round])
            })
            .collect();
        Dataset::new(vec![task], sessions, "test")
    }

    #[test]
    fn fit_weights_singleton_and_tiebreak() {
        let d = tiny_dataset(&["galaxy formation", "formation history"]);
        let only = MixtureWeights::new(1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(fit_weights(&d, &[only], 7).unwrap(), only);

        // Two identical grid points: the first wins.
        let got = fit_weights(&d, &[only, only], 7).unwrap();
        assert_eq!(got, only);
    }

    #[test]
    fn fit_weights_recovers_task_component() {
        // Real queries use task-description vocabulary, never document terms,
        // so the argmax must put the full weight on the task component.
        let d = tiny_dataset(&["galaxy formation", "formation history", "galaxy history"]);
        let grid = [
            MixtureWeights::new(1.0, 0.0, 0.0, 0.0).unwrap(),
            MixtureWeights::new(0.0, 1.0, 0.0, 0.0).unwrap(),
            MixtureWeights::new(0.0, 0.0, 1.0, 0.0).unwrap(),
            MixtureWeights::new(0.5, 0.25, 0.25, 0.0).unwrap(),
        ];
        let best = fit_weights(&d, &grid, 9).unwrap();
        assert_eq!(best, grid[0]);
    }

    #[test]
    fn stopword_removal_renormalizes() {
        let base = lm(&[("the", 0.5), ("jaguar", 0.25), ("speed", 0.25)]);
        let reduced = base.without_terms(&BTreeSet::from(["the"])).unwrap();
        assert!((reduced.prob("jaguar") - 0.5).abs() < 1e-12);
        assert!((reduced.prob("speed") - 0.5).abs() < 1e-12);
        let sum: f64 = reduced.probs().values().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_lm() -> impl Strategy<Value = TermLm> {
            proptest::collection::btree_map("[a-e]{1,3}", 1u32..100, 1..8).prop_map(|counts| {
                let total: u32 = counts.values().sum();
                TermLm::new(counts.into_iter().map(|(t, c)| (t, c as f64 / total as f64)).collect()).unwrap()
            })
        }

        fn arb_weights() -> impl Strategy<Value = MixtureWeights> {
            [1u32..50, 1u32..50, 1u32..50, 1u32..50].prop_map(|raw| {
                let total: u32 = raw.iter().sum();
                let f = |x: u32| x as f64 / total as f64;
                // Feed the exact residual into the last weight so the simplex
                // constraint holds to within the validator's tolerance.
                let (a, b, c) = (f(raw[0]), f(raw[1]), f(raw[2]));
                MixtureWeights::new(a, b, c, 1.0 - a - b - c).unwrap()
            })
        }

        proptest! {
            #[test]
            fn mixture_sums_to_one(
                lms in proptest::collection::vec(arb_lm(), 4),
                w in arb_weights()
            ) {
                let mixed = mix_lms(&[&lms[0], &lms[1], &lms[2], &lms[3]], &w).unwrap();
                let sum: f64 = mixed.probs().values().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
            }
        }
    }
}

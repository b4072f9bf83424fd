//! Probabilistic click models over logged SERPs: position-based (PBM), user
//! browsing (UBM), dependent click (DCM), and dynamic Bayesian network (DBN)
//! families, each fitted with expectation-maximization, plus a
//! regression-based EM variant of PBM for sparse data ([`regpbm`]).
//!
//! All families share the examination hypothesis: a result is clicked iff it
//! is examined and attractive. Attractiveness is indexed by
//! [`ImpressionKey`] (query text + document identity); examination structure
//! is what distinguishes the families.

pub mod dbn;
pub mod dcm;
pub mod features;
pub mod pbm;
pub mod regpbm;
pub mod ubm;

use std::collections::BTreeMap;

use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::session::{ClickSet, Query, SearchResult, Serp, Session};

pub use dbn::DbnParams;
pub use dcm::DcmParams;
pub use features::{features, FeatureVector, FEATURE_DIM};
pub use pbm::PbmParams;
pub use regpbm::{regression_em_fit, RegPbmParams};
pub use ubm::UbmParams;

/// Default value for parameters with no evidence (unseen ranks or cells).
pub(crate) const DEFAULT_PARAM: f64 = 0.5;

/// Fitted probabilities are kept off the exact 0/1 boundary so that EM
/// posteriors and likelihoods stay finite.
pub(crate) const PARAM_FLOOR: f64 = 1e-9;

pub(crate) fn clamp_unit(x: f64) -> f64 {
    x.clamp(PARAM_FLOOR, 1.0 - PARAM_FLOOR)
}

#[derive(Debug, Error)]
pub enum ClickError {
    #[error("cannot fit on a dataset with no clicked-annotated rounds")]
    EmptyDataset,
    #[error("iterations must be >= 1, got 0")]
    ZeroIters,
}

/// Stable identity of one (query, document) pair.
///
/// The query key is the canonical tokenization of the query text; the
/// document key is the url when present, else a digest of the title.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ImpressionKey {
    pub query_key: String,
    pub doc_key: String,
}

impl ImpressionKey {
    pub fn new(query: &Query, result: &SearchResult) -> Self {
        let query_key = query.terms().join(" ");
        let doc_key = match &result.url {
            Some(url) if !url.is_empty() => url.clone(),
            _ => {
                let digest = Sha256::digest(result.title.as_bytes());
                format!("title:{}", hex::encode(&digest[..8]))
            }
        };
        Self { query_key, doc_key }
    }
}

/// Which click-model family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClickModelKind {
    Pbm,
    Ubm,
    Dcm,
    Dbn,
}

impl ClickModelKind {
    pub const ALL: [ClickModelKind; 4] =
        [ClickModelKind::Pbm, ClickModelKind::Ubm, ClickModelKind::Dcm, ClickModelKind::Dbn];

    pub fn name(&self) -> &'static str {
        match self {
            ClickModelKind::Pbm => "pbm",
            ClickModelKind::Ubm => "ubm",
            ClickModelKind::Dcm => "dcm",
            ClickModelKind::Dbn => "dbn",
        }
    }
}

impl std::str::FromStr for ClickModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pbm" => Ok(ClickModelKind::Pbm),
            "ubm" => Ok(ClickModelKind::Ubm),
            "dcm" => Ok(ClickModelKind::Dcm),
            "dbn" => Ok(ClickModelKind::Dbn),
            other => Err(format!("unknown click-model family {other:?}")),
        }
    }
}

/// Fitted parameters of any family.
#[derive(Debug, Clone, PartialEq)]
pub enum ClickModelParams {
    Pbm(PbmParams),
    Ubm(UbmParams),
    Dcm(DcmParams),
    Dbn(DbnParams),
}

impl ClickModelParams {
    pub fn kind(&self) -> ClickModelKind {
        match self {
            ClickModelParams::Pbm(_) => ClickModelKind::Pbm,
            ClickModelParams::Ubm(_) => ClickModelKind::Ubm,
            ClickModelParams::Dcm(_) => ClickModelKind::Dcm,
            ClickModelParams::Dbn(_) => ClickModelKind::Dbn,
        }
    }
}

/// EM controls. `tol` stops iteration early once the log-likelihood
/// improvement of a step falls below it.
#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    pub iters: usize,
    pub tol: f64,
    /// Initialize rank examination at 1/rank instead of 0.5.
    pub reciprocal_gamma_init: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { iters: 100, tol: 1e-8, reciprocal_gamma_init: false }
    }
}

/// A fit result: parameters plus the log-likelihood trace. The first trace
/// entry is the likelihood of the initial parameters; each later entry
/// follows one EM iteration.
#[derive(Debug, Clone)]
pub struct EmFit {
    pub params: ClickModelParams,
    pub trace: Vec<f64>,
}

/// Fits the chosen family with EM.
pub fn em_fit(kind: ClickModelKind, sessions: &[Session], opts: &EmOptions) -> Result<EmFit, ClickError> {
    if opts.iters == 0 {
        return Err(ClickError::ZeroIters);
    }
    let corpus = Corpus::build(sessions);
    if corpus.serps.is_empty() {
        return Err(ClickError::EmptyDataset);
    }
    Ok(match kind {
        ClickModelKind::Pbm => pbm::fit(&corpus, opts),
        ClickModelKind::Ubm => ubm::fit(&corpus, opts),
        ClickModelKind::Dcm => dcm::fit(&corpus, opts),
        ClickModelKind::Dbn => dbn::fit(&corpus, opts),
    })
}

/// Total log P(observed clicks | params) over all click-annotated rounds.
pub fn log_likelihood(params: &ClickModelParams, sessions: &[Session]) -> f64 {
    let corpus = Corpus::build(sessions);
    match params {
        ClickModelParams::Pbm(p) => corpus.serps.iter().map(|s| pbm::serp_log_likelihood(p, &corpus, s)).sum(),
        ClickModelParams::Ubm(p) => corpus.serps.iter().map(|s| ubm::serp_log_likelihood(p, &corpus, s)).sum(),
        ClickModelParams::Dcm(p) => corpus.serps.iter().map(|s| dcm::serp_log_likelihood(p, &corpus, s)).sum(),
        ClickModelParams::Dbn(p) => corpus.serps.iter().map(|s| dbn::serp_log_likelihood(p, &corpus, s)).sum(),
    }
}

/// Marginal click probability per rank.
///
/// With `history` the sequential families condition on the given
/// already-observed clicks at earlier ranks (latent examination is
/// marginalized given those clicks); without it the full forward marginal is
/// returned. PBM ignores history by construction.
pub fn predict_click_probs(
    params: &ClickModelParams,
    query: &Query,
    serp: &Serp,
    history: Option<&ClickSet>,
) -> Vec<f64> {
    match params {
        ClickModelParams::Pbm(p) => pbm::predict(p, query, serp),
        ClickModelParams::Ubm(p) => ubm::predict(p, query, serp, history),
        ClickModelParams::Dcm(p) => dcm::predict(p, query, serp, history),
        ClickModelParams::Dbn(p) => dbn::predict(p, query, serp, history),
    }
}

/// One forward sample of the family's generative process.
pub fn simulate_clicks<R: Rng + ?Sized>(
    params: &ClickModelParams,
    query: &Query,
    serp: &Serp,
    rng: &mut R,
) -> ClickSet {
    match params {
        ClickModelParams::Pbm(p) => pbm::simulate(p, query, serp, rng),
        ClickModelParams::Ubm(p) => ubm::simulate(p, query, serp, rng),
        ClickModelParams::Dcm(p) => dcm::simulate(p, query, serp, rng),
        ClickModelParams::Dbn(p) => dbn::simulate(p, query, serp, rng),
    }
}

/// One observed result slot: interned impression key + click indicator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ItemObs {
    pub key: usize,
    pub clicked: bool,
}

/// One observed SERP (a round with click annotations).
#[derive(Debug, Clone)]
pub(crate) struct SerpObs {
    /// Index = rank - 1.
    pub items: Vec<ItemObs>,
}

impl SerpObs {
    /// Rank of the last clicked result, or None.
    pub fn last_click(&self) -> Option<usize> {
        self.items.iter().rposition(|i| i.clicked).map(|i| i + 1)
    }

    /// UBM distance-to-previous-click for the given 1-based rank
    /// (0 = no prior click).
    pub fn click_distance(&self, rank: usize) -> usize {
        distance_before(rank, |r| self.items[r - 1].clicked)
    }
}

/// Distance from `rank` back to the nearest earlier clicked rank, 0 if none.
pub(crate) fn distance_before(rank: usize, clicked_at: impl Fn(usize) -> bool) -> usize {
    (1..rank).rev().find(|&r| clicked_at(r)).map_or(0, |r| rank - r)
}

/// Interned view of a dataset for fitting: impression keys deduplicated,
/// rounds flattened into observed SERPs. Rounds without click annotations
/// are skipped.
#[derive(Debug, Default)]
pub(crate) struct Corpus {
    pub keys: Vec<ImpressionKey>,
    pub serps: Vec<SerpObs>,
}

impl Corpus {
    pub fn build(sessions: &[Session]) -> Self {
        let mut intern: BTreeMap<ImpressionKey, usize> = BTreeMap::new();
        let mut corpus = Corpus::default();
        for session in sessions {
            for round in &session.rounds {
                let Some(clicks) = &round.clicks else { continue };
                if round.serp.is_empty() {
                    continue;
                }
                let items = round
                    .serp
                    .results()
                    .iter()
                    .map(|result| {
                        let key = ImpressionKey::new(&round.query, result);
                        let next = intern.len();
                        let idx = *intern.entry(key.clone()).or_insert(next);
                        if idx == corpus.keys.len() {
                            corpus.keys.push(key);
                        }
                        ItemObs { key: idx, clicked: clicks.contains(&result.rank) }
                    })
                    .collect();
                corpus.serps.push(SerpObs { items });
            }
        }
        corpus
    }

    pub fn max_rank(&self) -> usize {
        self.serps.iter().map(|s| s.items.len()).max().unwrap_or(0)
    }
}

/// Mean of the fitted per-key values; the prediction default for unseen keys.
pub(crate) fn mean_value(map: &BTreeMap<ImpressionKey, f64>) -> f64 {
    if map.is_empty() {
        DEFAULT_PARAM
    } else {
        map.values().sum::<f64>() / map.len() as f64
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use crate::session::{Query, Round, SearchResult, Serp, Session};

    /// Builds a one-round session over `n` distinct documents with the given
    /// clicked ranks. Document identity is stable across sessions.
    pub fn session(query: &str, n: usize, clicked: &[usize]) -> Session {
        let results = (1..=n)
            .map(|rank| SearchResult {
                rank,
                title: format!("doc-{rank}"),
                abstract_text: format!("abstract {rank}"),
                body: None,
                url: Some(format!("http://d/{rank}")),
            })
            .collect();
        let serp = Serp::new(results).unwrap();
        let round = Round::new(Query::parse(query).unwrap(), serp, clicked.iter().copied().collect()).unwrap();
        Session::new("u", "t", vec![round])
    }

    pub fn assert_monotone(trace: &[f64]) {
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "log-likelihood decreased: {} -> {}", w[0], w[1]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::Query;

    #[test]
    fn impression_key_prefers_url_then_title_digest() {
        let q = Query::parse("Jaguar Speed").unwrap();
        let with_url = SearchResult {
            rank: 1,
            title: "t".into(),
            abstract_text: "a".into(),
            body: None,
            url: Some("http://x".into()),
        };
        let key = ImpressionKey::new(&q, &with_url);
        assert_eq!(key.query_key, "jaguar speed");
        assert_eq!(key.doc_key, "http://x");

        let no_url = SearchResult { url: None, ..with_url.clone() };
        let k1 = ImpressionKey::new(&q, &no_url);
        let k2 = ImpressionKey::new(&q, &no_url);
        assert_eq!(k1, k2, "equal inputs yield equal keys");
        assert!(k1.doc_key.starts_with("title:"));
    }

    #[test]
    fn click_distance_convention() {
        let serp = testutil::session("q", 5, &[2]);
        let corpus = Corpus::build(&[serp]);
        let obs = &corpus.serps[0];
        assert_eq!(obs.click_distance(1), 0, "no prior click");
        assert_eq!(obs.click_distance(2), 0);
        assert_eq!(obs.click_distance(3), 1);
        assert_eq!(obs.click_distance(5), 3);
        assert_eq!(obs.last_click(), Some(2));
    }

    #[test]
    fn corpus_skips_unannotated_rounds() {
        let mut s = testutil::session("q", 3, &[1]);
        s.rounds[0].clicks = None;
        let corpus = Corpus::build(&[s]);
        assert!(corpus.serps.is_empty());
    }

    #[test]
    fn zero_iters_rejected() {
        let s = testutil::session("q", 2, &[1]);
        let opts = EmOptions { iters: 0, ..Default::default() };
        assert!(matches!(em_fit(ClickModelKind::Pbm, &[s], &opts), Err(ClickError::ZeroIters)));
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(
            em_fit(ClickModelKind::Pbm, &[], &EmOptions::default()),
            Err(ClickError::EmptyDataset)
        ));
    }
}

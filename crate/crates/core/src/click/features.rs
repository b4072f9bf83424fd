//! Fixed-order feature vector for the regression-based PBM: query-title and
//! query-abstract term overlap ratios, log token lengths of title and
//! abstract, and a bias term.

use crate::session::{tokenize, Query, SearchResult};

pub const FEATURE_DIM: usize = 5;

pub type FeatureVector = [f64; FEATURE_DIM];

/// Fraction of distinct query terms that occur in the given token list.
fn overlap_ratio(query_terms: &[String], tokens: &[String]) -> f64 {
    use std::collections::BTreeSet;
    let distinct: BTreeSet<&String> = query_terms.iter().collect();
    if distinct.is_empty() {
        return 0.0;
    }
    let present: BTreeSet<&String> = tokens.iter().collect();
    distinct.iter().filter(|t| present.contains(**t)).count() as f64 / distinct.len() as f64
}

/// Deterministic feature extraction. Log lengths floor the token count at 1
/// so empty fields stay finite.
pub fn features(query: &Query, result: &SearchResult) -> FeatureVector {
    let title_tokens = tokenize(&result.title);
    let abstract_tokens = tokenize(&result.abstract_text);
    [
        overlap_ratio(query.terms(), &title_tokens),
        overlap_ratio(query.terms(), &abstract_tokens),
        (title_tokens.len().max(1) as f64).ln(),
        (abstract_tokens.len().max(1) as f64).ln(),
        1.0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(title: &str, abstract_text: &str) -> SearchResult {
        SearchResult { rank: 1, title: title.into(), abstract_text: abstract_text.into(), body: None, url: None }
    }

    #[test]
    fn full_title_overlap() {
        let q = Query::parse("jaguar speed").unwrap();
        let f = features(&q, &result("the jaguar speed record", "unrelated"));
        assert_eq!(f[0], 1.0);
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn disjoint_terms_zero_overlap() {
        let q = Query::parse("jaguar speed").unwrap();
        let f = features(&q, &result("python tutorial", "snake handling"));
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn empty_abstract_uses_length_floor() {
        let q = Query::parse("a").unwrap();
        let f = features(&q, &result("title", ""));
        assert_eq!(f[1], 0.0, "no overlap with empty abstract");
        assert_eq!(f[3], 0.0, "ln(1) under the length-1 floor");
        assert!(f.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn deterministic() {
        let q = Query::parse("x y").unwrap();
        let r = result("x something", "y z");
        assert_eq!(features(&q, &r), features(&q, &r));
    }
}

//! Position-Based Model: P(click | q, d, rank) = alpha(q,d) * gamma(rank).
//!
//! EM updates: a clicked impression contributes 1 to both posteriors; an
//! unclicked one contributes P(A=1|C=0) = a(1-g)/(1-ag) to attractiveness
//! and P(E=1|C=0) = g(1-a)/(1-ag) to examination. The M-step averages the
//! contributions per key and per rank.

use std::collections::BTreeMap;

use rand::Rng;

use super::{clamp_unit, mean_value, Corpus, EmFit, EmOptions, ImpressionKey, SerpObs, DEFAULT_PARAM};
use crate::session::{ClickSet, Query, Serp};

#[derive(Debug, Clone, PartialEq)]
pub struct PbmParams {
    /// Attractiveness per (query, document).
    pub alpha: BTreeMap<ImpressionKey, f64>,
    /// Examination probability per rank; index = rank - 1.
    pub gamma: Vec<f64>,
    /// Attractiveness assumed for keys unseen at fit time.
    pub default_alpha: f64,
}

impl PbmParams {
    /// Ground-truth-style params: one attractiveness for every document.
    pub fn uniform(alpha: f64, gamma: Vec<f64>) -> Self {
        Self { alpha: BTreeMap::new(), gamma, default_alpha: alpha }
    }

    pub fn alpha_for(&self, key: &ImpressionKey) -> f64 {
        self.alpha.get(key).copied().unwrap_or(self.default_alpha)
    }

    pub fn gamma_at(&self, rank: usize) -> f64 {
        self.gamma.get(rank - 1).copied().unwrap_or(DEFAULT_PARAM)
    }
}

fn init_gamma(max_rank: usize, reciprocal: bool) -> Vec<f64> {
    (1..=max_rank).map(|r| if reciprocal { 1.0 / r as f64 } else { DEFAULT_PARAM }).collect()
}

pub(crate) fn fit(corpus: &Corpus, opts: &EmOptions) -> EmFit {
    let n_keys = corpus.keys.len();
    let max_rank = corpus.max_rank();
    let mut alpha = vec![DEFAULT_PARAM; n_keys];
    let mut gamma = init_gamma(max_rank, opts.reciprocal_gamma_init);

    let ll = |alpha: &[f64], gamma: &[f64]| -> f64 {
        corpus
            .serps
            .iter()
            .map(|serp| {
                serp.items
                    .iter()
                    .enumerate()
                    .map(|(i, item)| {
                        let p = alpha[item.key] * gamma[i];
                        if item.clicked { p.ln() } else { (1.0 - p).ln() }
                    })
                    .sum::<f64>()
            })
            .sum()
    };

    let mut trace = vec![ll(&alpha, &gamma)];
    for _ in 0..opts.iters {
        let mut a_num = vec![0.0; n_keys];
        let mut a_cnt = vec![0u64; n_keys];
        let mut e_num = vec![0.0; max_rank];
        let mut e_cnt = vec![0u64; max_rank];

        for serp in &corpus.serps {
            for (i, item) in serp.items.iter().enumerate() {
                let (a, g) = (alpha[item.key], gamma[i]);
                let (pa, pe) = if item.clicked {
                    (1.0, 1.0)
                } else {
                    let denom = (1.0 - a * g).max(f64::MIN_POSITIVE);
                    (a * (1.0 - g) / denom, g * (1.0 - a) / denom)
                };
                a_num[item.key] += pa;
                a_cnt[item.key] += 1;
                e_num[i] += pe;
                e_cnt[i] += 1;
            }
        }

        for k in 0..n_keys {
            if a_cnt[k] > 0 {
                alpha[k] = clamp_unit(a_num[k] / a_cnt[k] as f64);
            }
        }
        for r in 0..max_rank {
            if e_cnt[r] > 0 {
                gamma[r] = clamp_unit(e_num[r] / e_cnt[r] as f64);
            }
        }

        let cur = ll(&alpha, &gamma);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(cur);
        if (cur - prev).abs() < opts.tol {
            break;
        }
    }

    let alpha_map: BTreeMap<ImpressionKey, f64> =
        corpus.keys.iter().cloned().zip(alpha.iter().copied()).collect();
    let default_alpha = mean_value(&alpha_map);
    let params = PbmParams { alpha: alpha_map, gamma, default_alpha };
    EmFit { params: super::ClickModelParams::Pbm(params), trace }
}

pub(crate) fn serp_log_likelihood(params: &PbmParams, corpus: &Corpus, serp: &SerpObs) -> f64 {
    serp.items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let p = params.alpha_for(&corpus.keys[item.key]) * params.gamma_at(i + 1);
            if item.clicked { p.ln() } else { (1.0 - p).ln() }
        })
        .sum()
}

pub(crate) fn predict(params: &PbmParams, query: &Query, serp: &Serp) -> Vec<f64> {
    serp.results()
        .iter()
        .map(|r| params.alpha_for(&ImpressionKey::new(query, r)) * params.gamma_at(r.rank))
        .collect()
}

pub(crate) fn simulate<R: Rng + ?Sized>(params: &PbmParams, query: &Query, serp: &Serp, rng: &mut R) -> ClickSet {
    serp.results()
        .iter()
        .filter(|r| {
            let p = params.alpha_for(&ImpressionKey::new(query, r)) * params.gamma_at(r.rank);
            rng.random_bool(p.clamp(0.0, 1.0))
        })
        .map(|r| r.rank)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::{em_fit, log_likelihood, testutil, ClickModelKind, ClickModelParams, EmOptions};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_clicked_impression_saturates_in_one_iteration() {
        // Clicked impressions contribute full counts, so the first M-step
        // already moves both parameters to the boundary.
        let sessions = [testutil::session("q", 1, &[1])];
        let opts = EmOptions { iters: 1, tol: 0.0, ..Default::default() };
        let fit = em_fit(ClickModelKind::Pbm, &sessions, &opts).unwrap();
        let ClickModelParams::Pbm(p) = fit.params else { panic!() };
        let key = p.alpha.keys().next().unwrap().clone();
        assert!((p.alpha_for(&key) - 1.0).abs() < 1e-6);
        assert!((p.gamma_at(1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn always_clicked_pair_reaches_product_one() {
        let sessions: Vec<_> = (0..20).map(|_| testutil::session("q", 1, &[1])).collect();
        let opts = EmOptions { iters: 50, tol: 0.0, ..Default::default() };
        let fit = em_fit(ClickModelKind::Pbm, &sessions, &opts).unwrap();
        let ClickModelParams::Pbm(p) = &fit.params else { panic!() };
        let key = p.alpha.keys().next().unwrap().clone();
        let product = p.alpha_for(&key) * p.gamma_at(1);
        assert!((product - 1.0).abs() < 1e-3, "alpha*gamma = {product}");
        testutil::assert_monotone(&fit.trace);
    }

    #[test]
    fn log_likelihood_direct_cases() {
        // alpha=1, gamma=1, all clicked -> probability 1 -> log 0
        let sessions = [testutil::session("q", 2, &[1, 2])];
        let certain = ClickModelParams::Pbm(PbmParams::uniform(1.0, vec![1.0, 1.0]));
        assert_eq!(log_likelihood(&certain, &sessions), 0.0);

        // alpha=0.5, gamma=1, single clicked result -> log 0.5
        let one = [testutil::session("q", 1, &[1])];
        let half = ClickModelParams::Pbm(PbmParams::uniform(0.5, vec![1.0]));
        assert!((log_likelihood(&half, &one) - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn predict_is_alpha_times_gamma() {
        let params = PbmParams::uniform(0.4, vec![1.0, 0.5, 0.25]);
        let session = testutil::session("q", 3, &[]);
        let round = &session.rounds[0];
        let probs = predict(&params, &round.query, &round.serp);
        assert_eq!(probs.len(), 3);
        assert!((probs[0] - 0.4).abs() < 1e-12);
        assert!((probs[1] - 0.2).abs() < 1e-12);
        assert!((probs[2] - 0.1).abs() < 1e-12);

        let zero = PbmParams::uniform(0.0, vec![1.0, 0.5, 0.25]);
        assert!(predict(&zero, &round.query, &round.serp).iter().all(|&p| p == 0.0));
    }

    #[test]
    fn simulate_degenerate_params() {
        let session = testutil::session("q", 3, &[]);
        let round = &session.rounds[0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);

        let all = PbmParams::uniform(1.0, vec![1.0; 3]);
        assert_eq!(simulate(&all, &round.query, &round.serp, &mut rng), ClickSet::from([1, 2, 3]));

        let none = PbmParams::uniform(0.0, vec![1.0; 3]);
        assert!(simulate(&none, &round.query, &round.serp, &mut rng).is_empty());
    }

    #[test]
    fn monotone_on_mixed_data() {
        let sessions = [
            testutil::session("q a", 3, &[1]),
            testutil::session("q a", 3, &[2]),
            testutil::session("q b", 3, &[]),
            testutil::session("q b", 3, &[1, 3]),
        ];
        let opts = EmOptions { iters: 40, tol: 0.0, ..Default::default() };
        let fit = em_fit(ClickModelKind::Pbm, &sessions, &opts).unwrap();
        testutil::assert_monotone(&fit.trace);
        let ClickModelParams::Pbm(p) = &fit.params else { panic!() };
        assert!(p.alpha.values().all(|&a| (0.0..=1.0).contains(&a)));
        assert!(p.gamma.iter().all(|&g| (0.0..=1.0).contains(&g)));
    }
}

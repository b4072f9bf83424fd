//! User Browsing Model: examination depends on rank and on the distance to
//! the previous clicked rank in the same SERP, so
//! P(click | q, d, r, d') = alpha(q,d) * gamma(r, d') with d' = 0 meaning no
//! prior click. The previous click is observable, which makes the EM updates
//! the same shape as PBM's, with examination indexed per (rank, distance).

use std::collections::BTreeMap;

use rand::Rng;

use super::{
    clamp_unit, distance_before, mean_value, Corpus, EmFit, EmOptions, ImpressionKey, SerpObs, DEFAULT_PARAM,
};
use crate::session::{ClickSet, Query, Serp};

#[derive(Debug, Clone, PartialEq)]
pub struct UbmParams {
    pub alpha: BTreeMap<ImpressionKey, f64>,
    /// Examination per (rank, distance-to-previous-click); distance 0 = none.
    pub gamma: BTreeMap<(usize, usize), f64>,
    pub default_alpha: f64,
}

impl UbmParams {
    pub fn uniform(alpha: f64, gamma: f64) -> Self {
        let mut map = BTreeMap::new();
        // Invariant: distance < rank.
        for rank in 1..=crate::session::MAX_SERP_DEPTH {
            for dist in 0..rank {
                map.insert((rank, dist), gamma);
            }
        }
        Self { alpha: BTreeMap::new(), gamma: map, default_alpha: alpha }
    }

    pub fn alpha_for(&self, key: &ImpressionKey) -> f64 {
        self.alpha.get(key).copied().unwrap_or(self.default_alpha)
    }

    pub fn gamma_at(&self, rank: usize, dist: usize) -> f64 {
        self.gamma.get(&(rank, dist)).copied().unwrap_or(DEFAULT_PARAM)
    }
}

pub(crate) fn fit(corpus: &Corpus, opts: &EmOptions) -> EmFit {
    let n_keys = corpus.keys.len();
    let mut alpha = vec![DEFAULT_PARAM; n_keys];
    let mut gamma: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for serp in &corpus.serps {
        for rank in 1..=serp.items.len() {
            let dist = serp.click_distance(rank);
            let init = if opts.reciprocal_gamma_init { 1.0 / rank as f64 } else { DEFAULT_PARAM };
            gamma.entry((rank, dist)).or_insert(init);
        }
    }

    let ll = |alpha: &[f64], gamma: &BTreeMap<(usize, usize), f64>| -> f64 {
        corpus
            .serps
            .iter()
            .map(|serp| {
                serp.items
                    .iter()
                    .enumerate()
                    .map(|(i, item)| {
                        let rank = i + 1;
                        let g = gamma[&(rank, serp.click_distance(rank))];
                        let p = alpha[item.key] * g;
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
        let mut e_acc: BTreeMap<(usize, usize), (f64, u64)> = BTreeMap::new();

        for serp in &corpus.serps {
            for (i, item) in serp.items.iter().enumerate() {
                let rank = i + 1;
                let cell = (rank, serp.click_distance(rank));
                let (a, g) = (alpha[item.key], gamma[&cell]);
                let (pa, pe) = if item.clicked {
                    (1.0, 1.0)
                } else {
                    let denom = (1.0 - a * g).max(f64::MIN_POSITIVE);
                    (a * (1.0 - g) / denom, g * (1.0 - a) / denom)
                };
                a_num[item.key] += pa;
                a_cnt[item.key] += 1;
                let e = e_acc.entry(cell).or_insert((0.0, 0));
                e.0 += pe;
                e.1 += 1;
            }
        }

        for k in 0..n_keys {
            if a_cnt[k] > 0 {
                alpha[k] = clamp_unit(a_num[k] / a_cnt[k] as f64);
            }
        }
        for (cell, (num, cnt)) in e_acc {
            gamma.insert(cell, clamp_unit(num / cnt as f64));
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
    let params = UbmParams { alpha: alpha_map, gamma, default_alpha };
    EmFit { params: super::ClickModelParams::Ubm(params), trace }
}

pub(crate) fn serp_log_likelihood(params: &UbmParams, corpus: &Corpus, serp: &SerpObs) -> f64 {
    serp.items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let rank = i + 1;
            let g = params.gamma_at(rank, serp.click_distance(rank));
            let p = params.alpha_for(&corpus.keys[item.key]) * g;
            if item.clicked { p.ln() } else { (1.0 - p).ln() }
        })
        .sum()
}

pub(crate) fn predict(params: &UbmParams, query: &Query, serp: &Serp, history: Option<&ClickSet>) -> Vec<f64> {
    match history {
        Some(clicks) => serp
            .results()
            .iter()
            .map(|r| {
                let dist = distance_before(r.rank, |rank| clicks.contains(&rank));
                params.alpha_for(&ImpressionKey::new(query, r)) * params.gamma_at(r.rank, dist)
            })
            .collect(),
        None => marginal(params, query, serp),
    }
}

/// Full marginal via a forward pass over the last-click state
/// (0 = no click yet, else the rank of the most recent click).
fn marginal(params: &UbmParams, query: &Query, serp: &Serp) -> Vec<f64> {
    let n = serp.len();
    let mut state = vec![0.0; n + 1];
    state[0] = 1.0;
    let mut probs = Vec::with_capacity(n);
    for (i, result) in serp.results().iter().enumerate() {
        let rank = i + 1;
        let a = params.alpha_for(&ImpressionKey::new(query, result));
        let mut click_prob = 0.0;
        let mut next = vec![0.0; n + 1];
        for last in 0..rank {
            let mass = state[last];
            if mass == 0.0 {
                continue;
            }
            let dist = if last == 0 { 0 } else { rank - last };
            let theta = a * params.gamma_at(rank, dist);
            click_prob += mass * theta;
            next[rank] += mass * theta;
            next[last] += mass * (1.0 - theta);
        }
        probs.push(click_prob);
        state = next;
    }
    probs
}

pub(crate) fn simulate<R: Rng + ?Sized>(params: &UbmParams, query: &Query, serp: &Serp, rng: &mut R) -> ClickSet {
    let mut clicks = ClickSet::new();
    let mut last = 0usize;
    for result in serp.results() {
        let dist = if last == 0 { 0 } else { result.rank - last };
        let p = params.alpha_for(&ImpressionKey::new(query, result)) * params.gamma_at(result.rank, dist);
        if rng.random_bool(p.clamp(0.0, 1.0)) {
            clicks.insert(result.rank);
            last = result.rank;
        }
    }
    clicks
}

#[cfg(test)]
mod tests {
    use super::super::{em_fit, testutil, ClickModelKind, ClickModelParams, EmOptions};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn distance_cells_respect_invariant() {
        let sessions = [testutil::session("q", 4, &[1, 3])];
        let fit = em_fit(ClickModelKind::Ubm, &sessions, &EmOptions { iters: 5, ..Default::default() }).unwrap();
        let ClickModelParams::Ubm(p) = fit.params else { panic!() };
        for (&(rank, dist), &g) in &p.gamma {
            assert!(dist < rank, "cell ({rank},{dist}) breaks distance < rank");
            assert!((0.0..=1.0).contains(&g));
        }
    }

    #[test]
    fn monotone_on_mixed_data() {
        let sessions = [
            testutil::session("q a", 4, &[2]),
            testutil::session("q a", 4, &[2, 4]),
            testutil::session("q b", 4, &[]),
            testutil::session("q b", 4, &[1]),
        ];
        let opts = EmOptions { iters: 40, tol: 0.0, ..Default::default() };
        let fit = em_fit(ClickModelKind::Ubm, &sessions, &opts).unwrap();
        testutil::assert_monotone(&fit.trace);
    }

    #[test]
    fn conditional_prediction_uses_history_distance() {
        let mut params = UbmParams::uniform(0.8, 0.5);
        params.gamma.insert((3, 1), 0.9);
        params.gamma.insert((3, 0), 0.1);
        let session = testutil::session("q", 3, &[]);
        let round = &session.rounds[0];

        let with_click = predict(&params, &round.query, &round.serp, Some(&ClickSet::from([2])));
        assert!((with_click[2] - 0.8 * 0.9).abs() < 1e-12);

        let no_click = predict(&params, &round.query, &round.serp, Some(&ClickSet::new()));
        assert!((no_click[2] - 0.8 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn marginal_matches_monte_carlo() {
        let mut params = UbmParams::uniform(0.6, 0.7);
        params.gamma.insert((2, 1), 0.3);
        params.gamma.insert((3, 2), 0.2);
        let session = testutil::session("q", 3, &[]);
        let round = &session.rounds[0];
        let marginals = predict(&params, &round.query, &round.serp, None);

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 60_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            for rank in simulate(&params, &round.query, &round.serp, &mut rng) {
                counts[rank - 1] += 1;
            }
        }
        for (rank, &c) in counts.iter().enumerate() {
            let freq = c as f64 / n as f64;
            assert!(
                (freq - marginals[rank]).abs() < 0.01,
                "rank {}: simulated {freq} vs predicted {}",
                rank + 1,
                marginals[rank]
            );
        }
    }
}

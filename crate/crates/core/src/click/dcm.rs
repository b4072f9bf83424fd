//! Dependent Click Model: cascade examination. The user scans top-down,
//! always continues past an unclicked result, and after a click continues
//! with rank-dependent probability lambda(rank). Once examination stops it
//! never resumes.
//!
//! The only latent quantity given a click vector is whether the user kept
//! examining after the last click, so the E-step reduces to one posterior
//! per SERP.

use std::collections::BTreeMap;

use rand::Rng;

use super::{clamp_unit, mean_value, Corpus, EmFit, EmOptions, ImpressionKey, SerpObs, DEFAULT_PARAM};
use crate::session::{ClickSet, Query, Serp};

#[derive(Debug, Clone, PartialEq)]
pub struct DcmParams {
    pub alpha: BTreeMap<ImpressionKey, f64>,
    /// Probability of continuing after a click at each rank; index = rank - 1.
    pub lambda_cont: Vec<f64>,
    pub default_alpha: f64,
}

impl DcmParams {
    pub fn uniform(alpha: f64, lambda_cont: Vec<f64>) -> Self {
        Self { alpha: BTreeMap::new(), lambda_cont, default_alpha: alpha }
    }

    pub fn alpha_for(&self, key: &ImpressionKey) -> f64 {
        self.alpha.get(key).copied().unwrap_or(self.default_alpha)
    }

    pub fn lambda_at(&self, rank: usize) -> f64 {
        self.lambda_cont.get(rank - 1).copied().unwrap_or(DEFAULT_PARAM)
    }
}

/// Posterior that examination continued past the last click, and the closed
/// form likelihood pieces shared by fit and scoring.
fn continue_posterior(lambda_last: f64, unclicked_below: impl Iterator<Item = f64>) -> (f64, f64) {
    let below: f64 = unclicked_below.map(|a| 1.0 - a).product();
    let tail = (1.0 - lambda_last) + lambda_last * below;
    let rho = if tail <= 0.0 { 0.0 } else { lambda_last * below / tail };
    (rho, tail)
}

pub(crate) fn fit(corpus: &Corpus, opts: &EmOptions) -> EmFit {
    let n_keys = corpus.keys.len();
    let max_rank = corpus.max_rank();
    let mut alpha = vec![DEFAULT_PARAM; n_keys];
    let mut lambda = vec![DEFAULT_PARAM; max_rank];

    let ll = |alpha: &[f64], lambda: &[f64]| -> f64 {
        corpus.serps.iter().map(|s| raw_log_likelihood(s, |i| alpha[s.items[i].key], |r| lambda[r - 1])).sum()
    };

    let mut trace = vec![ll(&alpha, &lambda)];
    for _ in 0..opts.iters {
        let mut a_click = vec![0.0; n_keys];
        let mut a_exam = vec![0.0; n_keys];
        let mut l_succ = vec![0.0; max_rank];
        let mut l_trial = vec![0.0; max_rank];

        for serp in &corpus.serps {
            let n = serp.items.len();
            match serp.last_click() {
                None => {
                    // No clicks: the cascade examines everything.
                    for item in &serp.items {
                        a_exam[item.key] += 1.0;
                    }
                }
                Some(last) => {
                    let (rho, _) = continue_posterior(
                        lambda[last - 1],
                        serp.items[last..].iter().map(|it| alpha[it.key]),
                    );
                    for (i, item) in serp.items.iter().enumerate() {
                        let rank = i + 1;
                        if rank <= last {
                            a_exam[item.key] += 1.0;
                            if item.clicked {
                                a_click[item.key] += 1.0;
                                if rank < last {
                                    // A later click proves this continuation.
                                    l_trial[rank - 1] += 1.0;
                                    l_succ[rank - 1] += 1.0;
                                } else if rank < n {
                                    l_trial[rank - 1] += 1.0;
                                    l_succ[rank - 1] += rho;
                                }
                            }
                        } else {
                            a_exam[item.key] += rho;
                        }
                    }
                }
            }
        }

        for k in 0..n_keys {
            if a_exam[k] > 0.0 {
                alpha[k] = clamp_unit(a_click[k] / a_exam[k]);
            }
        }
        for r in 0..max_rank {
            if l_trial[r] > 0.0 {
                lambda[r] = clamp_unit(l_succ[r] / l_trial[r]);
            }
        }

        let cur = ll(&alpha, &lambda);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(cur);
        if (cur - prev).abs() < opts.tol {
            break;
        }
    }

    let alpha_map: BTreeMap<ImpressionKey, f64> =
        corpus.keys.iter().cloned().zip(alpha.iter().copied()).collect();
    let default_alpha = mean_value(&alpha_map);
    let params = DcmParams { alpha: alpha_map, lambda_cont: lambda, default_alpha };
    EmFit { params: super::ClickModelParams::Dcm(params), trace }
}

fn raw_log_likelihood(serp: &SerpObs, alpha_at: impl Fn(usize) -> f64, lambda_at: impl Fn(usize) -> f64) -> f64 {
    match serp.last_click() {
        None => serp.items.iter().enumerate().map(|(i, _)| (1.0 - alpha_at(i)).ln()).sum(),
        Some(last) => {
            let mut total = 0.0;
            for (i, item) in serp.items.iter().enumerate().take(last) {
                let rank = i + 1;
                let a = alpha_at(i);
                if item.clicked {
                    total += a.ln();
                    if rank < last {
                        total += lambda_at(rank).ln();
                    }
                } else {
                    total += (1.0 - a).ln();
                }
            }
            let (_, tail) =
                continue_posterior(lambda_at(last), (last..serp.items.len()).map(&alpha_at));
            total + tail.ln()
        }
    }
}

pub(crate) fn serp_log_likelihood(params: &DcmParams, corpus: &Corpus, serp: &SerpObs) -> f64 {
    raw_log_likelihood(
        serp,
        |i| params.alpha_for(&corpus.keys[serp.items[i].key]),
        |r| params.lambda_at(r),
    )
}

pub(crate) fn predict(params: &DcmParams, query: &Query, serp: &Serp, history: Option<&ClickSet>) -> Vec<f64> {
    let mut probs = Vec::with_capacity(serp.len());
    // p = P(examined at this rank | what we condition on so far)
    let mut p = 1.0;
    for result in serp.results() {
        let a = params.alpha_for(&ImpressionKey::new(query, result));
        probs.push(p * a);
        p = match history {
            // Condition on the observed click at this rank.
            Some(clicks) if clicks.contains(&result.rank) => params.lambda_at(result.rank),
            Some(_) => {
                let denom = (1.0 - p * a).max(f64::MIN_POSITIVE);
                p * (1.0 - a) / denom
            }
            // Marginalize the click outcome.
            None => p * (a * params.lambda_at(result.rank) + (1.0 - a)),
        };
    }
    probs
}

pub(crate) fn simulate<R: Rng + ?Sized>(params: &DcmParams, query: &Query, serp: &Serp, rng: &mut R) -> ClickSet {
    let mut clicks = ClickSet::new();
    for result in serp.results() {
        let a = params.alpha_for(&ImpressionKey::new(query, result));
        if rng.random_bool(a.clamp(0.0, 1.0)) {
            clicks.insert(result.rank);
            if !rng.random_bool(params.lambda_at(result.rank).clamp(0.0, 1.0)) {
                break;
            }
        }
    }
    clicks
}

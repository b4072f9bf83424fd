//! Dynamic Bayesian Network model. Per (query, document): attractiveness
//! (click given examined) and satisfaction (given clicked); one global
//! persistence scalar gamma. After a satisfying click the user leaves;
//! otherwise examination continues with probability gamma.
//!
//! Given a click vector, every click before the last one is provably
//! unsatisfying and every position up to the last click is examined, so the
//! latent state reduces to the last click's satisfaction plus the rank where
//! examination stopped. The E-step enumerates those configurations exactly.

use std::collections::BTreeMap;

use rand::Rng;

use super::{clamp_unit, mean_value, Corpus, EmFit, EmOptions, ImpressionKey, SerpObs, DEFAULT_PARAM};
use crate::session::{ClickSet, Query, Serp};

#[derive(Debug, Clone, PartialEq)]
pub struct DbnParams {
    /// Attractiveness per (query, document).
    pub attract: BTreeMap<ImpressionKey, f64>,
    /// Satisfaction-after-click per (query, document).
    pub satisfy: BTreeMap<ImpressionKey, f64>,
    /// Persistence: probability of continuing when not satisfied.
    pub gamma: f64,
    pub default_attract: f64,
    pub default_satisfy: f64,
}

impl DbnParams {
    pub fn uniform(attract: f64, satisfy: f64, gamma: f64) -> Self {
        Self {
            attract: BTreeMap::new(),
            satisfy: BTreeMap::new(),
            gamma,
            default_attract: attract,
            default_satisfy: satisfy,
        }
    }

    pub fn attract_for(&self, key: &ImpressionKey) -> f64 {
        self.attract.get(key).copied().unwrap_or(self.default_attract)
    }

    pub fn satisfy_for(&self, key: &ImpressionKey) -> f64 {
        self.satisfy.get(key).copied().unwrap_or(self.default_satisfy)
    }
}

/// Latent-configuration weights for one SERP: the satisfied branch (if any
/// click exists) plus one weight per examination cutoff m.
struct SerpPosterior {
    /// P(last click was satisfying | clicks).
    p_sat: f64,
    /// `tail_ge[i]` = P(cutoff m >= i | clicks), 1-based index into ranks;
    /// entry 0 is unused.
    tail_ge: Vec<f64>,
    /// ln of the observation likelihood.
    log_z: f64,
}

/// Computes the posterior for one SERP given per-position attractiveness and
/// satisfaction values.
fn score_serp(serp_clicks: &[bool], a: &[f64], s: &[f64], gamma: f64) -> SerpPosterior {
    let n = serp_clicks.len();
    let last = serp_clicks.iter().rposition(|&c| c).map(|i| i + 1);

    // Weight of the satisfied branch, then one weight per cutoff m (the last
    // examined rank). With no clicks, the satisfied branch has weight 0 and
    // cutoffs range over 1..=n; with a last click at l they range over l..=n.
    let mut w_sat = 0.0;
    let mut weights: Vec<(usize, f64)> = Vec::new();
    match last {
        None => {
            let mut examined_unclicked = 1.0;
            for m in 1..=n {
                examined_unclicked *= 1.0 - a[m - 1];
                let w = examined_unclicked
                    * gamma.powi(m as i32 - 1)
                    * if m < n { 1.0 - gamma } else { 1.0 };
                weights.push((m, w));
            }
        }
        Some(l) => {
            // Everything up to the last click is examined; clicks before it
            // are provably unsatisfying.
            let mut prefix = 1.0;
            for i in 0..l - 1 {
                prefix *= if serp_clicks[i] { a[i] * (1.0 - s[i]) * gamma } else { (1.0 - a[i]) * gamma };
            }
            prefix *= a[l - 1];

            w_sat = prefix * s[l - 1];
            let nosat = prefix * (1.0 - s[l - 1]);
            let mut below = 1.0;
            for m in l..=n {
                if m > l {
                    below *= 1.0 - a[m - 1];
                }
                let w = nosat
                    * below
                    * gamma.powi((m - l) as i32)
                    * if m < n { 1.0 - gamma } else { 1.0 };
                weights.push((m, w));
            }
        }
    }

    let z = w_sat + weights.iter().map(|(_, w)| w).sum::<f64>();
    let z_safe = z.max(f64::MIN_POSITIVE);
    let mut tail_ge = vec![0.0; n + 2];
    let mut acc = 0.0;
    for &(m, w) in weights.iter().rev() {
        acc += w / z_safe;
        tail_ge[m] = acc;
    }
    SerpPosterior { p_sat: w_sat / z_safe, tail_ge, log_z: z.ln() }
}

pub(crate) fn fit(corpus: &Corpus, opts: &EmOptions) -> EmFit {
    let n_keys = corpus.keys.len();
    let mut attract = vec![DEFAULT_PARAM; n_keys];
    let mut satisfy = vec![DEFAULT_PARAM; n_keys];
    let mut gamma = DEFAULT_PARAM;

    let ll = |attract: &[f64], satisfy: &[f64], gamma: f64| -> f64 {
        corpus
            .serps
            .iter()
            .map(|serp| {
                let clicks: Vec<bool> = serp.items.iter().map(|it| it.clicked).collect();
                let a: Vec<f64> = serp.items.iter().map(|it| attract[it.key]).collect();
                let s: Vec<f64> = serp.items.iter().map(|it| satisfy[it.key]).collect();
                score_serp(&clicks, &a, &s, gamma).log_z
            })
            .sum()
    };

    let mut trace = vec![ll(&attract, &satisfy, gamma)];
    for _ in 0..opts.iters {
        let mut a_click = vec![0.0; n_keys];
        let mut a_exam = vec![0.0; n_keys];
        let mut s_num = vec![0.0; n_keys];
        let mut s_den = vec![0.0; n_keys];
        let mut g_succ = 0.0;
        let mut g_trial = 0.0;

        for serp in &corpus.serps {
            let n = serp.items.len();
            let clicks: Vec<bool> = serp.items.iter().map(|it| it.clicked).collect();
            let a: Vec<f64> = serp.items.iter().map(|it| attract[it.key]).collect();
            let s: Vec<f64> = serp.items.iter().map(|it| satisfy[it.key]).collect();
            let post = score_serp(&clicks, &a, &s, gamma);
            let last = serp.last_click();

            for (i, item) in serp.items.iter().enumerate() {
                let rank = i + 1;
                let examined = match last {
                    Some(l) if rank <= l => 1.0,
                    _ => post.tail_ge[rank],
                };
                a_exam[item.key] += examined;
                if item.clicked {
                    a_click[item.key] += 1.0;
                }
            }

            if let Some(l) = last {
                for (i, item) in serp.items.iter().enumerate().take(l) {
                    if item.clicked {
                        s_den[item.key] += 1.0;
                        if i + 1 == l {
                            s_num[item.key] += post.p_sat;
                        }
                    }
                }
            }

            // Persistence transitions i -> i+1 for i < n.
            for i in 1..n {
                match last {
                    Some(l) if i < l => {
                        g_trial += 1.0;
                        g_succ += 1.0;
                    }
                    Some(l) if i == l => {
                        g_trial += 1.0 - post.p_sat;
                        g_succ += post.tail_ge[i + 1];
                    }
                    _ => {
                        // Beyond the last click (or no clicks at all): the
                        // trial exists only where examination reached.
                        g_trial += post.tail_ge[i];
                        g_succ += post.tail_ge[i + 1];
                    }
                }
            }
        }

        for k in 0..n_keys {
            if a_exam[k] > 0.0 {
                attract[k] = clamp_unit(a_click[k] / a_exam[k]);
            }
            if s_den[k] > 0.0 {
                satisfy[k] = clamp_unit(s_num[k] / s_den[k]);
            }
        }
        if g_trial > 0.0 {
            gamma = clamp_unit(g_succ / g_trial);
        }

        let cur = ll(&attract, &satisfy, gamma);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(cur);
        if (cur - prev).abs() < opts.tol {
            break;
        }
    }

    let attract_map: BTreeMap<ImpressionKey, f64> =
        corpus.keys.iter().cloned().zip(attract.iter().copied()).collect();
    let satisfy_map: BTreeMap<ImpressionKey, f64> =
        corpus.keys.iter().cloned().zip(satisfy.iter().copied()).collect();
    let params = DbnParams {
        default_attract: mean_value(&attract_map),
        default_satisfy: mean_value(&satisfy_map),
        attract: attract_map,
        satisfy: satisfy_map,
        gamma,
    };
    EmFit { params: super::ClickModelParams::Dbn(params), trace }
}

pub(crate) fn serp_log_likelihood(params: &DbnParams, corpus: &Corpus, serp: &SerpObs) -> f64 {
    let clicks: Vec<bool> = serp.items.iter().map(|it| it.clicked).collect();
    let a: Vec<f64> = serp.items.iter().map(|it| params.attract_for(&corpus.keys[it.key])).collect();
    let s: Vec<f64> = serp.items.iter().map(|it| params.satisfy_for(&corpus.keys[it.key])).collect();
    score_serp(&clicks, &a, &s, params.gamma).log_z
}

pub(crate) fn predict(params: &DbnParams, query: &Query, serp: &Serp, history: Option<&ClickSet>) -> Vec<f64> {
    let mut probs = Vec::with_capacity(serp.len());
    let mut p = 1.0; // P(examined | conditioning so far)
    for result in serp.results() {
        let key = ImpressionKey::new(query, result);
        let a = params.attract_for(&key);
        let s = params.satisfy_for(&key);
        probs.push(p * a);
        p = match history {
            Some(clicks) if clicks.contains(&result.rank) => (1.0 - s) * params.gamma,
            Some(_) => {
                let denom = (1.0 - p * a).max(f64::MIN_POSITIVE);
                p * (1.0 - a) / denom * params.gamma
            }
            None => p * params.gamma * (1.0 - a * s),
        };
    }
    probs
}

pub(crate) fn simulate<R: Rng + ?Sized>(params: &DbnParams, query: &Query, serp: &Serp, rng: &mut R) -> ClickSet {
    let mut clicks = ClickSet::new();
    for result in serp.results() {
        let key = ImpressionKey::new(query, result);
        if rng.random_bool(params.attract_for(&key).clamp(0.0, 1.0)) {
            clicks.insert(result.rank);
            if rng.random_bool(params.satisfy_for(&key).clamp(0.0, 1.0)) {
                break;
            }
        }
        if !rng.random_bool(params.gamma.clamp(0.0, 1.0)) {
            break;
        }
    }
    clicks
}

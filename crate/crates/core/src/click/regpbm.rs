//! Regression-based EM for the position-based model.
//!
//! The E-step is PBM's; the M-step replaces per-key attractiveness updates
//! with a logistic model over impression features, fitted to the posterior
//! attraction targets by a fixed number of Newton (IRLS) steps. This shares
//! attractiveness evidence across sparse (query, document) pairs and extends
//! to impressions never seen at training time.

use rand::Rng;

use super::features::{features, FeatureVector, FEATURE_DIM};
use super::{clamp_unit, ClickError, DEFAULT_PARAM};
use crate::session::{ClickSet, Query, Serp, Session};

/// Ridge strength keeping the Newton system well-posed even for degenerate
/// (constant-feature) designs.
const RIDGE: f64 = 1e-6;

/// Newton steps per M-step.
const INNER_STEPS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct RegPbmParams {
    /// Logistic attractiveness weights over the fixed feature order.
    pub weights: FeatureVector,
    /// Examination probability per rank; index = rank - 1.
    pub gamma: Vec<f64>,
}

impl RegPbmParams {
    pub fn gamma_at(&self, rank: usize) -> f64 {
        self.gamma.get(rank - 1).copied().unwrap_or(DEFAULT_PARAM)
    }

    /// Attractiveness via the logistic link.
    pub fn attract(&self, x: &FeatureVector) -> f64 {
        sigmoid(dot(&self.weights, x))
    }

    /// Marginal click probability per rank (PBM structure, so history-free).
    pub fn predict(&self, query: &Query, serp: &Serp) -> Vec<f64> {
        serp.results()
            .iter()
            .map(|r| self.attract(&features(query, r)) * self.gamma_at(r.rank))
            .collect()
    }

    pub fn simulate<R: Rng + ?Sized>(&self, query: &Query, serp: &Serp, rng: &mut R) -> ClickSet {
        serp.results()
            .iter()
            .filter(|r| {
                let p = self.attract(&features(query, r)) * self.gamma_at(r.rank);
                rng.random_bool(p.clamp(0.0, 1.0))
            })
            .map(|r| r.rank)
            .collect()
    }
}

/// Fit result with the per-iteration log-likelihood trace.
#[derive(Debug, Clone)]
pub struct RegPbmFit {
    pub params: RegPbmParams,
    pub trace: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn dot(a: &FeatureVector, b: &FeatureVector) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting for the small Newton system.
#[allow(clippy::needless_range_loop)] // rows of `m` are aliased across the elimination
fn solve_linear(mut m: [[f64; FEATURE_DIM]; FEATURE_DIM], mut b: FeatureVector) -> FeatureVector {
    for col in 0..FEATURE_DIM {
        let pivot = (col..FEATURE_DIM)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .expect("non-empty range");
        m.swap(col, pivot);
        b.swap(col, pivot);
        let diag = m[col][col];
        debug_assert!(diag.abs() > 0.0, "ridge keeps the system non-singular");
        for row in 0..FEATURE_DIM {
            if row == col {
                continue;
            }
            let factor = m[row][col] / diag;
            for k in col..FEATURE_DIM {
                m[row][k] -= factor * m[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; FEATURE_DIM];
    for i in 0..FEATURE_DIM {
        x[i] = b[i] / m[i][i];
    }
    x
}

/// Weighted logistic fit to soft targets: a few Newton steps on the ridge
/// cross-entropy objective, warm-started from the previous weights.
fn fit_logistic(xs: &[FeatureVector], targets: &[f64], start: FeatureVector) -> FeatureVector {
    let mut w = start;
    for _ in 0..INNER_STEPS {
        let mut grad = [0.0; FEATURE_DIM];
        let mut hess = [[0.0; FEATURE_DIM]; FEATURE_DIM];
        for (x, &y) in xs.iter().zip(targets) {
            let p = sigmoid(dot(&w, x));
            let diff = p - y;
            let curve = (p * (1.0 - p)).max(1e-12);
            for i in 0..FEATURE_DIM {
                grad[i] += diff * x[i];
                for j in 0..FEATURE_DIM {
                    hess[i][j] += curve * x[i] * x[j];
                }
            }
        }
        for i in 0..FEATURE_DIM {
            grad[i] += RIDGE * w[i];
            hess[i][i] += RIDGE;
        }
        let step = solve_linear(hess, grad);
        for i in 0..FEATURE_DIM {
            w[i] -= step[i];
        }
    }
    w
}

struct Impression {
    x: FeatureVector,
    rank: usize,
    clicked: bool,
}

/// Fits the regression PBM: PBM E-step, logistic M-step for attractiveness,
/// PBM M-step for rank examination.
pub fn regression_em_fit(sessions: &[Session], iters: usize, tol: f64) -> Result<RegPbmFit, ClickError> {
    if iters == 0 {
        return Err(ClickError::ZeroIters);
    }
    let mut impressions = Vec::new();
    let mut max_rank = 0;
    for session in sessions {
        for round in &session.rounds {
            let Some(clicks) = &round.clicks else { continue };
            for result in round.serp.results() {
                impressions.push(Impression {
                    x: features(&round.query, result),
                    rank: result.rank,
                    clicked: clicks.contains(&result.rank),
                });
                max_rank = max_rank.max(result.rank);
            }
        }
    }
    if impressions.is_empty() {
        return Err(ClickError::EmptyDataset);
    }

    let mut weights = [0.0; FEATURE_DIM]; // sigmoid(0) = 0.5, the PBM init
    let mut gamma = vec![DEFAULT_PARAM; max_rank];

    let ll = |weights: &FeatureVector, gamma: &[f64]| -> f64 {
        impressions
            .iter()
            .map(|imp| {
                let p = sigmoid(dot(weights, &imp.x)) * gamma[imp.rank - 1];
                if imp.clicked { p.ln() } else { (1.0 - p).ln() }
            })
            .sum()
    };

    let mut trace = vec![ll(&weights, &gamma)];
    let mut targets = vec![0.0; impressions.len()];
    let xs: Vec<FeatureVector> = impressions.iter().map(|imp| imp.x).collect();
    for _ in 0..iters {
        let mut e_num = vec![0.0; max_rank];
        let mut e_cnt = vec![0u64; max_rank];
        for (imp, target) in impressions.iter().zip(&mut targets) {
            let a = sigmoid(dot(&weights, &imp.x));
            let g = gamma[imp.rank - 1];
            let (pa, pe) = if imp.clicked {
                (1.0, 1.0)
            } else {
                let denom = (1.0 - a * g).max(f64::MIN_POSITIVE);
                (a * (1.0 - g) / denom, g * (1.0 - a) / denom)
            };
            *target = pa;
            e_num[imp.rank - 1] += pe;
            e_cnt[imp.rank - 1] += 1;
        }

        weights = fit_logistic(&xs, &targets, weights);
        for r in 0..max_rank {
            if e_cnt[r] > 0 {
                gamma[r] = clamp_unit(e_num[r] / e_cnt[r] as f64);
            }
        }

        let cur = ll(&weights, &gamma);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(cur);
        if (cur - prev).abs() < tol {
            break;
        }
    }

    Ok(RegPbmFit { params: RegPbmParams { weights, gamma }, trace })
}

#[cfg(test)]
mod tests {
    use super::super::testutil;
    use super::*;
    use crate::session::{Query, Round, SearchResult, Serp, Session};

    fn overlap_session(query: &str, titles: &[&str], clicked: &[usize]) -> Session {
        let results = titles
            .iter()
            .enumerate()
            .map(|(i, t)| SearchResult {
                rank: i + 1,
                title: (*t).into(),
                abstract_text: format!("abstract {i}"),
                body: None,
                url: Some(format!("http://{}/{i}", t.replace(' ', "-"))),
            })
            .collect();
        let serp = Serp::new(results).unwrap();
        let round = Round::new(Query::parse(query).unwrap(), serp, clicked.iter().copied().collect()).unwrap();
        Session::new("u", "t", vec![round])
    }

    #[test]
    fn one_iteration_runs() {
        let sessions = [testutil::session("q", 3, &[1])];
        let fit = regression_em_fit(&sessions, 1, 0.0).unwrap();
        assert_eq!(fit.trace.len(), 2);
        assert!(fit.params.weights.iter().all(|w| w.is_finite()));
    }

    #[test]
    fn zero_iters_rejected() {
        let sessions = [testutil::session("q", 2, &[])];
        assert!(matches!(regression_em_fit(&sessions, 0, 0.0), Err(ClickError::ZeroIters)));
    }

    #[test]
    fn constant_features_give_constant_attractiveness() {
        // Every impression has identical features, so the logistic model can
        // only express one attractiveness value.
        let sessions: Vec<Session> = (0..6)
            .map(|i| overlap_session("z", &["same title", "same title"], if i % 2 == 0 { &[1] } else { &[] }))
            .collect();
        let fit = regression_em_fit(&sessions, 10, 0.0).unwrap();
        let round = &sessions[0].rounds[0];
        let r = round.serp.results();
        let a0 = fit.params.attract(&features(&round.query, &r[0]));
        let a1 = fit.params.attract(&features(&round.query, &r[1]));
        assert!((a0 - a1).abs() < 1e-12);
    }

    #[test]
    fn overlapping_titles_get_higher_attractiveness() {
        // Clicks always land on the title containing the query term, so the
        // overlap feature must come out positive.
        let mut sessions = Vec::new();
        for _ in 0..10 {
            sessions.push(overlap_session("jaguar", &["jaguar facts", "python facts"], &[1]));
            sessions.push(overlap_session("python", &["snake guide", "python guide"], &[2]));
        }
        let fit = regression_em_fit(&sessions, 20, 0.0).unwrap();
        let round = &sessions[0].rounds[0];
        let r = round.serp.results();
        let hit = fit.params.attract(&features(&round.query, &r[0]));
        let miss = fit.params.attract(&features(&round.query, &r[1]));
        assert!(hit > miss + 0.2, "overlap {hit} vs non-overlap {miss}");
    }

    #[test]
    fn predictions_lie_in_unit_interval() {
        let sessions = [testutil::session("q", 4, &[2]), testutil::session("q", 4, &[])];
        let fit = regression_em_fit(&sessions, 5, 0.0).unwrap();
        let round = &sessions[0].rounds[0];
        for p in fit.params.predict(&round.query, &round.serp) {
            assert!((0.0..=1.0).contains(&p));
        }
    }
}

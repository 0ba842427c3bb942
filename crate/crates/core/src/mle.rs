//! Maximum likelihood fit of a symmetric Beta(a, a) density.

use crate::error::{Error, Result};
use crate::estimate::Sample;
use crate::special::{digamma, ln_beta, trigamma};

const LOWER: f64 = 1e-3;
const UPPER: f64 = 1e3;
const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaFit {
    pub a: f64,
    pub iterations: usize,
    /// Score at `a`; zero at an interior optimum.
    pub score: f64,
}

/// Sufficient statistic `Σ ln Γᵢ + ln(1 − Γᵢ)`.
fn log_stat(sample: &Sample) -> f64 {
    sample.values().iter().map(|g| g.ln() + (-g).ln_1p()).sum()
}

/// `Σ (a−1)(ln Γᵢ + ln(1−Γᵢ)) − n ln B(a, a)`.
pub fn beta_log_likelihood(sample: &Sample, a: f64) -> f64 {
    (a - 1.0) * log_stat(sample) - sample.len() as f64 * ln_beta(a, a)
}

/// Derivative of the log-likelihood in `a`.
pub fn beta_score(sample: &Sample, a: f64) -> f64 {
    score_from(log_stat(sample), sample.len() as f64, a)
}

fn score_from(stat: f64, n: f64, a: f64) -> f64 {
    stat + 2.0 * n * (digamma(2.0 * a) - digamma(a))
}

/// Newton steps on the score, falling back to bisection whenever a step
/// leaves the current bracket. The log-likelihood is concave in `a`, so the
/// bracket `[1e-3, 1e3]` keeps a sign change unless the optimum lies on its
/// boundary.
pub fn beta_mle(sample: &Sample) -> Result<BetaFit> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let stat = log_stat(sample);
    let nf = n as f64;
    let score = |a: f64| score_from(stat, nf, a);
    let (mut lo, mut hi) = (LOWER, UPPER);
    if score(lo) <= 0.0 {
        return Ok(BetaFit { a: lo, iterations: 0, score: score(lo) });
    }
    if score(hi) >= 0.0 {
        return Ok(BetaFit { a: hi, iterations: 0, score: score(hi) });
    }
    let scale = stat.abs().max(nf);
    let mut a = 2.0;
    for it in 1..=MAX_ITER {
        let s = score(a);
        if s.abs() <= 1e-14 * scale {
            return Ok(BetaFit { a, iterations: it, score: s });
        }
        if s > 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let slope = 2.0 * nf * (2.0 * trigamma(2.0 * a) - trigamma(a));
        let newton = a - s / slope;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - a).abs() <= 4.0 * f64::EPSILON * a {
            return Ok(BetaFit { a: next, iterations: it, score: score(next) });
        }
        a = next;
    }
    Err(Error::NonConvergence { what: "beta maximum likelihood", iterations: MAX_ITER })
}

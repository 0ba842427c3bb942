//! Closed-form laws of the population size and of the lineage mean.
//!
//! Started from `N₀` cells that each split at rate `R`, the population at
//! time `T` is negative binomial with success probability `p = e^{−RT}`:
//! `P(N_T = n) = C(n−1, n−N₀) p^{N₀} (1−p)^{n−N₀}` for `n ≥ N₀`.

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Hard cap on the number of series terms.
pub const MAX_SERIES_TERMS: usize = 10_000_000;
const SERIES_TOLERANCE: f64 = 1e-12;
const REANCHOR_EVERY: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationLaw {
    pub n0: u32,
    pub rate: f64,
    pub horizon: f64,
}

impl PopulationLaw {
    pub fn new(n0: u32, rate: f64, horizon: f64) -> Result<Self> {
        if n0 == 0 {
            return Err(Error::param("n0 must be at least 1"));
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::param(format!("rate must be finite and positive, got {rate}")));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::param(format!("horizon must be finite and nonnegative, got {horizon}")));
        }
        Ok(Self { n0, rate, horizon })
    }

    /// `e^{−RT}`.
    pub fn p(&self) -> f64 {
        (-self.rate * self.horizon).exp()
    }

    fn rt(&self) -> f64 {
        self.rate * self.horizon
    }

    /// `ln(1 − e^{−RT})`.
    fn ln_q(&self) -> f64 {
        (-(-self.rt()).exp_m1()).ln()
    }

    fn ln_pmf(&self, n: u64) -> f64 {
        let n0 = u64::from(self.n0);
        let k = (n - n0) as f64;
        let ln_choose = ln_gamma(n as f64) - ln_gamma(k + 1.0) - ln_gamma(n0 as f64);
        let tail = if k == 0.0 { 0.0 } else { k * self.ln_q() };
        ln_choose - f64::from(self.n0) * self.rt() + tail
    }

    /// Sums `Σ_{n ≥ N₀} w(n) P(N_T = n)` for a weight `0 ≤ w ≤ 1` that does
    /// not increase with `n`, stopping once a geometric tail bound falls
    /// under `SERIES_TOLERANCE`.
    fn weighted_series(&self, weight: impl Fn(u64) -> f64) -> Result<f64> {
        let n0 = u64::from(self.n0);
        if self.horizon == 0.0 {
            return Ok(weight(n0));
        }
        let q = -(-self.rt()).exp_m1();
        // Terms are carried as `pmf(n) = t · e^{ln_scale}` so that a vanishing
        // first term cannot underflow the whole sum.
        let ln_scale = self.ln_pmf(n0);
        let mut n = n0;
        let mut t = 1.0;
        let mut sum = 0.0;
        for _ in 0..MAX_SERIES_TERMS {
            sum += weight(n) * t;
            let t_next = t * q * n as f64 / (n + 1 - n0) as f64;
            // Ratio P(n+2)/P(n+1); it decreases in n, so it bounds all later ratios.
            let ratio = q * (n + 1) as f64 / (n + 2 - n0) as f64;
            if ratio < 1.0 {
                let tail = weight(n + 1) * t_next / (1.0 - ratio);
                if tail < SERIES_TOLERANCE * sum || tail == 0.0 {
                    return Ok(sum * ln_scale.exp());
                }
            }
            n += 1;
            t = if (n - n0) % REANCHOR_EVERY == 0 { (self.ln_pmf(n) - ln_scale).exp() } else { t_next };
            if t > 1e250 {
                return Err(Error::param("population law too spread out for series evaluation"));
            }
        }
        Err(Error::TruncationExceeded { max_terms: MAX_SERIES_TERMS })
    }
}

/// `P(N_T = n)`; zero below `N₀`.
pub fn nt_pmf(law: &PopulationLaw, n: u64) -> f64 {
    let n0 = u64::from(law.n0);
    if n < n0 {
        return 0.0;
    }
    if law.horizon == 0.0 {
        return if n == n0 { 1.0 } else { 0.0 };
    }
    law.ln_pmf(n).exp()
}

/// `E[N_T] = N₀ e^{RT}`.
pub fn nt_mean(law: &PopulationLaw) -> f64 {
    f64::from(law.n0) * law.rt().exp()
}

/// `E[1/N_T]`.
///
/// One founder has the closed form `RT e^{−RT} / (1 − e^{−RT})`. Several
/// founders use the pmf series: the alternating closed form loses about
/// `(N₀−1)RT / ln 10` digits to cancellation.
pub fn inv_nt_expectation(law: &PopulationLaw) -> Result<f64> {
    if law.horizon <= 0.0 {
        return Err(Error::param("E[1/N_T] needs a positive horizon"));
    }
    if law.n0 == 1 {
        let rt = law.rt();
        return Ok(rt / rt.exp_m1());
    }
    law.weighted_series(|n| 1.0 / n as f64)
}

/// `E[1/N_T]` from the finite alternating sum
/// `(p/q)^{N₀} (−1)^{N₀−1} [RT + Σ_{k=1}^{N₀−1} C(N₀−1,k) (−1)^k (e^{kRT} − 1)/k]`.
/// Usable only while `N₀·RT` is small.
pub fn inv_nt_expectation_alternating(law: &PopulationLaw) -> Result<f64> {
    if law.horizon <= 0.0 {
        return Err(Error::param("E[1/N_T] needs a positive horizon"));
    }
    let rt = law.rt();
    let m = law.n0 - 1;
    let mut bracket = rt;
    let mut binom = 1.0;
    for k in 1..=m {
        binom *= f64::from(m - k + 1) / f64::from(k);
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        bracket += sign * binom * (f64::from(k) * rt).exp_m1() / f64::from(k);
    }
    let odds = law.p() / -(-rt).exp_m1();
    let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
    Ok(odds.powi(law.n0 as i32) * sign * bracket)
}

/// Total probability mass captured by the truncated series.
pub fn nt_total_mass(law: &PopulationLaw) -> Result<f64> {
    law.weighted_series(|_| 1.0)
}

/// `ϱ(T)^{−1}`: `e^{−RT + ln(RT)} / (1 − e^{−RT})` for one founder,
/// `e^{−RT}` otherwise.
pub fn rate_factor(n0: u32, rate: f64, horizon: f64) -> Result<f64> {
    let rt = rate * horizon;
    if !(rt.is_finite() && rt > 0.0) {
        return Err(Error::param(format!("rate factor needs R·T > 0, got {rt}")));
    }
    if n0 == 0 {
        return Err(Error::param("n0 must be at least 1"));
    }
    Ok(if n0 == 1 { rt / rt.exp_m1() } else { (-rt).exp() })
}

/// One-lineage process whose mean tracks the population mean age.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxiliaryLaw {
    pub y0: f64,
    pub alpha: f64,
    pub rate: f64,
}

impl AuxiliaryLaw {
    pub fn limit(&self) -> f64 {
        self.alpha / self.rate
    }

    pub fn expectation_at(&self, t: f64) -> f64 {
        auxiliary_mean(self, t)
    }
}

/// `E[Y_t] = (Y₀ − α/R) e^{−Rt} + α/R`.
pub fn auxiliary_mean(law: &AuxiliaryLaw, t: f64) -> f64 {
    let limit = law.limit();
    (law.y0 - limit) * (-law.rate * t).exp() + limit
}

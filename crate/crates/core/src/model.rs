//! Laws of the division fraction Γ.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_beta;

/// Density of the fraction of toxicity inherited by one daughter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DivisionKernelModel {
    /// Symmetric Beta(a, a).
    Beta { a: f64 },
    /// `weight · Beta(a1, b1) + (1 − weight) · Beta(a2, b2)`.
    BetaMixture { weight: f64, a1: f64, b1: f64, a2: f64, b2: f64 },
    /// Piecewise-linear density through `(grid[i], values[i])`.
    Tabulated(TabulatedDensity),
}

impl DivisionKernelModel {
    /// The two-bump mixture ½Β(2,6) + ½Β(6,2).
    pub fn symmetric_mixture() -> Self {
        DivisionKernelModel::BetaMixture { weight: 0.5, a1: 2.0, b1: 6.0, a2: 6.0, b2: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!("{name} must be finite and positive, got {v}")))
            }
        };
        match self {
            DivisionKernelModel::Beta { a } => positive("a", *a),
            DivisionKernelModel::BetaMixture { weight, a1, b1, a2, b2 } => {
                if !(weight.is_finite() && (0.0..=1.0).contains(weight)) {
                    return Err(Error::param(format!("mixture weight must lie in [0, 1], got {weight}")));
                }
                positive("a1", *a1)?;
                positive("b1", *b1)?;
                positive("a2", *a2)?;
                positive("b2", *b2)
            }
            DivisionKernelModel::Tabulated(t) => t.validate(),
        }
    }

    /// Density at `x`; zero outside the open interval (0, 1).
    pub fn density(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return 0.0;
        }
        match self {
            DivisionKernelModel::Beta { a } => beta_pdf(x, *a, *a),
            DivisionKernelModel::BetaMixture { weight, a1, b1, a2, b2 } => {
                weight * beta_pdf(x, *a1, *b1) + (1.0 - weight) * beta_pdf(x, *a2, *b2)
            }
            DivisionKernelModel::Tabulated(t) => t.density(x),
        }
    }

    /// Draws one fraction strictly inside (0, 1).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let g = match self {
                DivisionKernelModel::Beta { a } => beta_variate(rng, *a, *a),
                DivisionKernelModel::BetaMixture { weight, a1, b1, a2, b2 } => {
                    if rng.random::<f64>() < *weight {
                        beta_variate(rng, *a1, *b1)
                    } else {
                        beta_variate(rng, *a2, *b2)
                    }
                }
                DivisionKernelModel::Tabulated(t) => t.inverse_cdf(rng.random::<f64>()),
            };
            // Boundary values only arise from underflow; P(Γ ∈ {0, 1}) = 0.
            if g > 0.0 && g < 1.0 {
                return g;
            }
        }
    }

    /// True when the density is known to be symmetric about ½.
    pub fn is_symmetric(&self) -> bool {
        match self {
            DivisionKernelModel::Beta { .. } => true,
            DivisionKernelModel::BetaMixture { weight, a1, b1, a2, b2 } => {
                (a1 == b1 && a2 == b2) || (*weight == 0.5 && a1 == b2 && b1 == a2)
            }
            DivisionKernelModel::Tabulated(_) => false,
        }
    }
}

fn beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)).exp()
}

/// Beta variate as the ratio `X / (X + Y)` of independent gammas.
fn beta_variate<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let ga = Gamma::new(a, 1.0).expect("validated shape");
    let gb = Gamma::new(b, 1.0).expect("validated shape");
    let x = ga.sample(rng);
    let y = gb.sample(rng);
    x / (x + y)
}

/// A user-supplied density tabulated on nodes of [0, 1], linear between nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawTabulated", into = "RawTabulated")]
pub struct TabulatedDensity {
    grid: Vec<f64>,
    values: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTabulated {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawTabulated> for TabulatedDensity {
    type Error = Error;

    fn try_from(raw: RawTabulated) -> Result<Self> {
        TabulatedDensity::new(raw.grid, raw.values)
    }
}

impl From<TabulatedDensity> for RawTabulated {
    fn from(t: TabulatedDensity) -> Self {
        RawTabulated { grid: t.grid, values: t.values }
    }
}

impl PartialEq for TabulatedDensity {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

impl TabulatedDensity {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mut t = TabulatedDensity { grid, values, cdf: Vec::new() };
        t.validate()?;
        let mut acc = 0.0;
        t.cdf.push(0.0);
        for (x, y) in t.grid.windows(2).zip(t.values.windows(2)) {
            acc += 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
            t.cdf.push(acc);
        }
        Ok(t)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn validate(&self) -> Result<()> {
        let (g, v) = (&self.grid, &self.values);
        if g.len() < 2 || g.len() != v.len() {
            return Err(Error::param("tabulated density needs matching grid/values of length >= 2"));
        }
        if g[0] < 0.0 || g[g.len() - 1] > 1.0 || g.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("tabulated grid must be strictly increasing inside [0, 1]"));
        }
        if v.iter().any(|&y| !(y.is_finite() && y >= 0.0)) {
            return Err(Error::param("tabulated density values must be finite and nonnegative"));
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::param(format!("tabulated density integrates to {mass}, expected 1")));
        }
        Ok(())
    }

    fn total_mass(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    pub fn density(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x < g[0] || x > g[g.len() - 1] {
            return 0.0;
        }
        let i = match g.partition_point(|&gi| gi <= x) {
            0 => 0,
            k if k >= g.len() => g.len() - 2,
            k => k - 1,
        };
        let t = (x - g[i]) / (g[i + 1] - g[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    /// Exact inverse of the piecewise-quadratic CDF.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let cdf = &self.cdf;
        let total = cdf[cdf.len() - 1];
        let target = u * total;
        let i = cdf.partition_point(|&c| c <= target).clamp(1, cdf.len() - 1) - 1;
        let (x0, x1) = (self.grid[i], self.grid[i + 1]);
        let (f0, f1) = (self.values[i], self.values[i + 1]);
        let w = x1 - x0;
        let slope = (f1 - f0) / w;
        let r = (target - cdf[i]).max(0.0);
        // Solve f0 t + slope t²/2 = r in the stable form.
        let disc = (f0 * f0 + 2.0 * slope * r).max(0.0);
        let denom = f0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        x0 + t.min(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let n = panels + panels % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn beta_and_mixture_are_symmetric() {
        for m in [DivisionKernelModel::Beta { a: 2.0 }, DivisionKernelModel::Beta { a: 0.6 }, DivisionKernelModel::symmetric_mixture()] {
            assert!(m.is_symmetric());
            for i in 1..200 {
                let x = i as f64 / 200.0;
                let (l, r) = (m.density(x), m.density(1.0 - x));
                assert!((l - r).abs() <= 1e-12 * l.max(1.0), "{m:?} at {x}");
            }
        }
    }

    #[test]
    fn densities_integrate_to_one() {
        for m in [DivisionKernelModel::Beta { a: 2.0 }, DivisionKernelModel::symmetric_mixture()] {
            let mass = simpson(|x| m.density(x), 0.0, 1.0, 20_000);
            assert!((mass - 1.0).abs() < 1e-9, "{mass}");
        }
        assert_eq!(DivisionKernelModel::Beta { a: 2.0 }.density(-0.1), 0.0);
        assert_eq!(DivisionKernelModel::Beta { a: 2.0 }.density(1.0), 0.0);
    }

    #[test]
    fn beta22_density_closed_form() {
        let m = DivisionKernelModel::Beta { a: 2.0 };
        for &x in &[0.1, 0.25, 0.5, 0.9] {
            assert!((m.density(x) - 6.0 * x * (1.0 - x)).abs() < 1e-13);
        }
    }

    #[test]
    fn samples_stay_inside_unit_interval() {
        let mut rng = seeded(3);
        for m in [DivisionKernelModel::Beta { a: 0.05 }, DivisionKernelModel::Beta { a: 2.0 }] {
            for _ in 0..20_000 {
                let g = m.sample(&mut rng);
                assert!(g > 0.0 && g < 1.0);
            }
        }
    }

    #[test]
    fn tabulated_rejects_bad_mass() {
        assert!(TabulatedDensity::new(vec![0.0, 1.0], vec![2.0, 2.0]).is_err());
        assert!(TabulatedDensity::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_ok());
        assert!(TabulatedDensity::new(vec![0.0, 0.5, 0.4, 1.0], vec![1.0; 4]).is_err());
        assert!(TabulatedDensity::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn tabulated_inverse_cdf_inverts_cdf() {
        // Triangular density 2x on [0, 1]: CDF x², inverse √u.
        let t = TabulatedDensity::new(vec![0.0, 1.0], vec![0.0, 2.0]).unwrap();
        for &u in &[0.01, 0.2, 0.5, 0.81, 0.999] {
            assert!((t.inverse_cdf(u) - u.sqrt()).abs() < 1e-12);
        }
        let flat = TabulatedDensity::new(vec![0.0, 0.5, 1.0], vec![1.0, 1.0, 1.0]).unwrap();
        for &u in &[0.1, 0.5, 0.73] {
            assert!((flat.inverse_cdf(u) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn config_roundtrip() {
        let m: DivisionKernelModel = toml::from_str("kind = \"beta\"\na = 2.0").unwrap();
        assert_eq!(m, DivisionKernelModel::Beta { a: 2.0 });
        let mix: DivisionKernelModel =
            toml::from_str("kind = \"beta_mixture\"\nweight = 0.5\na1 = 2.0\nb1 = 6.0\na2 = 6.0\nb2 = 2.0").unwrap();
        assert_eq!(mix, DivisionKernelModel::symmetric_mixture());
    }
}

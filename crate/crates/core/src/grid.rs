//! Uniform evaluation grids and trapezoid integrals over them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationGrid {
    pub lo: f64,
    pub hi: f64,
    #[serde(rename = "points")]
    pub n_points: usize,
}

impl Default for EvaluationGrid {
    /// 2001 points on [−0.5, 1.5].
    fn default() -> Self {
        Self { lo: -0.5, hi: 1.5, n_points: 2001 }
    }
}

impl EvaluationGrid {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self> {
        let g = Self { lo, hi, n_points };
        g.validate()?;
        Ok(g)
    }

    /// The grid must strictly contain (0, 1).
    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < 0.0 && self.hi > 1.0) {
            return Err(Error::param(format!(
                "grid [{}, {}] must satisfy lo < 0 < 1 < hi",
                self.lo, self.hi
            )));
        }
        if self.n_points < 2 {
            return Err(Error::param("grid needs at least 2 points"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n_points - 1) as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k + 1 == self.n_points {
            return self.hi;
        }
        self.lo + (self.hi - self.lo) * (k as f64 / (self.n_points - 1) as f64)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.point(k)).collect()
    }

    pub fn tabulate(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_points).map(|k| f(self.point(k))).collect()
    }

    /// True when the reflection `x ↦ 1 − x` maps the grid onto itself.
    pub fn is_symmetric(&self) -> bool {
        (self.lo + self.hi - 1.0).abs() <= 1e-12
    }

    /// Composite trapezoid rule for tabulated values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let inner: f64 = values.iter().sum();
        self.step() * (inner - 0.5 * (values[0] + values[values.len() - 1]))
    }

    /// `∫ f²` by the trapezoid rule.
    pub fn squared_norm(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let inner: f64 = values.iter().map(|v| v * v).sum();
        let (a, b) = (values[0], values[values.len() - 1]);
        self.step() * (inner - 0.5 * (a * a + b * b))
    }

    /// `∫ (f − g)²` by the trapezoid rule.
    pub fn squared_distance(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n_points);
        debug_assert_eq!(g.len(), self.n_points);
        let inner: f64 = f.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
        let last = f.len() - 1;
        let (d0, d1) = (f[0] - g[0], f[last] - g[last]);
        self.step() * (inner - 0.5 * (d0 * d0 + d1 * d1))
    }
}

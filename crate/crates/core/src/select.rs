//! Bandwidth selection: Goldenshluger–Lepski, leave-one-out cross
//! validation, the normal rule of thumb and the ISE oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{
    double_kde, kde_values, DensityEstimate, DiagnosticRow, Diagnostics, GridFunction, OnGrid, OracleMode, Sample, Selector,
};
use crate::grid::EvaluationGrid;
use crate::kernel::SmoothingKernel;
use crate::spectral::{pair_sum_exact, LineSpectrum, SpectralKde};

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_CAP: usize = 128;
pub const DEFAULT_EPSILON: f64 = -0.68;

/// Candidate bandwidths, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthGrid {
    values: Vec<f64>,
    delta: Option<f64>,
    cap: Option<usize>,
}

impl BandwidthGrid {
    /// `{1, 1/2, …, 1/Δ_max}` with `Δ_max = max(1, min(⌊δ M_T⌋, cap))`.
    pub fn for_sample_size(m_t: usize, delta: f64, cap: usize) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::param(format!("delta must be finite and positive, got {delta}")));
        }
        if cap == 0 {
            return Err(Error::param("bandwidth cap must be at least 1"));
        }
        let delta_max = ((delta * m_t as f64).floor() as usize).min(cap).max(1);
        Ok(Self { values: reciprocals(delta_max), delta: Some(delta), cap: Some(cap) })
    }

    /// `{1, 1/2, …, 1/Δ_max}`.
    pub fn reciprocal(delta_max: usize) -> Result<Self> {
        if delta_max == 0 {
            return Err(Error::param("the bandwidth grid needs at least one member"));
        }
        Ok(Self { values: reciprocals(delta_max), delta: None, cap: None })
    }

    /// Arbitrary distinct bandwidths in (0, 1].
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("the bandwidth grid needs at least one member"));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return Err(Error::param(format!("bandwidth {bad} is outside (0, 1]")));
        }
        values.sort_unstable_by(|a, b| b.total_cmp(a));
        if values.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("bandwidths must be distinct"));
        }
        Ok(Self { values, delta: None, cap: None })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn cap(&self) -> Option<usize> {
        self.cap
    }

    pub fn smallest(&self) -> f64 {
        *self.values.last().expect("grid is never empty")
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }
}

fn reciprocals(delta_max: usize) -> Vec<f64> {
    (1..=delta_max).map(|d| 1.0 / d as f64).collect()
}

/// Index of the smallest objective; on ties the earliest entry wins, which
/// is the largest bandwidth for grids sorted largest first.
pub fn argmin_first(objective: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in objective.iter().enumerate().skip(1) {
        if *v < objective[best] {
            best = i;
        }
    }
    best
}

/// Estimates of one sample on a grid for any number of bandwidths, by FFT
/// when the kernel has a Fourier transform and directly otherwise.
pub enum Tabulator<'a> {
    Spectral(SpectralKde<'a>),
    Direct { sample: &'a [f64], kernel: &'a dyn SmoothingKernel, grid: EvaluationGrid },
}

impl<'a> Tabulator<'a> {
    pub fn new(sample: &'a [f64], kernel: &'a dyn SmoothingKernel, grid: EvaluationGrid) -> Self {
        match SpectralKde::new(sample, kernel, grid) {
            Some(s) => Self::Spectral(s),
            None => Self::Direct { sample, kernel, grid },
        }
    }

    pub fn values(&mut self, ell: f64) -> Vec<f64> {
        match self {
            Self::Spectral(s) => s.values(ell),
            Self::Direct { sample, kernel, grid } => kde_values(sample, *kernel, ell, grid),
        }
    }
}

/// `ĥ_ℓ` tabulated on the grid, by FFT when the kernel allows it.
pub fn fast_kde_values(sample: &[f64], kernel: &dyn SmoothingKernel, ell: f64, grid: &EvaluationGrid) -> Vec<f64> {
    Tabulator::new(sample, kernel, *grid).values(ell)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > -1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("epsilon must exceed -1, got {epsilon}")))
    }
}

/// The pairwise distances `‖ĥ_{ℓ,ℓ′} − ĥ_ℓ′‖₂` for one sample.
///
/// Computing them is the expensive part of GL; selecting for a given ε
/// afterwards is cheap, so calibration runs reuse one table per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GlTable {
    ells: Vec<f64>,
    m_t: usize,
    l1: f64,
    l2: f64,
    /// `dist[i][j] = ‖ĥ_{ℓᵢ,ℓⱼ} − ĥ_{ℓⱼ}‖₂`.
    dist: Vec<Vec<f64>>,
}

/// Outcome of a GL selection for one ε.
#[derive(Debug, Clone, PartialEq)]
pub struct GlChoice {
    pub index: usize,
    pub ell: f64,
    pub rows: Vec<DiagnosticRow>,
}

impl GlTable {
    /// Norms are taken over the whole real line through the sample's
    /// characteristic function when the kernel has a Fourier transform, and
    /// by trapezoid on `grid` otherwise.
    pub fn compute(sample: &Sample, kernel: &dyn SmoothingKernel, h: &BandwidthGrid, grid: &EvaluationGrid) -> Result<Self> {
        grid.validate()?;
        let ells = h.values().to_vec();
        let data = sample.values();
        // K_ℓ ⋆ K_ℓ′ reaches no further than ℓ + ℓ′ times the kernel's radius.
        let dist = match LineSpectrum::new(data, kernel, h.smallest(), 2.0 * h.largest()) {
            Some(spec) => {
                let transfers: Vec<Vec<f64>> = ells.iter().map(|&l| spec.transfer(l)).collect();
                transfers
                    .iter()
                    .map(|outer| transfers.iter().map(|inner| spec.smoothing_gap(outer, inner).max(0.0).sqrt()).collect())
                    .collect()
            }
            None => {
                let mut tab = Tabulator::new(data, kernel, *grid);
                let singles: Vec<Vec<f64>> = ells.iter().map(|&l| tab.values(l)).collect();
                let mut dist = vec![vec![0.0; ells.len()]; ells.len()];
                for (i, &l) in ells.iter().enumerate() {
                    for (j, &lp) in ells.iter().enumerate() {
                        let doubled = double_kde(sample, kernel, l, lp, grid)?;
                        dist[i][j] = grid.squared_distance(&doubled.values, &singles[j]).max(0.0).sqrt();
                    }
                }
                dist
            }
        };
        Ok(Self { ells, m_t: sample.len(), l1: kernel.l1_norm(), l2: kernel.l2_norm(), dist })
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.ells
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    /// `χ‖K‖₂/√(M_T ℓ)`.
    fn penalty(&self, chi: f64, ell: f64) -> f64 {
        chi * self.l2 / (self.m_t as f64 * ell).sqrt()
    }

    /// `ℓ̂ = argmin A(ℓ) + χ‖K‖₂/√(M_T ℓ)` with `χ = (1+ε)(1+‖K‖₁)`.
    pub fn select(&self, epsilon: f64) -> Result<GlChoice> {
        check_epsilon(epsilon)?;
        let chi = (1.0 + epsilon) * (1.0 + self.l1);
        let penalties: Vec<f64> = self.ells.iter().map(|&l| self.penalty(chi, l)).collect();
        let rows: Vec<DiagnosticRow> = self
            .ells
            .iter()
            .enumerate()
            .map(|(i, &ell)| {
                let a = self.dist[i].iter().zip(&penalties).map(|(d, p)| d - p).fold(0.0, f64::max);
                DiagnosticRow { ell, a: Some(a), penalty: Some(penalties[i]), objective: a + penalties[i] }
            })
            .collect();
        let objective: Vec<f64> = rows.iter().map(|r| r.objective).collect();
        let index = argmin_first(&objective);
        Ok(GlChoice { index, ell: self.ells[index], rows })
    }
}

/// Goldenshluger–Lepski estimate.
pub fn gl_select(
    sample: &Sample,
    kernel: &dyn SmoothingKernel,
    h: &BandwidthGrid,
    epsilon: f64,
    grid: &EvaluationGrid,
) -> Result<DensityEstimate> {
    check_epsilon(epsilon)?;
    let choice = GlTable::compute(sample, kernel, h, grid)?.select(epsilon)?;
    Ok(DensityEstimate {
        grid: *grid,
        values: fast_kde_values(sample.values(), kernel, choice.ell, grid),
        bandwidth: choice.ell,
        method: Selector::Gl,
        m_t: sample.len(),
        diagnostics: Diagnostics { epsilon: Some(epsilon), delta: h.delta(), oracle_mode: None, rows: choice.rows },
    })
}

/// Leave-one-out criterion `∫ĥ_ℓ² − (2/(n(n−1))) Σ_{i≠j} K_ℓ(Γᵢ − Γⱼ)` per bandwidth.
pub fn cv_objective(sample: &Sample, kernel: &dyn SmoothingKernel, h: &BandwidthGrid, grid: &EvaluationGrid) -> Result<Vec<f64>> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    grid.validate()?;
    let data = sample.values();
    let nf = n as f64;
    let cross = |pairs: f64, ell: f64| 2.0 * (pairs - nf * kernel.scaled(ell, 0.0)) / (nf * (nf - 1.0));
    let s_max = kernel.self_convolution(h.largest(), h.largest()).unwrap_or(2.0 * h.largest());
    Ok(match LineSpectrum::new(data, kernel, h.smallest(), s_max) {
        Some(spec) => h
            .values()
            .iter()
            .map(|&ell| spec.squared_norm(ell) - cross(spec.pair_sum(ell), ell))
            .collect(),
        None => {
            let mut tab = Tabulator::new(data, kernel, *grid);
            h.values()
                .iter()
                .map(|&ell| grid.squared_norm(&tab.values(ell)) - cross(pair_sum_exact(data, kernel, ell), ell))
                .collect()
        }
    })
}

/// Leave-one-out cross-validation estimate.
pub fn cv_select(sample: &Sample, kernel: &dyn SmoothingKernel, h: &BandwidthGrid, grid: &EvaluationGrid) -> Result<DensityEstimate> {
    let objective = cv_objective(sample, kernel, h, grid)?;
    let index = argmin_first(&objective);
    let ell = h.values()[index];
    let rows = h
        .values()
        .iter()
        .zip(&objective)
        .map(|(&ell, &o)| DiagnosticRow { ell, a: None, penalty: None, objective: o })
        .collect();
    Ok(DensityEstimate {
        grid: *grid,
        values: fast_kde_values(sample.values(), kernel, ell, grid),
        bandwidth: ell,
        method: Selector::Cv,
        m_t: sample.len(),
        diagnostics: Diagnostics { epsilon: None, delta: h.delta(), oracle_mode: None, rows },
    })
}

/// `1.06 σ̂ n^{−1/5}`.
pub fn rot_bandwidth(sample: &Sample) -> Result<f64> {
    let n = sample.len();
    if n < 2 {
        return Err(Error::SampleTooSmall { needed: 2, got: n });
    }
    let sd = sample.sd();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(1.06 * sd * (n as f64).powf(-0.2))
}

/// Normal rule-of-thumb estimate.
pub fn rot_select(sample: &Sample, kernel: &dyn SmoothingKernel, grid: &EvaluationGrid) -> Result<DensityEstimate> {
    grid.validate()?;
    let ell = rot_bandwidth(sample)?;
    Ok(DensityEstimate {
        grid: *grid,
        values: fast_kde_values(sample.values(), kernel, ell, grid),
        bandwidth: ell,
        method: Selector::Rot,
        m_t: sample.len(),
        diagnostics: Diagnostics::default(),
    })
}

/// `‖ĥ_ℓ − h‖₂²` for every bandwidth in `ells`.
pub fn ise_profile(sample: &Sample, kernel: &dyn SmoothingKernel, ells: &[f64], truth: &GridFunction) -> Vec<f64> {
    let grid = *truth.grid();
    let mut tab = Tabulator::new(sample.values(), kernel, grid);
    ells.iter().map(|&ell| grid.squared_distance(&tab.values(ell), truth.values())).collect()
}

/// Bandwidth minimizing this sample's own integrated squared error.
pub fn oracle_select(
    sample: &Sample,
    kernel: &dyn SmoothingKernel,
    h: &BandwidthGrid,
    grid: &EvaluationGrid,
    truth: &GridFunction,
) -> Result<DensityEstimate> {
    if truth.grid() != grid {
        return Err(Error::GridMismatch);
    }
    grid.validate()?;
    let objective = ise_profile(sample, kernel, h.values(), truth);
    let index = argmin_first(&objective);
    let rows = h
        .values()
        .iter()
        .zip(&objective)
        .map(|(&ell, &o)| DiagnosticRow { ell, a: None, penalty: None, objective: o })
        .collect();
    Ok(DensityEstimate {
        grid: *grid,
        values: fast_kde_values(sample.values(), kernel, h.values()[index], grid),
        bandwidth: h.values()[index],
        method: Selector::Oracle,
        m_t: sample.len(),
        diagnostics: Diagnostics { epsilon: None, delta: h.delta(), oracle_mode: Some(OracleMode::PerReplicate), rows },
    })
}

/// Index of the bandwidth with the smallest ISE averaged over replicates.
/// Every row of `profiles` holds one replicate's ISE per candidate.
pub fn monte_carlo_oracle(profiles: &[Vec<f64>]) -> Result<(usize, Vec<f64>)> {
    let first = profiles.first().ok_or(Error::param("no replicates to average"))?;
    if profiles.iter().any(|p| p.len() != first.len()) || first.is_empty() {
        return Err(Error::param("ISE profiles must share one nonempty bandwidth list"));
    }
    let m = profiles.len() as f64;
    let mean: Vec<f64> = (0..first.len()).map(|j| profiles.iter().map(|p| p[j]).sum::<f64>() / m).collect();
    Ok((argmin_first(&mean), mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Gaussian;
    use crate::model::DivisionKernelModel;
    use crate::rng::seeded;

    fn beta_sample(n: usize, a: f64, seed: u64) -> Sample {
        let m = DivisionKernelModel::Beta { a };
        let mut rng = seeded(seed);
        Sample::new((0..n).map(|_| m.sample(&mut rng)).collect()).unwrap()
    }

    #[test]
    fn grid_sizes_follow_delta_and_cap() {
        assert_eq!(BandwidthGrid::for_sample_size(665, 0.05, 128).unwrap().len(), 33);
        assert_eq!(BandwidthGrid::for_sample_size(22_000, 0.05, 128).unwrap().len(), 128);
        assert_eq!(BandwidthGrid::for_sample_size(3, 0.05, 128).unwrap().len(), 1);
        let h = BandwidthGrid::for_sample_size(100, 0.05, 128).unwrap();
        assert_eq!(h.values(), &[1.0, 0.5, 1.0 / 3.0, 0.25, 0.2]);
        assert!(BandwidthGrid::for_sample_size(100, 0.0, 128).is_err());
        assert!(BandwidthGrid::from_values(vec![0.2, 0.2]).is_err());
        assert!(BandwidthGrid::from_values(vec![1.5]).is_err());
        assert_eq!(BandwidthGrid::from_values(vec![0.1, 0.3]).unwrap().values(), &[0.3, 0.1]);
    }

    #[test]
    fn argmin_prefers_first_on_ties() {
        assert_eq!(argmin_first(&[2.0, 1.0, 1.0, 3.0]), 1);
        assert_eq!(argmin_first(&[1.0]), 0);
    }

    #[test]
    fn gl_singleton_grid_returns_its_member() {
        let s = beta_sample(50, 2.0, 1);
        let h = BandwidthGrid::from_values(vec![0.37]).unwrap();
        let est = gl_select(&s, &Gaussian, &h, DEFAULT_EPSILON, &EvaluationGrid::default()).unwrap();
        assert_eq!(est.bandwidth, 0.37);
        assert_eq!(est.diagnostics.rows.len(), 1);
    }

    #[test]
    fn gl_bias_proxy_nonnegative_and_objective_positive() {
        let s = beta_sample(10_000, 2.0, 2);
        let h = BandwidthGrid::for_sample_size(s.len(), DEFAULT_DELTA, DEFAULT_CAP).unwrap();
        let est = gl_select(&s, &Gaussian, &h, DEFAULT_EPSILON, &EvaluationGrid::default()).unwrap();
        assert_eq!(est.diagnostics.rows.len(), 128);
        for r in &est.diagnostics.rows {
            assert!(r.a.unwrap() >= 0.0);
            assert!(r.objective.is_finite() && r.objective > 0.0);
        }
        assert!(h.values().contains(&est.bandwidth));
    }

    #[test]
    fn gl_line_norms_agree_with_grid_quadrature() {
        // On a grid wide enough to hold every kernel's mass the two norms agree.
        let s = beta_sample(400, 2.0, 3);
        let grid = EvaluationGrid::new(-3.0, 4.0, 14_001).unwrap();
        let h = BandwidthGrid::from_values(vec![0.15, 0.1, 0.07, 0.05, 0.03]).unwrap();
        let table = GlTable::compute(&s, &Gaussian, &h, &grid).unwrap();
        for (i, &l) in h.values().iter().enumerate() {
            for (j, &lp) in h.values().iter().enumerate() {
                let a = kde_values(s.values(), &Gaussian, l.hypot(lp), &grid);
                let b = kde_values(s.values(), &Gaussian, lp, &grid);
                let quad = grid.squared_distance(&a, &b).sqrt();
                assert!((table.distance(i, j) - quad).abs() < 1e-9, "({l}, {lp})");
            }
        }
    }

    #[test]
    fn gl_rejects_bad_epsilon() {
        let s = beta_sample(20, 2.0, 4);
        let h = BandwidthGrid::reciprocal(3).unwrap();
        assert!(gl_select(&s, &Gaussian, &h, -1.0, &EvaluationGrid::default()).is_err());
    }

    #[test]
    fn cv_two_point_case() {
        let s = Sample::new(vec![0.4, 0.6]).unwrap();
        let h = BandwidthGrid::from_values(vec![1.0, 0.5]).unwrap();
        let grid = EvaluationGrid::default();
        let obj = cv_objective(&s, &Gaussian, &h, &grid).unwrap();
        assert!(obj.iter().all(|o| o.is_finite()));
        // Closed form: ∫ĥ² = (K_{ℓ√2}(0) + K_{ℓ√2}(0.2))/2, cross term 2K_ℓ(0.2).
        for (&ell, &o) in h.values().iter().zip(&obj) {
            let s2 = ell * 2f64.sqrt();
            let expect = 0.5 * (Gaussian.scaled(s2, 0.0) + Gaussian.scaled(s2, 0.2)) - 2.0 * Gaussian.scaled(ell, 0.2);
            assert!((o - expect).abs() < 1e-12, "{o} vs {expect}");
        }
        let est = cv_select(&s, &Gaussian, &h, &grid).unwrap();
        assert_eq!(est.bandwidth, h.values()[argmin_first(&obj)]);
        assert!(cv_select(&Sample::new(vec![0.5]).unwrap(), &Gaussian, &h, &grid).is_err());
    }

    #[test]
    fn rot_arithmetic() {
        // Thirty-two points with sample sd 0.2.
        let half = 0.2 * (31.0f64 / 32.0).sqrt();
        let v: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { 0.5 - half } else { 0.5 + half }).collect();
        let s = Sample::new(v).unwrap();
        assert!((s.sd() - 0.2).abs() < 1e-14);
        assert!((rot_bandwidth(&s).unwrap() - 0.106).abs() < 1e-14);
        assert!(matches!(rot_bandwidth(&Sample::new(vec![0.3; 5]).unwrap()), Err(Error::ZeroVariance)));
    }

    #[test]
    fn oracle_finds_zero_ise_member() {
        let s = beta_sample(200, 2.0, 5);
        let grid = EvaluationGrid::default();
        let h = BandwidthGrid::from_values(vec![0.2, 0.1, 0.05]).unwrap();
        let truth = GridFunction::new(grid, kde_values(s.values(), &Gaussian, 0.1, &grid)).unwrap();
        let est = oracle_select(&s, &Gaussian, &h, &grid, &truth).unwrap();
        assert_eq!(est.bandwidth, 0.1);
        assert_eq!(est.diagnostics.oracle_mode, Some(OracleMode::PerReplicate));
        let other = EvaluationGrid::new(-0.5, 1.5, 11).unwrap();
        assert!(oracle_select(&s, &Gaussian, &h, &other, &truth).is_err());
    }

    #[test]
    fn monte_carlo_oracle_averages() {
        let (i, mean) = monte_carlo_oracle(&[vec![3.0, 1.0, 2.0], vec![1.0, 2.0, 1.0]]).unwrap();
        assert_eq!(mean, vec![2.0, 1.5, 1.5]);
        assert_eq!(i, 1);
        assert!(monte_carlo_oracle(&[]).is_err());
    }
}

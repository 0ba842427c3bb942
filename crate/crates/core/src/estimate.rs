//! Kernel estimates of the division density on an evaluation grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::EvaluationGrid;
use crate::kernel::{ConvolvedKernel, SmoothingKernel};
use crate::model::DivisionKernelModel;

/// Observed division fractions Γ¹ᵢ.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    gammas: Vec<f64>,
}

impl Sample {
    pub fn new(gammas: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(bad) = gammas.iter().find(|g| !(**g > 0.0 && **g < 1.0)) {
            return Err(Error::param(format!("division fraction {bad} is outside (0, 1)")));
        }
        Ok(Self { gammas })
    }

    pub fn values(&self) -> &[f64] {
        &self.gammas
    }

    /// M_T.
    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.gammas)
    }

    /// Standard deviation with denominator `n − 1`.
    pub fn sd(&self) -> f64 {
        crate::stats::sample_sd(&self.gammas)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Selector {
    #[serde(rename = "GL")]
    Gl,
    #[serde(rename = "CV")]
    Cv,
    #[serde(rename = "RoT")]
    Rot,
    Oracle,
    Fixed,
}

/// How an oracle bandwidth was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// Minimizer of this sample's own integrated squared error.
    #[default]
    PerReplicate,
    /// Minimizer of the integrated squared error averaged over replicates.
    MonteCarlo,
}

/// One candidate bandwidth as scored by a selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub ell: f64,
    /// GL bias proxy A(ℓ).
    #[serde(rename = "A")]
    pub a: Option<f64>,
    /// GL penalty χ‖K‖₂/√(M_T ℓ).
    pub penalty: Option<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub oracle_mode: Option<OracleMode>,
    pub rows: Vec<DiagnosticRow>,
}

/// Anything tabulated on an evaluation grid.
pub trait OnGrid {
    fn grid(&self) -> &EvaluationGrid;
    fn values(&self) -> &[f64];
}

/// A reference function (typically the true density) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: EvaluationGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: EvaluationGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, values })
    }

    pub fn from_model(model: &DivisionKernelModel, grid: EvaluationGrid) -> Self {
        Self { values: grid.tabulate(|x| model.density(x)), grid }
    }
}

impl OnGrid for GridFunction {
    fn grid(&self) -> &EvaluationGrid {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid: EvaluationGrid,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub method: Selector,
    pub m_t: usize,
    pub diagnostics: Diagnostics,
}

impl OnGrid for DensityEstimate {
    fn grid(&self) -> &EvaluationGrid {
        &self.grid
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
}

impl DensityEstimate {
    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }
}

fn check_bandwidth(ell: f64) -> Result<()> {
    if ell.is_finite() && ell > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("bandwidth must be finite and positive, got {ell}")))
    }
}

/// Direct evaluation of `(1/n) Σ K_ℓ(x − Γᵢ)` at every grid point.
pub fn kde_values(sample: &[f64], kernel: &dyn SmoothingKernel, ell: f64, grid: &EvaluationGrid) -> Vec<f64> {
    let n = sample.len() as f64;
    grid.tabulate(|x| sample.iter().map(|&g| kernel.scaled(ell, x - g)).sum::<f64>() / n)
}

/// `ĥ_ℓ(γ) = (1/M_T) Σ K_ℓ(γ − Γ¹ᵢ)` on the grid.
pub fn kde(sample: &Sample, kernel: &dyn SmoothingKernel, ell: f64, grid: &EvaluationGrid) -> Result<DensityEstimate> {
    check_bandwidth(ell)?;
    grid.validate()?;
    Ok(DensityEstimate {
        grid: *grid,
        values: kde_values(sample.values(), kernel, ell, grid),
        bandwidth: ell,
        method: Selector::Fixed,
        m_t: sample.len(),
        diagnostics: Diagnostics::default(),
    })
}

/// `ĥ_{ℓ,ℓ′} = (1/M_T) Σ (K_ℓ ⋆ K_ℓ′)(γ − Γ¹ᵢ)`.
///
/// Uses the kernel's closed-form self-convolution when it has one and
/// falls back to a quadrature table otherwise.
pub fn double_kde(
    sample: &Sample,
    kernel: &dyn SmoothingKernel,
    ell: f64,
    ell_prime: f64,
    grid: &EvaluationGrid,
) -> Result<DensityEstimate> {
    check_bandwidth(ell)?;
    check_bandwidth(ell_prime)?;
    match kernel.self_convolution(ell, ell_prime) {
        Some(s) => kde(sample, kernel, s, grid),
        None => double_kde_quadrature(sample, kernel, ell, ell_prime, grid),
    }
}

/// [`double_kde`] through the tabulated numerical convolution, whatever the kernel.
pub fn double_kde_quadrature(
    sample: &Sample,
    kernel: &dyn SmoothingKernel,
    ell: f64,
    ell_prime: f64,
    grid: &EvaluationGrid,
) -> Result<DensityEstimate> {
    check_bandwidth(ell)?;
    check_bandwidth(ell_prime)?;
    grid.validate()?;
    let conv = ConvolvedKernel::by_quadrature(kernel, ell, ell_prime);
    let n = sample.len() as f64;
    let values = grid.tabulate(|x| sample.values().iter().map(|&g| conv.evaluate(x - g)).sum::<f64>() / n);
    Ok(DensityEstimate {
        grid: *grid,
        values,
        bandwidth: ell_prime,
        method: Selector::Fixed,
        m_t: sample.len(),
        diagnostics: Diagnostics::default(),
    })
}

/// Trapezoid approximation of `‖a − b‖₂`.
pub fn l2_distance(a: &impl OnGrid, b: &impl OnGrid) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(a.grid().squared_distance(a.values(), b.values()).max(0.0).sqrt())
}

/// `‖ĥ − h‖₂ / ‖h‖₂`.
pub fn relative_error(est: &impl OnGrid, truth: &impl OnGrid) -> Result<f64> {
    let norm = truth.grid().squared_norm(truth.values()).sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok(l2_distance(est, truth)? / norm)
}

/// Symmetric values `½(f(x) + f(1 − x))` on a grid symmetric about ½.
pub fn symmetrize_values(grid: &EvaluationGrid, values: &[f64]) -> Result<Vec<f64>> {
    if !grid.is_symmetric() {
        return Err(Error::AsymmetricGrid);
    }
    let last = values.len() - 1;
    Ok((0..values.len()).map(|k| 0.5 * (values[k] + values[last - k])).collect())
}

/// `h̃(x) = ½(ĥ(x) + ĥ(1 − x))`.
pub fn symmetrize(est: &DensityEstimate) -> Result<DensityEstimate> {
    Ok(DensityEstimate { values: symmetrize_values(&est.grid, &est.values)?, ..est.clone() })
}

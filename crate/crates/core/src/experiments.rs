//! Monte Carlo studies: error tables across methods and horizons, ε
//! calibration, the convergence-rate regression, the mean-age study and a
//! check of the population-size law.
//!
//! Replicate `r` of horizon index `g` draws from stream `(g, r, attempt)`
//! under the master seed, so results do not depend on the thread count.

use std::collections::BTreeMap;
use std::io::{self, Write};

use log::{debug, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{inv_nt_expectation, nt_mean, nt_pmf, PopulationLaw};
use crate::config::{ExperimentConfig, MeanAgeConfig, Method};
use crate::error::{Error, Result};
use crate::estimate::{relative_error, symmetrize_values, GridFunction, OracleMode, Sample};
use crate::export::{float, opt_float};
use crate::grid::EvaluationGrid;
use crate::kernel::{Gaussian, SmoothingKernel};
use crate::mle::beta_mle;
use crate::model::DivisionKernelModel;
use crate::rng::{stream, StreamId};
use crate::select::{
    cv_select, monte_carlo_oracle, oracle_select, rot_bandwidth, BandwidthGrid, GlTable, Tabulator,
};
use crate::sim::{simulate_with_rng, SimConfig};
use crate::stats::{chi_square, mean, population_sd, quantile, standard_error, ChiSquareTest, LineFit};

/// Consecutive unusable samples tolerated before a replicate is abandoned.
pub const MAX_REDRAWS: u16 = 100;

/// Smallest sample every selector accepts. A single observation has no
/// spread, so cross-validation, rule of thumb and ML are undefined on it.
pub const MIN_SAMPLE: usize = 2;

/// Division fractions of one replicate, redrawn while the tree has fewer than
/// [`MIN_SAMPLE`] divisions.
pub fn draw_sample(cfg: &ExperimentConfig, group: usize, replicate: usize) -> Result<Sample> {
    let horizon = cfg.horizons[group];
    let sim = cfg.sim_config(horizon, cfg.master_seed);
    for attempt in 0..MAX_REDRAWS {
        let mut rng = stream(cfg.master_seed, StreamId::new(group as u16, replicate as u32, attempt));
        let traj = simulate_with_rng(&sim, &mut rng)?;
        if traj.divisions() >= MIN_SAMPLE {
            return Sample::new(traj.gammas());
        }
        warn!("replicate {replicate} at T={horizon} had {} division(s) (attempt {attempt}); redrawing", traj.divisions());
    }
    Err(Error::RedrawExhausted { replicate, attempts: usize::from(MAX_REDRAWS) })
}

/// FNV-1a hash of the bit patterns of a sample.
pub fn sample_hash(values: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicateRow {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub replicate: usize,
    pub method: Method,
    pub m_t: usize,
    pub error: f64,
    /// Selected bandwidth; absent for the parametric fit.
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub method: Method,
    pub e_bar: f64,
    pub sigma_e: f64,
    pub ell_bar: Option<f64>,
}

/// Per-replicate errors and their aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub rows: Vec<TableRow>,
    pub replicates: Vec<ReplicateRow>,
}

impl McReport {
    /// Aggregates `ē = (1/M)Σeᵢ`, `σ_e = √((1/M)Σ(eᵢ − ē)²)` and the mean
    /// bandwidth per (horizon, method), in order of first appearance.
    pub fn from_replicates(replicates: Vec<ReplicateRow>) -> Self {
        let mut keys: Vec<(f64, Method)> = Vec::new();
        for r in &replicates {
            if !keys.iter().any(|k| k.0 == r.horizon && k.1 == r.method) {
                keys.push((r.horizon, r.method));
            }
        }
        let rows = keys
            .into_iter()
            .map(|(horizon, method)| {
                let sel: Vec<&ReplicateRow> =
                    replicates.iter().filter(|r| r.horizon == horizon && r.method == method).collect();
                let errors: Vec<f64> = sel.iter().map(|r| r.error).collect();
                let bws: Option<Vec<f64>> = sel.iter().map(|r| r.bandwidth).collect();
                TableRow {
                    horizon,
                    method,
                    e_bar: mean(&errors),
                    sigma_e: population_sd(&errors),
                    ell_bar: bws.map(|b| mean(&b)),
                }
            })
            .collect();
        Self { rows, replicates }
    }

    pub fn row(&self, horizon: f64, method: Method) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.horizon == horizon && r.method == method)
    }

    pub fn errors(&self, horizon: f64, method: Method) -> Vec<f64> {
        self.replicates.iter().filter(|r| r.horizon == horizon && r.method == method).map(|r| r.error).collect()
    }

    /// `T,method,e_bar,sigma_e,ell_bar`.
    pub fn write_table_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "T,method,e_bar,sigma_e,ell_bar")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                float(r.horizon),
                r.method,
                float(r.e_bar),
                float(r.sigma_e),
                opt_float(r.ell_bar)
            )?;
        }
        Ok(())
    }

    /// `T,replicate,method,m_t,error,bandwidth`.
    pub fn write_replicates_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "T,replicate,method,m_t,error,bandwidth")?;
        for r in &self.replicates {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                float(r.horizon),
                r.replicate,
                r.method,
                r.m_t,
                float(r.error),
                opt_float(r.bandwidth)
            )?;
        }
        Ok(())
    }
}

/// Errors of one fitted method on one replicate, raw and symmetrized.
#[derive(Debug, Clone, Copy)]
struct Fit {
    method: Method,
    bandwidth: Option<f64>,
    error: f64,
    sym_error: f64,
}

struct ReplicateOutcome {
    sample: Sample,
    fits: Vec<Fit>,
    /// ISE of raw and symmetrized estimates over the oracle candidates.
    oracle_ise: Option<(Vec<f64>, Vec<f64>)>,
}

struct Truth {
    func: GridFunction,
}

impl Truth {
    fn new(model: &DivisionKernelModel, grid: EvaluationGrid) -> Result<Self> {
        let func = GridFunction::from_model(model, grid);
        if !(grid.squared_norm(&func.values) > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(Self { func })
    }

    /// Relative errors of the raw and symmetrized values.
    fn errors(&self, values: Vec<f64>) -> Result<(f64, f64)> {
        let grid = self.func.grid;
        let sym = symmetrize_values(&grid, &values)?;
        let raw = GridFunction::new(grid, values)?;
        let sym = GridFunction::new(grid, sym)?;
        Ok((relative_error(&raw, &self.func)?, relative_error(&sym, &self.func)?))
    }

    fn ise(&self, values: &[f64]) -> Result<(f64, f64)> {
        let grid = self.func.grid;
        let sym = symmetrize_values(&grid, values)?;
        Ok((grid.squared_distance(values, &self.func.values), grid.squared_distance(&sym, &self.func.values)))
    }
}

/// Candidates of the Monte Carlo oracle: `{1, 1/2, …, 1/cap}`.
fn oracle_candidates(cfg: &ExperimentConfig) -> Result<BandwidthGrid> {
    BandwidthGrid::reciprocal(cfg.cap)
}

fn run_replicate(
    cfg: &ExperimentConfig,
    group: usize,
    replicate: usize,
    kernel: &dyn SmoothingKernel,
    truth: &Truth,
) -> Result<ReplicateOutcome> {
    let sample = draw_sample(cfg, group, replicate)?;
    let grid = cfg.grid;
    let h = BandwidthGrid::for_sample_size(sample.len(), cfg.delta, cfg.cap)?;
    let mut tab = Tabulator::new(sample.values(), kernel, grid);
    let mut fits = Vec::with_capacity(cfg.methods.len());
    let mut oracle_ise = None;
    for &method in &cfg.methods {
        let (bandwidth, values) = match method {
            Method::Gl => {
                let ell = GlTable::compute(&sample, kernel, &h, &grid)?.select(cfg.epsilon)?.ell;
                (Some(ell), tab.values(ell))
            }
            Method::Cv => {
                let ell = cv_select(&sample, kernel, &h, &grid)?.bandwidth;
                (Some(ell), tab.values(ell))
            }
            Method::Rot => {
                let ell = rot_bandwidth(&sample)?;
                (Some(ell), tab.values(ell))
            }
            Method::Oracle => match cfg.oracle_mode {
                OracleMode::PerReplicate => {
                    let est = oracle_select(&sample, kernel, &h, &grid, &truth.func)?;
                    (Some(est.bandwidth), est.values)
                }
                OracleMode::MonteCarlo => {
                    let cands = oracle_candidates(cfg)?;
                    let mut raw = Vec::with_capacity(cands.len());
                    let mut sym = Vec::with_capacity(cands.len());
                    for &ell in cands.values() {
                        let (a, b) = truth.ise(&tab.values(ell))?;
                        raw.push(a);
                        sym.push(b);
                    }
                    oracle_ise = Some((raw, sym));
                    // Filled in once every replicate has reported.
                    continue;
                }
            },
            Method::Ml => {
                let fit = beta_mle(&sample)?;
                let model = DivisionKernelModel::Beta { a: fit.a };
                (None, GridFunction::from_model(&model, grid).values)
            }
        };
        let (error, sym_error) = truth.errors(values)?;
        fits.push(Fit { method, bandwidth, error, sym_error });
    }
    debug!("T={} replicate {replicate}: M_T={}", cfg.horizons[group], sample.len());
    Ok(ReplicateOutcome { sample, fits, oracle_ise })
}

/// Raw and symmetrized reports from a single pass over the replicates.
///
/// Both reports share every simulated sample and every selected bandwidth,
/// except the Monte Carlo oracle, which minimizes the averaged ISE of the
/// estimator being scored.
pub fn run_paired_experiment(cfg: &ExperimentConfig) -> Result<(McReport, McReport)> {
    cfg.validate()?;
    let kernel = Gaussian;
    let truth = Truth::new(&cfg.truth, cfg.grid)?;
    let mut raw_rows = Vec::new();
    let mut sym_rows = Vec::new();
    for (group, &horizon) in cfg.horizons.iter().enumerate() {
        let outcomes: Vec<ReplicateOutcome> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| run_replicate(cfg, group, r, &kernel, &truth))
            .collect::<Result<_>>()?;
        let oracle = match outcomes[0].oracle_ise {
            Some(_) => {
                let cands = oracle_candidates(cfg)?;
                let raw: Vec<Vec<f64>> = outcomes.iter().map(|o| o.oracle_ise.as_ref().unwrap().0.clone()).collect();
                let sym: Vec<Vec<f64>> = outcomes.iter().map(|o| o.oracle_ise.as_ref().unwrap().1.clone()).collect();
                let ell_raw = cands.values()[monte_carlo_oracle(&raw)?.0];
                let ell_sym = cands.values()[monte_carlo_oracle(&sym)?.0];
                debug!("T={horizon}: Monte Carlo oracle bandwidth {ell_raw} (symmetrized {ell_sym})");
                Some((ell_raw, ell_sym))
            }
            None => None,
        };
        let per_replicate: Vec<Vec<(ReplicateRow, ReplicateRow)>> = outcomes
            .par_iter()
            .enumerate()
            .map(|(r, o)| -> Result<Vec<(ReplicateRow, ReplicateRow)>> {
                let m_t = o.sample.len();
                let mut rows = Vec::new();
                for &method in &cfg.methods {
                    let row = |bandwidth, error| ReplicateRow { horizon, replicate: r, method, m_t, error, bandwidth };
                    if let Some(fit) = o.fits.iter().find(|f| f.method == method) {
                        rows.push((row(fit.bandwidth, fit.error), row(fit.bandwidth, fit.sym_error)));
                    } else if let (Method::Oracle, Some((ell_raw, ell_sym))) = (method, oracle) {
                        let mut tab = Tabulator::new(o.sample.values(), &kernel, cfg.grid);
                        let (error, _) = truth.errors(tab.values(ell_raw))?;
                        let (_, sym_error) = truth.errors(tab.values(ell_sym))?;
                        rows.push((row(Some(ell_raw), error), row(Some(ell_sym), sym_error)));
                    }
                }
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        for (raw, sym) in per_replicate.into_iter().flatten() {
            raw_rows.push(raw);
            sym_rows.push(sym);
        }
    }
    Ok((McReport::from_replicates(raw_rows), McReport::from_replicates(sym_rows)))
}

/// Relative errors of every configured method across horizons.
pub fn run_mise_experiment(cfg: &ExperimentConfig) -> Result<McReport> {
    Ok(run_paired_experiment(cfg)?.0)
}

/// As [`run_mise_experiment`], scoring the symmetrized estimates.
pub fn run_symmetrized_experiment(cfg: &ExperimentConfig) -> Result<McReport> {
    Ok(run_paired_experiment(cfg)?.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    /// Mean over replicates of `‖ĥ_ℓ̂ − h‖₂²`.
    pub mise: f64,
    /// Mean of `ℓ̂ − ℓ_oracle`.
    pub mean_gap: f64,
    pub mean_bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub horizon: f64,
    pub oracle_bandwidth: f64,
    pub rows: Vec<EpsilonRow>,
    /// Hash of each replicate's sample, shared by every ε.
    pub sample_hashes: Vec<u64>,
    /// `selected[i][r]`: GL bandwidth for ε number `i` on replicate `r`.
    pub selected: Vec<Vec<f64>>,
}

impl CalibrationReport {
    /// `epsilon,mise,mean_gap,mean_bandwidth`.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "epsilon,mise,mean_gap,mean_bandwidth")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", float(r.epsilon), float(r.mise), float(r.mean_gap), float(r.mean_bandwidth))?;
        }
        Ok(())
    }
}

/// GL risk as a function of ε at the first configured horizon.
///
/// Every ε is scored on the same replicate samples. The reference bandwidth
/// is the Monte Carlo oracle over `{1, …, 1/cap}`.
pub fn calibrate_epsilon(cfg: &ExperimentConfig, epsilons: &[f64]) -> Result<CalibrationReport> {
    cfg.validate()?;
    if epsilons.is_empty() {
        return Err(Error::Config("no epsilon values to calibrate".into()));
    }
    if let Some(e) = epsilons.iter().find(|e| !(e.is_finite() && **e > -1.0)) {
        return Err(Error::Config(format!("epsilon must exceed -1, got {e}")));
    }
    let kernel = Gaussian;
    let truth = Truth::new(&cfg.truth, cfg.grid)?;
    let cands = oracle_candidates(cfg)?;
    let per_rep: Vec<(u64, Vec<f64>, Vec<f64>)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| -> Result<(u64, Vec<f64>, Vec<f64>)> {
            let sample = draw_sample(cfg, 0, r)?;
            let h = BandwidthGrid::for_sample_size(sample.len(), cfg.delta, cfg.cap)?;
            let table = GlTable::compute(&sample, &kernel, &h, &cfg.grid)?;
            let mut tab = Tabulator::new(sample.values(), &kernel, cfg.grid);
            let ise: Vec<f64> = cands.values().iter().map(|&ell| truth.ise(&tab.values(ell)).map(|x| x.0)).collect::<Result<_>>()?;
            let chosen: Vec<f64> = epsilons.iter().map(|&e| table.select(e).map(|c| c.ell)).collect::<Result<_>>()?;
            Ok((sample_hash(sample.values()), ise, chosen))
        })
        .collect::<Result<_>>()?;
    let profiles: Vec<Vec<f64>> = per_rep.iter().map(|p| p.1.clone()).collect();
    let oracle_bandwidth = cands.values()[monte_carlo_oracle(&profiles)?.0];
    // Every GL candidate 1/Δ is also the oracle candidate with index Δ − 1.
    let ise_at = |r: usize, ell: f64| per_rep[r].1[(1.0 / ell).round() as usize - 1];
    let selected: Vec<Vec<f64>> = (0..epsilons.len()).map(|i| per_rep.iter().map(|p| p.2[i]).collect()).collect();
    let rows = epsilons
        .iter()
        .zip(&selected)
        .map(|(&epsilon, sel)| {
            let ise: Vec<f64> = sel.iter().enumerate().map(|(r, &ell)| ise_at(r, ell)).collect();
            let gaps: Vec<f64> = sel.iter().map(|ell| ell - oracle_bandwidth).collect();
            EpsilonRow { epsilon, mise: mean(&ise), mean_gap: mean(&gaps), mean_bandwidth: mean(sel) }
        })
        .collect();
    Ok(CalibrationReport {
        horizon: cfg.horizons[0],
        oracle_bandwidth,
        rows,
        sample_hashes: per_rep.iter().map(|p| p.0).collect(),
        selected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// `(T, ē)`.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// `−βR/(2β + 1)`.
    pub theoretical_slope: f64,
}

impl RateFit {
    /// `T,e_bar,log_e_bar,fitted_log_e_bar`.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "T,e_bar,log_e_bar,fitted_log_e_bar")?;
        for &(t, e) in &self.points {
            writeln!(w, "{},{},{},{}", float(t), float(e), float(e.ln()), float(self.intercept + self.slope * t))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rate fit is plain data")
    }
}

/// Least-squares line through `(T, ln ē)`, next to the slope `−βR/(2β+1)`
/// implied by an error of order `ϱ(T)^{−β/(2β+1)}`.
pub fn fit_rate(points: &[(f64, f64)], division_rate: f64, beta: f64) -> Result<RateFit> {
    let mut horizons: Vec<f64> = points.iter().map(|p| p.0).collect();
    horizons.sort_unstable_by(f64::total_cmp);
    horizons.dedup();
    if horizons.len() < 2 {
        return Err(Error::param("a rate fit needs at least 2 distinct horizons"));
    }
    if points.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::param("errors must be positive to take logarithms"));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let LineFit { slope, intercept } = crate::stats::ols(&x, &y);
    Ok(RateFit { points: points.to_vec(), slope, intercept, theoretical_slope: -beta * division_rate / (2.0 * beta + 1.0) })
}

/// Rate fit of one method's mean errors in a report.
pub fn rate_from_report(report: &McReport, method: Method, division_rate: f64, beta: f64) -> Result<RateFit> {
    let points: Vec<(f64, f64)> =
        report.rows.iter().filter(|r| r.method == method).map(|r| (r.horizon, r.e_bar)).collect();
    fit_rate(&points, division_rate, beta)
}

/// Tree averages at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanAgePoint {
    pub time: f64,
    /// Average over trees of the population mean toxicity.
    pub mean_age: f64,
    /// Averages over trees of the within-tree quartiles of toxicity.
    pub q25: f64,
    pub q75: f64,
    /// Quartiles across trees of the population mean toxicity.
    pub between_q25: f64,
    pub between_q75: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanAgeSeries {
    pub a: f64,
    pub points: Vec<MeanAgePoint>,
    /// Time average of `q75 − q25`.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanAgeReport {
    pub series: Vec<MeanAgeSeries>,
}

impl MeanAgeReport {
    /// `a,t,mean_age,q25,q75,between_q25,between_q75`.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "a,t,mean_age,q25,q75,between_q25,between_q75")?;
        for s in &self.series {
            for p in &s.points {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    float(s.a),
                    float(p.time),
                    float(p.mean_age),
                    float(p.q25),
                    float(p.q75),
                    float(p.between_q25),
                    float(p.between_q75)
                )?;
            }
        }
        Ok(())
    }

    /// `a,spread`.
    pub fn write_spread_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "a,spread")?;
        for s in &self.series {
            writeln!(w, "{},{}", float(s.a), float(s.spread))?;
        }
        Ok(())
    }

    pub fn series_for(&self, a: f64) -> Option<&MeanAgeSeries> {
        self.series.iter().find(|s| s.a == a)
    }
}

/// Mean toxicity of the living cells, and its within-tree quartiles, over
/// `study.trees` trees per Beta(a, a) division law. Trees are observed up
/// to `study.t_stop`; the other settings come from `cfg`.
pub fn run_mean_age_experiment(cfg: &ExperimentConfig, study: &MeanAgeConfig) -> Result<MeanAgeReport> {
    if study.trees < 2 {
        return Err(Error::Config("the mean-age study needs at least 2 trees".into()));
    }
    let times = study.times();
    let mut series = Vec::with_capacity(study.beta_params.len());
    for (group, &a) in study.beta_params.iter().enumerate() {
        let mut sim: SimConfig = cfg.sim_config(study.t_stop, cfg.master_seed);
        sim.kernel = DivisionKernelModel::Beta { a };
        sim.snapshot_times = times.clone();
        let snaps: Vec<Vec<crate::sim::Snapshot>> = (0..study.trees)
            .into_par_iter()
            .map(|tree| {
                let mut rng = stream(cfg.master_seed, StreamId::new(group as u16, tree as u32, 0));
                simulate_with_rng(&sim, &mut rng).map(|t| t.snapshots)
            })
            .collect::<Result<_>>()?;
        let points: Vec<MeanAgePoint> = times
            .iter()
            .enumerate()
            .map(|(k, &time)| {
                let means: Vec<f64> = snaps.iter().map(|s| s[k].mean_age).collect();
                let q25: Vec<f64> = snaps.iter().map(|s| s[k].q25).collect();
                let q75: Vec<f64> = snaps.iter().map(|s| s[k].q75).collect();
                MeanAgePoint {
                    time,
                    mean_age: mean(&means),
                    q25: mean(&q25),
                    q75: mean(&q75),
                    between_q25: quantile(&means, 0.25),
                    between_q75: quantile(&means, 0.75),
                }
            })
            .collect();
        let spread = mean(&points.iter().map(|p| p.q75 - p.q25).collect::<Vec<_>>());
        series.push(MeanAgeSeries { a, points, spread });
    }
    Ok(MeanAgeReport { series })
}

/// Simulated population sizes against their exact law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationCheck {
    pub n0: u32,
    pub division_rate: f64,
    pub horizon: f64,
    pub replicates: usize,
    pub mean_simulated: f64,
    pub mean_se: f64,
    pub mean_exact: f64,
    pub inverse_simulated: f64,
    pub inverse_se: f64,
    pub inverse_exact: f64,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl PopulationCheck {
    pub fn mean_z(&self) -> f64 {
        (self.mean_simulated - self.mean_exact) / self.mean_se
    }

    pub fn inverse_z(&self) -> f64 {
        (self.inverse_simulated - self.inverse_exact) / self.inverse_se
    }

    /// `quantity,simulated,se,exact,z`, then the goodness-of-fit line.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "quantity,simulated,se,exact,z")?;
        writeln!(
            w,
            "E[N_T],{},{},{},{}",
            float(self.mean_simulated),
            float(self.mean_se),
            float(self.mean_exact),
            float(self.mean_z())
        )?;
        writeln!(
            w,
            "E[1/N_T],{},{},{},{}",
            float(self.inverse_simulated),
            float(self.inverse_se),
            float(self.inverse_exact),
            float(self.inverse_z())
        )?;
        writeln!(w, "chi_square,{},{},{},", float(self.chi_square), self.dof, float(self.p_value))
    }
}

/// Observed counts of `N_T` against the exact probabilities, pooled into
/// cells with an expected count of at least 5.
pub fn population_gof(sizes: &[u64], law: &PopulationLaw) -> ChiSquareTest {
    let n0 = u64::from(law.n0);
    let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
    for &s in sizes {
        *counts.entry(s).or_default() += 1.0;
    }
    let max = sizes.iter().copied().max().unwrap_or(n0);
    let total = sizes.len() as f64;
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    let mut cdf = 0.0;
    for n in n0..=max {
        let p = nt_pmf(law, n);
        cdf += p;
        observed.push(counts.get(&n).copied().unwrap_or(0.0));
        expected.push(total * p);
    }
    // Everything above the largest observed size.
    observed.push(0.0);
    expected.push(total * (1.0 - cdf).max(0.0));
    chi_square(&observed, &expected, 5.0)
}

/// Simulates `replicates` trees and compares `N_T` with its exact law.
pub fn population_check(n0: u32, division_rate: f64, horizon: f64, replicates: usize, seed: u64) -> Result<PopulationCheck> {
    if replicates < 2 {
        return Err(Error::param("the population check needs at least 2 replicates"));
    }
    let law = PopulationLaw::new(n0, division_rate, horizon)?;
    let sim = SimConfig::new(n0, division_rate, 0.0, horizon, DivisionKernelModel::Beta { a: 2.0 }, seed);
    let sizes: Vec<u64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, StreamId::new(0, r as u32, 0));
            simulate_with_rng(&sim, &mut rng).map(|t| t.final_size() as u64)
        })
        .collect::<Result<_>>()?;
    let as_f: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let inv: Vec<f64> = as_f.iter().map(|s| 1.0 / s).collect();
    let gof = population_gof(&sizes, &law);
    Ok(PopulationCheck {
        n0,
        division_rate,
        horizon,
        replicates,
        mean_simulated: mean(&as_f),
        mean_se: standard_error(&as_f),
        mean_exact: nt_mean(&law),
        inverse_simulated: mean(&inv),
        inverse_se: standard_error(&inv),
        inverse_exact: inv_nt_expectation(&law)?,
        chi_square: gof.statistic,
        dof: gof.dof,
        p_value: gof.p_value,
    })
}

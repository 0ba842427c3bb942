//! Exact event-driven simulation of the dividing population.
//!
//! Every living cell divides at rate `R`, so the next division happens after
//! an `Exp(R · N_t)` waiting time and strikes a uniformly chosen cell.
//! Between divisions each toxicity grows linearly at rate `α`, which is
//! integrated exactly: a cell stores its toxicity at birth and its birth
//! time, and is read off at any later instant.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DivisionKernelModel;
use crate::rng::{self, SimRng};
use crate::stats::quantile_sorted;

/// Ulam–Harris–Neveu label: founder index plus a binary path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellLabel {
    pub root: u32,
    path: Vec<bool>,
}

impl CellLabel {
    pub fn founder(root: u32) -> Self {
        Self { root, path: Vec::new() }
    }

    pub fn child(&self, bit: bool) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(bit);
        Self { root: self.root, path }
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }

    pub fn is_ancestor_of(&self, other: &CellLabel) -> bool {
        self.root == other.root && self.path.len() < other.path.len() && other.path.starts_with(&self.path)
    }
}

impl fmt::Display for CellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.root)?;
        for &b in &self.path {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n0: u32,
    /// R, divisions per unit time per cell.
    pub division_rate: f64,
    /// α, toxicity gained per unit time.
    pub growth_rate: f64,
    /// T.
    pub horizon: f64,
    /// One value per founder.
    pub initial_toxicity: Vec<f64>,
    pub kernel: DivisionKernelModel,
    pub seed: u64,
    /// Instants at which population summaries are recorded.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Keep Ulam–Harris–Neveu labels for every cell.
    #[serde(default)]
    pub genealogy: bool,
}

impl SimConfig {
    /// Founders all start with toxicity 1.
    pub fn new(n0: u32, division_rate: f64, growth_rate: f64, horizon: f64, kernel: DivisionKernelModel, seed: u64) -> Self {
        Self {
            n0,
            division_rate,
            growth_rate,
            horizon,
            initial_toxicity: vec![1.0; n0 as usize],
            kernel,
            seed,
            snapshot_times: Vec::new(),
            genealogy: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 {
            return Err(Error::param("n0 must be at least 1"));
        }
        if !(self.division_rate.is_finite() && self.division_rate > 0.0) {
            return Err(Error::param(format!("division rate must be finite and positive, got {}", self.division_rate)));
        }
        if !(self.growth_rate.is_finite() && self.growth_rate >= 0.0) {
            return Err(Error::param(format!("growth rate must be finite and nonnegative, got {}", self.growth_rate)));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::param(format!("horizon must be finite and nonnegative, got {}", self.horizon)));
        }
        if self.initial_toxicity.len() != self.n0 as usize {
            return Err(Error::param(format!(
                "expected {} initial toxicities, got {}",
                self.n0,
                self.initial_toxicity.len()
            )));
        }
        if self.initial_toxicity.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::param("initial toxicities must be finite and nonnegative"));
        }
        if self.snapshot_times.iter().any(|t| !(t.is_finite() && *t >= 0.0 && *t <= self.horizon)) {
            return Err(Error::param("snapshot times must lie in [0, horizon]"));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::param("snapshot times must be sorted"));
        }
        self.kernel.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivisionRecord {
    pub time: f64,
    /// Present only when genealogy tracking is on.
    pub parent: Option<CellLabel>,
    /// Toxicity of the mother just before the split.
    pub parent_toxicity: f64,
    /// Fraction inherited by daughter `i1`.
    pub gamma: f64,
}

impl DivisionRecord {
    /// Toxicities of daughters `i0` and `i1`.
    pub fn daughters(&self) -> (f64, f64) {
        split(self.parent_toxicity, self.gamma)
    }
}

fn split(x: f64, gamma: f64) -> (f64, f64) {
    let one = gamma * x;
    (x - one, one)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LivingCell {
    pub label: Option<CellLabel>,
    pub toxicity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub n_alive: usize,
    pub mean_age: f64,
    pub total_toxicity: f64,
    /// Quartiles of the individual toxicities.
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub config: SimConfig,
    pub records: Vec<DivisionRecord>,
    pub final_population: Vec<LivingCell>,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    /// M_T.
    pub fn divisions(&self) -> usize {
        self.records.len()
    }

    /// N_T.
    pub fn final_size(&self) -> usize {
        self.final_population.len()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gamma).collect()
    }
}

struct Cell {
    birth_time: f64,
    birth_toxicity: f64,
    label: Option<CellLabel>,
}

impl Cell {
    fn toxicity_at(&self, t: f64, alpha: f64) -> f64 {
        self.birth_toxicity + alpha * (t - self.birth_time)
    }
}

/// Runs one trajectory from the seed in `config`.
pub fn simulate(config: &SimConfig) -> Result<Trajectory> {
    let mut rng = rng::seeded(config.seed);
    simulate_with_rng(config, &mut rng)
}

/// Runs one trajectory drawing from a caller-supplied stream.
pub fn simulate_with_rng(config: &SimConfig, rng: &mut SimRng) -> Result<Trajectory> {
    config.validate()?;
    let alpha = config.growth_rate;
    let rate = config.division_rate;
    let horizon = config.horizon;

    let mut cells: Vec<Cell> = config
        .initial_toxicity
        .iter()
        .enumerate()
        .map(|(i, &x)| Cell {
            birth_time: 0.0,
            birth_toxicity: x,
            label: config.genealogy.then(|| CellLabel::founder(i as u32)),
        })
        .collect();
    let mut records = Vec::new();
    let mut snapshots = Vec::with_capacity(config.snapshot_times.len());
    let mut pending = config.snapshot_times.iter().copied().peekable();
    let mut t = 0.0;

    loop {
        let n = cells.len();
        let wait: f64 = Exp1.sample(rng);
        let next = t + wait / (rate * n as f64);
        while let Some(&s) = pending.peek() {
            if s >= next {
                break;
            }
            snapshots.push(snapshot(&cells, s, alpha));
            pending.next();
        }
        if next > horizon {
            break;
        }
        t = next;
        let idx = rng.random_range(0..n);
        let gamma = config.kernel.sample(rng);
        let mother = &cells[idx];
        let x = mother.toxicity_at(t, alpha);
        let (x0, x1) = split(x, gamma);
        let (l0, l1) = match &mother.label {
            Some(l) => (Some(l.child(false)), Some(l.child(true))),
            None => (None, None),
        };
        records.push(DivisionRecord { time: t, parent: mother.label.clone(), parent_toxicity: x, gamma });
        cells[idx] = Cell { birth_time: t, birth_toxicity: x0, label: l0 };
        cells.push(Cell { birth_time: t, birth_toxicity: x1, label: l1 });
    }
    for s in pending {
        snapshots.push(snapshot(&cells, s, alpha));
    }

    let final_population = cells
        .into_iter()
        .map(|c| LivingCell { toxicity: c.toxicity_at(horizon, alpha), label: c.label })
        .collect();
    Ok(Trajectory { config: config.clone(), records, final_population, snapshots })
}

fn snapshot(cells: &[Cell], t: f64, alpha: f64) -> Snapshot {
    let mut xs: Vec<f64> = cells.iter().map(|c| c.toxicity_at(t, alpha)).collect();
    let total: f64 = xs.iter().sum();
    xs.sort_unstable_by(f64::total_cmp);
    Snapshot {
        time: t,
        n_alive: xs.len(),
        mean_age: total / xs.len() as f64,
        total_toxicity: total,
        q25: quantile_sorted(&xs, 0.25),
        q75: quantile_sorted(&xs, 0.75),
    }
}

/// Population size and mean toxicity at each requested time, rebuilt from
/// the division times: the total toxicity is `Σx₀ + α ∫₀ᵗ N_s ds`.
pub fn mean_age_series(traj: &Trajectory, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    let cfg = &traj.config;
    if let Some(&bad) = times.iter().find(|t| !(**t >= 0.0 && **t <= cfg.horizon)) {
        return Err(Error::TimeOutOfRange { time: bad, horizon: cfg.horizon });
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("times must be sorted"));
    }
    let initial: f64 = cfg.initial_toxicity.iter().sum();
    let mut out = Vec::with_capacity(times.len());
    let mut n = cfg.n0 as f64;
    let mut area = 0.0;
    let mut last = 0.0;
    let mut events = traj.records.iter().map(|r| r.time).peekable();
    for &t in times {
        while let Some(&e) = events.peek() {
            if e > t {
                break;
            }
            area += n * (e - last);
            last = e;
            n += 1.0;
            events.next();
        }
        let integral = area + n * (t - last);
        out.push((t, (initial + cfg.growth_rate * integral) / n));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n0: u32, horizon: f64, seed: u64) -> SimConfig {
        SimConfig::new(n0, 0.5, 0.35, horizon, DivisionKernelModel::Beta { a: 2.0 }, seed)
    }

    #[test]
    fn empty_horizon_keeps_founders() {
        let traj = simulate(&cfg(3, 0.0, 1)).unwrap();
        assert!(traj.records.is_empty());
        assert_eq!(traj.final_size(), 3);
        assert!(traj.final_population.iter().all(|c| c.toxicity == 1.0));
    }

    #[test]
    fn population_identity_and_time_order() {
        for seed in 0..20 {
            let traj = simulate(&cfg(2, 8.0, seed)).unwrap();
            assert_eq!(traj.final_size(), 2 + traj.divisions());
            assert!(traj.records.windows(2).all(|w| w[0].time < w[1].time));
            assert!(traj.records.iter().all(|r| r.time > 0.0 && r.time <= 8.0));
            assert!(traj.records.iter().all(|r| r.gamma > 0.0 && r.gamma < 1.0));
        }
    }

    #[test]
    fn first_split_conserves_toxicity() {
        let c = SimConfig { growth_rate: 0.35, ..cfg(1, 10.0, 11) };
        let traj = simulate(&c).unwrap();
        let first = &traj.records[0];
        assert!((first.parent_toxicity - (1.0 + 0.35 * first.time)).abs() < 1e-15);
        for r in &traj.records {
            let (a, b) = r.daughters();
            let diff = (a + b - r.parent_toxicity).abs();
            assert!(diff <= f64::EPSILON * r.parent_toxicity, "{diff}");
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let a = simulate(&cfg(1, 9.0, 5)).unwrap();
        let b = simulate(&cfg(1, 9.0, 5)).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.final_population, b.final_population);
    }

    #[test]
    fn genealogy_labels_are_prefix_free() {
        let c = SimConfig { genealogy: true, ..cfg(2, 6.0, 9) };
        let traj = simulate(&c).unwrap();
        let labels: Vec<&CellLabel> = traj.final_population.iter().map(|c| c.label.as_ref().unwrap()).collect();
        for (i, a) in labels.iter().enumerate() {
            for b in &labels[i + 1..] {
                assert_ne!(a, b);
                assert!(!a.is_ancestor_of(b) && !b.is_ancestor_of(a));
            }
        }
        assert!(traj.records.iter().all(|r| r.parent.is_some()));
        assert_eq!(CellLabel::founder(0).child(true).child(false).to_string(), "0:10");
    }

    #[test]
    fn snapshots_match_reconstruction() {
        let mut c = cfg(3, 12.0, 21);
        c.initial_toxicity = vec![1.0, 0.5, 2.0];
        c.snapshot_times = (0..=24).map(|k| k as f64 * 0.5).collect();
        let traj = simulate(&c).unwrap();
        let series = mean_age_series(&traj, &c.snapshot_times).unwrap();
        assert_eq!(traj.snapshots.len(), series.len());
        for (s, (t, m)) in traj.snapshots.iter().zip(&series) {
            assert_eq!(s.time, *t);
            assert!((s.mean_age - m).abs() <= 1e-9 * m.abs(), "{} vs {}", s.mean_age, m);
            let n_ref = 3 + traj.records.iter().filter(|r| r.time <= *t).count();
            assert_eq!(s.n_alive, n_ref);
            assert!((s.total_toxicity - m * n_ref as f64).abs() <= 1e-9 * s.total_toxicity);
            assert!(s.q25 <= s.q75);
        }
        assert_eq!(series[0].1, 3.5 / 3.0);
    }

    #[test]
    fn mean_age_without_division_grows_linearly() {
        // R tiny so no division happens before T.
        let c = SimConfig::new(1, 1e-12, 0.45, 4.0, DivisionKernelModel::Beta { a: 2.0 }, 1);
        let traj = simulate(&c).unwrap();
        assert!(traj.records.is_empty());
        let s = mean_age_series(&traj, &[0.0, 2.0, 4.0]).unwrap();
        assert_eq!(s[0].1, 1.0);
        assert!((s[1].1 - 1.9).abs() < 1e-15);
        assert!((s[2].1 - 2.8).abs() < 1e-15);
    }

    #[test]
    fn mean_age_rejects_out_of_range() {
        let traj = simulate(&cfg(1, 2.0, 1)).unwrap();
        assert!(matches!(mean_age_series(&traj, &[2.5]), Err(Error::TimeOutOfRange { .. })));
        assert!(mean_age_series(&traj, &[-0.1]).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(simulate(&SimConfig { n0: 0, initial_toxicity: vec![], ..cfg(1, 1.0, 0) }).is_err());
        assert!(simulate(&SimConfig { division_rate: f64::NAN, ..cfg(1, 1.0, 0) }).is_err());
        assert!(simulate(&SimConfig { horizon: f64::INFINITY, ..cfg(1, 1.0, 0) }).is_err());
        assert!(simulate(&SimConfig { growth_rate: -1.0, ..cfg(1, 1.0, 0) }).is_err());
        assert!(simulate(&SimConfig { initial_toxicity: vec![1.0, 1.0], ..cfg(1, 1.0, 0) }).is_err());
    }
}

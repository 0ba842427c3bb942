//! Declarative experiment configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::OracleMode;
use crate::grid::EvaluationGrid;
use crate::model::DivisionKernelModel;
use crate::select::{DEFAULT_CAP, DEFAULT_DELTA, DEFAULT_EPSILON};
use crate::sim::SimConfig;

/// Estimation methods compared in the Monte Carlo tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "GL")]
    Gl,
    #[serde(rename = "CV")]
    Cv,
    #[serde(rename = "RoT")]
    Rot,
    Oracle,
    /// Parametric Beta(â, â) fit.
    #[serde(rename = "ML")]
    Ml,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Gl, Method::Cv, Method::Rot, Method::Oracle, Method::Ml];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gl => "GL",
            Method::Cv => "CV",
            Method::Rot => "RoT",
            Method::Oracle => "Oracle",
            Method::Ml => "ML",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Settings for the ε calibration sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub epsilons: Vec<f64>,
}

/// Settings for the mean-age study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanAgeConfig {
    pub trees: usize,
    pub t_start: f64,
    pub t_stop: f64,
    pub t_step: f64,
    /// Parameters `a` of the Beta(a, a) division laws to compare.
    pub beta_params: Vec<f64>,
}

impl MeanAgeConfig {
    /// `t_start, t_start + t_step, …` up to `t_stop` inclusive.
    pub fn times(&self) -> Vec<f64> {
        let n = ((self.t_stop - self.t_start) / self.t_step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.t_start + k as f64 * self.t_step).map(|t| t.min(self.t_stop)).collect()
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_cap() -> usize {
    DEFAULT_CAP
}

fn default_toxicity() -> f64 {
    1.0
}

fn default_oracle_mode() -> OracleMode {
    OracleMode::MonteCarlo
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub n0: u32,
    /// R.
    pub division_rate: f64,
    /// α.
    pub growth_rate: f64,
    /// Toxicity of every founder.
    #[serde(default = "default_toxicity")]
    pub initial_toxicity: f64,
    /// Observation horizons T.
    pub horizons: Vec<f64>,
    pub truth: DivisionKernelModel,
    pub methods: Vec<Method>,
    pub replicates: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default = "default_oracle_mode")]
    pub oracle_mode: OracleMode,
    #[serde(default)]
    pub grid: EvaluationGrid,
    #[serde(default)]
    pub calibration: Option<CalibrationConfig>,
    #[serde(default)]
    pub mean_age: Option<MeanAgeConfig>,
}

impl ExperimentConfig {
    /// The Beta(2, 2) setting with R = 0.5, α = 0.35, N₀ = 1.
    pub fn beta22(horizons: Vec<f64>, replicates: usize, master_seed: u64) -> Self {
        Self {
            master_seed,
            n0: 1,
            division_rate: 0.5,
            growth_rate: 0.35,
            initial_toxicity: 1.0,
            horizons,
            truth: DivisionKernelModel::Beta { a: 2.0 },
            methods: Method::ALL.to_vec(),
            replicates,
            epsilon: DEFAULT_EPSILON,
            delta: DEFAULT_DELTA,
            cap: DEFAULT_CAP,
            oracle_mode: OracleMode::MonteCarlo,
            grid: EvaluationGrid::default(),
            calibration: None,
            mean_age: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.horizons.is_empty() {
            return bad("at least one horizon is required".into());
        }
        if let Some(t) = self.horizons.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return bad(format!("horizons must be positive, got {t}"));
        }
        if self.horizons.len() > usize::from(u16::MAX) {
            return bad("too many horizons".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon > -1.0) {
            return bad(format!("epsilon must exceed -1, got {}", self.epsilon));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if self.cap == 0 {
            return bad("cap must be at least 1".into());
        }
        if !(self.initial_toxicity.is_finite() && self.initial_toxicity >= 0.0) {
            return bad(format!("initial toxicity must be nonnegative, got {}", self.initial_toxicity));
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.methods.contains(&Method::Ml) && !matches!(self.truth, DivisionKernelModel::Beta { .. }) {
            return bad("the ML method fits Beta(a, a) and needs a Beta(a, a) truth".into());
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return bad("methods must not repeat".into());
        }
        if !self.grid.is_symmetric() {
            return bad("the evaluation grid must be symmetric about 1/2".into());
        }
        if let Some(c) = &self.calibration {
            if c.epsilons.is_empty() {
                return bad("calibration needs at least one epsilon".into());
            }
            if let Some(e) = c.epsilons.iter().find(|e| !(e.is_finite() && **e > -1.0)) {
                return bad(format!("calibration epsilons must exceed -1, got {e}"));
            }
        }
        if let Some(m) = &self.mean_age {
            if m.trees < 2 {
                return bad("the mean-age study needs at least 2 trees".into());
            }
            if !(m.t_step > 0.0 && m.t_start >= 0.0 && m.t_stop >= m.t_start && m.t_stop.is_finite()) {
                return bad("mean-age times need 0 <= t_start <= t_stop and t_step > 0".into());
            }
            if m.beta_params.is_empty() || m.beta_params.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return bad("mean-age Beta parameters must be positive".into());
            }
        }
        self.grid.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.sim_config(self.horizons[0], self.master_seed).validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Simulation settings for one horizon.
    pub fn sim_config(&self, horizon: f64, seed: u64) -> SimConfig {
        let mut sim = SimConfig::new(self.n0, self.division_rate, self.growth_rate, horizon, self.truth.clone(), seed);
        sim.initial_toxicity = vec![self.initial_toxicity; self.n0 as usize];
        sim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
master_seed = 7
n0 = 1
division_rate = 0.5
growth_rate = 0.35
horizons = [13.0]
methods = ["GL", "RoT", "ML"]
replicates = 4

[truth]
kind = "beta"
a = 2.0
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml_str(TEXT).unwrap();
        assert_eq!(cfg.epsilon, -0.68);
        assert_eq!(cfg.delta, 0.05);
        assert_eq!(cfg.cap, 128);
        assert_eq!(cfg.grid, EvaluationGrid::default());
        assert_eq!(cfg.oracle_mode, OracleMode::MonteCarlo);
        assert_eq!(cfg.methods, vec![Method::Gl, Method::Rot, Method::Ml]);
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_invalid_settings() {
        assert!(ExperimentConfig::from_toml_str(&TEXT.replace("replicates = 4", "replicates = 0")).is_err());
        assert!(ExperimentConfig::from_toml_str(&TEXT.replace("[13.0]", "[]")).is_err());
        assert!(ExperimentConfig::from_toml_str(&TEXT.replace("\"GL\"", "\"XX\"")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("bogus = 1\n{TEXT}")).is_err());
        let mixture = TEXT.replace("kind = \"beta\"\na = 2.0", "kind = \"beta_mixture\"\nweight = 0.5\na1 = 2.0\nb1 = 6.0\na2 = 6.0\nb2 = 2.0");
        assert!(ExperimentConfig::from_toml_str(&mixture).is_err());
        assert!(ExperimentConfig::from_toml_str(&mixture.replace(", \"ML\"", "")).is_ok());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()).unwrap(), m);
        }
        assert_eq!(Method::parse("rot").unwrap(), Method::Rot);
        assert!(Method::parse("kde").is_err());
    }

    #[test]
    fn mean_age_time_grid() {
        let m = MeanAgeConfig { trees: 50, t_start: 6.0, t_stop: 24.0, t_step: 0.36, beta_params: vec![2.0] };
        let t = m.times();
        assert_eq!(t.len(), 51);
        assert_eq!(t[0], 6.0);
        assert!((t[50] - 24.0).abs() < 1e-12);
    }
}

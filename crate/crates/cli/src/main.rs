use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::info;

use divkernel::config::{ExperimentConfig, MeanAgeConfig, Method};
use divkernel::estimate::{DensityEstimate, Diagnostics, GridFunction, Sample, Selector};
use divkernel::experiments::{
    calibrate_epsilon, population_check, rate_from_report, run_mean_age_experiment, run_paired_experiment, RateFit,
};
use divkernel::export::{density_sidecar_json, float, write_density_csv, write_snapshots_csv, write_trajectory_csv};
use divkernel::kernel::Gaussian;
use divkernel::mle::beta_mle;
use divkernel::model::DivisionKernelModel;
use divkernel::select::{cv_select, gl_select, oracle_select, rot_select, BandwidthGrid};
use divkernel::sim::simulate;
use divkernel::Error;

const DEFAULT_EPSILONS: [f64; 5] = [-0.9, -0.68, -0.3, 0.0, 0.5];

#[derive(Parser)]
#[command(name = "divkernel", version, about = "Simulate dividing populations and estimate their division kernel")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated methods (GL, CV, RoT, Oracle, ML).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Replaces the configured horizons with a single one.
    #[arg(long = "T")]
    horizon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one tree and export its divisions and population snapshots.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Record Ulam–Harris–Neveu labels.
        #[arg(long)]
        genealogy: bool,
    },
    /// Estimate the division kernel from one simulated tree or a file of fractions.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// One division fraction per line; replaces the simulation.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Monte Carlo error table of every method across horizons.
    Mise {
        #[command(flatten)]
        common: Common,
    },
    /// Error table of the symmetrized estimators.
    Symmetrized {
        #[command(flatten)]
        common: Common,
    },
    /// GL risk as a function of ε.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
    /// Log-linear fit of the mean error against the horizon.
    Rate {
        #[command(flatten)]
        common: Common,
    },
    /// Mean toxicity and its quartiles over many trees.
    Meanage {
        #[command(flatten)]
        common: Common,
    },
    /// Compare simulated population sizes with their exact law.
    Ntcheck {
        #[arg(long, default_value_t = 1)]
        n0: u32,
        #[arg(long = "R")]
        rate: f64,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long, default_value_t = 100_000)]
        replicates: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        runtime(e)
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&common.config).map_err(|e| match e {
        Error::Io(io) => Failure::Config(format!("cannot read {}: {io}", common.config.display())),
        other => Failure::Config(other.to_string()),
    })?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(t) = common.horizon {
        cfg.horizons = vec![t];
    }
    if let Some(names) = &common.methods {
        cfg.methods = names.iter().map(|n| Method::parse(n)).collect::<Result<_, _>>().map_err(|e| Failure::Config(e.to_string()))?;
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    std::fs::create_dir_all(&common.out)?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes a file through `f` and returns its path for the summary line.
fn emit(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<String, Failure> {
    let mut w = create(dir, name)?;
    f(&mut w)?;
    w.flush()?;
    Ok(dir.join(name).display().to_string())
}

/// Rows written and files touched by one command.
struct Outcome {
    rows: usize,
    files: Vec<String>,
}

fn run_simulate(common: &Common, genealogy: bool) -> Result<Outcome, Failure> {
    let cfg = load(common)?;
    let horizon = cfg.horizons[0];
    let mut sim = cfg.sim_config(horizon, cfg.master_seed);
    sim.genealogy = genealogy;
    sim.snapshot_times = match &cfg.mean_age {
        Some(m) => m.times().into_iter().filter(|t| *t <= horizon).collect(),
        None => (0..=100).map(|k| horizon * k as f64 / 100.0).collect(),
    };
    let traj = simulate(&sim)?;
    info!("simulated T={horizon}: {} divisions, {} cells", traj.divisions(), traj.final_size());
    let files = vec![
        emit(&common.out, "trajectory.csv", |w| write_trajectory_csv(&traj, w))?,
        emit(&common.out, "snapshots.csv", |w| write_snapshots_csv(&traj.snapshots, w))?,
    ];
    Ok(Outcome { rows: traj.divisions() + traj.snapshots.len(), files })
}

fn read_fractions(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && *l != "gamma")
        .map(|l| l.parse::<f64>().map_err(|_| Failure::Config(format!("not a number in {}: {l:?}", path.display()))))
        .collect()
}

fn run_estimate(common: &Common, input: Option<&Path>) -> Result<Outcome, Failure> {
    let cfg = load(common)?;
    let gammas = match input {
        Some(p) => read_fractions(p)?,
        None => simulate(&cfg.sim_config(cfg.horizons[0], cfg.master_seed))?.gammas(),
    };
    let sample = Sample::new(gammas)?;
    let grid = cfg.grid;
    let kernel = Gaussian;
    let h = BandwidthGrid::for_sample_size(sample.len(), cfg.delta, cfg.cap)?;
    let truth = GridFunction::from_model(&cfg.truth, grid);
    let mut files = Vec::new();
    let mut rows = 0;
    for &method in &cfg.methods {
        let est = match method {
            Method::Gl => gl_select(&sample, &kernel, &h, cfg.epsilon, &grid)?,
            Method::Cv => cv_select(&sample, &kernel, &h, &grid)?,
            Method::Rot => rot_select(&sample, &kernel, &grid)?,
            Method::Oracle => oracle_select(&sample, &kernel, &h, &grid, &truth)?,
            Method::Ml => {
                let fit = beta_mle(&sample)?;
                let values = GridFunction::from_model(&DivisionKernelModel::Beta { a: fit.a }, grid).values;
                let est = DensityEstimate {
                    grid,
                    values,
                    bandwidth: f64::NAN,
                    method: Selector::Fixed,
                    m_t: sample.len(),
                    diagnostics: Diagnostics::default(),
                };
                files.push(emit(&common.out, "density_ML.csv", |w| write_density_csv(&est, w))?);
                let side = serde_json::json!({ "method": "ML", "a": fit.a, "iterations": fit.iterations, "m_t": sample.len() });
                files.push(emit(&common.out, "density_ML.json", |w| writeln!(w, "{side:#}"))?);
                rows += grid.n_points;
                continue;
            }
        };
        info!("{method}: bandwidth {} on M_T={}", est.bandwidth, est.m_t);
        let name = format!("density_{method}");
        files.push(emit(&common.out, &format!("{name}.csv"), |w| write_density_csv(&est, w))?);
        files.push(emit(&common.out, &format!("{name}.json"), |w| writeln!(w, "{}", density_sidecar_json(&est)))?);
        rows += grid.n_points;
    }
    Ok(Outcome { rows, files })
}

fn run_tables(common: &Common, symmetrized: bool) -> Result<Outcome, Failure> {
    let cfg = load(common)?;
    let (raw, sym) = run_paired_experiment(&cfg)?;
    let (main, other, other_name) = if symmetrized { (sym, raw, "table_unsymmetrized.csv") } else { (raw, sym, "table_symmetrized.csv") };
    let files = vec![
        emit(&common.out, "table.csv", |w| main.write_table_csv(w))?,
        emit(&common.out, "replicates.csv", |w| main.write_replicates_csv(w))?,
        emit(&common.out, other_name, |w| other.write_table_csv(w))?,
    ];
    Ok(Outcome { rows: main.rows.len() + main.replicates.len(), files })
}

fn run_calibrate(common: &Common) -> Result<Outcome, Failure> {
    let cfg = load(common)?;
    let epsilons = cfg.calibration.as_ref().map(|c| c.epsilons.clone()).unwrap_or_else(|| DEFAULT_EPSILONS.to_vec());
    let report = calibrate_epsilon(&cfg, &epsilons)?;
    info!("Monte Carlo oracle bandwidth {}", report.oracle_bandwidth);
    let files = vec![emit(&common.out, "epsilon.csv", |w| report.write_csv(w))?];
    Ok(Outcome { rows: report.rows.len(), files })
}

fn write_rates(fits: &[(Method, RateFit)], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "method,T,e_bar,log_e_bar,fitted_log_e_bar")?;
    for (method, fit) in fits {
        for &(t, e) in &fit.points {
            writeln!(w, "{method},{},{},{},{}", float(t), float(e), float(e.ln()), float(fit.intercept + fit.slope * t))?;
        }
    }
    Ok(())
}

fn run_rate(common: &Common) -> Result<Outcome, Failure> {
    let cfg = load(common)?;
    if cfg.horizons.len() < 2 {
        return Err(Failure::Config("the rate fit needs at least 2 horizons".into()));
    }
    let report = run_paired_experiment(&cfg)?.0;
    let fits: Vec<(Method, RateFit)> = cfg
        .methods
        .iter()
        .map(|&m| rate_from_report(&report, m, cfg.division_rate, 1.0).map(|f| (m, f)))
        .collect::<Result<_, _>>()?;
    for (m, f) in &fits {
        info!("{m}: slope {} (theory {})", f.slope, f.theoretical_slope);
    }
    let json: serde_json::Map<String, serde_json::Value> = fits
        .iter()
        .map(|(m, f)| (m.to_string(), serde_json::to_value(f).expect("plain data")))
        .collect();
    let files = vec![
        emit(&common.out, "table.csv", |w| report.write_table_csv(w))?,
        emit(&common.out, "replicates.csv", |w| report.write_replicates_csv(w))?,
        emit(&common.out, "rate.csv", |w| write_rates(&fits, w))?,
        emit(&common.out, "rate.json", |w| writeln!(w, "{:#}", serde_json::Value::Object(json)))?,
    ];
    Ok(Outcome { rows: fits.iter().map(|f| f.1.points.len()).sum(), files })
}

fn run_meanage(common: &Common) -> Result<Outcome, Failure> {
    let cfg = load(common)?;
    let study: MeanAgeConfig = cfg
        .mean_age
        .clone()
        .ok_or_else(|| Failure::Config("the configuration has no [mean_age] section".into()))?;
    let report = run_mean_age_experiment(&cfg, &study)?;
    for s in &report.series {
        info!("a={}: time-averaged quartile spread {}", s.a, s.spread);
    }
    let files = vec![
        emit(&common.out, "meanage.csv", |w| report.write_csv(w))?,
        emit(&common.out, "meanage_spread.csv", |w| report.write_spread_csv(w))?,
    ];
    Ok(Outcome { rows: report.series.iter().map(|s| s.points.len() + 1).sum(), files })
}

fn run_ntcheck(n0: u32, rate: f64, horizon: f64, replicates: usize, seed: u64, out: &Path) -> Result<Outcome, Failure> {
    if n0 == 0 || !(rate > 0.0) || !(horizon > 0.0) || replicates < 2 {
        return Err(Failure::Config("ntcheck needs n0 >= 1, R > 0, T > 0 and at least 2 replicates".into()));
    }
    std::fs::create_dir_all(out)?;
    let check = population_check(n0, rate, horizon, replicates, seed)?;
    info!(
        "E[N_T] z={:.3}, E[1/N_T] z={:.3}, chi-square p={:.4}",
        check.mean_z(),
        check.inverse_z(),
        check.p_value
    );
    let files = vec![emit(out, "ntcheck.csv", |w| check.write_csv(w))?];
    Ok(Outcome { rows: 3, files })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DIVKERNEL_LOG", "info"))
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", serde_json::json!({ "error": "config", "message": e.to_string() }));
            return ExitCode::from(3);
        }
    }
    let start = Instant::now();
    let (name, result) = match &cli.command {
        Command::Simulate { common, genealogy } => ("simulate", run_simulate(common, *genealogy)),
        Command::Estimate { common, input } => ("estimate", run_estimate(common, input.as_deref())),
        Command::Mise { common } => ("mise", run_tables(common, false)),
        Command::Symmetrized { common } => ("symmetrized", run_tables(common, true)),
        Command::Calibrate { common } => ("calibrate", run_calibrate(common)),
        Command::Rate { common } => ("rate", run_rate(common)),
        Command::Meanage { common } => ("meanage", run_meanage(common)),
        Command::Ntcheck { n0, rate, horizon, replicates, seed, out } => {
            ("ntcheck", run_ntcheck(*n0, *rate, *horizon, *replicates, *seed, out))
        }
    };
    match result {
        Ok(outcome) => {
            println!(
                "{name}: {} rows in {} files ({}) in {:.2}s",
                outcome.rows,
                outcome.files.len(),
                outcome.files.join(", "),
                start.elapsed().as_secs_f64()
            );
            ExitCode::SUCCESS
        }
        Err(f) => {
            let (kind, message) = match &f {
                Failure::Config(m) => ("config", m),
                Failure::Runtime(m) => ("runtime", m),
            };
            eprintln!("{}", serde_json::json!({ "command": name, "error": kind, "message": message }));
            ExitCode::from(f.code())
        }
    }
}

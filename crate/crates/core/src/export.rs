//! CSV and JSON writers. Floats are printed with 17 significant digits so
//! that files round-trip exactly.

use std::io::{self, Write};

use serde::Serialize;

use crate::estimate::{DensityEstimate, DiagnosticRow, OracleMode, Selector};
use crate::sim::{Snapshot, Trajectory};

/// `x` in scientific notation with 17 significant digits.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// An optional float; absent values become an empty field.
pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// One row per division: `event_index,time,parent_label,parent_toxicity,gamma`.
/// The label column is present only when genealogy was recorded.
pub fn write_trajectory_csv(traj: &Trajectory, mut w: impl Write) -> io::Result<()> {
    let labels = traj.config.genealogy;
    if labels {
        writeln!(w, "event_index,time,parent_label,parent_toxicity,gamma")?;
    } else {
        writeln!(w, "event_index,time,parent_toxicity,gamma")?;
    }
    for (i, r) in traj.records.iter().enumerate() {
        match (&r.parent, labels) {
            (Some(label), true) => {
                writeln!(w, "{i},{},{label},{},{}", float(r.time), float(r.parent_toxicity), float(r.gamma))?
            }
            _ => writeln!(w, "{i},{},{},{}", float(r.time), float(r.parent_toxicity), float(r.gamma))?,
        }
    }
    Ok(())
}

/// `time,n_alive,mean_age,total_toxicity,q25,q75`.
pub fn write_snapshots_csv(snapshots: &[Snapshot], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "time,n_alive,mean_age,total_toxicity,q25,q75")?;
    for s in snapshots {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            float(s.time),
            s.n_alive,
            float(s.mean_age),
            float(s.total_toxicity),
            float(s.q25),
            float(s.q75)
        )?;
    }
    Ok(())
}

/// `gamma,value` on every grid point.
pub fn write_density_csv(est: &DensityEstimate, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "gamma,value")?;
    for (k, v) in est.values.iter().enumerate() {
        writeln!(w, "{},{}", float(est.grid.point(k)), float(*v))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    method: Selector,
    bandwidth: f64,
    m_t: usize,
    epsilon: Option<f64>,
    delta: Option<f64>,
    oracle_mode: Option<OracleMode>,
    diagnostics: &'a [DiagnosticRow],
}

/// Metadata of a density estimate: method, bandwidth, sample size and the
/// per-bandwidth selector table.
pub fn density_sidecar_json(est: &DensityEstimate) -> String {
    let side = Sidecar {
        method: est.method,
        bandwidth: est.bandwidth,
        m_t: est.m_t,
        epsilon: est.diagnostics.epsilon,
        delta: est.diagnostics.delta,
        oracle_mode: est.diagnostics.oracle_mode,
        diagnostics: &est.diagnostics.rows,
    };
    serde_json::to_string_pretty(&side).expect("sidecar is plain data")
}

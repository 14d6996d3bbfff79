//! Run reports, power-curve CSV and atomic file output.

use std::io::Write;
use std::path::Path;

use riviv_core::numerics::random::RNG_ALGORITHM;
use riviv_core::simulation::PowerCurve;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{AppError, AppResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
    pub rng: String,
}

impl Default for Software {
    fn default() -> Self {
        Software {
            name: "riviv".into(),
            version: VERSION.into(),
            rng: RNG_ALGORITHM.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_seconds: f64,
    pub threads: usize,
}

/// Everything needed to rerun a command, and what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub software: Software,
    pub seed: u64,
    pub inputs: Value,
    pub outputs: Value,
    pub timing: Timing,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values serialize")
    }
}

/// Writes through a temporary file in the target directory and renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> AppResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AppError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| AppError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| AppError::io(path, e))?;
    tmp.persist(path).map_err(|e| AppError::io(path, e.error))?;
    Ok(())
}

/// Columns `beta,test,rejection_rate,mc_se`; grid-major, tests in study order.
pub fn power_csv(curve: &PowerCurve) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["beta", "test", "rejection_rate", "mc_se"])
        .expect("in-memory write");
    for (g, beta) in curve.beta_grid.iter().enumerate() {
        for s in &curve.series {
            wtr.write_record([
                beta.to_string(),
                s.label.clone(),
                s.rate[g].to_string(),
                s.mc_se[g].to_string(),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Fixed-width summary: one row per β, one rate column per test.
pub fn power_table(curve: &PowerCurve) -> String {
    let mut out = format!("{:>10}", "beta");
    for s in &curve.series {
        out += &format!(" {:>8}", s.label);
    }
    out.push('\n');
    for (g, beta) in curve.beta_grid.iter().enumerate() {
        out += &format!("{beta:>10.4}");
        for s in &curve.series {
            out += &format!(" {:>8.4}", s.rate[g]);
        }
        out.push('\n');
    }
    out
}

//! Finite-contamination sensitivity curves.
//!
//! The probe point is appended `⌈t·n⌉` times and the reduced form refitted, so
//! contamination goes through exactly the same fitting code as real data. The
//! reported displacement is the change in the stacked instrument coefficients
//! `(δ̂, π̂)` divided by the realised contamination mass `m / (n + m)`.

use alloc::vec::Vec;

use super::{fit_pair, FitOptions};
use crate::data::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::numerics::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensitivityPoint {
    pub t: f64,
    /// Number of appended probe copies.
    pub copies: usize,
    /// Realised contamination mass `copies / (n + copies)`.
    pub mass: f64,
    pub displacement: f64,
}

fn instrument_coefs(base: &Dataset, opts: &FitOptions) -> Result<Vec<f64>> {
    let k = base.k();
    let (fy, fx, _) = fit_pair(base, opts)?;
    let p = fy.coef.len();
    let mut out = Vec::with_capacity(2 * k);
    out.extend_from_slice(&fy.coef[p - k..]);
    out.extend_from_slice(&fx.coef[p - k..]);
    Ok(out)
}

pub fn sensitivity_curve(
    opts: &FitOptions,
    base: &Dataset,
    probe: &Observation,
    t_values: &[f64],
) -> Result<Vec<SensitivityPoint>> {
    if let Some(bad) = t_values.iter().find(|t| !(**t >= 0.0 && **t < 0.5)) {
        return Err(Error::InvalidArgument(alloc::format!(
            "contamination fraction {bad} outside [0, 0.5)"
        )));
    }
    let theta0 = instrument_coefs(base, opts)?;
    let n = base.n();
    t_values
        .iter()
        .map(|&t| {
            let copies = libm::ceil(t * n as f64) as usize;
            if copies == 0 {
                return Ok(SensitivityPoint {
                    t,
                    copies,
                    mass: 0.0,
                    displacement: 0.0,
                });
            }
            let contaminated = base.with_appended(probe, copies)?;
            let theta = instrument_coefs(&contaminated, opts)?;
            let diff: Vec<f64> = theta.iter().zip(&theta0).map(|(a, b)| a - b).collect();
            let mass = copies as f64 / (n + copies) as f64;
            Ok(SensitivityPoint {
                t,
                copies,
                mass,
                displacement: libm::sqrt(dot(&diff, &diff)) / mass,
            })
        })
        .collect()
}

/// Probe at `(z, w)` whose outcome sits `offset` above the least-squares fitted
/// value and whose regressor sits on the first-stage least-squares fit.
pub fn probe_at_offset(
    base: &Dataset,
    intercept: bool,
    z: &[f64],
    w: &[f64],
    offset: f64,
) -> Result<Observation> {
    if z.len() != base.k() || w.len() != base.p() {
        return Err(Error::DimensionMismatch {
            context: "probe point",
            expected: base.k() + base.p(),
            found: z.len() + w.len(),
        });
    }
    let opts = FitOptions {
        estimator: super::EstimatorKind::Ls,
        intercept,
        ..FitOptions::default()
    };
    let (fy, fx, _) = fit_pair(base, &opts)?;
    let mut row = Vec::with_capacity(fy.coef.len());
    if intercept {
        row.push(1.0);
    }
    row.extend_from_slice(w);
    row.extend_from_slice(z);
    Ok(Observation {
        y: dot(&row, &fy.coef) + offset,
        x: dot(&row, &fx.coef),
        z: z.to_vec(),
        w: w.to_vec(),
    })
}

//! Monte Carlo check of the joint null behaviour of `√n·g` and `√n·D`: `g`
//! centred at zero, and the two asymptotically uncorrelated.

use alloc::vec::Vec;

use super::dgp::{generate_scenario, Contamination, ScenarioConfig};
use super::power::MAX_FAILURE_RATE;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, FitOptions};
use crate::ivtests::{fit_reduced_form, omega, scaled_g_and_d};
use crate::numerics::{Mat, RngStream};

/// One null replication: `√n·g`, `√n·D` and the plug-in `Ω(β₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaDraw {
    pub g: Vec<f64>,
    pub d: Vec<f64>,
    pub omega: Mat,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LemmaReport {
    pub reps: usize,
    pub failures: usize,
    pub mean_g: Vec<f64>,
    pub mean_g_se: Vec<f64>,
    pub mean_d: Vec<f64>,
    pub mean_d_se: Vec<f64>,
    /// Empirical `cov(√n·g_i, √n·D_j)`.
    pub cross_cov: Mat,
    pub cross_cov_se: Mat,
    /// Empirical covariance of `√n·g`.
    pub var_g: Mat,
    /// Average plug-in `Ω(β₀)` over replications.
    pub mean_omega: Mat,
}

impl LemmaReport {
    /// Largest `|cov_ij| / se_ij` over the cross-covariance entries.
    pub fn max_cross_z(&self) -> f64 {
        let k = self.cross_cov.rows();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                worst = worst.max((self.cross_cov[(i, j)] / self.cross_cov_se[(i, j)]).abs());
            }
        }
        worst
    }

    /// Largest `|mean_g_i| / se_i`.
    pub fn max_mean_g_z(&self) -> f64 {
        self.mean_g
            .iter()
            .zip(&self.mean_g_se)
            .map(|(m, s)| (m / s).abs())
            .fold(0.0, f64::max)
    }

    /// Largest relative gap between diagonal entries of `var_g` and `mean_omega`.
    pub fn max_var_rel_gap(&self) -> f64 {
        (0..self.var_g.rows())
            .map(|i| ((self.var_g[(i, i)] - self.mean_omega[(i, i)]) / self.mean_omega[(i, i)]).abs())
            .fold(0.0, f64::max)
    }
}

fn sq(v: f64) -> f64 {
    v * v
}

fn check(cfg: &ScenarioConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.contamination != Contamination::None {
        return Err(Error::InvalidArgument(
            "the null diagnostic runs on uncontaminated data".into(),
        ));
    }
    Ok(())
}

/// Replication `rep` (data stream `rep` of `cfg.seed`), fitted with `estimator`.
pub fn lemma_replicate(cfg: &ScenarioConfig, estimator: EstimatorKind, rep: usize) -> Result<LemmaDraw> {
    let mut rng = RngStream::new(cfg.seed, rep as u64);
    let data = generate_scenario(cfg, &mut rng)?;
    let opts = FitOptions {
        estimator,
        intercept: cfg.intercept,
        huber: cfg.huber,
    };
    let fit = fit_reduced_form(&data, &opts)?;
    let (g, d) = scaled_g_and_d(&fit, cfg.beta0)?;
    Ok(LemmaDraw {
        g,
        d,
        omega: omega(&fit, cfg.beta0),
    })
}

/// Summarises replication outcomes (in replication order) into a report.
pub fn lemma_aggregate(cfg: &ScenarioConfig, outcomes: Vec<Result<LemmaDraw>>) -> Result<LemmaReport> {
    let attempted = outcomes.len();
    let mut last = None;
    let draws: Vec<LemmaDraw> = outcomes
        .into_iter()
        .filter_map(|o| o.map_err(|e| last = Some(alloc::string::ToString::to_string(&e))).ok())
        .collect();
    let failures = attempted - draws.len();
    if failures as f64 > MAX_FAILURE_RATE * attempted as f64 {
        return Err(Error::TooManyFailures {
            failures,
            attempted,
            last: last.unwrap_or_default(),
        });
    }
    let r = draws.len();
    if r < 2 {
        return Err(Error::EmptyInput("diagnostic needs at least two successful replications"));
    }
    let k = cfg.k;
    let rf = r as f64;
    let mean = |f: &dyn Fn(&LemmaDraw) -> &[f64]| -> Vec<f64> {
        let mut m = alloc::vec![0.0; k];
        for d in &draws {
            for (mi, v) in m.iter_mut().zip(f(d)) {
                *mi += v / rf;
            }
        }
        m
    };
    let mean_g = mean(&|d| &d.g);
    let mean_d = mean(&|d| &d.d);

    let mut var_g = Mat::zeros(k, k);
    let mut var_d_diag = alloc::vec![0.0; k];
    let mut cross = Mat::zeros(k, k);
    let mut mean_omega = Mat::zeros(k, k);
    for d in &draws {
        for i in 0..k {
            let gi = d.g[i] - mean_g[i];
            var_d_diag[i] += sq(d.d[i] - mean_d[i]) / (rf - 1.0);
            for j in 0..k {
                var_g[(i, j)] += gi * (d.g[j] - mean_g[j]) / (rf - 1.0);
                cross[(i, j)] += gi * (d.d[j] - mean_d[j]) / (rf - 1.0);
                mean_omega[(i, j)] += d.omega[(i, j)] / rf;
            }
        }
    }
    // Standard error of each cross-covariance entry from the spread of the
    // centred products.
    let mut cross_se = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let c = cross[(i, j)];
            let ss: f64 = draws
                .iter()
                .map(|d| sq((d.g[i] - mean_g[i]) * (d.d[j] - mean_d[j]) - c))
                .sum();
            cross_se[(i, j)] = libm::sqrt(ss / (rf - 1.0) / rf);
        }
    }
    let se = |v: &[f64]| v.iter().map(|s| libm::sqrt(s / rf)).collect::<Vec<_>>();
    let var_g_diag: Vec<f64> = (0..k).map(|i| var_g[(i, i)]).collect();
    Ok(LemmaReport {
        reps: attempted,
        failures,
        mean_g_se: se(&var_g_diag),
        mean_g,
        mean_d_se: se(&var_d_diag),
        mean_d,
        cross_cov: cross,
        cross_cov_se: cross_se,
        var_g,
        mean_omega,
    })
}

/// Sequential diagnostic over `cfg.reps` null replications.
pub fn lemma1_diagnostic(cfg: &ScenarioConfig, estimator: EstimatorKind) -> Result<LemmaReport> {
    check(cfg)?;
    let outcomes = (0..cfg.reps).map(|rep| lemma_replicate(cfg, estimator, rep)).collect();
    lemma_aggregate(cfg, outcomes)
}

/// Validation shared with parallel drivers.
pub fn check_lemma_config(cfg: &ScenarioConfig) -> Result<()> {
    check(cfg)
}

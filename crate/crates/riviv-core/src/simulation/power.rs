//! Monte Carlo size and power studies.
//!
//! Replication `r` at every grid point draws its data from stream `r` of the
//! configured seed, so curves across the `β` grid use common random numbers.
//! CLR critical values come from one shared bank of null draws on a reserved
//! stream. Results depend only on `(grid index, replication)`, so any
//! evaluation order (including parallel) aggregates to the same curve.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::dgp::{generate_scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, FitOptions};
use crate::ivtests::{fit_reduced_form, needs_draws, ClrNullDraws, StatKind, Statistics};
use crate::numerics::{chi2_quantile, RngStream};

/// Stream reserved for the CLR null-draw bank.
pub const CLR_BANK_STREAM: u64 = u64::MAX;

/// Maximum tolerated fraction of failed replications.
pub const MAX_FAILURE_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestSpec {
    pub estimator: EstimatorKind,
    pub stat: StatKind,
}

impl TestSpec {
    pub const CLR: TestSpec = TestSpec {
        estimator: EstimatorKind::Ls,
        stat: StatKind::Rclr,
    };
    pub const RCLR: TestSpec = TestSpec {
        estimator: EstimatorKind::MallowsHuber,
        stat: StatKind::Rclr,
    };
    pub const AR: TestSpec = TestSpec {
        estimator: EstimatorKind::Ls,
        stat: StatKind::Rar,
    };
    pub const RAR: TestSpec = TestSpec {
        estimator: EstimatorKind::MallowsHuber,
        stat: StatKind::Rar,
    };

    /// Conventional name: classical tests drop the leading `R`.
    pub fn label(&self) -> String {
        let base = match self.stat {
            StatKind::Rar => "AR",
            StatKind::Rk => "K",
            StatKind::Rw => "W",
            StatKind::Rclr => "CLR",
        };
        match self.estimator {
            EstimatorKind::Ls => base.to_string(),
            EstimatorKind::MallowsHuber => alloc::format!("R{base}"),
        }
    }

    pub fn parse(label: &str) -> Option<TestSpec> {
        let upper = label.trim().to_ascii_uppercase();
        let (estimator, rest) = match upper.strip_prefix('R') {
            Some(rest) if matches!(rest, "AR" | "K" | "W" | "CLR") => (EstimatorKind::MallowsHuber, rest),
            _ => (EstimatorKind::Ls, upper.as_str()),
        };
        let stat = match rest {
            "AR" => StatKind::Rar,
            "K" => StatKind::Rk,
            "W" => StatKind::Rw,
            "CLR" => StatKind::Rclr,
            _ => return None,
        };
        Some(TestSpec { estimator, stat })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerSeries {
    pub test: TestSpec,
    pub label: String,
    pub rejections: Vec<usize>,
    pub rate: Vec<f64>,
    pub mc_se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerCurve {
    /// True `β` values; every point tests `H₀: β = beta0`.
    pub beta_grid: Vec<f64>,
    pub beta0: f64,
    pub series: Vec<PowerSeries>,
    /// Replications whose fits succeeded, per grid point.
    pub successes: Vec<usize>,
    pub failures: Vec<usize>,
    pub reps: usize,
}

impl PowerCurve {
    pub fn series(&self, label: &str) -> Option<&PowerSeries> {
        self.series.iter().find(|s| s.label == label)
    }
}

/// Rejection indicators of one replication, in the study's test order.
pub type Rejections = Vec<bool>;

/// A configured study whose replications can be evaluated in any order.
#[derive(Debug, Clone)]
pub struct PowerStudy {
    cfg: ScenarioConfig,
    beta_grid: Vec<f64>,
    tests: Vec<TestSpec>,
    draws: Option<ClrNullDraws>,
    chi2_k: f64,
    chi2_1: f64,
}

impl PowerStudy {
    pub fn new(cfg: &ScenarioConfig, beta_grid: &[f64], tests: &[TestSpec]) -> Result<Self> {
        cfg.validate()?;
        if beta_grid.is_empty() || tests.is_empty() {
            return Err(Error::EmptyInput("power study needs a beta grid and at least one test"));
        }
        if beta_grid.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("beta grid must be finite"));
        }
        let draws = tests
            .iter()
            .any(|t| needs_draws(t.stat, cfg.k))
            .then(|| ClrNullDraws::sample(cfg.k, cfg.sims, &mut RngStream::new(cfg.seed, CLR_BANK_STREAM)));
        Ok(PowerStudy {
            cfg: cfg.clone(),
            beta_grid: beta_grid.to_vec(),
            tests: tests.to_vec(),
            draws,
            chi2_k: chi2_quantile(cfg.k as u32, 1.0 - cfg.alpha)?,
            chi2_1: chi2_quantile(1, 1.0 - cfg.alpha)?,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn grid_len(&self) -> usize {
        self.beta_grid.len()
    }

    pub fn tests(&self) -> &[TestSpec] {
        &self.tests
    }

    fn rejects(&self, stats: &Statistics, stat: StatKind) -> Result<bool> {
        let k = self.cfg.k;
        Ok(match stat {
            StatKind::Rar => stats.ar > self.chi2_k,
            StatKind::Rw => stats.w > self.chi2_k,
            StatKind::Rk => stats.k_stat.ok_or(Error::DegenerateDirection)? > self.chi2_1,
            StatKind::Rclr if k == 1 => stats.clr > self.chi2_1,
            StatKind::Rclr => self
                .draws
                .as_ref()
                .expect("bank sampled when a CLR test is requested")
                .rejects(stats.clr, stats.w, self.cfg.alpha),
        })
    }

    /// Runs replication `rep` at grid point `grid_index`.
    pub fn replicate(&self, grid_index: usize, rep: usize) -> Result<Rejections> {
        let cfg = ScenarioConfig {
            beta_true: self.beta_grid[grid_index],
            ..self.cfg.clone()
        };
        let mut rng = RngStream::new(cfg.seed, rep as u64);
        let data = generate_scenario(&cfg, &mut rng)?;

        let stats_for = |est: EstimatorKind| -> Result<Statistics> {
            let opts = FitOptions {
                estimator: est,
                intercept: cfg.intercept,
                huber: cfg.huber,
            };
            let fit = fit_reduced_form(&data, &opts)?;
            Statistics::compute(&fit, cfg.beta0)
        };
        let mut ls = None;
        let mut mallows = None;
        self.tests
            .iter()
            .map(|t| {
                let slot = match t.estimator {
                    EstimatorKind::Ls => &mut ls,
                    EstimatorKind::MallowsHuber => &mut mallows,
                };
                if slot.is_none() {
                    *slot = Some(stats_for(t.estimator)?);
                }
                self.rejects(slot.as_ref().expect("filled above"), t.stat)
            })
            .collect()
    }

    /// Empty accumulator for [`PowerStudy::record`].
    pub fn tally(&self) -> Tally {
        Tally {
            rejections: alloc::vec![alloc::vec![0; self.grid_len()]; self.tests.len()],
            successes: alloc::vec![0; self.grid_len()],
            failures: alloc::vec![0; self.grid_len()],
            last_error: None,
        }
    }

    pub fn record(&self, tally: &mut Tally, grid_index: usize, outcome: Result<Rejections>) {
        match outcome {
            Ok(rej) => {
                tally.successes[grid_index] += 1;
                for (t, r) in rej.into_iter().enumerate() {
                    tally.rejections[t][grid_index] += usize::from(r);
                }
            }
            Err(e) => {
                tally.failures[grid_index] += 1;
                tally.last_error = Some(e.to_string());
            }
        }
    }

    /// Converts counts into rates with Monte Carlo standard errors.
    pub fn finish(&self, tally: Tally) -> Result<PowerCurve> {
        let failures: usize = tally.failures.iter().sum();
        let attempted = self.cfg.reps * self.grid_len();
        if failures as f64 > MAX_FAILURE_RATE * attempted as f64 {
            return Err(Error::TooManyFailures {
                failures,
                attempted,
                last: tally.last_error.unwrap_or_default(),
            });
        }
        let series = self
            .tests
            .iter()
            .zip(tally.rejections)
            .map(|(t, rej)| {
                let rate: Vec<f64> = rej
                    .iter()
                    .zip(&tally.successes)
                    .map(|(&r, &s)| if s == 0 { f64::NAN } else { r as f64 / s as f64 })
                    .collect();
                let mc_se = rate
                    .iter()
                    .zip(&tally.successes)
                    .map(|(&p, &s)| libm::sqrt(p * (1.0 - p) / s as f64))
                    .collect();
                PowerSeries {
                    test: *t,
                    label: t.label(),
                    rejections: rej,
                    rate,
                    mc_se,
                }
            })
            .collect();
        Ok(PowerCurve {
            beta_grid: self.beta_grid.clone(),
            beta0: self.cfg.beta0,
            series,
            successes: tally.successes,
            failures: tally.failures,
            reps: self.cfg.reps,
        })
    }
}

/// Running counts for a [`PowerStudy`]; merge partial tallies with [`Tally::merge`].
#[derive(Debug, Clone)]
pub struct Tally {
    rejections: Vec<Vec<usize>>,
    successes: Vec<usize>,
    failures: Vec<usize>,
    last_error: Option<String>,
}

impl Tally {
    pub fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.rejections.iter_mut().zip(other.rejections) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.successes.iter_mut().zip(other.successes) {
            *x += y;
        }
        for (x, y) in self.failures.iter_mut().zip(other.failures) {
            *x += y;
        }
        self.last_error = self.last_error.or(other.last_error);
        self
    }
}

/// Sequential power curve for `H₀: β = cfg.beta0` across true `β` values.
pub fn power_curve(cfg: &ScenarioConfig, beta_grid: &[f64], tests: &[TestSpec]) -> Result<PowerCurve> {
    let study = PowerStudy::new(cfg, beta_grid, tests)?;
    let mut tally = study.tally();
    for g in 0..study.grid_len() {
        for rep in 0..cfg.reps {
            let outcome = study.replicate(g, rep);
            study.record(&mut tally, g, outcome);
        }
    }
    study.finish(tally)
}

/// `points` evenly spaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Default `β` grid: 41 points on `[−1, 1]` for strong instruments (`|π| ≥ 0.5`),
/// otherwise on `[−4, 4]`.
pub fn default_beta_grid(pi: f64) -> Vec<f64> {
    let half = if pi.abs() >= 0.5 { 1.0 } else { 4.0 };
    linspace(-half, half, 41)
}

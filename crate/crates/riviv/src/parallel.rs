//! Rayon drivers for the replication loops and grid evaluations in riviv-core.
//!
//! Every unit of work derives its random stream from its own indices, so the
//! results match the sequential functions whatever the thread count.

use rayon::prelude::*;
use riviv_core::confsets::{default_grid, ConfidenceSet, GridSpec, Inverter};
use riviv_core::estimators::{EstimatorKind, FitOptions};
use riviv_core::ivtests::{fit_reduced_form, needs_draws, ClrNullDraws, StatKind};
use riviv_core::numerics::RngStream;
use riviv_core::simulation::{
    check_lemma_config, generate_scenario, lemma_aggregate, lemma_replicate, LemmaReport, PowerCurve,
    PowerStudy, ScenarioConfig, TestSpec, CLR_BANK_STREAM, MAX_FAILURE_RATE,
};
use riviv_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

/// Pool with `threads` workers, or rayon's default when `None`.
pub fn thread_pool(threads: Option<usize>) -> AppResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(AppError::input("--threads must be at least 1"));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| AppError::input(format!("cannot start thread pool: {e}")))
}

/// Parallel version of `riviv_core::simulation::power_curve`; identical output.
pub fn power_curve(cfg: &ScenarioConfig, beta_grid: &[f64], tests: &[TestSpec]) -> Result<PowerCurve> {
    let study = PowerStudy::new(cfg, beta_grid, tests)?;
    let units = study.grid_len() * cfg.reps;
    let tally = (0..units)
        .into_par_iter()
        .fold(
            || study.tally(),
            |mut t, u| {
                let (g, rep) = (u / cfg.reps, u % cfg.reps);
                study.record(&mut t, g, study.replicate(g, rep));
                t
            },
        )
        .reduce(|| study.tally(), |a, b| a.merge(b));
    study.finish(tally)
}

/// Parallel version of `riviv_core::simulation::lemma1_diagnostic`.
pub fn lemma1_diagnostic(cfg: &ScenarioConfig, estimator: EstimatorKind) -> Result<LemmaReport> {
    check_lemma_config(cfg)?;
    let outcomes = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| lemma_replicate(cfg, estimator, rep))
        .collect();
    lemma_aggregate(cfg, outcomes)
}

/// Evaluates the grid in parallel and assembles the set; equals `Inverter::invert`.
pub fn invert(inverter: &Inverter<'_>, grid: &GridSpec) -> Result<ConfidenceSet> {
    grid.validate()?;
    let points = grid
        .all_values()
        .into_par_iter()
        .map(|b| inverter.evaluate(b))
        .collect::<Result<Vec<_>>>()?;
    inverter.assemble(grid, points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub test: StatKind,
    pub covered: usize,
    pub unbounded: usize,
    pub empty: usize,
    pub coverage: f64,
    pub coverage_se: f64,
    pub unbounded_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub estimator: EstimatorKind,
    pub reps: usize,
    pub failures: usize,
    pub rows: Vec<CoverageRow>,
}

impl CoverageReport {
    pub fn row(&self, test: StatKind) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.test == test)
    }
}

/// Inverts each test on `cfg.reps` datasets drawn at `cfg.beta_true` over the
/// data-driven default grid, recording whether the set covers `beta_true` and
/// whether it is unbounded. CLR draws come from one bank shared by all
/// replications.
pub fn coverage(cfg: &ScenarioConfig, estimator: EstimatorKind, tests: &[StatKind]) -> Result<CoverageReport> {
    cfg.validate()?;
    let bank = tests
        .iter()
        .any(|&t| needs_draws(t, cfg.k))
        .then(|| ClrNullDraws::sample(cfg.k, cfg.sims, &mut RngStream::new(cfg.seed, CLR_BANK_STREAM)));
    let opts = FitOptions {
        estimator,
        intercept: cfg.intercept,
        huber: cfg.huber,
    };
    let one = |rep: usize| -> Result<Vec<(bool, bool, bool)>> {
        let data = generate_scenario(cfg, &mut RngStream::new(cfg.seed, rep as u64))?;
        let grid = default_grid(&data, cfg.intercept)?;
        let fit = fit_reduced_form(&data, &opts)?;
        tests
            .iter()
            .map(|&t| {
                let draws = needs_draws(t, cfg.k).then(|| bank.clone().expect("sampled above"));
                let set = Inverter::with_draws(&fit, t, cfg.alpha, draws)?.invert(&grid)?;
                Ok((set.contains(cfg.beta_true), !set.is_bounded(), set.is_empty()))
            })
            .collect()
    };
    let outcomes: Vec<Result<Vec<(bool, bool, bool)>>> = (0..cfg.reps).into_par_iter().map(one).collect();
    let mut failures = 0;
    let mut last = String::new();
    let mut counts = vec![(0usize, 0usize, 0usize); tests.len()];
    for o in outcomes {
        match o {
            Ok(v) => {
                for (c, (cov, unb, emp)) in counts.iter_mut().zip(v) {
                    c.0 += usize::from(cov);
                    c.1 += usize::from(unb);
                    c.2 += usize::from(emp);
                }
            }
            Err(e) => {
                failures += 1;
                last = e.to_string();
            }
        }
    }
    if failures as f64 > MAX_FAILURE_RATE * cfg.reps as f64 {
        return Err(Error::TooManyFailures {
            failures,
            attempted: cfg.reps,
            last,
        });
    }
    let ok = (cfg.reps - failures) as f64;
    let rows = tests
        .iter()
        .zip(counts)
        .map(|(&test, (covered, unbounded, empty))| {
            let p = covered as f64 / ok;
            CoverageRow {
                test,
                covered,
                unbounded,
                empty,
                coverage: p,
                coverage_se: (p * (1.0 - p) / ok).sqrt(),
                unbounded_rate: unbounded as f64 / ok,
            }
        })
        .collect();
    Ok(CoverageReport {
        estimator,
        reps: cfg.reps,
        failures,
        rows,
    })
}

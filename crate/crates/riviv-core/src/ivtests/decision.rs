use super::clr::ClrNullDraws;
use super::reduced::ReducedFormFit;
use super::stats::{StatKind, StatResult, Statistics};
use crate::error::{Error, Result};
use crate::numerics::{chi2_quantile, chi2_sf, RngStream};

/// Default number of simulated draws for conditional CLR critical values.
pub const DEFAULT_SIMS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestOutcome {
    pub statistic: StatResult,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
}

/// Null reference distribution of each statistic.
///
/// - AR: `χ²_k`
/// - K: `χ²_1`
/// - W: `χ²_k` (null of irrelevant instruments)
/// - CLR: simulated conditional law given `W̃`; exactly `χ²_1` when `k = 1`
fn chi2_df(kind: StatKind, k: usize) -> Option<u32> {
    match kind {
        StatKind::Rar | StatKind::Rw => Some(k as u32),
        StatKind::Rk => Some(1),
        StatKind::Rclr if k == 1 => Some(1),
        StatKind::Rclr => None,
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain("alpha must lie in (0, 1)"))
    }
}

/// Decides one test from precomputed statistics. `clr` must hold draws with
/// matching `k` when `kind` is CLR and `k > 1`.
pub fn decide(
    stats: &Statistics,
    k: usize,
    kind: StatKind,
    alpha: f64,
    clr: Option<&ClrNullDraws>,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let statistic = stats.result(kind)?;
    let (critical_value, p_value) = match chi2_df(kind, k) {
        Some(df) => (chi2_quantile(df, 1.0 - alpha)?, chi2_sf(df, statistic.value)),
        None => {
            let draws = clr.ok_or_else(|| Error::InvalidArgument("CLR test needs simulated null draws".into()))?;
            if draws.k() != k {
                return Err(Error::DimensionMismatch {
                    context: "CLR null draws",
                    expected: k,
                    found: draws.k(),
                });
            }
            let w = statistic.w_tilde.unwrap_or(0.0);
            (draws.critical_value(w, alpha), draws.p_value(statistic.value, w))
        }
    };
    Ok(TestOutcome {
        statistic,
        critical_value,
        p_value,
        reject: statistic.value > critical_value,
        alpha,
    })
}

/// Evaluates a test at `β₀` with an existing draw bank (see [`decide`]).
pub fn evaluate_test(
    fit: &ReducedFormFit,
    beta0: f64,
    kind: StatKind,
    alpha: f64,
    clr: Option<&ClrNullDraws>,
) -> Result<TestOutcome> {
    let stats = Statistics::compute(fit, beta0)?;
    decide(&stats, fit.k, kind, alpha, clr)
}

/// Evaluates a test at `β₀`, simulating `sims` CLR null draws from `rng` when needed.
pub fn run_test(
    fit: &ReducedFormFit,
    beta0: f64,
    kind: StatKind,
    alpha: f64,
    sims: usize,
    rng: &mut RngStream,
) -> Result<TestOutcome> {
    let draws = needs_draws(kind, fit.k).then(|| ClrNullDraws::sample(fit.k, sims, rng));
    evaluate_test(fit, beta0, kind, alpha, draws.as_ref())
}

/// True when `kind` relies on simulated conditional critical values.
pub fn needs_draws(kind: StatKind, k: usize) -> bool {
    chi2_df(kind, k).is_none()
}

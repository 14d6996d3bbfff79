//! Confidence sets for `β` by inverting a test over a grid of `β₀` values.
//!
//! Accepted grid points are merged into intervals whose ends are refined by
//! bisection against the neighbouring rejected point. Tail probes far outside
//! the grid decide whether an outermost interval is reported unbounded.

use alloc::vec::Vec;
use core::fmt;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, FitOptions};
use crate::ivtests::{decide, fit_reduced_form, needs_draws, ClrNullDraws, ReducedFormFit, StatKind, Statistics};
use crate::numerics::{Cholesky, RngStream};

/// Bisection steps between neighbouring grid points.
pub const GRID_BISECTION_STEPS: usize = 10;

/// Bisection steps (in `asinh` space) between the grid edge and a tail probe.
pub const TAIL_BISECTION_STEPS: usize = 30;

/// Default tail probe magnitude.
pub const TAIL_PROBE: f64 = 1e6;

/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 401;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    /// Optional window inside `[lo, hi]` that receives another `points`
    /// evenly spaced values.
    pub dense: Option<(f64, f64)>,
    /// Extreme `β₀` values outside `[lo, hi]`.
    pub tail_probe: Vec<f64>,
}

impl GridSpec {
    /// Evenly spaced grid with tail probes at `±1e6`.
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        let g = GridSpec {
            lo,
            hi,
            points,
            dense: None,
            tail_probe: alloc::vec![-TAIL_PROBE, TAIL_PROBE],
        };
        g.validate()?;
        Ok(g)
    }

    pub fn without_tails(mut self) -> Self {
        self.tail_probe.clear();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidArgument(alloc::format!(
                "grid needs finite lo < hi, got [{}, {}]",
                self.lo,
                self.hi
            )));
        }
        if self.points < 3 {
            return Err(Error::InvalidArgument(alloc::format!(
                "grid needs at least 3 points, got {}",
                self.points
            )));
        }
        if let Some((a, b)) = self.dense {
            if !(a.is_finite() && b.is_finite() && self.lo <= a && a < b && b <= self.hi) {
                return Err(Error::InvalidArgument("dense window must lie inside [lo, hi]".into()));
            }
        }
        for &t in &self.tail_probe {
            if !t.is_finite() || (self.lo..=self.hi).contains(&t) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "tail probe {t} must be finite and outside [{}, {}]",
                    self.lo,
                    self.hi
                )));
            }
        }
        Ok(())
    }

    /// Grid values (without tail probes), sorted and de-duplicated.
    pub fn values(&self) -> Vec<f64> {
        let mut v = crate::simulation::linspace(self.lo, self.hi, self.points);
        if let Some((a, b)) = self.dense {
            v.extend(crate::simulation::linspace(a, b, self.points));
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Every evaluation point: grid values and tail probes, sorted.
    pub fn all_values(&self) -> Vec<f64> {
        let mut v = self.values();
        v.extend(&self.tail_probe);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    fn is_tail(&self, b: f64) -> bool {
        b < self.lo || b > self.hi
    }
}

/// Default grid for a dataset: [`DEFAULT_POINTS`] points over
/// `[min(β̂ − 10·SE, −20), max(β̂ + 10·SE, 20)]`, the same number again over
/// `β̂ ± 10·SE`, and tail probes at `±1e6`. `β̂` and its standard error come
/// from the least-squares reduced form (two-stage least squares).
pub fn default_grid(data: &Dataset, intercept: bool) -> Result<GridSpec> {
    let fit = fit_reduced_form(
        data,
        &FitOptions {
            intercept,
            ..FitOptions::ls()
        },
    )?;
    let (b, se) = point_estimate(&fit)?;
    // keep the window clear of the tail probes
    let half = (10.0 * se).min(1e5);
    let (a, c) = if b.is_finite() && half.is_finite() && half > 0.0 && b.abs() < 1e5 {
        (b - half, b + half)
    } else {
        (-20.0, 20.0)
    };
    let mut g = GridSpec::new(a.min(-20.0), c.max(20.0), DEFAULT_POINTS)?;
    g.dense = Some((a, c));
    g.validate()?;
    Ok(g)
}

/// Minimum-distance estimate `π̂ᵀΣ_ππ⁻¹δ̂ / π̂ᵀΣ_ππ⁻¹π̂` and its standard error
/// `(n·π̂ᵀΩ(β̂)⁻¹π̂)^{-1/2}`. With least-squares inputs this is two-stage least
/// squares with its homoskedastic standard error.
pub fn point_estimate(fit: &ReducedFormFit) -> Result<(f64, f64)> {
    let spp = Cholesky::factor(&fit.cov.spp).map_err(|_| Error::Singular("Σ_ππ"))?;
    let w_pi = spp.solve_vec(&fit.pi_hat)?;
    let den = crate::numerics::linalg::dot(&w_pi, &fit.pi_hat);
    if !(den > 0.0) {
        return Err(Error::Singular("first-stage coefficients are zero"));
    }
    let b = crate::numerics::linalg::dot(&w_pi, &fit.delta_hat) / den;
    let om = crate::ivtests::omega(fit, b);
    let q = Cholesky::factor(&om)
        .map_err(|_| Error::Singular("Ω(β̂)"))?
        .inv_quad_form(&fit.pi_hat);
    Ok((b, libm::sqrt(1.0 / (fit.n as f64 * q))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridPoint {
    pub beta0: f64,
    pub statistic: f64,
    pub critical_value: f64,
    pub reject: bool,
}

/// One end of an interval; infinite ends are always open.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    #[cfg_attr(feature = "serde", serde(with = "extended_f64"))]
    pub lower: f64,
    #[cfg_attr(feature = "serde", serde(with = "extended_f64"))]
    pub upper: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl Interval {
    pub fn contains(&self, b: f64) -> bool {
        let above = if self.lower_closed { b >= self.lower } else { b > self.lower };
        let below = if self.upper_closed { b <= self.upper } else { b < self.upper };
        above && below
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }
}

// Infinite ends as the strings "inf" / "-inf", since JSON has no infinity.
#[cfg(feature = "serde")]
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(alloc::string::String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        match *v {
            f64::INFINITY => Repr::Text("inf".into()).serialize(s),
            f64::NEG_INFINITY => Repr::Text("-inf".into()).serialize(s),
            x => Repr::Num(x).serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(other) => Err(serde::de::Error::custom(alloc::format!("not a bound: {other}"))),
        }
    }
}

fn write_end(f: &mut fmt::Formatter<'_>, v: f64, prec: usize) -> fmt::Result {
    if v == f64::INFINITY {
        f.write_str("inf")
    } else if v == f64::NEG_INFINITY {
        f.write_str("-inf")
    } else {
        write!(f, "{v:.prec$}")
    }
}

impl fmt::Display for Interval {
    /// `[a, b]`, `(-inf, a]`, `[b, inf)`; precision defaults to 4 decimals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prec = f.precision().unwrap_or(4);
        f.write_str(if self.lower_closed { "[" } else { "(" })?;
        write_end(f, self.lower, prec)?;
        f.write_str(", ")?;
        write_end(f, self.upper, prec)?;
        f.write_str(if self.upper_closed { "]" } else { ")" })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfidenceSet {
    pub intervals: Vec<Interval>,
    pub level: f64,
    pub test: StatKind,
    pub estimator: EstimatorKind,
    pub grid: GridSpec,
    /// Decisions at every grid value and tail probe, sorted by `β₀`.
    pub points: Vec<GridPoint>,
}

impl ConfidenceSet {
    pub fn contains(&self, b: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(b))
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Nonempty and every interval has two finite ends.
    pub fn is_bounded(&self) -> bool {
        !self.is_empty() && self.intervals.iter().all(Interval::is_bounded)
    }
}

impl fmt::Display for ConfidenceSet {
    /// Intervals joined by ` U `; `empty` when nothing is accepted.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return f.write_str("empty");
        }
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                f.write_str(" U ")?;
            }
            match f.precision() {
                Some(p) => write!(f, "{iv:.p$}")?,
                None => write!(f, "{iv}")?,
            }
        }
        Ok(())
    }
}

/// A fixed fit, test and critical-value function, evaluable at any `β₀`.
#[derive(Debug, Clone)]
pub struct Inverter<'a> {
    fit: &'a ReducedFormFit,
    kind: StatKind,
    alpha: f64,
    draws: Option<ClrNullDraws>,
}

impl<'a> Inverter<'a> {
    /// Samples one bank of `sims` CLR null draws from `rng` when the test needs it.
    pub fn new(fit: &'a ReducedFormFit, kind: StatKind, alpha: f64, sims: usize, rng: &mut RngStream) -> Result<Self> {
        let draws = needs_draws(kind, fit.k).then(|| ClrNullDraws::sample(fit.k, sims, rng));
        Self::with_draws(fit, kind, alpha, draws)
    }

    pub fn with_draws(fit: &'a ReducedFormFit, kind: StatKind, alpha: f64, draws: Option<ClrNullDraws>) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain("alpha must lie in (0, 1)"));
        }
        if needs_draws(kind, fit.k) && draws.is_none() {
            return Err(Error::InvalidArgument("CLR inversion needs simulated null draws".into()));
        }
        Ok(Inverter {
            fit,
            kind,
            alpha,
            draws,
        })
    }

    /// Full decision at `β₀`. A K statistic with a vanishing direction cannot
    /// reject and is recorded as `0`.
    pub fn evaluate(&self, beta0: f64) -> Result<GridPoint> {
        let stats = Statistics::compute(self.fit, beta0)?;
        if self.kind == StatKind::Rk && stats.k_stat.is_none() {
            return Ok(GridPoint {
                beta0,
                statistic: 0.0,
                critical_value: crate::numerics::chi2_quantile(1, 1.0 - self.alpha)?,
                reject: false,
            });
        }
        let out = decide(&stats, self.fit.k, self.kind, self.alpha, self.draws.as_ref())?;
        Ok(GridPoint {
            beta0,
            statistic: out.statistic.value,
            critical_value: out.critical_value,
            reject: out.reject,
        })
    }

    /// Decision only; short-circuits the simulated CLR quantile.
    pub fn rejects(&self, beta0: f64) -> Result<bool> {
        if self.kind != StatKind::Rclr || self.fit.k == 1 {
            return Ok(self.evaluate(beta0)?.reject);
        }
        let stats = Statistics::compute(self.fit, beta0)?;
        let draws = self.draws.as_ref().expect("checked in constructor");
        Ok(draws.rejects(stats.clr, stats.w, self.alpha))
    }

    /// Evaluates the grid sequentially and assembles the set.
    pub fn invert(&self, grid: &GridSpec) -> Result<ConfidenceSet> {
        grid.validate()?;
        let points = grid
            .all_values()
            .into_iter()
            .map(|b| self.evaluate(b))
            .collect::<Result<Vec<_>>>()?;
        self.assemble(grid, points)
    }

    /// Builds the set from evaluations at `grid.all_values()` (any evaluation
    /// order, e.g. parallel, as long as the points are passed sorted).
    pub fn assemble(&self, grid: &GridSpec, points: Vec<GridPoint>) -> Result<ConfidenceSet> {
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let mut intervals = Vec::new();
        let mut lower: Option<(f64, bool)> = None;
        for i in 0..points.len() {
            let p = points[i];
            if !p.reject && lower.is_none() {
                lower = Some(if i == 0 {
                    if grid.is_tail(p.beta0) {
                        (f64::NEG_INFINITY, false)
                    } else {
                        (p.beta0, true)
                    }
                } else {
                    (self.refine(grid, p.beta0, points[i - 1].beta0)?, true)
                });
            }
            let closes = !p.reject && (i + 1 == points.len() || points[i + 1].reject);
            if closes {
                let (lo, lo_closed) = lower.take().expect("opened above");
                let (hi, hi_closed) = if i + 1 == points.len() {
                    if grid.is_tail(p.beta0) {
                        (f64::INFINITY, false)
                    } else {
                        (p.beta0, true)
                    }
                } else {
                    (self.refine(grid, p.beta0, points[i + 1].beta0)?, true)
                };
                intervals.push(Interval {
                    lower: lo,
                    upper: hi,
                    lower_closed: lo_closed,
                    upper_closed: hi_closed,
                });
            }
        }
        Ok(ConfidenceSet {
            intervals,
            level: 1.0 - self.alpha,
            test: self.kind,
            estimator: self.fit.method,
            grid: grid.clone(),
            points,
        })
    }

    // Bisection between an accepted and a rejected value; returns the
    // innermost accepted value found.
    fn refine(&self, grid: &GridSpec, accepted: f64, rejected: f64) -> Result<f64> {
        let tail = grid.is_tail(accepted) || grid.is_tail(rejected);
        let (mut a, mut r, steps) = if tail {
            (libm::asinh(accepted), libm::asinh(rejected), TAIL_BISECTION_STEPS)
        } else {
            (accepted, rejected, GRID_BISECTION_STEPS)
        };
        let back = |t: f64| if tail { libm::sinh(t) } else { t };
        for _ in 0..steps {
            let mid = 0.5 * (a + r);
            if self.rejects(back(mid))? {
                r = mid;
            } else {
                a = mid;
            }
        }
        Ok(if tail { back(a) } else { a })
    }
}

/// Fits the reduced form once and inverts `kind` over `grid`.
pub fn invert_test(
    data: &Dataset,
    opts: &FitOptions,
    kind: StatKind,
    alpha: f64,
    grid: &GridSpec,
    sims: usize,
    rng: &mut RngStream,
) -> Result<ConfidenceSet> {
    let fit = fit_reduced_form(data, opts)?;
    Inverter::new(&fit, kind, alpha, sims, rng)?.invert(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{generate_baseline, ScenarioConfig};

    fn data(pi: f64, seed: u64) -> Dataset {
        let cfg = ScenarioConfig {
            pi,
            ..ScenarioConfig::default()
        };
        generate_baseline(&cfg, &mut RngStream::new(seed, 0))
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1.0, 1.0, 5).is_err());
        assert!(GridSpec::new(0.0, 1.0, 2).is_err());
        let mut g = GridSpec::new(-1.0, 1.0, 3).unwrap();
        g.tail_probe.push(0.5);
        assert!(g.validate().is_err());
        let g = GridSpec::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.values(), [-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(g.all_values().len(), 7);
    }

    #[test]
    fn display_notation() {
        let bounded = Interval {
            lower: -0.64,
            upper: -0.18,
            lower_closed: true,
            upper_closed: true,
        };
        assert_eq!(alloc::format!("{bounded:.2}"), "[-0.64, -0.18]");
        let left = Interval {
            lower: f64::NEG_INFINITY,
            upper: 0.77,
            lower_closed: false,
            upper_closed: true,
        };
        let right = Interval {
            lower: 2.3,
            upper: f64::INFINITY,
            lower_closed: true,
            upper_closed: false,
        };
        let set = ConfidenceSet {
            intervals: alloc::vec![left, right],
            level: 0.95,
            test: StatKind::Rar,
            estimator: EstimatorKind::MallowsHuber,
            grid: GridSpec::new(-1.0, 1.0, 3).unwrap(),
            points: Vec::new(),
        };
        assert_eq!(alloc::format!("{set:.2}"), "(-inf, 0.77] U [2.30, inf)");
        assert!(!set.is_bounded());
        assert!(set.contains(-1e9) && !set.contains(1.0));
    }

    #[test]
    fn strong_instruments_give_a_bounded_interval_around_the_estimate() {
        let d = data(1.0, 11);
        let grid = default_grid(&d, true).unwrap();
        let set = invert_test(&d, &FitOptions::ls(), StatKind::Rar, 0.05, &grid, 1000, &mut RngStream::new(1, 1)).unwrap();
        assert_eq!(set.intervals.len(), 1, "{set}");
        assert!(set.is_bounded());
        let (b, _) = point_estimate(&fit_reduced_form(&d, &FitOptions::ls()).unwrap()).unwrap();
        assert!(set.contains(b));
    }

    #[test]
    fn endpoints_are_decision_flips() {
        let d = data(1.0, 5);
        let fit = fit_reduced_form(&d, &FitOptions::mallows()).unwrap();
        let inv = Inverter::new(&fit, StatKind::Rclr, 0.05, 2000, &mut RngStream::new(2, 2)).unwrap();
        let grid = GridSpec::new(-1.0, 1.0, 41).unwrap();
        let set = inv.invert(&grid).unwrap();
        let tol = 2.0 / 40.0 / (1 << GRID_BISECTION_STEPS) as f64;
        for iv in &set.intervals {
            for (e, outward) in [(iv.lower, -1.0), (iv.upper, 1.0)] {
                assert!(!inv.rejects(e).unwrap());
                assert!(inv.rejects(e + outward * 1.01 * tol).unwrap());
            }
        }
    }

    #[test]
    fn grid_points_respect_the_intervals() {
        let d = data(0.1, 3);
        let grid = GridSpec::new(-10.0, 10.0, 81).unwrap();
        let set = invert_test(&d, &FitOptions::ls(), StatKind::Rar, 0.05, &grid, 1000, &mut RngStream::new(1, 1)).unwrap();
        for p in &set.points {
            assert_eq!(set.contains(p.beta0), !p.reject, "{set} at {}", p.beta0);
        }
    }

    #[test]
    fn near_zero_size_accepts_everything() {
        let d = data(0.1, 9);
        let grid = GridSpec::new(-5.0, 5.0, 21).unwrap();
        let set = invert_test(&d, &FitOptions::ls(), StatKind::Rar, 1e-10, &grid, 100, &mut RngStream::new(1, 1)).unwrap();
        assert_eq!(set.intervals.len(), 1);
        assert_eq!(set.intervals[0].lower, f64::NEG_INFINITY);
        assert_eq!(set.intervals[0].upper, f64::INFINITY);
    }

    #[test]
    fn sets_are_nested_in_alpha() {
        let d = data(0.2, 4);
        let fit = fit_reduced_form(&d, &FitOptions::mallows()).unwrap();
        let grid = GridSpec::new(-8.0, 8.0, 161).unwrap();
        let wide = Inverter::new(&fit, StatKind::Rclr, 0.05, 4000, &mut RngStream::new(3, 3))
            .unwrap()
            .invert(&grid)
            .unwrap();
        let narrow = Inverter::new(&fit, StatKind::Rclr, 0.32, 4000, &mut RngStream::new(3, 3))
            .unwrap()
            .invert(&grid)
            .unwrap();
        for (pw, pn) in wide.points.iter().zip(&narrow.points) {
            assert!(pw.reject <= pn.reject, "β₀ = {}", pw.beta0);
        }
    }
}

use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::HuberConfig;
use crate::numerics::{bivariate_normal, bivariate_t3, Mat, RngStream};

/// Number of leading error pairs drawn from the bivariate t(3) law under
/// [`Contamination::T3Errors`].
pub const T3_CONTAMINATED_ROWS: usize = 50;

/// Outcome value planted by the point-outlier scenarios.
pub const OUTLIER_Y: f64 = 20.0;

/// First-instrument value planted by [`Contamination::OutlierYZ`].
pub const OUTLIER_Z: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Contamination {
    None,
    /// `y₁ = 20`
    OutlierY,
    /// `y₁ = 20` and `z₁₁ = 5`
    OutlierYZ,
    /// First 50 error pairs from a bivariate t(3).
    T3Errors,
}

impl Contamination {
    pub fn name(self) -> &'static str {
        match self {
            Contamination::None => "none",
            Contamination::OutlierY => "outlier-y",
            Contamination::OutlierYZ => "outlier-yz",
            Contamination::T3Errors => "t3",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScenarioConfig {
    pub n: usize,
    pub k: usize,
    /// First-stage coefficient shared by every instrument.
    pub pi: f64,
    pub beta_true: f64,
    /// Hypothesised value under test.
    pub beta0: f64,
    pub rho: f64,
    pub contamination: Contamination,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Include an intercept column in both reduced-form regressions.
    pub intercept: bool,
    /// Size of the simulated CLR null-draw bank.
    pub sims: usize,
    pub huber: HuberConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n: 250,
            k: 3,
            pi: 1.0,
            beta_true: 0.0,
            beta0: 0.0,
            rho: 0.5,
            contamination: Contamination::None,
            reps: 10_000,
            alpha: 0.05,
            seed: 20240325,
            intercept: true,
            sims: 10_000,
            huber: HuberConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let cols = self.k + 1 + usize::from(self.intercept);
        let invalid = |msg: alloc::string::String| Err(Error::InvalidArgument(msg));
        if self.k == 0 {
            return invalid("k must be at least 1".into());
        }
        if self.n <= cols {
            return invalid(alloc::format!("n = {} must exceed the {cols} design columns", self.n));
        }
        if self.reps == 0 {
            return invalid("reps must be at least 1".into());
        }
        if !(self.rho.abs() < 1.0) {
            return invalid(alloc::format!("|rho| must be < 1, got {}", self.rho));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid(alloc::format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.sims == 0 {
            return invalid("sims must be at least 1".into());
        }
        if !(self.pi.is_finite() && self.beta_true.is_finite() && self.beta0.is_finite()) {
            return invalid("pi, beta_true and beta0 must be finite".into());
        }
        if self.contamination == Contamination::T3Errors && self.n < T3_CONTAMINATED_ROWS {
            return invalid(alloc::format!(
                "t(3) contamination needs n >= {T3_CONTAMINATED_ROWS}"
            ));
        }
        Ok(())
    }
}

fn generate(cfg: &ScenarioConfig, rng: &mut RngStream, t3_rows: usize) -> Dataset {
    let (n, k) = (cfg.n, cfg.k);
    let mut z = Mat::zeros(n, k);
    let mut w = Mat::zeros(n, 1);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let mut zsum = 0.0;
        for j in 0..k {
            let v = rng.standard_normal();
            z[(i, j)] = v;
            zsum += v;
        }
        let wi = rng.standard_normal();
        w[(i, 0)] = wi;
        let (u, v) = if i < t3_rows {
            bivariate_t3(rng, cfg.rho)
        } else {
            bivariate_normal(rng, cfg.rho)
        };
        let xi = wi + cfg.pi * zsum + v;
        x.push(xi);
        y.push(cfg.beta_true * xi + 2.0 * wi + u);
    }
    Dataset { y, x, z, w }
}

/// Clean draw: `x = w + π zᵀι + v`, `y = βx + 2w + u` with standard normal
/// `z` and `w` and unit-variance normal errors correlated `ρ`.
pub fn generate_baseline(cfg: &ScenarioConfig, rng: &mut RngStream) -> Dataset {
    generate(cfg, rng, 0)
}

/// Point edits for the outlier scenarios. The t(3) scenario changes the error law
/// at generation time, so it is the identity here (after checking `n`).
pub fn apply_contamination(mut data: Dataset, kind: Contamination) -> Result<Dataset> {
    match kind {
        Contamination::None => {}
        Contamination::OutlierY => data.y[0] = OUTLIER_Y,
        Contamination::OutlierYZ => {
            data.y[0] = OUTLIER_Y;
            data.z[(0, 0)] = OUTLIER_Z;
        }
        Contamination::T3Errors => {
            if data.n() < T3_CONTAMINATED_ROWS {
                return Err(Error::InvalidArgument(alloc::format!(
                    "t(3) contamination needs n >= {T3_CONTAMINATED_ROWS}"
                )));
            }
        }
    }
    Ok(data)
}

/// Draws one dataset for the configured scenario.
pub fn generate_scenario(cfg: &ScenarioConfig, rng: &mut RngStream) -> Result<Dataset> {
    let t3_rows = if cfg.contamination == Contamination::T3Errors {
        T3_CONTAMINATED_ROWS
    } else {
        0
    };
    apply_contamination(generate(cfg, rng, t3_rows), cfg.contamination)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig {
            reps: 1,
            ..ScenarioConfig::default()
        }
    }

    fn diff_count(a: &Dataset, b: &Dataset) -> usize {
        let mut c = 0;
        c += a.y.iter().zip(&b.y).filter(|(p, q)| p != q).count();
        c += a.x.iter().zip(&b.x).filter(|(p, q)| p != q).count();
        c += a.z.as_slice().iter().zip(b.z.as_slice()).filter(|(p, q)| p != q).count();
        c += a.w.as_slice().iter().zip(b.w.as_slice()).filter(|(p, q)| p != q).count();
        c
    }

    #[test]
    fn contamination_edits_exactly_the_documented_cells() {
        let base = generate_baseline(&cfg(), &mut RngStream::new(1, 0));
        let none = apply_contamination(base.clone(), Contamination::None).unwrap();
        assert_eq!(none, base);
        let oy = apply_contamination(base.clone(), Contamination::OutlierY).unwrap();
        assert_eq!(diff_count(&oy, &base), 1);
        assert_eq!(oy.y[0], 20.0);
        let oyz = apply_contamination(base.clone(), Contamination::OutlierYZ).unwrap();
        assert_eq!(diff_count(&oyz, &base), 2);
        assert_eq!(oyz.z[(0, 0)], 5.0);
    }

    #[test]
    fn t3_needs_fifty_rows() {
        let small = ScenarioConfig {
            n: 20,
            ..cfg()
        };
        let base = generate_baseline(&small, &mut RngStream::new(1, 0));
        assert!(apply_contamination(base, Contamination::T3Errors).is_err());
        let bad = ScenarioConfig {
            contamination: Contamination::T3Errors,
            ..small
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn validation() {
        assert!(cfg().validate().is_ok());
        assert!(ScenarioConfig { rho: 1.0, ..cfg() }.validate().is_err());
        assert!(ScenarioConfig { n: 5, ..cfg() }.validate().is_err());
        assert!(ScenarioConfig { reps: 0, ..cfg() }.validate().is_err());
    }

    #[test]
    fn same_stream_same_data() {
        let a = generate_scenario(&cfg(), &mut RngStream::new(9, 3)).unwrap();
        let b = generate_scenario(&cfg(), &mut RngStream::new(9, 3)).unwrap();
        assert_eq!(a, b);
    }
}

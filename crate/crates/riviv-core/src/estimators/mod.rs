//! Reduced-form estimation: least squares and Mallows-type Huber M-estimation,
//! robust scales, influence-function covariance blocks and sensitivity curves.

mod covariance;
mod fit;
mod huber;
mod sensitivity;

pub use covariance::{cov_blocks_ls, cov_blocks_mallows, CovBlocks};
pub use fit::{
    fit_equation, fit_ls, fit_mallows_huber, fit_mallows_huber_weighted, mallows_estimating_equation,
    mallows_weights, EstimatorKind, RegressionFit,
};
pub use huber::{
    huber_rho, huber_rho_prime, huber_weight, HuberConfig, ScaleUpdate, HUBER_CUTOFF, MAD_CONSISTENCY,
};
pub use sensitivity::{probe_at_offset, sensitivity_curve, SensitivityPoint};

use crate::data::Dataset;
use crate::error::Result;
use crate::numerics::Mat;

/// How to fit both reduced-form equations.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitOptions {
    pub estimator: EstimatorKind,
    /// Prepend a column of ones to the design.
    pub intercept: bool,
    pub huber: HuberConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            estimator: EstimatorKind::MallowsHuber,
            intercept: true,
            huber: HuberConfig::default(),
        }
    }
}

impl FitOptions {
    pub fn ls() -> Self {
        FitOptions {
            estimator: EstimatorKind::Ls,
            ..Self::default()
        }
    }

    pub fn mallows() -> Self {
        Self::default()
    }
}

/// Fits `y` and `x` on the common design `[1?, W, Z]`, equation by equation.
pub fn fit_pair(data: &Dataset, opts: &FitOptions) -> Result<(RegressionFit, RegressionFit, Mat)> {
    let design = data.design(opts.intercept);
    let (fy, fx) = match opts.estimator {
        EstimatorKind::Ls => (fit_ls(&data.y, &design)?, fit_ls(&data.x, &design)?),
        EstimatorKind::MallowsHuber => {
            let omega = mallows_weights(&design)?;
            let fy = fit_mallows_huber_weighted(&data.y, &design, omega.clone(), &opts.huber)?;
            let fx = fit_mallows_huber_weighted(&data.x, &design, omega, &opts.huber)?;
            (fy, fx)
        }
    };
    Ok((fy, fx, design))
}

/// Covariance blocks matching the estimator that produced the fits.
pub fn cov_blocks(
    fit_y: &RegressionFit,
    fit_x: &RegressionFit,
    design: &Mat,
    k: usize,
    huber: &HuberConfig,
) -> Result<CovBlocks> {
    match fit_y.method {
        EstimatorKind::Ls => cov_blocks_ls(fit_y, fit_x, design, k),
        EstimatorKind::MallowsHuber => cov_blocks_mallows(fit_y, fit_x, design, k, huber),
    }
}

use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{cov_blocks, fit_pair, CovBlocks, EstimatorKind, FitOptions, RegressionFit};
use crate::numerics::{Cholesky, Mat};

/// Reduced-form estimates `(δ̂, π̂)` for the instrument block plus their
/// influence-function covariance.
#[derive(Debug, Clone)]
pub struct ReducedFormFit {
    pub delta_hat: Vec<f64>,
    pub pi_hat: Vec<f64>,
    pub cov: CovBlocks,
    pub n: usize,
    pub k: usize,
    pub method: EstimatorKind,
    /// Full outcome-equation fit (all design columns).
    pub y_fit: RegressionFit,
    /// Full first-stage fit.
    pub x_fit: RegressionFit,
    // Inverse of the joint 2k x 2k covariance of (δ̂, π̂), used for a
    // cancellation-free evaluation of Λ⁻¹D at extreme β₀.
    precision: Option<Mat>,
}

impl ReducedFormFit {
    pub fn from_parts(delta_hat: Vec<f64>, pi_hat: Vec<f64>, cov: CovBlocks, n: usize, method: EstimatorKind) -> Result<Self> {
        let k = cov.k();
        if delta_hat.len() != k || pi_hat.len() != k {
            return Err(Error::DimensionMismatch {
                context: "ReducedFormFit coefficients",
                expected: k,
                found: delta_hat.len().min(pi_hat.len()),
            });
        }
        if n <= k {
            return Err(Error::InvalidArgument("need n > k".into()));
        }
        let empty = RegressionFit {
            coef: Vec::new(),
            residuals: Vec::new(),
            scale: 0.0,
            method,
            iterations: 0,
            converged: true,
            leverage_weights: Vec::new(),
        };
        Ok(Self::assemble(delta_hat, pi_hat, cov, n, method, empty.clone(), empty))
    }

    fn assemble(
        delta_hat: Vec<f64>,
        pi_hat: Vec<f64>,
        cov: CovBlocks,
        n: usize,
        method: EstimatorKind,
        y_fit: RegressionFit,
        x_fit: RegressionFit,
    ) -> Self {
        let k = cov.k();
        let joint = joint_covariance(&cov);
        let precision = Cholesky::factor(&joint).ok().map(|c| c.inverse());
        ReducedFormFit {
            delta_hat,
            pi_hat,
            cov,
            n,
            k,
            method,
            y_fit,
            x_fit,
            precision,
        }
    }

    pub(crate) fn precision(&self) -> Option<&Mat> {
        self.precision.as_ref()
    }
}

/// `[[Σ_δδ, Σ_δπ], [Σ_πδ, Σ_ππ]]`
pub fn joint_covariance(cov: &CovBlocks) -> Mat {
    let k = cov.k();
    let mut s = Mat::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            s[(i, j)] = cov.sdd[(i, j)];
            s[(i, k + j)] = cov.sdp[(i, j)];
            s[(k + i, j)] = cov.spd[(i, j)];
            s[(k + i, k + j)] = cov.spp[(i, j)];
        }
    }
    s.symmetrize()
}

/// Fits both reduced-form equations and their covariance blocks.
pub fn fit_reduced_form(data: &Dataset, opts: &FitOptions) -> Result<ReducedFormFit> {
    data.validate()?;
    let k = data.k();
    let (fy, fx, design) = fit_pair(data, opts)?;
    let cov = cov_blocks(&fy, &fx, &design, k, &opts.huber)?;
    let p = design.cols();
    let delta_hat = fy.coef[p - k..].to_vec();
    let pi_hat = fx.coef[p - k..].to_vec();
    Ok(ReducedFormFit::assemble(
        delta_hat,
        pi_hat,
        cov,
        data.n(),
        opts.estimator,
        fy,
        fx,
    ))
}

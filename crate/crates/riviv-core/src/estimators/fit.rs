use alloc::boxed::Box;
use alloc::vec::Vec;

use super::huber::{huber_rho, huber_weight, HuberConfig, ScaleUpdate, MAD_CONSISTENCY};
use crate::error::{Error, Result};
use crate::numerics::linalg::{dot, max_abs_diff, Cholesky};
use crate::numerics::{mad, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EstimatorKind {
    /// Ordinary least squares.
    Ls,
    /// Mallows-type Huber M-estimator with leverage weights.
    MallowsHuber,
}

/// One fitted regression equation.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    /// Coefficients in design-column order (controls first, instruments last).
    pub coef: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Error scale: root mean squared residual for LS, rescaled MAD for Mallows.
    pub scale: f64,
    pub method: EstimatorKind,
    pub iterations: usize,
    pub converged: bool,
    /// Leverage weights `ω(z_i)`; empty for least squares.
    pub leverage_weights: Vec<f64>,
}

fn check_rows(response: &[f64], design: &Mat) -> Result<()> {
    if response.len() != design.rows() {
        return Err(Error::DimensionMismatch {
            context: "response vs design rows",
            expected: design.rows(),
            found: response.len(),
        });
    }
    if design.rows() <= design.cols() {
        return Err(Error::InvalidArgument(alloc::format!(
            "need more observations ({}) than regressors ({})",
            design.rows(),
            design.cols()
        )));
    }
    Ok(())
}

fn factor_gram(gram: &Mat) -> Result<Cholesky> {
    Cholesky::factor(gram).map_err(|e| match e {
        Error::NotPositiveDefinite { index } => Error::RankDeficient { column: index },
        other => other,
    })
}

fn residuals(response: &[f64], design: &Mat, coef: &[f64]) -> Vec<f64> {
    response
        .iter()
        .enumerate()
        .map(|(i, &y)| y - dot(design.row(i), coef))
        .collect()
}

/// Leverage weights `ω_i = √(1 − h_ii)` with `h_ii` the diagonal of the hat matrix.
pub fn mallows_weights(design: &Mat) -> Result<Vec<f64>> {
    let chol = factor_gram(&design.gram())?;
    let mut buf = Vec::with_capacity(design.cols());
    Ok((0..design.rows())
        .map(|i| {
            buf.clear();
            buf.extend_from_slice(design.row(i));
            chol.forward(&mut buf);
            let h = dot(&buf, &buf);
            libm::sqrt((1.0 - h).clamp(0.0, 1.0))
        })
        .collect())
}

/// Least squares via the normal equations. The scale uses divisor `n`.
pub fn fit_ls(response: &[f64], design: &Mat) -> Result<RegressionFit> {
    check_rows(response, design)?;
    let chol = factor_gram(&design.gram())?;
    let coef = chol.solve_vec(&design.tr_matvec(response)?)?;
    let residuals = residuals(response, design, &coef);
    let scale = libm::sqrt(dot(&residuals, &residuals) / response.len() as f64);
    Ok(RegressionFit {
        coef,
        residuals,
        scale,
        method: EstimatorKind::Ls,
        iterations: 0,
        converged: true,
        leverage_weights: Vec::new(),
    })
}

// `floor` treats rounding-level residuals of an exact fit as a zero scale.
fn robust_scale(residuals: &[f64], floor: f64) -> Result<f64> {
    let s = mad(residuals)? / MAD_CONSISTENCY;
    if s > floor && s.is_finite() {
        Ok(s)
    } else {
        Err(Error::ZeroScale)
    }
}

/// Mallows-type Huber M-estimator fitted by iteratively reweighted least squares.
pub fn fit_mallows_huber(response: &[f64], design: &Mat, cfg: &HuberConfig) -> Result<RegressionFit> {
    check_rows(response, design)?;
    let omega = mallows_weights(design)?;
    fit_mallows_huber_weighted(response, design, omega, cfg)
}

/// As [`fit_mallows_huber`] with precomputed leverage weights, so both reduced-form
/// equations on the same design share one hat-matrix evaluation.
pub fn fit_mallows_huber_weighted(
    response: &[f64],
    design: &Mat,
    omega: Vec<f64>,
    cfg: &HuberConfig,
) -> Result<RegressionFit> {
    check_rows(response, design)?;
    if omega.len() != design.rows() {
        return Err(Error::DimensionMismatch {
            context: "leverage weights",
            expected: design.rows(),
            found: omega.len(),
        });
    }
    if !(cfg.cutoff > 0.0 && cfg.tol > 0.0) {
        return Err(Error::InvalidArgument("Huber cutoff and tolerance must be positive".into()));
    }

    let start = fit_ls(response, design)?;
    let floor = 1e-12 * response.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut coef = start.coef;
    let mut res = start.residuals;
    let mut scale = robust_scale(&res, floor)?;
    let mut weights = alloc::vec![0.0; response.len()];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        for ((w, &r), &om) in weights.iter_mut().zip(&res).zip(&omega) {
            *w = om * huber_weight(r / scale, cfg.cutoff);
        }
        let gram = design.weighted_gram(&weights)?;
        let wy: Vec<f64> = weights.iter().zip(response).map(|(w, y)| w * y).collect();
        let chol = Cholesky::factor(&gram).map_err(|_| Error::DegenerateSandwich)?;
        let next = chol.solve_vec(&design.tr_matvec(&wy)?)?;
        let change = max_abs_diff(&next, &coef);
        coef = next;
        res = residuals(response, design, &coef);
        if cfg.scale_update == ScaleUpdate::PerIteration {
            scale = robust_scale(&res, floor)?;
        }
        if change < cfg.tol {
            converged = true;
            break;
        }
    }

    let fit = RegressionFit {
        coef,
        residuals: res,
        scale,
        method: EstimatorKind::MallowsHuber,
        iterations,
        converged,
        leverage_weights: omega,
    };
    if converged {
        Ok(fit)
    } else {
        Err(Error::NotConverged(Box::new(fit)))
    }
}

/// `(1/n) Σ ω_i ψ(r_i/σ) x_i`, the Mallows estimating equation at a fit.
pub fn mallows_estimating_equation(fit: &RegressionFit, design: &Mat, cutoff: f64) -> Vec<f64> {
    let n = design.rows();
    let mut out = alloc::vec![0.0; design.cols()];
    for i in 0..n {
        let s = fit.leverage_weights[i] * huber_rho(fit.residuals[i] / fit.scale, cutoff);
        crate::numerics::linalg::axpy(s / n as f64, design.row(i), &mut out);
    }
    out
}

/// Dispatches on the estimator kind.
pub fn fit_equation(kind: EstimatorKind, response: &[f64], design: &Mat, cfg: &HuberConfig) -> Result<RegressionFit> {
    match kind {
        EstimatorKind::Ls => fit_ls(response, design),
        EstimatorKind::MallowsHuber => fit_mallows_huber(response, design, cfg),
    }
}

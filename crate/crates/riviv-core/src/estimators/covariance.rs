//! Influence-function covariance blocks of the reduced-form coefficient estimators.
//!
//! All blocks describe `√n`-scaled estimation error and are restricted to the
//! trailing `k x k` instrument sub-block of the full design.

use super::fit::{EstimatorKind, RegressionFit};
use super::huber::{huber_rho, huber_rho_prime, HuberConfig};
use crate::error::{Error, Result};
use crate::numerics::linalg::dot;
use crate::numerics::{Cholesky, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct CovBlocks {
    /// Σ_δδ
    pub sdd: Mat,
    /// Σ_ππ
    pub spp: Mat,
    /// Σ_δπ
    pub sdp: Mat,
    /// Σ_πδ, always exactly `sdpᵀ`
    pub spd: Mat,
}

impl CovBlocks {
    pub fn new(sdd: Mat, spp: Mat, sdp: Mat) -> Result<Self> {
        let k = sdd.rows();
        for m in [&sdd, &spp, &sdp] {
            if m.rows() != k || m.cols() != k {
                return Err(Error::DimensionMismatch {
                    context: "CovBlocks",
                    expected: k,
                    found: m.cols(),
                });
            }
        }
        let spd = sdp.transpose();
        Ok(CovBlocks {
            sdd: sdd.symmetrize(),
            spp: spp.symmetrize(),
            sdp,
            spd,
        })
    }

    pub fn k(&self) -> usize {
        self.sdd.rows()
    }
}

fn check_pair(fit_y: &RegressionFit, fit_x: &RegressionFit, design: &Mat, want: EstimatorKind) -> Result<usize> {
    let n = design.rows();
    for f in [fit_y, fit_x] {
        if f.method != want {
            return Err(Error::InvalidArgument(alloc::format!(
                "expected {want:?} fits, got {:?}",
                f.method
            )));
        }
        if f.residuals.len() != n {
            return Err(Error::DimensionMismatch {
                context: "fit residuals vs design",
                expected: n,
                found: f.residuals.len(),
            });
        }
        if f.coef.len() != design.cols() {
            return Err(Error::DimensionMismatch {
                context: "fit coefficients vs design",
                expected: design.cols(),
                found: f.coef.len(),
            });
        }
    }
    Ok(n)
}

/// Homoskedastic least-squares blocks `(DᵀD/n)⁻¹ σ̂²` with divisor-`n` moments.
pub fn cov_blocks_ls(fit_y: &RegressionFit, fit_x: &RegressionFit, design: &Mat, k: usize) -> Result<CovBlocks> {
    let n = check_pair(fit_y, fit_x, design, EstimatorKind::Ls)?;
    if k == 0 || k > design.cols() {
        return Err(Error::InvalidArgument("instrument count out of range".into()));
    }
    let nf = n as f64;
    let a = design.gram().scale(1.0 / nf);
    let ainv = Cholesky::factor(&a)
        .map_err(|e| match e {
            Error::NotPositiveDefinite { index } => Error::RankDeficient { column: index },
            other => other,
        })?
        .inverse()
        .trailing_block(k);
    let s_ee = dot(&fit_y.residuals, &fit_y.residuals) / nf;
    let s_vv = dot(&fit_x.residuals, &fit_x.residuals) / nf;
    let s_ev = dot(&fit_y.residuals, &fit_x.residuals) / nf;
    CovBlocks::new(ainv.scale(s_ee), ainv.scale(s_vv), ainv.scale(s_ev))
}

struct SandwichParts {
    m_inv: Mat,
    /// `ω_i ψ(r_i/σ)` per observation
    score: alloc::vec::Vec<f64>,
}

fn sandwich_parts(fit: &RegressionFit, design: &Mat, cutoff: f64) -> Result<SandwichParts> {
    let n = design.rows() as f64;
    let omega = &fit.leverage_weights;
    if omega.len() != design.rows() {
        return Err(Error::DimensionMismatch {
            context: "leverage weights",
            expected: design.rows(),
            found: omega.len(),
        });
    }
    let mut m_weights = alloc::vec::Vec::with_capacity(design.rows());
    let mut score = alloc::vec::Vec::with_capacity(design.rows());
    for (&r, &om) in fit.residuals.iter().zip(omega) {
        let u = r / fit.scale;
        m_weights.push(om / fit.scale * huber_rho_prime(u, cutoff) / n);
        score.push(om * huber_rho(u, cutoff));
    }
    let m = design.weighted_gram(&m_weights)?;
    let m_inv = Cholesky::factor(&m)
        .map_err(|_| Error::DegenerateSandwich)?
        .inverse();
    Ok(SandwichParts { m_inv, score })
}

/// Mallows sandwich blocks `M⁻¹ Q M⁻ᵀ` evaluated at the empirical distribution,
/// one equation at a time; the cross block uses `Q_δπ = (1/n) Σ ψ_y,i ψ_x,i z_i z_iᵀ`.
pub fn cov_blocks_mallows(
    fit_y: &RegressionFit,
    fit_x: &RegressionFit,
    design: &Mat,
    k: usize,
    cfg: &HuberConfig,
) -> Result<CovBlocks> {
    let n = check_pair(fit_y, fit_x, design, EstimatorKind::MallowsHuber)?;
    if k == 0 || k > design.cols() {
        return Err(Error::InvalidArgument("instrument count out of range".into()));
    }
    let nf = n as f64;
    let py = sandwich_parts(fit_y, design, cfg.cutoff)?;
    let px = sandwich_parts(fit_x, design, cfg.cutoff)?;

    let q = |a: &[f64], b: &[f64]| -> Result<Mat> {
        let w: alloc::vec::Vec<f64> = a.iter().zip(b).map(|(s, t)| s * t / nf).collect();
        design.weighted_gram(&w)
    };
    let q_yy = q(&py.score, &py.score)?;
    let q_xx = q(&px.score, &px.score)?;
    let q_yx = q(&py.score, &px.score)?;

    let sand = |ml: &Mat, qm: &Mat, mr: &Mat| -> Result<Mat> { ml.matmul(qm)?.matmul(&mr.transpose()) };
    let sdd = sand(&py.m_inv, &q_yy, &py.m_inv)?.trailing_block(k);
    let spp = sand(&px.m_inv, &q_xx, &px.m_inv)?.trailing_block(k);
    let sdp = sand(&py.m_inv, &q_yx, &px.m_inv)?.trailing_block(k);
    CovBlocks::new(sdd, spp, sdp)
}

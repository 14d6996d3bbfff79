//! Generalized AR, K, Wald and CLR statistics built from reduced-form estimates.
//!
//! Every statistic is returned `n`-scaled so it can be compared directly with
//! chi-square quantiles.

use alloc::vec::Vec;

use super::reduced::ReducedFormFit;
use crate::error::{Error, Result};
use crate::numerics::linalg::{axpy, dot};
use crate::numerics::{Cholesky, Mat};

/// Threshold on the unscaled `DᵀΛ⁻¹D` below which the CLR statistic takes its
/// `D = 0` limit (the AR statistic).
pub const D_ZERO_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum StatKind {
    Rar,
    Rk,
    Rw,
    Rclr,
}

impl StatKind {
    pub const ALL: [StatKind; 4] = [StatKind::Rar, StatKind::Rk, StatKind::Rw, StatKind::Rclr];

    pub fn name(self) -> &'static str {
        match self {
            StatKind::Rar => "rar",
            StatKind::Rk => "rk",
            StatKind::Rw => "rw",
            StatKind::Rclr => "rclr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StatResult {
    pub kind: StatKind,
    /// `n`-scaled statistic.
    pub value: f64,
    /// Conditioning statistic `W̃ = n·DᵀΛ⁻¹D`; only set for the CLR statistic.
    pub w_tilde: Option<f64>,
    pub beta0: f64,
}

/// `g = δ̂ − β₀ π̂`
pub fn g_stat(fit: &ReducedFormFit, beta0: f64) -> Vec<f64> {
    fit.delta_hat
        .iter()
        .zip(&fit.pi_hat)
        .map(|(d, p)| d - beta0 * p)
        .collect()
}

/// `Ω(β₀) = Σ_δδ − β₀(Σ_δπ + Σ_πδ) + β₀² Σ_ππ`, symmetrized.
pub fn omega(fit: &ReducedFormFit, beta0: f64) -> Mat {
    let c = &fit.cov;
    let k = fit.k;
    let mut m = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] = c.sdd[(i, j)] - beta0 * (c.sdp[(i, j)] + c.spd[(i, j)]) + beta0 * beta0 * c.spp[(i, j)];
        }
    }
    m.symmetrize()
}

// Σ_πδ − Σ_ππ β₀
fn cross_term(fit: &ReducedFormFit, beta0: f64) -> Mat {
    let c = &fit.cov;
    c.spd.sub(&c.spp.scale(beta0)).expect("blocks share dimension")
}

fn factor_omega(fit: &ReducedFormFit, beta0: f64) -> Result<(Mat, Cholesky)> {
    let om = omega(fit, beta0);
    let chol = Cholesky::factor(&om).map_err(|_| Error::Singular("Ω(β₀)"))?;
    Ok((om, chol))
}

/// `D = π̂ − (Σ_πδ − Σ_ππβ₀) Ω⁻¹ g`
pub fn d_stat(fit: &ReducedFormFit, beta0: f64) -> Result<Vec<f64>> {
    let (_, chol) = factor_omega(fit, beta0)?;
    let g = g_stat(fit, beta0);
    d_from(fit, beta0, &chol, &g)
}

fn d_from(fit: &ReducedFormFit, beta0: f64, chol: &Cholesky, g: &[f64]) -> Result<Vec<f64>> {
    let omega_inv_g = chol.solve_vec(g)?;
    let corr = cross_term(fit, beta0).matvec(&omega_inv_g)?;
    Ok(fit.pi_hat.iter().zip(&corr).map(|(p, c)| p - c).collect())
}

/// `Λ = Σ_ππ − (Σ_πδ − Σ_ππβ₀) Ω⁻¹ (Σ_δπ − Σ_ππβ₀)`, symmetrized.
pub fn lambda(fit: &ReducedFormFit, beta0: f64) -> Result<Mat> {
    let (_, chol) = factor_omega(fit, beta0)?;
    let c = cross_term(fit, beta0);
    let solved = chol.solve(&c.transpose())?;
    Ok(fit.cov.spp.sub(&c.matmul(&solved)?)?.symmetrize())
}

/// All four statistics at one `β₀`, sharing the factorizations.
#[derive(Debug, Clone, PartialEq)]
pub struct Statistics {
    pub beta0: f64,
    pub g: Vec<f64>,
    pub d: Vec<f64>,
    pub ar: f64,
    /// `n(gᵀΩ⁻¹D)² / DᵀΩ⁻¹D`; `None` when `DᵀΩD` vanishes.
    pub k_stat: Option<f64>,
    pub w: f64,
    pub clr: f64,
}

impl Statistics {
    pub fn compute(fit: &ReducedFormFit, beta0: f64) -> Result<Self> {
        let n = fit.n as f64;
        let (om, chol) = factor_omega(fit, beta0)?;
        let g = g_stat(fit, beta0);
        let d = d_from(fit, beta0, &chol, &g)?;
        let ar = n * chol.inv_quad_form(&g);

        let lambda_inv_d = lambda_inv_d(fit, beta0, &d)?;
        let dld = dot(&d, &lambda_inv_d).max(0.0);
        let w = n * dld;

        let dod = om.bilinear(&d, &d);
        let k_stat = if dod > 1e-12 * om.norm_inf() {
            let omega_inv_d = chol.solve_vec(&d)?;
            let gd = dot(&g, &omega_inv_d);
            let dd = dot(&d, &omega_inv_d);
            Some((n * gd * gd / dd).min(ar).max(0.0))
        } else {
            None
        };

        let clr = match k_stat {
            Some(k) if dld >= D_ZERO_THRESHOLD => clr_from_components(ar, k, w),
            _ => ar,
        };
        Ok(Statistics {
            beta0,
            g,
            d,
            ar,
            k_stat,
            w,
            clr,
        })
    }

    pub fn result(&self, kind: StatKind) -> Result<StatResult> {
        let value = match kind {
            StatKind::Rar => self.ar,
            StatKind::Rk => self.k_stat.ok_or(Error::DegenerateDirection)?,
            StatKind::Rw => self.w,
            StatKind::Rclr => self.clr,
        };
        Ok(StatResult {
            kind,
            value,
            w_tilde: (kind == StatKind::Rclr).then_some(self.w),
            beta0: self.beta0,
        })
    }
}

// Λ⁻¹D through the precision matrix P of (δ̂, π̂):
// Λ⁻¹D = (P_πδ + β₀ P_δδ) δ̂ + (P_ππ + β₀ P_δπ) π̂, which stays accurate for
// very large |β₀| where Σ_ππ − CΩ⁻¹Cᵀ cancels.
fn lambda_inv_d(fit: &ReducedFormFit, beta0: f64, d: &[f64]) -> Result<Vec<f64>> {
    let k = fit.k;
    match fit.precision() {
        Some(p) => {
            let mut out = alloc::vec![0.0; k];
            for i in 0..k {
                let mut s = 0.0;
                for j in 0..k {
                    s += (p[(k + i, j)] + beta0 * p[(i, j)]) * fit.delta_hat[j];
                    s += (p[(k + i, k + j)] + beta0 * p[(i, k + j)]) * fit.pi_hat[j];
                }
                out[i] = s;
            }
            Ok(out)
        }
        None => {
            let lam = lambda(fit, beta0)?;
            let chol = Cholesky::factor(&lam).map_err(|_| Error::Singular("Λ(β₀)"))?;
            let mut v = d.to_vec();
            chol.forward(&mut v);
            chol.backward(&mut v);
            Ok(v)
        }
    }
}

/// `½[AR − W + √((AR − W)² + 4·W·K)]`
pub fn clr_from_components(ar: f64, k: f64, w: f64) -> f64 {
    half_sum_root(ar - w, 4.0 * w * k)
}

/// `½(x + √(x² + y))` for `y ≥ 0`, without cancellation when `x < 0`.
pub fn half_sum_root(x: f64, y: f64) -> f64 {
    let y = y.max(0.0);
    let r = libm::sqrt(x * x + y);
    if x >= 0.0 {
        0.5 * (x + r)
    } else if r - x > 0.0 {
        0.5 * y / (r - x)
    } else {
        0.0
    }
}

pub fn rar(fit: &ReducedFormFit, beta0: f64) -> Result<StatResult> {
    let (_, chol) = factor_omega(fit, beta0)?;
    let g = g_stat(fit, beta0);
    Ok(StatResult {
        kind: StatKind::Rar,
        value: fit.n as f64 * chol.inv_quad_form(&g),
        w_tilde: None,
        beta0,
    })
}

pub fn rk(fit: &ReducedFormFit, beta0: f64) -> Result<StatResult> {
    Statistics::compute(fit, beta0)?.result(StatKind::Rk)
}

pub fn rw(fit: &ReducedFormFit, beta0: f64) -> Result<StatResult> {
    Statistics::compute(fit, beta0)?.result(StatKind::Rw)
}

pub fn rclr(fit: &ReducedFormFit, beta0: f64) -> Result<StatResult> {
    Statistics::compute(fit, beta0)?.result(StatKind::Rclr)
}

/// `√n·g` and `√n·D` at `β₀`, used by the block-diagonality diagnostic.
pub fn scaled_g_and_d(fit: &ReducedFormFit, beta0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (_, chol) = factor_omega(fit, beta0)?;
    let g = g_stat(fit, beta0);
    let d = d_from(fit, beta0, &chol, &g)?;
    let s = libm::sqrt(fit.n as f64);
    let mut gs = alloc::vec![0.0; g.len()];
    let mut ds = alloc::vec![0.0; d.len()];
    axpy(s, &g, &mut gs);
    axpy(s, &d, &mut ds);
    Ok((gs, ds))
}

/// Default Huber tuning constant (about 95% efficiency at the normal).
pub const HUBER_CUTOFF: f64 = 1.345;

/// Consistency factor for the MAD at the normal distribution.
pub const MAD_CONSISTENCY: f64 = 0.6745;

/// Huber score: identity on `[-c, c]`, clipped to `±c` outside.
#[inline]
pub fn huber_rho(x: f64, c: f64) -> f64 {
    if x.abs() <= c {
        x
    } else {
        c.copysign(x)
    }
}

/// Derivative of [`huber_rho`]; equal to 1 at `|x| = c`.
#[inline]
pub fn huber_rho_prime(x: f64, c: f64) -> f64 {
    if x.abs() <= c {
        1.0
    } else {
        0.0
    }
}

/// IRLS weight `huber_rho(u) / u`, with the limit value 1 at `u = 0`.
#[inline]
pub fn huber_weight(u: f64, c: f64) -> f64 {
    let a = u.abs();
    if a <= c {
        1.0
    } else {
        c / a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScaleUpdate {
    /// Recompute the rescaled MAD of the current residuals every sweep.
    PerIteration,
    /// Keep the rescaled MAD of the least-squares residuals.
    FixedFromInitial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HuberConfig {
    pub cutoff: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub scale_update: ScaleUpdate,
}

impl Default for HuberConfig {
    fn default() -> Self {
        HuberConfig {
            cutoff: HUBER_CUTOFF,
            max_iter: 50,
            tol: 1e-8,
            scale_update: ScaleUpdate::PerIteration,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_values() {
        assert_eq!(huber_rho(0.0, HUBER_CUTOFF), 0.0);
        assert_eq!(huber_rho(2.0, HUBER_CUTOFF), 1.345);
        assert_eq!(huber_rho(-2.0, HUBER_CUTOFF), -1.345);
        assert_eq!(huber_rho(-0.5, HUBER_CUTOFF), -0.5);
        assert_eq!(huber_rho_prime(1.345, HUBER_CUTOFF), 1.0);
        assert_eq!(huber_rho_prime(1.3451, HUBER_CUTOFF), 0.0);
        assert_eq!(huber_weight(0.0, HUBER_CUTOFF), 1.0);
        assert!((huber_weight(2.69, HUBER_CUTOFF) - 0.5).abs() < 1e-15);
    }
}

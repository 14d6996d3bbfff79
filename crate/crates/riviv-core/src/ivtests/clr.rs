//! Simulated null distribution of the CLR statistic conditional on `W̃`.
//!
//! Given independent `a ~ χ²_{k−1}` and `b ~ χ²_1`, the conditional limit is
//! `½{a + b − W̃ + √((a + b + W̃)² − 4W̃a)}`. Writing `s = a + b`, the radicand
//! equals `(s − W̃)² + 4W̃b`, which is how it is evaluated here.

use alloc::vec::Vec;

use super::stats::half_sum_root;
use crate::numerics::{chi2_sample, RngStream};

/// A bank of `(a + b, b)` draws that can be re-evaluated for any `W̃`.
///
/// Reusing one bank across `β₀` values keeps the critical-value function
/// deterministic within a confidence-set inversion.
///
/// Draws are kept in decreasing order of `a + b`. Every conditional draw is at
/// most `a + b`, so a scan for draws reaching a statistic can stop at the first
/// sum below it.
#[derive(Debug, Clone)]
pub struct ClrNullDraws {
    k: usize,
    sum: Vec<f64>,
    b: Vec<f64>,
}

impl ClrNullDraws {
    pub fn sample(k: usize, sims: usize, rng: &mut RngStream) -> Self {
        assert!(k >= 1, "CLR null draws need k >= 1");
        assert!(sims >= 1, "CLR null draws need sims >= 1");
        let mut pairs: Vec<(f64, f64)> = (0..sims)
            .map(|_| {
                let a = chi2_sample(rng, (k - 1) as u32);
                let b = chi2_sample(rng, 1);
                (a + b, b)
            })
            .collect();
        pairs.sort_unstable_by(|p, q| q.0.total_cmp(&p.0));
        let (sum, b) = pairs.into_iter().unzip();
        ClrNullDraws { k, sum, b }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sims(&self) -> usize {
        self.sum.len()
    }

    #[inline]
    fn draw(&self, i: usize, w_tilde: f64) -> f64 {
        if w_tilde <= 0.0 {
            return self.sum[i];
        }
        half_sum_root(self.sum[i] - w_tilde, 4.0 * w_tilde * self.b[i])
    }

    /// Order statistic at index `⌈sims·(1−α)⌉` (1-based) of the conditional draws.
    pub fn critical_value(&self, w_tilde: f64, alpha: f64) -> f64 {
        let sims = self.sims();
        let mut vals: Vec<f64> = (0..sims).map(|i| self.draw(i, w_tilde)).collect();
        let rank = quantile_rank(sims, alpha);
        let idx = rank.clamp(1, sims) - 1;
        let (_, v, _) = vals.select_nth_unstable_by(idx, f64::total_cmp);
        *v
    }

    /// Fraction of conditional draws at or above `stat`.
    ///
    /// With the quantile convention above, `stat > critical_value` holds exactly
    /// when this p-value is `≤ α`.
    pub fn p_value(&self, stat: f64, w_tilde: f64) -> f64 {
        let hits = self.candidates(stat).filter(|&i| self.draw(i, w_tilde) >= stat).count();
        hits as f64 / self.sims() as f64
    }

    fn candidates(&self, stat: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.sims()).take_while(move |&i| self.sum[i] >= stat)
    }

    /// Same decision as `stat > critical_value(w_tilde, alpha)`, stopping as soon
    /// as enough draws reach `stat`.
    pub fn rejects(&self, stat: f64, w_tilde: f64, alpha: f64) -> bool {
        let limit = self.sims() - quantile_rank(self.sims(), alpha).clamp(1, self.sims());
        let mut hits = 0;
        for i in self.candidates(stat) {
            if self.draw(i, w_tilde) >= stat {
                hits += 1;
                if hits > limit {
                    return false;
                }
            }
        }
        true
    }
}

/// `⌈sims·(1−α)⌉`, guarded against `0.95 * 10000` landing a hair above 9500.
pub fn quantile_rank(sims: usize, alpha: f64) -> usize {
    libm::ceil(sims as f64 * (1.0 - alpha) - 1e-9) as usize
}

/// Conditional `1 − α` critical value of the CLR statistic from `sims` fresh draws.
pub fn clr_critical_value(w_tilde: f64, k: usize, alpha: f64, sims: usize, rng: &mut RngStream) -> f64 {
    ClrNullDraws::sample(k, sims, rng).critical_value(w_tilde.max(0.0), alpha)
}

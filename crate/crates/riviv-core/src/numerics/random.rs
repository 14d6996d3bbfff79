//! Reproducible random streams and the handful of samplers the simulations need.
//!
//! Every stream is a ChaCha8 generator seeded from a 64-bit seed, with the
//! generator's native 64-bit stream selector set to the stream id. Identical
//! `(seed, stream)` pairs reproduce identical draws on every platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// Name of the pinned generator, echoed into run reports.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9, seed_from_u64 + set_stream)";

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh stream sharing this seed.
    pub fn fork(&self, stream: u64) -> Self {
        RngStream::new(self.seed, stream)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

// Above this many degrees of freedom a gamma draw is cheaper than summing squares.
const CHI2_SUM_LIMIT: u32 = 16;

/// One draw from `χ²_df`; `df = 0` is the point mass at zero.
pub fn chi2_sample(rng: &mut RngStream, df: u32) -> f64 {
    match df {
        0 => 0.0,
        d if d <= CHI2_SUM_LIMIT => (0..d)
            .map(|_| {
                let g = rng.standard_normal();
                g * g
            })
            .sum(),
        d => ChiSquared::new(d as f64)
            .expect("positive degrees of freedom")
            .sample(&mut rng.rng),
    }
}

/// Mean-zero, unit-variance normal pair with correlation `rho`.
pub fn bivariate_normal(rng: &mut RngStream, rho: f64) -> (f64, f64) {
    let g1 = rng.standard_normal();
    let g2 = rng.standard_normal();
    (g1, rho * g1 + libm::sqrt(1.0 - rho * rho) * g2)
}

/// Bivariate Student t with 3 degrees of freedom and scale correlation `rho`.
pub fn bivariate_t3(rng: &mut RngStream, rho: f64) -> (f64, f64) {
    let (g1, g2) = bivariate_normal(rng, rho);
    let s = chi2_sample(rng, 3);
    let f = libm::sqrt(3.0 / s);
    (g1 * f, g2 * f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::chi2::chi2_quantile;
    use crate::numerics::robust::median;
    use alloc::vec::Vec;

    const DRAWS: usize = 100_000;

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let (ma, mb) = (mean(a), mean(b));
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / libm::sqrt(saa * sbb)
    }

    fn ranks(xs: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
        let mut r = alloc::vec![0.0; xs.len()];
        for (rank, i) in idx.into_iter().enumerate() {
            r[i] = rank as f64;
        }
        r
    }

    fn pairs(f: impl Fn(&mut RngStream) -> (f64, f64), seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = RngStream::new(seed, 0);
        (0..DRAWS).map(|_| f(&mut rng)).unzip()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 7);
        let mut c = RngStream::new(42, 8);
        let xa: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..16).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn chi2_zero_df_is_point_mass() {
        let mut rng = RngStream::new(1, 0);
        for _ in 0..100 {
            assert_eq!(chi2_sample(&mut rng, 0), 0.0);
        }
    }

    #[test]
    fn chi2_moments_and_cdf() {
        let mut rng = RngStream::new(3, 0);
        let xs: Vec<f64> = (0..DRAWS).map(|_| chi2_sample(&mut rng, 3)).collect();
        assert!((mean(&xs) - 3.0).abs() < 0.05);

        let q = chi2_quantile(1, 0.95).unwrap();
        let ys: Vec<f64> = (0..DRAWS).map(|_| chi2_sample(&mut rng, 1)).collect();
        let frac = ys.iter().filter(|&&y| y <= q).count() as f64 / DRAWS as f64;
        assert!((frac - 0.95).abs() < 0.005, "{frac}");

        // gamma-sampler branch
        let zs: Vec<f64> = (0..DRAWS).map(|_| chi2_sample(&mut rng, 40)).collect();
        assert!((mean(&zs) - 40.0).abs() < 0.2);
    }

    #[test]
    fn bivariate_normal_moments() {
        let (a, b) = pairs(|r| bivariate_normal(r, 0.0), 11);
        assert!(corr(&a, &b).abs() < 0.01);
        let (a, b) = pairs(|r| bivariate_normal(r, 0.5), 12);
        assert!((corr(&a, &b) - 0.5).abs() < 0.01);
        let (a, b) = pairs(|r| bivariate_normal(r, 0.9), 13);
        let var = |xs: &[f64]| {
            let m = mean(xs);
            xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
        };
        assert!((var(&a) - 1.0).abs() < 0.02);
        assert!((var(&b) - 1.0).abs() < 0.02);
    }

    #[test]
    fn bivariate_t3_shape() {
        let (a, b) = pairs(|r| bivariate_t3(r, 0.5), 21);
        assert!(median(&a).unwrap().abs() < 0.02);
        assert!(median(&b).unwrap().abs() < 0.02);

        let m = mean(&a);
        let m2 = a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / DRAWS as f64;
        let m4 = a.iter().map(|x| (x - m).powi(4)).sum::<f64>() / DRAWS as f64;
        assert!(m4 / (m2 * m2) - 3.0 > 2.0);

        let (a, b) = pairs(|r| bivariate_t3(r, 0.0), 22);
        assert!(corr(&ranks(&a), &ranks(&b)).abs() < 0.02);
    }
}

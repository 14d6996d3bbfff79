//! Linear algebra, chi-square functions, robust location/scale and random streams.

pub mod chi2;
pub mod linalg;
pub mod random;
pub mod robust;

pub use chi2::{chi2_cdf, chi2_quantile, chi2_sf};
pub use linalg::{solve_spd, Cholesky, Mat};
pub use random::{bivariate_normal, bivariate_t3, chi2_sample, RngStream};
pub use robust::{mad, median};

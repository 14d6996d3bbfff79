use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::Mat;

/// Observations of the linear IV model: outcome `y`, endogenous regressor `x`,
/// instruments `z` (n x k) and exogenous controls `w` (n x p, possibly p = 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Mat,
    pub w: Mat,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: Vec<f64>, z: Mat, w: Mat) -> Result<Self> {
        let d = Dataset { y, x, z, w };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        for (context, found) in [
            ("Dataset x", self.x.len()),
            ("Dataset z rows", self.z.rows()),
            ("Dataset w rows", self.w.rows()),
        ] {
            if found != n {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: n,
                    found,
                });
            }
        }
        if self.z.cols() == 0 {
            return Err(Error::EmptyInput("at least one instrument is required"));
        }
        if n == 0 {
            return Err(Error::EmptyInput("dataset has no observations"));
        }
        let finite = self.y.iter().chain(&self.x).all(|v| v.is_finite())
            && self.z.all_finite()
            && self.w.all_finite();
        if !finite {
            return Err(Error::Domain("dataset contains non-finite values"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.z.cols()
    }

    pub fn p(&self) -> usize {
        self.w.cols()
    }

    /// Design `[1?, W, Z]`: optional intercept, controls, then instruments last.
    pub fn design(&self, intercept: bool) -> Mat {
        let n = self.n();
        let extra = usize::from(intercept);
        let cols = extra + self.p() + self.k();
        let mut d = Mat::zeros(n, cols);
        for i in 0..n {
            let row = d.row_mut(i);
            if intercept {
                row[0] = 1.0;
            }
            row[extra..extra + self.p()].copy_from_slice(self.w.row(i));
            row[extra + self.p()..].copy_from_slice(self.z.row(i));
        }
        d
    }

    /// Copy with `copies` extra rows equal to the given observation appended.
    pub fn with_appended(&self, obs: &Observation, copies: usize) -> Result<Dataset> {
        if obs.z.len() != self.k() || obs.w.len() != self.p() {
            return Err(Error::DimensionMismatch {
                context: "Dataset::with_appended",
                expected: self.k() + self.p(),
                found: obs.z.len() + obs.w.len(),
            });
        }
        let n = self.n() + copies;
        let mut y = self.y.clone();
        let mut x = self.x.clone();
        y.extend(core::iter::repeat_n(obs.y, copies));
        x.extend(core::iter::repeat_n(obs.x, copies));
        let mut z = Mat::zeros(n, self.k());
        let mut w = Mat::zeros(n, self.p());
        for i in 0..n {
            let (zr, wr) = if i < self.n() {
                (self.z.row(i), self.w.row(i))
            } else {
                (&obs.z[..], &obs.w[..])
            };
            z.row_mut(i).copy_from_slice(zr);
            w.row_mut(i).copy_from_slice(wr);
        }
        Dataset::new(y, x, z, w)
    }
}

/// A single data point `(y, x, z, w)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Observation {
    pub y: f64,
    pub x: f64,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

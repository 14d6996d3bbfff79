//! Shared helpers for unit tests.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::numerics::{Mat, RngStream};

pub fn normal_mat(rng: &mut RngStream, rows: usize, cols: usize) -> Mat {
    let data = (0..rows * cols).map(|_| rng.standard_normal()).collect();
    Mat::from_row_major(rows, cols, data).unwrap()
}

pub fn normal_vec(rng: &mut RngStream, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.standard_normal()).collect()
}

pub fn na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn nav(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

pub fn assert_mat_close(a: &Mat, b: &DMatrix<f64>, rel: f64) {
    assert_eq!((a.rows(), a.cols()), (b.nrows(), b.ncols()));
    let scale = b.amax().max(1e-300);
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            assert!(
                (a[(i, j)] - b[(i, j)]).abs() <= rel * scale,
                "entry ({i}, {j}): {} vs {}",
                a[(i, j)],
                b[(i, j)]
            );
        }
    }
}

/// IV data `x = zπ + w + v`, `y = βx + w + u` with `corr(u, v) = 0.5`.
pub fn iv_data(rng: &mut RngStream, n: usize, k: usize, p: usize, pi: f64, beta: f64) -> Dataset {
    let z = normal_mat(rng, n, k);
    let w = normal_mat(rng, n, p);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (u, v) = crate::numerics::bivariate_normal(rng, 0.5);
        let ws: f64 = w.row(i).iter().sum();
        let xi = pi * z.row(i).iter().sum::<f64>() + ws + v;
        x.push(xi);
        y.push(beta * xi + ws + u);
    }
    Dataset::new(y, x, z, w).unwrap()
}

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Sample median; even lengths average the two central order statistics.
pub fn median(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("median of an empty slice"));
    }
    let mut buf = xs.to_vec();
    Ok(median_in_place(&mut buf))
}

/// Median absolute deviation around the median, not rescaled.
pub fn mad(xs: &[f64]) -> Result<f64> {
    let m = median(xs)?;
    let mut dev: Vec<f64> = xs.iter().map(|x| (x - m).abs()).collect();
    Ok(median_in_place(&mut dev))
}

pub(crate) fn median_in_place(buf: &mut [f64]) -> f64 {
    let n = buf.len();
    let mid = n / 2;
    let (_, upper, _) = buf.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = buf[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

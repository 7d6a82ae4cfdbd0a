//! Pairwise summation with a fixed split order.
//!
//! The reduction tree depends only on the input length, so results are
//! bitwise reproducible whatever the thread count of the caller.

const BLOCK: usize = 32;

pub(crate) fn pairwise(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        return xs.iter().fold(0.0, |a, &b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise(&xs[..mid]) + pairwise(&xs[mid..])
}

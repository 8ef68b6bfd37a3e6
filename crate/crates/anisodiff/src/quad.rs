//! Order-fixed summation so reductions do not depend on thread count.

/// Pairwise summation; the split points depend only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().fold(0.0, |a, b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `max(x, 0)` raised to `e`, with `0^0 = 1`.
#[inline]
pub fn pos_pow(x: f64, e: f64) -> f64 {
    if x > 0.0 {
        x.powf(e)
    } else if e == 0.0 {
        1.0
    } else {
        0.0
    }
}

//! Small vector helpers shared across modules. Not public API.

use crate::{Error, Result};

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Euclidean norm.
pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Number of representable `f64` values strictly between `a` and `b`
/// (0 when `a == b`). Used by the step-identity checks.
pub(crate) fn ulps_between(a: f64, b: f64) -> u64 {
    if a == b {
        return 0; // covers +0.0 vs -0.0
    }
    if a.is_nan() || b.is_nan() {
        return u64::MAX;
    }
    // Map to a monotone integer line: negative floats are reflected so that
    // consecutive representable values differ by 1.
    fn key(x: f64) -> i64 {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN.wrapping_add(1).wrapping_sub(bits).wrapping_sub(1)
        } else {
            bits
        }
    }
    let (ka, kb) = (key(a), key(b));
    ka.abs_diff(kb)
}

//! Cosine basis on the unit interval and the affine map that brings raw
//! observations into it.
//!
//! The basis is `phi_0(u) = 1`, `phi_j(u) = sqrt(2) cos(pi j u)` for `j >= 1`,
//! which is orthonormal in L2[0, 1]. A useful identity for variance work is
//! `phi_j(u)^2 = 1 + phi_{2j}(u) / sqrt(2)`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed around `[0, 1]` before a point is treated as unscaled.
pub const DOMAIN_TOLERANCE: f64 = 1e-12;

/// Evaluates the `j`-th cosine basis function at `u`.
pub fn phi(j: usize, u: f64) -> Result<f64> {
    check_unit(u)?;
    Ok(phi_unchecked(j, u))
}

/// Same as [`phi`] without the domain check. Used on hot paths where `u` is
/// already known to lie in the unit interval.
#[inline]
pub fn phi_unchecked(j: usize, u: f64) -> f64 {
    if j == 0 {
        1.0
    } else {
        SQRT_2 * (PI * j as f64 * u).cos()
    }
}

pub(crate) fn check_unit(u: f64) -> Result<()> {
    if !(-DOMAIN_TOLERANCE..=1.0 + DOMAIN_TOLERANCE).contains(&u) {
        return Err(Error::Domain { value: u });
    }
    Ok(())
}

/// Affine map from an original data range `[a, b]` onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingTransform {
    pub a: f64,
    pub b: f64,
}

impl ScalingTransform {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::Degenerate(format!(
                "need finite bounds with b > a, got [{a}, {b}]"
            )));
        }
        Ok(Self { a, b })
    }

    /// Identity map on the unit interval.
    pub fn unit() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn forward(&self, x: f64) -> f64 {
        (x - self.a) / (self.b - self.a)
    }

    pub fn inverse(&self, u: f64) -> f64 {
        self.a + (self.b - self.a) * u
    }
}

/// Fits `[a, b] = [min - m * range, max + m * range]` to `values`.
pub fn fit_scaling(values: &[f64], margin: f64) -> Result<ScalingTransform> {
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "margin must be finite and nonnegative, got {margin}"
        )));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        if !v.is_finite() {
            return Err(Error::Degenerate(format!("non-finite value {v}")));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if values.len() < 2 || hi <= lo {
        return Err(Error::Degenerate(
            "need at least two distinct values".to_string(),
        ));
    }
    let range = hi - lo;
    ScalingTransform::new(lo - margin * range, hi + margin * range)
}

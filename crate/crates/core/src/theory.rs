//! Closed-form rates for the Sobolev class `{f : sum (pi j)^{2k} theta_j^2 <= Q}`.
//!
//! * minimax lower bound `N^{-2k/(2k+1)} P(k, Q, b)` with
//!   `P = Q^{1/(2k+1)} (k / (pi (k+1) b))^{2k/(2k+1)}`;
//! * MISE-optimal truncation `J ≈ N^{1/(2k+1)} H1(k, b, c)`;
//! * minimal MISE of the truncated estimator `≈ N^{-2k/(2k+1)} H2(k, b, c)`,
//!
//! where `H1 = b^{-1/(2k+1)} r^{-1/(2k+1)}`, `H2 = b^{2k/(2k+1)} r^{-1/(2k+1)}`
//! and `r = (2k+1) / ((2k+2) c)`. Both `H` factors carry the same exponent on
//! `r`. The survey setting has `b = 2`; `b = 1` recovers the i.i.d. bound.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variance constant under the combined design-model inference.
pub const SURVEY_B: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevParams {
    pub k: f64,
    pub q: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for SobolevParams {
    fn default() -> Self {
        Self {
            k: 1.0,
            q: 1.0,
            b: SURVEY_B,
            c: 1.0,
        }
    }
}

impl SobolevParams {
    pub fn new(k: f64, q: f64, b: f64, c: f64) -> Result<Self> {
        let p = Self { k, q, b, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.k, self.q, self.b, self.c].iter().all(|v| v.is_finite());
        if !finite || self.k < 1.0 || self.q <= 0.0 || self.b <= 0.0 || self.c <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "need k >= 1 and Q, b, c > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    fn rate(&self) -> f64 {
        2.0 * self.k / (2.0 * self.k + 1.0)
    }

    fn tail_ratio(&self) -> f64 {
        (2.0 * self.k + 1.0) / ((2.0 * self.k + 2.0) * self.c)
    }

    /// `P(k, Q, b)`.
    pub fn minimax_constant(&self) -> f64 {
        let e = 1.0 / (2.0 * self.k + 1.0);
        self.q.powf(e) * (self.k / (PI * (self.k + 1.0) * self.b)).powf(self.rate())
    }

    pub fn h1(&self) -> f64 {
        let e = -1.0 / (2.0 * self.k + 1.0);
        self.b.powf(e) * self.tail_ratio().powf(e)
    }

    pub fn h2(&self) -> f64 {
        let e = -1.0 / (2.0 * self.k + 1.0);
        self.b.powf(self.rate()) * self.tail_ratio().powf(e)
    }
}

fn check_n(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    Ok(n as f64)
}

/// `N^{-2k/(2k+1)} P(k, Q, b)`.
pub fn minimax_lower_bound(p: &SobolevParams, population_size: u64) -> Result<f64> {
    p.validate()?;
    let n = check_n(population_size)?;
    Ok(n.powf(-p.rate()) * p.minimax_constant())
}

/// `N^{1/(2k+1)} H1(k, b, c)`.
pub fn optimal_j_theory(p: &SobolevParams, population_size: u64) -> Result<f64> {
    p.validate()?;
    let n = check_n(population_size)?;
    Ok(n.powf(1.0 / (2.0 * p.k + 1.0)) * p.h1())
}

/// `N^{-2k/(2k+1)} H2(k, b, c)`.
pub fn mise_min_theory(p: &SobolevParams, population_size: u64) -> Result<f64> {
    p.validate()?;
    let n = check_n(population_size)?;
    Ok(n.powf(-p.rate()) * p.h2())
}

//! Data-driven choice of the truncation point.

use super::{b_hat, b_hat_iid, FourierCoefficients};
use crate::error::{Error, Result};

/// Upper bound `floor(4 + ln(n) / 2)` for the cutoff search.
pub fn search_cap(n: usize) -> usize {
    (4.0 + 0.5 * (n.max(1) as f64).ln()).floor() as usize
}

/// Minimises the prefix sums `sum_{j<=J} (penalty(j) - theta_j^2)` over
/// `J in 0..=cap`. The empty prefix scores 0 and ties go to the smaller `J`.
pub fn select_cutoff(theta: &[f64], cap: usize, penalty: impl Fn(usize) -> Result<f64>) -> Result<usize> {
    let mut best = 0;
    let mut best_score = 0.0;
    let mut score = 0.0;
    for j in 1..=cap {
        let t = *theta.get(j).ok_or(Error::Index {
            index: j,
            max: theta.len().saturating_sub(1),
        })?;
        score += penalty(j)? - t * t;
        if score < best_score {
            best_score = score;
            best = j;
        }
    }
    Ok(best)
}

fn check_range(coeffs: &FourierCoefficients, cap: usize) -> Result<()> {
    if coeffs.j_max() < 2 * cap {
        return Err(Error::Index {
            index: 2 * cap,
            max: coeffs.j_max(),
        });
    }
    Ok(())
}

/// `J_hat` for the Horvitz-Thompson estimator, penalty `2 b_j / N`.
pub fn select_j(coeffs: &FourierCoefficients) -> Result<usize> {
    let cap = search_cap(coeffs.sample_size);
    check_range(coeffs, cap)?;
    let inv_n = 1.0 / coeffs.population_size as f64;
    select_cutoff(&coeffs.theta, cap, |j| Ok(2.0 * inv_n * b_hat(coeffs, j)?))
}

/// `J_hat` for the i.i.d. baseline, penalty `2 (1 + theta_{2j}/sqrt(2) - theta_j^2) / n`.
pub fn select_j_iid(coeffs: &FourierCoefficients) -> Result<usize> {
    let cap = search_cap(coeffs.sample_size);
    check_range(coeffs, cap)?;
    let inv_n = 1.0 / coeffs.sample_size as f64;
    select_cutoff(&coeffs.theta, cap, |j| Ok(2.0 * inv_n * b_hat_iid(coeffs, j)?))
}

//! Horvitz-Thompson cosine-series density estimation.
//!
//! Coefficients are `theta_j = N^-1 * sum_i d_i phi_j(u_i)` over the scaled
//! sample values `u_i`. An estimate is `f(u) = 1 + sum_{j=1}^J w_j theta_j phi_j(u)`
//! with shrinkage weights `w_j` in `[0, 1]`. The data-driven rules pick `J` by
//! minimising `sum_{j<=J} (2 b_j / N - theta_j^2)` over `J <= floor(4 + ln(n)/2)`,
//! where `b_j = 2 + sqrt(2) theta_{2j} + (delta - 1) theta_j^2`.
//!
//! The variance formulas follow the per-frequency sums exactly; cross-frequency
//! covariance terms are not included.

mod projection;
mod selection;

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::basis::{check_unit, phi_unchecked, ScalingTransform};
use crate::design::WeightedSample;
use crate::error::{Error, Result};

pub use projection::{project_to_density, project_values, trapezoid, ValidDensity, MIN_GRID};
pub use selection::{search_cap, select_cutoff, select_j, select_j_iid};

/// Which rule produced the shrinkage weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Oracle,
    Truncated,
    Smoothed,
    IidBaseline,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Oracle => "oracle",
            Method::Truncated => "truncated",
            Method::Smoothed => "smoothed",
            Method::IidBaseline => "iid-baseline",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Method::Oracle),
            "truncated" => Ok(Method::Truncated),
            "smoothed" => Ok(Method::Smoothed),
            "iid-baseline" | "iid" => Ok(Method::IidBaseline),
            other => Err(Error::Parse(format!("unknown method '{other}'"))),
        }
    }
}

/// Estimated Fourier coefficients `theta_0..=theta_{j_max}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCoefficients {
    pub theta: Vec<f64>,
    pub population_size: usize,
    pub sample_size: usize,
    pub delta: f64,
}

impl FourierCoefficients {
    pub fn new(theta: Vec<f64>, population_size: usize, sample_size: usize, delta: f64) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidArgument("need at least theta_0".into()));
        }
        if population_size == 0 || sample_size == 0 {
            return Err(Error::InvalidArgument("N and n must be positive".into()));
        }
        if let Some(t) = theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite coefficient {t}")));
        }
        if !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite delta {delta}")));
        }
        Ok(Self {
            theta,
            population_size,
            sample_size,
            delta,
        })
    }

    pub fn j_max(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn get(&self, j: usize) -> Result<f64> {
        self.theta.get(j).copied().ok_or(Error::Index {
            index: j,
            max: self.j_max(),
        })
    }

    /// `theta_0 - 1`; zero when the weights sum to `N`.
    pub fn calibration_gap(&self) -> f64 {
        self.theta[0] - 1.0
    }

    fn inv_n(&self) -> f64 {
        1.0 / self.population_size as f64
    }
}

/// Scaled values sorted with their weights, so that sums do not depend on the
/// order the sample arrived in.
fn scaled_sorted(sample: &WeightedSample, scaling: &ScalingTransform) -> Result<Vec<(f64, f64)>> {
    let mut pairs = Vec::with_capacity(sample.len());
    for (&x, &d) in sample.values.iter().zip(&sample.weights) {
        let u = scaling.forward(x);
        check_unit(u)?;
        pairs.push((u.clamp(0.0, 1.0), d));
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    Ok(pairs)
}

fn series_sums(pairs: &[(f64, f64)], j_max: usize, unit_weights: bool) -> Vec<f64> {
    let mut sums = vec![0.0; j_max + 1];
    for &(u, d) in pairs {
        let d = if unit_weights { 1.0 } else { d };
        for (j, s) in sums.iter_mut().enumerate() {
            *s += d * phi_unchecked(j, u);
        }
    }
    sums
}

/// Horvitz-Thompson coefficients `theta_0..=theta_{j_max}`.
pub fn ht_coefficients(
    sample: &WeightedSample,
    scaling: &ScalingTransform,
    j_max: usize,
) -> Result<FourierCoefficients> {
    if j_max == 0 {
        return Err(Error::InvalidArgument("j_max must be positive".into()));
    }
    let pairs = scaled_sorted(sample, scaling)?;
    let inv_n = 1.0 / sample.population_size as f64;
    let theta = series_sums(&pairs, j_max, false)
        .into_iter()
        .map(|s| s * inv_n)
        .collect();
    FourierCoefficients::new(theta, sample.population_size, sample.len(), sample.delta)
}

/// Unweighted sample means `n^-1 * sum_i phi_j(u_i)`, ignoring the design.
/// The returned coefficients carry `population_size = n`.
pub fn iid_coefficients(
    sample: &WeightedSample,
    scaling: &ScalingTransform,
    j_max: usize,
) -> Result<FourierCoefficients> {
    if j_max == 0 {
        return Err(Error::InvalidArgument("j_max must be positive".into()));
    }
    let pairs = scaled_sorted(sample, scaling)?;
    let inv_n = 1.0 / sample.len() as f64;
    let theta = series_sums(&pairs, j_max, true)
        .into_iter()
        .map(|s| s * inv_n)
        .collect();
    FourierCoefficients::new(theta, sample.len(), sample.len(), sample.delta)
}

/// Finite-population coefficients `theta_{U,j}` (every unit, unit weight).
pub fn population_coefficients(
    population: &[f64],
    scaling: &ScalingTransform,
    j_max: usize,
) -> Result<FourierCoefficients> {
    let sample = WeightedSample::new(
        population.to_vec(),
        vec![1.0; population.len()],
        population.len(),
        -1.0 / population.len() as f64,
    )?;
    ht_coefficients(&sample, scaling, j_max)
}

/// Plug-in `b_j = 2 + sqrt(2) theta_{2j} + (delta - 1) theta_j^2`.
pub fn b_hat(coeffs: &FourierCoefficients, j: usize) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidArgument("b_j is defined for j >= 1".into()));
    }
    let t2 = coeffs.get(2 * j)?;
    let t = coeffs.theta[j];
    Ok(2.0 + SQRT_2 * t2 + (coeffs.delta - 1.0) * t * t)
}

/// Variance constant for i.i.d. data: `1 + theta_{2j}/sqrt(2) - theta_j^2`.
pub fn b_hat_iid(coeffs: &FourierCoefficients, j: usize) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidArgument("b_j is defined for j >= 1".into()));
    }
    let t2 = coeffs.get(2 * j)?;
    let t = coeffs.theta[j];
    Ok(1.0 + FRAC_1_SQRT_2 * t2 - t * t)
}

/// A series estimate with its shrinkage weights. Weights are stored for
/// `j = 1..=J`; every weight beyond the cutoff is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub coeffs: FourierCoefficients,
    weights: Vec<f64>,
    pub scaling: ScalingTransform,
    pub method: Method,
}

impl DensityEstimate {
    /// Builds an estimate from explicit weights `w_1, w_2, ...`. Trailing zero
    /// weights are dropped so that `cutoff()` is the last retained frequency.
    pub fn with_weights(
        coeffs: FourierCoefficients,
        mut weights: Vec<f64>,
        scaling: ScalingTransform,
        method: Method,
    ) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidArgument(format!("shrinkage weight {w} outside [0, 1]")));
        }
        while weights.last() == Some(&0.0) {
            weights.pop();
        }
        if weights.len() > coeffs.j_max() {
            return Err(Error::Index {
                index: weights.len(),
                max: coeffs.j_max(),
            });
        }
        Ok(Self {
            coeffs,
            weights,
            scaling,
            method,
        })
    }

    /// Oracle estimate with user-fixed weights.
    pub fn oracle(coeffs: FourierCoefficients, weights: Vec<f64>, scaling: ScalingTransform) -> Result<Self> {
        Self::with_weights(coeffs, weights, scaling, Method::Oracle)
    }

    /// Like [`with_weights`](Self::with_weights) but keeps trailing zero
    /// weights, so the cutoff is `weights.len()`.
    pub fn from_parts(
        coeffs: FourierCoefficients,
        weights: Vec<f64>,
        scaling: ScalingTransform,
        method: Method,
    ) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidArgument(format!("shrinkage weight {w} outside [0, 1]")));
        }
        if weights.len() > coeffs.j_max() {
            return Err(Error::Index {
                index: weights.len(),
                max: coeffs.j_max(),
            });
        }
        Ok(Self::with_cutoff(coeffs, weights, scaling, method))
    }

    /// Builds an estimate keeping `cutoff` as J even if the final weights are
    /// zero (the smoothed rule can zero out retained terms).
    fn with_cutoff(
        coeffs: FourierCoefficients,
        weights: Vec<f64>,
        scaling: ScalingTransform,
        method: Method,
    ) -> Self {
        debug_assert!(weights.iter().all(|w| (0.0..=1.0).contains(w)));
        Self {
            coeffs,
            weights,
            scaling,
            method,
        }
    }

    /// Truncation point `J`.
    pub fn cutoff(&self) -> usize {
        self.weights.len()
    }

    /// Weights `w_1..=w_J`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `w_j` for any `j >= 1` (zero past the cutoff).
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 {
            1.0
        } else {
            self.weights.get(j - 1).copied().unwrap_or(0.0)
        }
    }

    /// `1 + sum w_j theta_j phi_j(u)`. May be negative.
    pub fn evaluate(&self, u: f64) -> Result<f64> {
        check_unit(u)?;
        Ok(self.evaluate_unchecked(u))
    }

    pub(crate) fn evaluate_unchecked(&self, u: f64) -> f64 {
        1.0 + self
            .weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * self.coeffs.theta[k + 1] * phi_unchecked(k + 1, u))
            .sum::<f64>()
    }

    /// Antiderivative of the unprojected estimate, `F(0) = 0`.
    pub(crate) fn antiderivative(&self, u: f64) -> f64 {
        use std::f64::consts::PI;
        u + self
            .weights
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let j = (k + 1) as f64;
                w * self.coeffs.theta[k + 1] * SQRT_2 * (PI * j * u).sin() / (PI * j)
            })
            .sum::<f64>()
    }

    /// Evaluates on the original data scale, `f_x(x) = f(u) / (b - a)`.
    pub fn evaluate_original(&self, x: f64) -> Result<f64> {
        Ok(self.evaluate(self.scaling.forward(x))? / self.scaling.width())
    }

    fn variance_sum(&self, u: f64, per_j: impl Fn(usize) -> Result<f64>) -> Result<f64> {
        check_unit(u)?;
        let mut total = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            let j = k + 1;
            let shape = 1.0 + FRAC_1_SQRT_2 * phi_unchecked(2 * j, u);
            total += w * w * per_j(j)? * shape;
        }
        Ok(total * self.coeffs.inv_n())
    }

    /// Plug-in design variance
    /// `N^-1 sum_j w_j^2 (1 + theta_{2j}/sqrt(2) + delta theta_j^2)(1 + phi_{2j}(u)/sqrt(2))`.
    pub fn design_variance(&self, u: f64) -> Result<f64> {
        let c = &self.coeffs;
        self.variance_sum(u, |j| {
            let t2 = c.get(2 * j)?;
            Ok(1.0 + FRAC_1_SQRT_2 * t2 + c.delta * c.theta[j] * c.theta[j])
        })
    }

    /// Plug-in combined (design plus model) variance
    /// `N^-1 sum_j w_j^2 b_j (1 + phi_{2j}(u)/sqrt(2))`.
    pub fn combined_variance(&self, u: f64) -> Result<f64> {
        self.variance_sum(u, |j| b_hat(&self.coeffs, j))
    }

    /// Standard error for pointwise bands, `sqrt(max(0, design_variance))`.
    pub fn design_sd(&self, u: f64) -> Result<f64> {
        Ok(self.design_variance(u)?.max(0.0).sqrt())
    }
}

/// Free-function form of [`DensityEstimate::design_variance`].
pub fn design_variance_hat(est: &DensityEstimate, u: f64) -> Result<f64> {
    est.design_variance(u)
}

/// Free-function form of [`DensityEstimate::combined_variance`].
pub fn combined_variance(est: &DensityEstimate, u: f64) -> Result<f64> {
    est.combined_variance(u)
}

/// Plug-in optimal shrinkage `(theta^2 - b/N) / theta^2`, clipped to `[0, 1]`.
pub fn smoothing_weight(theta: f64, b: f64, population_size: usize) -> f64 {
    let t2 = theta * theta;
    if t2 == 0.0 {
        return 0.0;
    }
    ((t2 - b / population_size as f64) / t2).clamp(0.0, 1.0)
}

/// Truncated estimator: `w_j = 1` for `j <= J_hat`.
pub fn truncated_estimator(sample: &WeightedSample, scaling: &ScalingTransform) -> Result<DensityEstimate> {
    let coeffs = ht_coefficients(sample, scaling, 2 * search_cap(sample.len()))?;
    let cutoff = select_j(&coeffs)?;
    Ok(DensityEstimate::with_cutoff(
        coeffs,
        vec![1.0; cutoff],
        *scaling,
        Method::Truncated,
    ))
}

/// Smoothed truncated estimator: `w_j = clip(w*_j) for j <= J_hat`.
pub fn smoothed_estimator(sample: &WeightedSample, scaling: &ScalingTransform) -> Result<DensityEstimate> {
    let coeffs = ht_coefficients(sample, scaling, 2 * search_cap(sample.len()))?;
    let cutoff = select_j(&coeffs)?;
    let weights = (1..=cutoff)
        .map(|j| Ok(smoothing_weight(coeffs.theta[j], b_hat(&coeffs, j)?, coeffs.population_size)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityEstimate::with_cutoff(coeffs, weights, *scaling, Method::Smoothed))
}

/// Series estimator that ignores weights, population size and design.
pub fn iid_baseline_estimator(sample: &WeightedSample, scaling: &ScalingTransform) -> Result<DensityEstimate> {
    let coeffs = iid_coefficients(sample, scaling, 2 * search_cap(sample.len()))?;
    let cutoff = select_j_iid(&coeffs)?;
    Ok(DensityEstimate::with_cutoff(
        coeffs,
        vec![1.0; cutoff],
        *scaling,
        Method::IidBaseline,
    ))
}

/// Fits one of the data-driven estimators.
pub fn fit(sample: &WeightedSample, scaling: &ScalingTransform, method: Method) -> Result<DensityEstimate> {
    match method {
        Method::Truncated => truncated_estimator(sample, scaling),
        Method::Smoothed => smoothed_estimator(sample, scaling),
        Method::IidBaseline => iid_baseline_estimator(sample, scaling),
        Method::Oracle => Err(Error::InvalidArgument(
            "the oracle estimator needs explicit weights; use DensityEstimate::oracle".into(),
        )),
    }
}

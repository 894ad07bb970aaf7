//! Projection of a series estimate onto nonnegative densities:
//! `f_tilde(u) = max(0, f(u) - c)` with `c` chosen so `f_tilde` integrates to 1.
//!
//! The mass `m(c) = ∫ max(0, f - c)` is computed from the closed-form
//! antiderivative of the cosine series over the intervals where `f > c`, with
//! the interval endpoints located by bracketing on a fine grid and refined by
//! regula falsi. `m` is continuous, convex and nonincreasing in `c`, so a
//! Newton step safeguarded by bisection converges from the left.

use super::DensityEstimate;
use crate::error::{Error, Result};

/// Smallest accepted evaluation grid.
pub const MIN_GRID: usize = 256;
const BRACKET_POINTS: usize = 2048;

const MASS_TOL: f64 = 1e-13;
const MAX_ITER: usize = 200;

/// A projected estimate together with its values on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidDensity {
    pub base: DensityEstimate,
    shift: f64,
    values: Vec<f64>,
}

impl ValidDensity {
    /// The constant `c` subtracted before clipping at zero.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    /// `u_i = i / (G - 1)`.
    pub fn grid_point(&self, i: usize) -> f64 {
        i as f64 / (self.values.len() - 1) as f64
    }

    /// `f_tilde(u_i)` for every grid point.
    pub fn grid_values(&self) -> &[f64] {
        &self.values
    }

    pub fn evaluate(&self, u: f64) -> Result<f64> {
        Ok((self.base.evaluate(u)? - self.shift).max(0.0))
    }

    /// `∫ f_tilde` over `[0, 1]` from the closed-form antiderivative.
    pub fn integral(&self) -> f64 {
        Profile::new(&self.base).mass(self.shift).0
    }

    /// Trapezoid integral of the grid values.
    pub fn trapezoid_integral(&self) -> f64 {
        trapezoid(&self.values)
    }
}

/// Trapezoid rule on a uniform grid over `[0, 1]`.
pub fn trapezoid(values: &[f64]) -> f64 {
    let g = values.len();
    if g < 2 {
        return 0.0;
    }
    let h = 1.0 / (g - 1) as f64;
    let inner: f64 = values[1..g - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[g - 1]))
}

struct Profile<'a> {
    est: &'a DensityEstimate,
    u: Vec<f64>,
    f: Vec<f64>,
}

impl<'a> Profile<'a> {
    fn new(est: &'a DensityEstimate) -> Self {
        // enough points per oscillation of the highest retained frequency;
        // independent of the output grid so the shift is too
        let points = BRACKET_POINTS.max(64 * (est.cutoff() + 1));
        let u: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
        let f = u.iter().map(|&x| est.evaluate_unchecked(x)).collect();
        Self { est, u, f }
    }

    /// Root of `f - c` in `[lo, hi]` given opposite signs at the ends.
    fn root(&self, c: f64, mut lo: f64, mut hi: f64, mut g_lo: f64, mut g_hi: f64) -> f64 {
        let mut side = 0i8;
        for _ in 0..100 {
            let mid = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
            let mid = if mid > lo && mid < hi { mid } else { 0.5 * (lo + hi) };
            let g = self.est.evaluate_unchecked(mid) - c;
            if g == 0.0 || hi - lo < 1e-15 {
                return mid;
            }
            if (g > 0.0) == (g_lo > 0.0) {
                lo = mid;
                g_lo = g;
                if side == -1 {
                    g_hi *= 0.5;
                }
                side = -1;
            } else {
                hi = mid;
                g_hi = g;
                if side == 1 {
                    g_lo *= 0.5;
                }
                side = 1;
            }
        }
        0.5 * (lo + hi)
    }

    /// Returns `(∫ max(0, f - c), |{f > c}|)`.
    fn mass(&self, c: f64) -> (f64, f64) {
        let mut mass = 0.0;
        let mut measure = 0.0;
        let mut close = |start: f64, end: f64| {
            mass += self.est.antiderivative(end) - self.est.antiderivative(start) - c * (end - start);
            measure += end - start;
        };
        let mut start = (self.f[0] - c > 0.0).then_some(0.0);
        for k in 0..self.u.len() - 1 {
            let (g0, g1) = (self.f[k] - c, self.f[k + 1] - c);
            if (g0 > 0.0) != (g1 > 0.0) {
                let r = self.root(c, self.u[k], self.u[k + 1], g0, g1);
                match start.take() {
                    Some(s) => close(s, r),
                    None => start = Some(r),
                }
            }
        }
        if let Some(s) = start {
            close(s, 1.0);
        }
        (mass, measure)
    }
}

/// Projects `est` onto the nonnegative densities and tabulates it on a
/// uniform `grid`-point mesh.
pub fn project_to_density(est: &DensityEstimate, grid: usize) -> Result<ValidDensity> {
    if grid < MIN_GRID {
        return Err(Error::InvalidArgument(format!(
            "grid size {grid} below the minimum {MIN_GRID}"
        )));
    }
    let profile = Profile::new(est);
    let f_min = profile.f.iter().cloned().fold(f64::INFINITY, f64::min);
    let f_max = profile.f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let mut lo = f_min.min(0.0);
    let mut hi = f_max;
    let (m_lo, _) = profile.mass(lo);
    if m_lo < 1.0 - MASS_TOL {
        return Err(Error::Projection { mass: m_lo });
    }

    // the projection is the identity when the estimate is already nonnegative
    let (m0, _) = profile.mass(0.0);
    let shift = if f_min >= 0.0 && (m0 - 1.0).abs() <= MASS_TOL {
        0.0
    } else {
        let mut c = lo.max(0.0);
        for _ in 0..MAX_ITER {
            let (m, measure) = profile.mass(c);
            let excess = m - 1.0;
            if excess.abs() <= MASS_TOL {
                break;
            }
            if excess > 0.0 {
                lo = c;
            } else {
                hi = c;
            }
            let newton = if measure > 0.0 { c + excess / measure } else { f64::NAN };
            c = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 {
                break;
            }
        }
        c
    };

    let values = (0..grid)
        .map(|i| {
            let u = i as f64 / (grid - 1) as f64;
            (est.evaluate_unchecked(u) - shift).max(0.0)
        })
        .collect();
    Ok(ValidDensity {
        base: est.clone(),
        shift,
        values,
    })
}

/// Grid-only projection of arbitrary values on a uniform mesh over `[0, 1]`:
/// finds `c` with `trapezoid(max(0, v - c)) = 1` by bisection.
pub fn project_values(values: &[f64]) -> Result<(f64, Vec<f64>)> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument("need at least two grid values".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite grid value {v}")));
    }
    let mass = |c: f64| trapezoid(&values.iter().map(|v| (v - c).max(0.0)).collect::<Vec<_>>());
    let v_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let v_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (v_min.min(0.0), v_max);
    let m_lo = mass(lo);
    if m_lo < 1.0 - 1e-9 {
        return Err(Error::Projection { mass: m_lo });
    }
    let shift = if v_min >= 0.0 && (mass(0.0) - 1.0).abs() <= 1e-12 {
        0.0
    } else {
        for _ in 0..MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mass(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    Ok((shift, values.iter().map(|v| (v - shift).max(0.0)).collect()))
}

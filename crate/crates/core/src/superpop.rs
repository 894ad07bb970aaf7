//! Normal-mixture superpopulations.
//!
//! A component written `N(mu, v)` uses `v` as the variance. Configurations can
//! opt into reading the second parameter as a standard deviation instead via
//! [`Spread::StdDev`].

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::ScalingTransform;
use crate::error::{Error, Result};

/// How the second parameter of a component is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spread {
    #[default]
    Variance,
    StdDev,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SuperpopulationDef", into = "SuperpopulationDef")]
pub struct Superpopulation {
    components: Vec<Component>,
}

/// Serialized form: `{"components": [[w, mean, spread], ...], "spread": "variance"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SuperpopulationDef {
    components: Vec<(f64, f64, f64)>,
    #[serde(default)]
    spread: Spread,
}

impl TryFrom<SuperpopulationDef> for Superpopulation {
    type Error = Error;

    fn try_from(def: SuperpopulationDef) -> Result<Self> {
        Superpopulation::from_triples(&def.components, def.spread)
    }
}

impl From<Superpopulation> for SuperpopulationDef {
    fn from(sp: Superpopulation) -> Self {
        SuperpopulationDef {
            components: sp
                .components
                .iter()
                .map(|c| (c.weight, c.mean, c.variance))
                .collect(),
            spread: Spread::Variance,
        }
    }
}

impl Superpopulation {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        for c in &components {
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "component weight {} outside (0, 1]",
                    c.weight
                )));
            }
            if !(c.variance > 0.0 && c.variance.is_finite() && c.mean.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "component N({}, {}) is invalid",
                    c.mean, c.variance
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { components })
    }

    /// Builds a mixture from `(weight, mean, spread)` triples.
    pub fn from_triples(triples: &[(f64, f64, f64)], spread: Spread) -> Result<Self> {
        Self::new(
            triples
                .iter()
                .map(|&(weight, mean, s)| Component {
                    weight,
                    mean,
                    variance: match spread {
                        Spread::Variance => s,
                        Spread::StdDev => s * s,
                    },
                })
                .collect(),
        )
    }

    pub fn normal(mean: f64, variance: f64) -> Result<Self> {
        Self::from_triples(&[(1.0, mean, variance)], Spread::Variance)
    }

    pub fn standard_normal() -> Self {
        Self::normal(0.0, 1.0).expect("valid")
    }

    /// `0.4 N(-1, 0.5) + 0.6 N(1, 1)`.
    pub fn bimodal() -> Self {
        Self::from_triples(&[(0.4, -1.0, 0.5), (0.6, 1.0, 1.0)], Spread::Variance).expect("valid")
    }

    /// `0.3 N(-1, 0.15) + 0.4 N(0, 0.15) + 0.3 N(1, 0.15)`.
    pub fn trimodal() -> Self {
        Self::from_triples(
            &[(0.3, -1.0, 0.15), (0.4, 0.0, 0.15), (0.3, 1.0, 0.15)],
            Spread::Variance,
        )
        .expect("valid")
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    pub fn density(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let z = (x - c.mean) / c.variance.sqrt();
                c.weight * (-0.5 * z * z).exp() / (2.0 * PI * c.variance).sqrt()
            })
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let z = (x - c.mean) / (c.variance.sqrt() * SQRT_2);
                c.weight * 0.5 * libm::erfc(-z)
            })
            .sum()
    }

    /// Probability mass in `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        self.cdf(b) - self.cdf(a)
    }

    /// One draw: pick a component by weight, then a Gaussian.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let comp = if self.components.len() == 1 {
            &self.components[0]
        } else {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = self.components.last().expect("nonempty");
            for c in &self.components {
                acc += c.weight;
                if u < acc {
                    chosen = c;
                    break;
                }
            }
            chosen
        };
        let z: f64 = StandardNormal.sample(rng);
        comp.mean + comp.variance.sqrt() * z
    }

    /// `N` independent draws forming a finite population.
    pub fn sample_population<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Vec<f64> {
        (0..size).map(|_| self.sample(rng)).collect()
    }

    /// Density of the scaled variable `u = t.forward(x)`:
    /// `(b - a) * f(a + (b - a) u)`.
    pub fn density_on_unit(&self, t: &ScalingTransform, u: f64) -> f64 {
        t.width() * self.density(t.inverse(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> f64 {
        let h = (hi - lo) / (points - 1) as f64;
        let inner: f64 = (1..points - 1).map(|i| f(lo + i as f64 * h)).sum();
        h * (inner + 0.5 * (f(lo) + f(hi)))
    }

    #[test]
    fn rejects_bad_mixtures() {
        assert!(Superpopulation::from_triples(&[(0.5, 0.0, 1.0)], Spread::Variance).is_err());
        assert!(Superpopulation::from_triples(&[(1.0, 0.0, 0.0)], Spread::Variance).is_err());
        assert!(Superpopulation::from_triples(&[(1.2, 0.0, 1.0), (-0.2, 0.0, 1.0)], Spread::Variance).is_err());
        assert!(Superpopulation::new(vec![]).is_err());
    }

    #[test]
    fn densities_integrate_to_one() {
        for sp in [
            Superpopulation::standard_normal(),
            Superpopulation::bimodal(),
            Superpopulation::trimodal(),
        ] {
            let sd = sp
                .components()
                .iter()
                .map(|c| c.variance + c.mean * c.mean)
                .sum::<f64>()
                .sqrt();
            let total = trapezoid(|x| sp.density(x), -10.0 * sd - 2.0, 10.0 * sd + 2.0, 200_001);
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn stddev_reading() {
        let a = Superpopulation::from_triples(&[(1.0, 0.0, 0.5)], Spread::StdDev).unwrap();
        assert_abs_diff_eq!(a.components()[0].variance, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn standard_normal_sample_mean() {
        let sp = Superpopulation::standard_normal();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let xs = sp.sample_population(100_000, &mut rng);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 4.0 / (100_000f64).sqrt());
    }

    #[test]
    fn bimodal_sample_mean() {
        let sp = Superpopulation::bimodal();
        assert_abs_diff_eq!(sp.mean(), 0.2, epsilon = 1e-15);
        // Var = E[v] + Var(mu) = 0.4*0.5 + 0.6*1 + (0.4*1 + 0.6*1 - 0.2^2)
        let var = 0.4 * 0.5 + 0.6 * 1.0 + (0.4 + 0.6 - 0.04);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let xs = sp.sample_population(100_000, &mut rng);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let se = (var / 100_000f64).sqrt();
        assert!((mean - 0.2).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn single_component_mixture_is_gaussian() {
        let sp = Superpopulation::from_triples(&[(1.0, 0.0, 1.0)], Spread::Variance).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut xs = sp.sample_population(100_000, &mut rng);
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let normal = Superpopulation::standard_normal();
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = normal.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS statistic {ks}");
    }

    #[test]
    fn unit_density_examples() {
        let sp = Superpopulation::standard_normal();
        let t = ScalingTransform::new(-1.0, 1.0).unwrap();
        assert_abs_diff_eq!(sp.density_on_unit(&t, 0.5), 2.0 / (2.0 * PI).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(sp.density_on_unit(&t, 0.5), 0.79788, epsilon = 1e-5);
        for u in [0.0, 0.1, 0.33, 0.49] {
            assert_abs_diff_eq!(sp.density_on_unit(&t, u), sp.density_on_unit(&t, 1.0 - u), epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_density_mass_matches_cdf() {
        let sp = Superpopulation::bimodal();
        let t = ScalingTransform::new(-2.5, 3.0).unwrap();
        let integral = trapezoid(|u| sp.density_on_unit(&t, u), 0.0, 1.0, 10_001);
        assert_abs_diff_eq!(integral, sp.mass_between(t.a, t.b), epsilon = 1e-6);
    }

    #[test]
    fn population_scaling_outside_mass_follows_spacings() {
        // F(min) + 1 - F(max) is the sum of two uniform spacings, so
        // P(outside <= t) = 1 - (1-t)^N - N t (1-t)^(N-1), with mean 2/(N+1).
        let big_n = 1000usize;
        let reps = 1000;
        for sp in [Superpopulation::bimodal(), Superpopulation::trimodal()] {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let mut outside = Vec::with_capacity(reps);
            for _ in 0..reps {
                let pop = sp.sample_population(big_n, &mut rng);
                let t = crate::basis::fit_scaling(&pop, 0.0).unwrap();
                assert!((0..=100).all(|i| sp.density_on_unit(&t, i as f64 / 100.0) >= 0.0));
                outside.push(1.0 - sp.mass_between(t.a, t.b));
            }
            let mean = outside.iter().sum::<f64>() / reps as f64;
            let expected_mean = 2.0 / (big_n as f64 + 1.0);
            // sd of the spacing sum is about sqrt(2)/N
            assert!((mean - expected_mean).abs() < 4.0 * 2f64.sqrt() / big_n as f64 / (reps as f64).sqrt());

            let t: f64 = 1e-3;
            let p = 1.0 - (1.0 - t).powi(big_n as i32) - big_n as f64 * t * (1.0 - t).powi(big_n as i32 - 1);
            let hit = outside.iter().filter(|&&m| m <= t).count() as f64 / reps as f64;
            assert!((hit - p).abs() < 4.0 * (p * (1.0 - p) / reps as f64).sqrt());
        }
    }

    #[test]
    fn serde_roundtrip() {
        let json = r#"{"components": [[0.4, -1.0, 0.5], [0.6, 1.0, 1.0]]}"#;
        let sp: Superpopulation = serde_json::from_str(json).unwrap();
        assert_eq!(sp, Superpopulation::bimodal());
        let bad = r#"{"components": [[0.4, -1.0, 0.5]]}"#;
        assert!(serde_json::from_str::<Superpopulation>(bad).is_err());
        let sd = r#"{"components": [[1.0, 0.0, 2.0]], "spread": "std-dev"}"#;
        let sp: Superpopulation = serde_json::from_str(sd).unwrap();
        assert_eq!(sp.components()[0].variance, 4.0);
    }
}

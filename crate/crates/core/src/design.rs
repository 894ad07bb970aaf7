//! Sampling designs over a finite population.
//!
//! A [`DesignSpec`] describes how a sample is taken; [`PreparedDesign`] binds
//! it to a concrete population (first-order inclusion probabilities, strata
//! and the design quantity `delta`) so that many replicate samples can be
//! drawn cheaply.
//!
//! `delta = N^-2 * sum_{i != k} pi_ik / (pi_i pi_k) - 1`. Closed forms:
//!
//! | design                  | delta                         |
//! |-------------------------|-------------------------------|
//! | SRSWOR                  | `-1/n`                        |
//! | Poisson                 | `-1/N`                        |
//! | stratified SRSWOR       | `-(sum_h N_h^2 / n_h) / N^2`  |
//! | systematic PPS          | `-1/n` (approximation)        |
//! | stratified oversample   | `-1 / sum_i pi_i` (approx.)   |
//!
//! The systematic and oversample designs have no tractable `pi_ik`, so their
//! value is an approximation; `delta_override` replaces it for any design.
//!
//! The informative rule `pi_i ∝ log(max(x_i + 5, 1))` is scaled so the
//! probabilities sum to `n`. Any `pi_i` pushed above 1 is clipped to 1 and the
//! rest are rescaled to the remaining budget, repeating until nothing exceeds
//! 1. Zero size measures are floored at [`SIZE_FLOOR`].

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to zero size measures under the informative rule.
pub const SIZE_FLOOR: f64 = 1e-12;

/// Redraw budget for Poisson samples that come up empty.
pub const MAX_EMPTY_REDRAWS: u32 = 1000;

/// How first-order inclusion probabilities relate to the unit values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InclusionRule {
    /// `pi_i = n / N`.
    Equal,
    /// `pi_i ∝ log(max(x_i + 5, 1))`.
    LogShift,
}

impl InclusionRule {
    pub fn size_measure(&self, x: f64) -> f64 {
        match self {
            InclusionRule::Equal => 1.0,
            InclusionRule::LogShift => (x + 5.0).max(1.0).ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DesignKind {
    Srswor,
    Poisson {
        rule: InclusionRule,
    },
    SystematicPps {
        rule: InclusionRule,
    },
    /// Proportional allocation over strata cut at `boundaries` (ascending).
    /// A unit with value `x` belongs to stratum `#{b in boundaries : b <= x}`.
    Stratified {
        boundaries: Vec<f64>,
    },
    /// Phase-1 SRSWOR of size `n` plus a fixed-size SRSWOR of `stratum_n[h]`
    /// units inside every stratum.
    Oversample {
        boundaries: Vec<f64>,
        stratum_n: Vec<usize>,
    },
}

/// A sampling design with its (expected or phase-1) sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_override: Option<f64>,
}

impl DesignSpec {
    pub fn new(kind: DesignKind, n: usize) -> Self {
        Self {
            kind,
            n,
            delta_override: None,
        }
    }

    pub fn srswor(n: usize) -> Self {
        Self::new(DesignKind::Srswor, n)
    }

    pub fn poisson(n: usize, rule: InclusionRule) -> Self {
        Self::new(DesignKind::Poisson { rule }, n)
    }

    pub fn systematic_pps(n: usize, rule: InclusionRule) -> Self {
        Self::new(DesignKind::SystematicPps { rule }, n)
    }

    pub fn stratified(n: usize, boundaries: Vec<f64>) -> Self {
        Self::new(DesignKind::Stratified { boundaries }, n)
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta_override = Some(delta);
        self
    }

    /// Short label used in reports.
    pub fn label(&self) -> &'static str {
        match &self.kind {
            DesignKind::Srswor => "srswor",
            DesignKind::Poisson { .. } => "poisson",
            DesignKind::SystematicPps { .. } => "systematic-pps",
            DesignKind::Stratified { .. } => "stratified",
            DesignKind::Oversample { .. } => "oversample",
        }
    }

    pub fn is_fixed_size(&self) -> bool {
        // Systematic sampling is fixed-size here because the probabilities sum
        // to the integer n.
        !matches!(
            self.kind,
            DesignKind::Poisson { .. } | DesignKind::Oversample { .. }
        )
    }
}

/// Drawn units with their sampling weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub population_size: usize,
    pub delta: f64,
    pub strata: Option<Vec<usize>>,
    /// Number of times an empty Poisson draw was discarded.
    pub redraws: u32,
}

impl WeightedSample {
    pub fn new(
        values: Vec<f64>,
        weights: Vec<f64>,
        population_size: usize,
        delta: f64,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("sample is empty".into()));
        }
        if values.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if population_size == 0 {
            return Err(Error::InvalidArgument("population size must be positive".into()));
        }
        if !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("delta must be finite, got {delta}")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value {v}")));
        }
        if let Some(d) = weights.iter().find(|d| !(d.is_finite() && **d >= 1.0 - 1e-9)) {
            return Err(Error::InvalidArgument(format!(
                "sampling weight {d} is not an inverse inclusion probability (must be >= 1)"
            )));
        }
        Ok(Self {
            values,
            weights,
            population_size,
            delta,
            strata: None,
            redraws: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weight_total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Stratum label of every unit: the number of boundaries not exceeding it.
pub fn stratum_labels(boundaries: &[f64], population: &[f64]) -> Result<Vec<usize>> {
    if boundaries.windows(2).any(|w| w[0] >= w[1]) || boundaries.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidArgument(
            "stratum boundaries must be finite and strictly increasing".into(),
        ));
    }
    Ok(population
        .iter()
        .map(|&x| boundaries.partition_point(|&b| b <= x))
        .collect())
}

/// Splits `n` over strata in proportion to `sizes` (largest-remainder
/// rounding, ties to the lower stratum index). Every nonempty stratum must
/// end up with at least one unit.
pub fn proportional_allocation(n: usize, sizes: &[usize]) -> Result<Vec<usize>> {
    let total: usize = sizes.iter().sum();
    if n > total {
        return Err(Error::SampleTooLarge { n, population: total });
    }
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| n * s / total).collect();
    let mut rem: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .map(|(h, &s)| ((n * s) % total, h))
        .collect();
    rem.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
    let short = n - alloc.iter().sum::<usize>();
    for &(_, h) in rem.iter().take(short) {
        alloc[h] += 1;
    }
    for (h, (&a, &s)) in alloc.iter().zip(sizes).enumerate() {
        if s > 0 && a == 0 {
            return Err(Error::InvalidArgument(format!(
                "stratum {h} (size {s}) receives no units under proportional allocation of n={n}"
            )));
        }
    }
    Ok(alloc)
}

/// Inclusion probabilities `n_h / N_h + n / N` for a phase-1 SRSWOR of size
/// `phase1_n` from `population_size` units combined with a stratified
/// oversample of `stratum_n[h]` out of `stratum_sizes[h]`.
pub fn oversample_pi(
    stratum_sizes: &[usize],
    stratum_n: &[usize],
    phase1_n: usize,
    population_size: usize,
) -> Result<Vec<f64>> {
    if stratum_sizes.len() != stratum_n.len() {
        return Err(Error::InvalidArgument(format!(
            "{} stratum sizes but {} stratum sample sizes",
            stratum_sizes.len(),
            stratum_n.len()
        )));
    }
    if population_size == 0 {
        return Err(Error::InvalidArgument("population size must be positive".into()));
    }
    if phase1_n > population_size {
        return Err(Error::SampleTooLarge {
            n: phase1_n,
            population: population_size,
        });
    }
    let base = phase1_n as f64 / population_size as f64;
    stratum_sizes
        .iter()
        .zip(stratum_n)
        .enumerate()
        .map(|(h, (&big, &small))| {
            if big == 0 {
                return Err(Error::InvalidArgument(format!("stratum {h} is empty")));
            }
            if small > big {
                return Err(Error::SampleTooLarge { n: small, population: big });
            }
            let p = small as f64 / big as f64 + base;
            if p > 1.0 + 1e-12 {
                return Err(Error::ProbabilityAboveOne { stratum: h, value: p });
            }
            Ok(p.min(1.0))
        })
        .collect()
}

/// Scales positive size measures to probabilities summing to `n`, clipping
/// at 1 and redistributing until no probability exceeds 1.
fn scale_to_total(sizes: &[f64], n: usize) -> Vec<f64> {
    let big_n = sizes.len();
    let mut pi = vec![0.0; big_n];
    let mut capped = vec![false; big_n];
    let mut n_capped = 0usize;
    for _ in 0..=big_n {
        let budget = (n - n_capped) as f64;
        let free: f64 = sizes
            .iter()
            .zip(&capped)
            .filter(|(_, &c)| !c)
            .map(|(s, _)| s)
            .sum();
        let mut changed = false;
        for i in 0..big_n {
            if capped[i] {
                continue;
            }
            pi[i] = sizes[i] * budget / free;
            if pi[i] >= 1.0 {
                pi[i] = 1.0;
                capped[i] = true;
                n_capped += 1;
                changed = true;
            }
        }
        if !changed || n_capped == n {
            break;
        }
    }
    if n_capped == n {
        for i in 0..big_n {
            if !capped[i] {
                pi[i] = 0.0;
            }
        }
    }
    pi
}

/// First-order inclusion probabilities of every population unit.
pub fn first_order_pi(design: &DesignSpec, population: &[f64]) -> Result<Vec<f64>> {
    Ok(PreparedDesign::new(design, population)?.pi)
}

/// Design quantity `delta` for `design` over `population`.
pub fn delta(design: &DesignSpec, population: &[f64]) -> Result<f64> {
    Ok(PreparedDesign::new(design, population)?.delta)
}

/// Draws one sample; shorthand for `PreparedDesign::new(..)?.draw(..)`.
pub fn draw_sample<R: Rng + ?Sized>(
    design: &DesignSpec,
    population: &[f64],
    rng: &mut R,
) -> Result<WeightedSample> {
    PreparedDesign::new(design, population)?.draw(population, rng)
}

/// A design bound to one population.
#[derive(Debug, Clone)]
pub struct PreparedDesign {
    spec: DesignSpec,
    pi: Vec<f64>,
    delta: f64,
    strata: Option<StrataLayout>,
}

#[derive(Debug, Clone)]
struct StrataLayout {
    labels: Vec<usize>,
    members: Vec<Vec<usize>>,
    alloc: Vec<usize>,
}

impl StrataLayout {
    fn new(boundaries: &[f64], population: &[f64]) -> Result<Self> {
        let labels = stratum_labels(boundaries, population)?;
        let mut members = vec![Vec::new(); boundaries.len() + 1];
        for (i, &h) in labels.iter().enumerate() {
            members[h].push(i);
        }
        Ok(Self {
            labels,
            members,
            alloc: Vec::new(),
        })
    }

    fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }
}

impl PreparedDesign {
    pub fn new(spec: &DesignSpec, population: &[f64]) -> Result<Self> {
        let big_n = population.len();
        if big_n < 2 {
            return Err(Error::InvalidArgument(format!(
                "population needs at least 2 units, got {big_n}"
            )));
        }
        let n = spec.n;
        if n > big_n {
            return Err(Error::SampleTooLarge { n, population: big_n });
        }
        let needs_n = !matches!(spec.kind, DesignKind::Oversample { .. });
        if needs_n && n == 0 {
            return Err(Error::InvalidArgument("sample size must be positive".into()));
        }
        let nf = n as f64;
        let big_nf = big_n as f64;
        let mut strata = None;

        let (pi, closed_form_delta) = match &spec.kind {
            DesignKind::Srswor => (vec![nf / big_nf; big_n], -1.0 / nf),
            DesignKind::Poisson { rule } => (informative_pi(*rule, population, n)?, -1.0 / big_nf),
            DesignKind::SystematicPps { rule } => (informative_pi(*rule, population, n)?, -1.0 / nf),
            DesignKind::Stratified { boundaries } => {
                let mut layout = StrataLayout::new(boundaries, population)?;
                let sizes = layout.sizes();
                layout.alloc = proportional_allocation(n, &sizes)?;
                let mut pi = vec![0.0; big_n];
                for (i, &h) in layout.labels.iter().enumerate() {
                    pi[i] = layout.alloc[h] as f64 / sizes[h] as f64;
                }
                let spread: f64 = sizes
                    .iter()
                    .zip(&layout.alloc)
                    .filter(|(&s, _)| s > 0)
                    .map(|(&s, &a)| (s as f64).powi(2) / a as f64)
                    .sum();
                strata = Some(layout);
                (pi, -spread / (big_nf * big_nf))
            }
            DesignKind::Oversample {
                boundaries,
                stratum_n,
            } => {
                let mut layout = StrataLayout::new(boundaries, population)?;
                let sizes = layout.sizes();
                let per_stratum = oversample_pi(&sizes, stratum_n, n, big_n)?;
                layout.alloc = stratum_n.clone();
                let pi: Vec<f64> = layout.labels.iter().map(|&h| per_stratum[h]).collect();
                let expected: f64 = pi.iter().sum();
                if expected <= 0.0 {
                    return Err(Error::InvalidArgument(
                        "oversample design selects no units".into(),
                    ));
                }
                strata = Some(layout);
                (pi, -1.0 / expected)
            }
        };

        Ok(Self {
            spec: spec.clone(),
            pi,
            delta: spec.delta_override.unwrap_or(closed_form_delta),
            strata,
        })
    }

    pub fn spec(&self) -> &DesignSpec {
        &self.spec
    }

    pub fn inclusion_probabilities(&self) -> &[f64] {
        &self.pi
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Stratum sample sizes, for stratified designs.
    pub fn allocation(&self) -> Option<&[usize]> {
        self.strata.as_ref().map(|s| s.alloc.as_slice())
    }

    /// Draws the indices of one sample, sorted ascending, plus the number of
    /// discarded empty draws.
    pub fn draw_indices<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec<usize>, u32)> {
        let big_n = self.pi.len();
        let n = self.spec.n;
        let mut idx = match &self.spec.kind {
            DesignKind::Srswor => index::sample(rng, big_n, n).into_vec(),
            DesignKind::Poisson { .. } => {
                let mut redraws = 0;
                loop {
                    let picked: Vec<usize> = (0..big_n)
                        .filter(|&i| rng.random::<f64>() < self.pi[i])
                        .collect();
                    if !picked.is_empty() {
                        return Ok((picked, redraws));
                    }
                    redraws += 1;
                    if redraws >= MAX_EMPTY_REDRAWS {
                        return Err(Error::EmptySample { attempts: redraws });
                    }
                }
            }
            DesignKind::SystematicPps { .. } => {
                let start: f64 = rng.random();
                let mut next = start;
                let mut cum = 0.0;
                let mut picked = Vec::with_capacity(n);
                for (i, &p) in self.pi.iter().enumerate() {
                    cum += p;
                    if next < cum {
                        picked.push(i);
                        while next < cum {
                            next += 1.0;
                        }
                    }
                }
                picked
            }
            DesignKind::Stratified { .. } => {
                let layout = self.strata.as_ref().expect("stratified layout");
                let mut picked = Vec::with_capacity(n);
                for (members, &n_h) in layout.members.iter().zip(&layout.alloc) {
                    picked.extend(
                        index::sample(rng, members.len(), n_h)
                            .into_iter()
                            .map(|k| members[k]),
                    );
                }
                picked
            }
            DesignKind::Oversample { .. } => {
                let layout = self.strata.as_ref().expect("oversample layout");
                let mut chosen = vec![false; big_n];
                for i in index::sample(rng, big_n, n) {
                    chosen[i] = true;
                }
                for (members, &n_h) in layout.members.iter().zip(&layout.alloc) {
                    for k in index::sample(rng, members.len(), n_h) {
                        chosen[members[k]] = true;
                    }
                }
                let picked: Vec<usize> = (0..big_n).filter(|&i| chosen[i]).collect();
                if picked.is_empty() {
                    return Err(Error::EmptySample { attempts: 1 });
                }
                picked
            }
        };
        idx.sort_unstable();
        Ok((idx, 0))
    }

    /// Draws one weighted sample from `population` (the same population the
    /// design was prepared with).
    pub fn draw<R: Rng + ?Sized>(&self, population: &[f64], rng: &mut R) -> Result<WeightedSample> {
        if population.len() != self.pi.len() {
            return Err(Error::InvalidArgument(
                "population differs from the one the design was prepared with".into(),
            ));
        }
        let (idx, redraws) = self.draw_indices(rng)?;
        let big_n = population.len();
        let weights: Vec<f64> = match &self.spec.kind {
            // exact N/n rather than 1/(n/N)
            DesignKind::Srswor => vec![big_n as f64 / self.spec.n as f64; idx.len()],
            DesignKind::Stratified { .. } => {
                let layout = self.strata.as_ref().expect("stratified layout");
                idx.iter()
                    .map(|&i| {
                        let h = layout.labels[i];
                        layout.members[h].len() as f64 / layout.alloc[h] as f64
                    })
                    .collect()
            }
            _ => idx.iter().map(|&i| 1.0 / self.pi[i]).collect(),
        };
        Ok(WeightedSample {
            values: idx.iter().map(|&i| population[i]).collect(),
            weights,
            population_size: big_n,
            delta: self.delta,
            strata: self
                .strata
                .as_ref()
                .map(|s| idx.iter().map(|&i| s.labels[i]).collect()),
            redraws,
        })
    }
}

fn informative_pi(rule: InclusionRule, population: &[f64], n: usize) -> Result<Vec<f64>> {
    let raw: Vec<f64> = population.iter().map(|&x| rule.size_measure(x)).collect();
    if raw.iter().all(|&s| s <= 0.0) {
        return Err(Error::InvalidArgument(
            "all size measures are zero; inclusion probabilities undefined".into(),
        ));
    }
    if let Some(x) = population.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite population value {x}")));
    }
    let sizes: Vec<f64> = raw.into_iter().map(|s| s.max(SIZE_FLOOR)).collect();
    Ok(scale_to_total(&sizes, n))
}

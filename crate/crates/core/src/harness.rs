//! Monte Carlo MISE study.
//!
//! `m1` finite populations are drawn from the superpopulation, each scaled to
//! `[0, 1]` by its own range. From every population `m2` samples are drawn per
//! sample size, every configured method is fitted and projected, and the
//! integrated squared error against the scaled true density is recorded:
//!
//! `MISE_MC = ∫ (m1 m2)^-1 sum_i sum_j (f_ij(u) - f(u))^2 du`.
//!
//! Integration is linear, so this equals the mean of per-replicate ISEs, which
//! is what gets accumulated (the standard error comes from their spread).
//!
//! Every population and replicate owns a ChaCha8 stream seeded from
//! `(master seed, tag, population index, replicate index)`. Replicates run on
//! the rayon pool and are merged in index order, so results do not depend on
//! the number of threads.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{fit_scaling, ScalingTransform};
use crate::design::{DesignKind, DesignSpec, PreparedDesign};
use crate::error::{Error, Result};
use crate::estimator::{
    self, project_to_density, search_cap, trapezoid, DensityEstimate, Method, ValidDensity, MIN_GRID,
};
use crate::superpop::Superpopulation;

const POPULATION_STREAM: u64 = 1;
const REPLICATE_STREAM: u64 = 2;

/// Largest tolerated share of failed replicates.
pub const FAILURE_TOLERANCE: f64 = 1e-3;

/// Deterministic random stream for `(master, tag, i, j)`.
pub fn stream_rng(master: u64, tag: u64, i: u64, j: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    for (chunk, word) in seed.chunks_exact_mut(8).zip([master, tag, i, j]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Stream used for population `i`.
pub fn population_rng(master: u64, i: u64) -> ChaCha8Rng {
    stream_rng(master, POPULATION_STREAM, i, 0)
}

/// Stream used for replicate `j` of population `i`.
pub fn replicate_rng(master: u64, i: u64, j: u64) -> ChaCha8Rng {
    stream_rng(master, REPLICATE_STREAM, i, j)
}

/// Compensated (Neumaier) sum.
pub fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn default_population_size() -> usize {
    1000
}
fn default_sample_sizes() -> Vec<usize> {
    vec![20, 40, 60, 80, 100]
}
fn default_populations() -> usize {
    100
}
fn default_replicates() -> usize {
    10_000
}
fn default_grid() -> usize {
    1024
}
fn default_methods() -> Vec<Method> {
    vec![Method::Truncated, Method::Smoothed, Method::IidBaseline]
}
fn default_label() -> String {
    "custom".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub superpopulation: Superpopulation,
    #[serde(default = "default_label")]
    pub superpopulation_label: String,
    pub design: DesignKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_override: Option<f64>,
    #[serde(default = "default_population_size")]
    pub population_size: usize,
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: Vec<usize>,
    /// Number of finite populations (`m1`).
    #[serde(default = "default_populations")]
    pub populations: usize,
    /// Samples per population and sample size (`m2`).
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Also report the MISE of the unprojected estimates.
    #[serde(default)]
    pub raw_mise: bool,
}

impl StudyConfig {
    pub fn new(superpopulation: Superpopulation, design: DesignKind) -> Self {
        Self {
            superpopulation,
            superpopulation_label: default_label(),
            design,
            delta_override: None,
            population_size: default_population_size(),
            sample_sizes: default_sample_sizes(),
            populations: default_populations(),
            replicates: default_replicates(),
            grid: default_grid(),
            seed: 0,
            methods: default_methods(),
            raw_mise: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.populations == 0 || self.replicates == 0 {
            return Err(Error::InvalidArgument("populations and replicates must be >= 1".into()));
        }
        if self.grid < MIN_GRID {
            return Err(Error::InvalidArgument(format!("grid must be >= {MIN_GRID}")));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&n| n > self.population_size) {
            return Err(Error::InvalidArgument(
                "sample sizes must be nonempty and not exceed the population size".into(),
            ));
        }
        if self.methods.is_empty() || self.methods.contains(&Method::Oracle) {
            return Err(Error::InvalidArgument(
                "methods must be a nonempty subset of truncated, smoothed, iid-baseline".into(),
            ));
        }
        Ok(())
    }

    pub fn design_for(&self, n: usize) -> DesignSpec {
        DesignSpec {
            kind: self.design.clone(),
            n,
            delta_override: self.delta_override,
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-cell validity diagnostics gathered over all replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellDiagnostics {
    pub max_cutoff: usize,
    pub cutoff_cap: usize,
    pub min_weight: f64,
    pub max_weight: f64,
    /// Smallest projected grid value seen.
    pub min_density: f64,
    /// Largest `|∫ f_tilde - 1|`, integral in closed form.
    pub max_mass_error: f64,
    /// Largest `|trapezoid(f_tilde) - 1|` on the study grid.
    pub max_trapezoid_error: f64,
    pub empty_redraws: u64,
}

impl CellDiagnostics {
    fn new(cap: usize) -> Self {
        Self {
            max_cutoff: 0,
            cutoff_cap: cap,
            min_weight: f64::INFINITY,
            max_weight: f64::NEG_INFINITY,
            min_density: f64::INFINITY,
            max_mass_error: 0.0,
            max_trapezoid_error: 0.0,
            empty_redraws: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiseCell {
    pub method: Method,
    pub n: usize,
    pub mise: f64,
    pub se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_mise: Option<f64>,
    /// Accumulated fit-and-project compute time across replicates.
    pub seconds: f64,
    pub replicates: usize,
    pub failures: usize,
    pub diagnostics: CellDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub populations: usize,
    pub replicates: usize,
    pub grid: usize,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiseReport {
    pub design: String,
    pub superpopulation: String,
    pub cells: Vec<MiseCell>,
    pub provenance: Provenance,
}

impl MiseReport {
    pub fn cell(&self, method: Method, n: usize) -> Option<&MiseCell> {
        self.cells.iter().find(|c| c.method == method && c.n == n)
    }

    /// CSV with columns `design,superpop,method,n,mise,se,seconds`. With
    /// `include_timing = false` the `seconds` column is written as 0 so that
    /// repeated runs compare byte for byte.
    pub fn to_csv(&self, include_timing: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["design", "superpop", "method", "n", "mise", "se", "seconds"])?;
        for c in &self.cells {
            let seconds = if include_timing { c.seconds } else { 0.0 };
            w.write_record([
                self.design.clone(),
                self.superpopulation.clone(),
                c.method.to_string(),
                c.n.to_string(),
                format!("{:e}", c.mise),
                format!("{:e}", c.se),
                format!("{seconds:.3}"),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

/// Replicate-averaged integrated squared error of `estimates` against the
/// tabulated truth, `∫ mean_r (f_r(u) - f(u))^2 du` on the shared grid.
pub fn mise_mc(estimates: &[ValidDensity], truth: &[f64]) -> Result<f64> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::InvalidArgument("no estimates".into()))?;
    let scaling = first.base.scaling;
    let mut acc = vec![0.0; truth.len()];
    for est in estimates {
        if est.base.scaling != scaling || est.grid_size() != truth.len() {
            return Err(Error::ScalingMismatch);
        }
        for (a, (f, t)) in acc.iter_mut().zip(est.grid_values().iter().zip(truth)) {
            *a += (f - t).powi(2);
        }
    }
    let m = estimates.len() as f64;
    Ok(trapezoid(&acc.iter().map(|a| a / m).collect::<Vec<_>>()))
}

/// Integrated squared error of grid values against the truth.
pub fn ise(values: &[f64], truth: &[f64]) -> f64 {
    let sq: Vec<f64> = values.iter().zip(truth).map(|(f, t)| (f - t).powi(2)).collect();
    trapezoid(&sq)
}

/// One finite population with its scaling and tabulated scaled density.
#[derive(Debug, Clone)]
pub struct StudyPopulation {
    pub values: Vec<f64>,
    pub scaling: ScalingTransform,
    pub truth: Vec<f64>,
}

impl StudyPopulation {
    pub fn generate(sp: &Superpopulation, size: usize, grid: usize, master: u64, index: u64) -> Result<Self> {
        let values = sp.sample_population(size, &mut population_rng(master, index));
        let scaling = fit_scaling(&values, 0.0)?;
        let truth = (0..grid)
            .map(|i| sp.density_on_unit(&scaling, i as f64 / (grid - 1) as f64))
            .collect();
        Ok(Self { values, scaling, truth })
    }
}

#[derive(Debug, Clone, Copy)]
struct MethodOutcome {
    ise: f64,
    raw_ise: f64,
    cutoff: usize,
    min_weight: f64,
    max_weight: f64,
    min_density: f64,
    mass_error: f64,
    trapezoid_error: f64,
    seconds: f64,
}

fn fit_one(
    sample: &crate::design::WeightedSample,
    pop: &StudyPopulation,
    method: Method,
    grid: usize,
    raw: bool,
) -> Result<MethodOutcome> {
    let start = Instant::now();
    let est: DensityEstimate = estimator::fit(sample, &pop.scaling, method)?;
    let valid = project_to_density(&est, grid)?;
    let seconds = start.elapsed().as_secs_f64();
    let raw_ise = if raw {
        let raw_vals: Vec<f64> = (0..grid)
            .map(|i| est.evaluate_unchecked(i as f64 / (grid - 1) as f64))
            .collect();
        ise(&raw_vals, &pop.truth)
    } else {
        f64::NAN
    };
    let w = est.weights();
    Ok(MethodOutcome {
        ise: ise(valid.grid_values(), &pop.truth),
        raw_ise,
        cutoff: est.cutoff(),
        min_weight: w.iter().cloned().fold(f64::INFINITY, f64::min),
        max_weight: w.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        min_density: valid.grid_values().iter().cloned().fold(f64::INFINITY, f64::min),
        mass_error: (valid.integral() - 1.0).abs(),
        trapezoid_error: (valid.trapezoid_integral() - 1.0).abs(),
        seconds,
    })
}

/// Runs the study, reporting progress through `progress`.
pub fn run_study_with_progress(cfg: &StudyConfig, mut progress: impl FnMut(&str)) -> Result<MiseReport> {
    cfg.validate()?;
    let m1 = cfg.populations;
    let m2 = cfg.replicates;
    let populations: Vec<StudyPopulation> = (0..m1)
        .into_par_iter()
        .map(|i| StudyPopulation::generate(&cfg.superpopulation, cfg.population_size, cfg.grid, cfg.seed, i as u64))
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for &n in &cfg.sample_sizes {
        let spec = cfg.design_for(n);
        let designs: Vec<PreparedDesign> = populations
            .iter()
            .map(|p| PreparedDesign::new(&spec, &p.values))
            .collect::<Result<_>>()?;

        // Outer Err: the sample draw failed; inner: the method failed.
        type Outcome = std::result::Result<(u32, Vec<Result<MethodOutcome>>), Error>;
        let outcomes: Vec<Outcome> = (0..m1 * m2)
            .into_par_iter()
            .map(|t| {
                let (i, j) = (t / m2, t % m2);
                let pop = &populations[i];
                let mut rng = replicate_rng(cfg.seed, i as u64, j as u64);
                let sample = designs[i].draw(&pop.values, &mut rng)?;
                let per_method = cfg
                    .methods
                    .iter()
                    .map(|&m| fit_one(&sample, pop, m, cfg.grid, cfg.raw_mise))
                    .collect();
                Ok((sample.redraws, per_method))
            })
            .collect();

        let total = m1 * m2;
        for (k, &method) in cfg.methods.iter().enumerate() {
            let mut diag = CellDiagnostics::new(search_cap(n));
            let mut ises = Vec::with_capacity(total);
            let mut raws = Vec::new();
            let mut seconds = Vec::with_capacity(total);
            let mut failures = 0usize;
            for outcome in &outcomes {
                let m = match outcome {
                    Ok((redraws, per)) => {
                        diag.empty_redraws += u64::from(*redraws);
                        match &per[k] {
                            Ok(m) => m,
                            Err(_) => {
                                failures += 1;
                                continue;
                            }
                        }
                    }
                    Err(_) => {
                        failures += 1;
                        continue;
                    }
                };
                ises.push(m.ise);
                raws.push(m.raw_ise);
                seconds.push(m.seconds);
                diag.max_cutoff = diag.max_cutoff.max(m.cutoff);
                diag.min_weight = diag.min_weight.min(m.min_weight);
                diag.max_weight = diag.max_weight.max(m.max_weight);
                diag.min_density = diag.min_density.min(m.min_density);
                diag.max_mass_error = diag.max_mass_error.max(m.mass_error);
                diag.max_trapezoid_error = diag.max_trapezoid_error.max(m.trapezoid_error);
            }
            if failures as f64 >= FAILURE_TOLERANCE * total as f64 && failures > 0 {
                return Err(Error::TooManyFailures { failed: failures, total });
            }
            let count = ises.len() as f64;
            let mise = stable_sum(ises.iter().copied()) / count;
            let var = if ises.len() > 1 {
                stable_sum(ises.iter().map(|v| (v - mise).powi(2))) / (count - 1.0)
            } else {
                0.0
            };
            cells.push(MiseCell {
                method,
                n,
                mise,
                se: (var / count).sqrt(),
                raw_mise: cfg.raw_mise.then(|| stable_sum(raws.iter().copied()) / count),
                seconds: stable_sum(seconds),
                replicates: ises.len(),
                failures,
                diagnostics: diag,
            });
        }
        progress(&format!(
            "{} / {}: n = {n} done ({} replicates)",
            spec.label(),
            cfg.superpopulation_label,
            total
        ));
    }

    Ok(MiseReport {
        design: cfg.design_for(0).label().to_string(),
        superpopulation: cfg.superpopulation_label.clone(),
        cells,
        provenance: Provenance {
            seed: cfg.seed,
            config_hash: cfg.hash(),
            populations: m1,
            replicates: m2,
            grid: cfg.grid,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

pub fn run_study(cfg: &StudyConfig) -> Result<MiseReport> {
    run_study_with_progress(cfg, |_| {})
}

/// Value and plug-in design variance of a fixed-weight estimate at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointDraw {
    pub value: f64,
    pub design_variance: f64,
}

/// Repeatedly samples a fixed population and evaluates the oracle estimate
/// with fixed `weights` at every point of `points`. Row `r` holds replicate
/// `r`; replicate streams come from `replicate_rng(seed, 0, r)`.
pub fn pointwise_replicates(
    population: &[f64],
    scaling: &ScalingTransform,
    design: &DesignSpec,
    weights: &[f64],
    points: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<PointDraw>>> {
    let prepared = PreparedDesign::new(design, population)?;
    let j_max = 2 * weights.len().max(1);
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, 0, r as u64);
            let sample = prepared.draw(population, &mut rng)?;
            let coeffs = estimator::ht_coefficients(&sample, scaling, j_max)?;
            let est = DensityEstimate::oracle(coeffs, weights.to_vec(), *scaling)?;
            points
                .iter()
                .map(|&u| {
                    Ok(PointDraw {
                        value: est.evaluate(u)?,
                        design_variance: est.design_variance(u)?,
                    })
                })
                .collect()
        })
        .collect()
}

/// `f_U(u) = 1 + sum_j w_j theta_{U,j} phi_j(u)` from the full population.
pub fn population_estimate(
    population: &[f64],
    scaling: &ScalingTransform,
    weights: &[f64],
) -> Result<DensityEstimate> {
    let coeffs = estimator::population_coefficients(population, scaling, 2 * weights.len().max(1))?;
    DensityEstimate::oracle(coeffs, weights.to_vec(), *scaling)
}

//! Command-line front end: `estimate`, `eval`, `benchmark`, `theory`.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::basis::fit_scaling;
use crate::design::WeightedSample;
use crate::error::{Error, Result};
use crate::estimator::{self, project_to_density, DensityEstimate, Method, ValidDensity};
use crate::harness::{run_study_with_progress, StudyConfig};
use crate::io::{read_survey_file, CoefficientExport};
use crate::theory::{minimax_lower_bound, mise_min_theory, optimal_j_theory, SobolevParams};

#[derive(Debug, Parser)]
#[command(name = "osde", version, about = "Cosine-series density estimation for survey samples")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a density to a survey CSV (columns x, weight, stratum).
    Estimate(EstimateArgs),
    /// Evaluate an exported estimate.
    Eval(EvalArgs),
    /// Run a Monte Carlo MISE study from a JSON config.
    Benchmark(BenchmarkArgs),
    /// Tabulate the theoretical bound and optimal cutoff.
    Theory(TheoryArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Population size, or `sum-weights` to use the rounded weight total.
    #[arg(long, default_value = "sum-weights")]
    pub pop_size: String,
    #[arg(long, default_value = "truncated")]
    pub method: Method,
    /// Design constant, or `auto` (stratified SRSWOR from the stratum
    /// column if present, otherwise -1/n).
    #[arg(long, default_value = "auto")]
    pub delta: String,
    #[arg(long, default_value_t = 1024)]
    pub grid: usize,
    /// Relative margin added on each side of the data range.
    #[arg(long, default_value_t = 0.01)]
    pub margin: f64,
    #[arg(long)]
    pub out_coeffs: PathBuf,
    /// Density table with columns u,x,density,design_sd.
    #[arg(long)]
    pub out_density: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub coeffs: PathBuf,
    /// Scaled points in [0, 1].
    #[arg(long, num_args = 1.., conflicts_with_all = ["at_x", "grid"])]
    pub at: Vec<f64>,
    /// Points on the original data scale.
    #[arg(long, num_args = 1.., conflicts_with = "grid")]
    pub at_x: Vec<f64>,
    /// Uniform grid size (default 1024 when no points are given).
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[arg(long, default_value_t = 1.0)]
    pub k: f64,
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long = "n", num_args = 1.., default_values_t = [100u64, 1000, 10000])]
    pub population_sizes: Vec<u64>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(a) => estimate(&a),
        Command::Eval(a) => eval(&a),
        Command::Benchmark(a) => benchmark(&a),
        Command::Theory(a) => theory(&a),
    }
}

fn parse_population_size(raw: &str, weights: &[f64]) -> Result<usize> {
    if raw == "sum-weights" {
        let total: f64 = weights.iter().sum();
        return Ok(total.round().max(1.0) as usize);
    }
    raw.parse()
        .map_err(|_| Error::Parse(format!("--pop-size must be an integer or 'sum-weights', got '{raw}'")))
}

/// Writes the density table `u,x,density,design_sd`.
pub fn density_table(valid: &ValidDensity) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["u", "x", "density", "design_sd"])?;
    for i in 0..valid.grid_size() {
        let u = valid.grid_point(i);
        w.write_record([
            u.to_string(),
            valid.base.scaling.inverse(u).to_string(),
            valid.grid_values()[i].to_string(),
            valid.base.design_sd(u)?.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn estimate(a: &EstimateArgs) -> Result<()> {
    if matches!(a.method, Method::Oracle) {
        return Err(Error::InvalidArgument("choose truncated, smoothed or iid-baseline".into()));
    }
    let data = read_survey_file(&a.input)?;
    // without a weight column every unit counts once: d_i = 1 and, by
    // default, N = n
    let raw_weights = data.weights.clone().unwrap_or_else(|| vec![1.0; data.len()]);
    let population_size = parse_population_size(&a.pop_size, &raw_weights)?;
    let delta = if a.delta == "auto" {
        data.auto_delta(population_size)
    } else {
        a.delta
            .parse()
            .map_err(|_| Error::Parse(format!("--delta must be a number or 'auto', got '{}'", a.delta)))?
    };
    let scaling = fit_scaling(&data.values, a.margin)?;
    let sample = WeightedSample::new(
        data.values.clone(),
        data.weights_or_equal(population_size),
        population_size,
        delta,
    )?;
    let est = estimator::fit(&sample, &scaling, a.method)?;
    let valid = project_to_density(&est, a.grid)?;

    let export = CoefficientExport::from_estimate(&est);
    std::fs::write(&a.out_coeffs, export.to_json()? + "\n")?;
    if let Some(path) = &a.out_density {
        std::fs::write(path, density_table(&valid)?)?;
    }
    eprintln!(
        "method={} N={} n={} delta={:.6e} J={} cap={} theta0-1={:.3e} shift={:.3e}",
        est.method,
        population_size,
        sample.len(),
        delta,
        est.cutoff(),
        export.cutoff_cap,
        est.coeffs.calibration_gap(),
        valid.shift()
    );
    Ok(())
}

fn load_estimate(path: &PathBuf) -> Result<DensityEstimate> {
    CoefficientExport::from_json(&std::fs::read_to_string(path)?)?.to_estimate()
}

fn eval(a: &EvalArgs) -> Result<()> {
    let est = load_estimate(&a.coeffs)?;
    let grid = a.grid.unwrap_or(1024);
    let valid = project_to_density(&est, grid)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if a.at.is_empty() && a.at_x.is_empty() {
        let table = density_table(&valid)?;
        out.write_all(table.as_bytes())?;
        return Ok(());
    }
    let jacobian = if a.at_x.is_empty() { 1.0 } else { est.scaling.width() };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["u", "x", "density", "design_sd"])?;
    let points = a
        .at
        .iter()
        .map(|&u| (u, est.scaling.inverse(u)))
        .chain(a.at_x.iter().map(|&x| (est.scaling.forward(x), x)));
    for (u, x) in points {
        let in_range = (0.0..=1.0).contains(&u);
        if !in_range && !a.at.is_empty() {
            return Err(Error::Domain { value: u });
        }
        // on the original scale, points outside the support have density 0
        let (density, sd) = if in_range {
            (valid.evaluate(u)? / jacobian, est.design_sd(u)? / jacobian)
        } else {
            (0.0, 0.0)
        };
        w.write_record([u.to_string(), x.to_string(), density.to_string(), sd.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.write_all(&bytes)?;
    Ok(())
}

fn benchmark(a: &BenchmarkArgs) -> Result<()> {
    let mut cfg: StudyConfig = serde_json::from_str(&std::fs::read_to_string(&a.config)?)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let run = || {
        run_study_with_progress(&cfg, |msg| eprintln!("{msg}"))
    };
    let report = match a.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    std::fs::write(&a.out_csv, report.to_csv(true)?)?;
    if let Some(path) = &a.out_json {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(())
}

fn theory(a: &TheoryArgs) -> Result<()> {
    let p = SobolevParams::new(a.k, a.q, a.b, a.c)?;
    println!(
        "# k={} Q={} b={} c={} P={:.6e} H1={:.6} H2={:.6}",
        p.k,
        p.q,
        p.b,
        p.c,
        p.minimax_constant(),
        p.h1(),
        p.h2()
    );
    println!("N,minimax_bound,optimal_J,mise_min");
    for &n in &a.population_sizes {
        println!(
            "{n},{:.6e},{:.6},{:.6e}",
            minimax_lower_bound(&p, n)?,
            optimal_j_theory(&p, n)?,
            mise_min_theory(&p, n)?
        );
    }
    Ok(())
}

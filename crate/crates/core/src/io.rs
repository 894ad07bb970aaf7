//! Survey CSV input and the JSON coefficient export.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::basis::ScalingTransform;
use crate::error::{Error, Result};
use crate::estimator::{search_cap, DensityEstimate, FourierCoefficients, Method};

/// Observations read from a survey file with columns `x`, optional `weight`
/// and optional `stratum`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyData {
    pub values: Vec<f64>,
    pub weights: Option<Vec<f64>>,
    pub strata: Option<Vec<String>>,
}

impl SurveyData {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Weights, or `N / n` for every row when the file has none.
    pub fn weights_or_equal(&self, population_size: usize) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.clone(),
            None => vec![population_size as f64 / self.len() as f64; self.len()],
        }
    }

    /// `delta` for stratified SRSWOR with stratum sizes estimated by the
    /// weight totals: `-(sum_h N_h^2 / n_h) / N^2`. Falls back to `-1/n`
    /// without a stratum column.
    pub fn auto_delta(&self, population_size: usize) -> f64 {
        let n = self.len() as f64;
        let Some(strata) = &self.strata else {
            return -1.0 / n;
        };
        let weights = self.weights_or_equal(population_size);
        let mut groups: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        for (s, w) in strata.iter().zip(&weights) {
            let g = groups.entry(s.as_str()).or_default();
            g.0 += w;
            g.1 += 1.0;
        }
        let big_n: f64 = groups.values().map(|g| g.0).sum();
        -groups.values().map(|(nh, n_h)| nh * nh / n_h).sum::<f64>() / (big_n * big_n)
    }
}

fn parse_field(raw: &str, column: &str, row: usize) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("row {row}: cannot parse {column} value '{raw}'")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("row {row}: {column} is not finite")));
    }
    Ok(v)
}

/// Reads a survey CSV with a header row.
pub fn read_survey<R: Read>(reader: R) -> Result<SurveyData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let x_col = find("x").ok_or_else(|| Error::Parse("missing required column 'x'".into()))?;
    let w_col = find("weight");
    let s_col = find("stratum");

    let mut values = Vec::new();
    let mut weights = Vec::new();
    let mut strata = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 2;
        let get = |c: usize| record.get(c).ok_or_else(|| Error::Parse(format!("row {row}: too few fields")));
        values.push(parse_field(get(x_col)?, "x", row)?);
        if let Some(c) = w_col {
            let w = parse_field(get(c)?, "weight", row)?;
            if w <= 0.0 {
                return Err(Error::Parse(format!("row {row}: weight must be positive, got {w}")));
            }
            weights.push(w);
        }
        if let Some(c) = s_col {
            strata.push(get(c)?.to_string());
        }
    }
    if values.len() < 2 {
        return Err(Error::Parse(format!("need at least 2 observations, found {}", values.len())));
    }
    Ok(SurveyData {
        values,
        weights: w_col.map(|_| weights),
        strata: s_col.map(|_| strata),
    })
}

pub fn read_survey_file(path: impl AsRef<Path>) -> Result<SurveyData> {
    read_survey(std::fs::File::open(path)?)
}

pub const FORMAT_VERSION: u32 = 1;

/// Serialized form of a fitted estimate. Holds the summary coefficients and
/// design constants only, never the observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientExport {
    pub format_version: u32,
    pub method: Method,
    #[serde(rename = "N")]
    pub population_size: usize,
    pub n: usize,
    pub delta: f64,
    #[serde(rename = "J")]
    pub cutoff: usize,
    #[serde(rename = "J_cap")]
    pub cutoff_cap: usize,
    pub scaling: ScalingTransform,
    /// `theta_0..=theta_{2 J_cap}`.
    pub theta: Vec<f64>,
    /// `w_1..=w_J`.
    pub w: Vec<f64>,
}

impl CoefficientExport {
    pub fn from_estimate(est: &DensityEstimate) -> Self {
        let cutoff_cap = match est.method {
            Method::Oracle => est.coeffs.j_max() / 2,
            _ => search_cap(est.coeffs.sample_size),
        };
        Self {
            format_version: FORMAT_VERSION,
            method: est.method,
            population_size: est.coeffs.population_size,
            n: est.coeffs.sample_size,
            delta: est.coeffs.delta,
            cutoff: est.cutoff(),
            cutoff_cap,
            scaling: est.scaling,
            theta: est.coeffs.theta.clone(),
            w: est.weights().to_vec(),
        }
    }

    pub fn to_estimate(&self) -> Result<DensityEstimate> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.w.len() != self.cutoff {
            return Err(Error::Parse(format!("J = {} but {} weights", self.cutoff, self.w.len())));
        }
        if self.cutoff > self.cutoff_cap {
            return Err(Error::Parse(format!("J = {} exceeds J_cap = {}", self.cutoff, self.cutoff_cap)));
        }
        if self.theta.len() < 2 * self.cutoff + 1 {
            return Err(Error::Parse(format!(
                "need theta_0..theta_{} for J = {}, have {}",
                2 * self.cutoff,
                self.cutoff,
                self.theta.len()
            )));
        }
        let scaling = ScalingTransform::new(self.scaling.a, self.scaling.b)?;
        let coeffs = FourierCoefficients::new(self.theta.clone(), self.population_size, self.n, self.delta)?;
        DensityEstimate::from_parts(coeffs, self.w.clone(), scaling, self.method)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

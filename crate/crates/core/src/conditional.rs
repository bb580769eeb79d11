//! Covariate-adjusted product-limit estimators.
//!
//! Age enters through kernel weights around the query age; sex through
//! stratification. With equal weights every estimator here collapses to its
//! unconditional counterpart in [`crate::survival`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::{self, CureModelEstimate, Observation, Sex, SurvivalCurve};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SexFilter {
    Male,
    Female,
    Any,
}

impl SexFilter {
    pub fn admits(self, sex: Option<Sex>) -> bool {
        match self {
            SexFilter::Any => true,
            SexFilter::Male => sex == Some(Sex::Male),
            SexFilter::Female => sex == Some(Sex::Female),
        }
    }
}

impl From<Sex> for SexFilter {
    fn from(sex: Sex) -> Self {
        match sex {
            Sex::Male => SexFilter::Male,
            Sex::Female => SexFilter::Female,
        }
    }
}

impl FromStr for SexFilter {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("any") {
            Ok(SexFilter::Any)
        } else {
            s.parse::<Sex>().map(SexFilter::from)
        }
    }
}

/// Query point `x` for a conditional estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateQuery {
    pub age: f64,
    pub sex: SexFilter,
}

impl CovariateQuery {
    pub fn new(age: f64, sex: SexFilter) -> Result<Self> {
        if !age.is_finite() || age < 0.0 {
            return Err(Error::InvalidKernel(format!(
                "query age {age} must be finite and >= 0"
            )));
        }
        Ok(CovariateQuery { age, sex })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    #[default]
    Epanechnikov,
    Gaussian,
}

impl Kernel {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() < 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }
}

impl FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "gaussian" => Ok(Kernel::Gaussian),
            other => Err(format!("unknown kernel `{other}`")),
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Gaussian => "gaussian",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bandwidth {
    #[default]
    Auto,
    Fixed(f64),
}

impl FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(Bandwidth::Auto);
        }
        let h: f64 = s
            .trim()
            .parse()
            .map_err(|e| format!("bandwidth `{s}`: {e}"))?;
        if h.is_finite() && h > 0.0 {
            Ok(Bandwidth::Fixed(h))
        } else {
            Err(format!("bandwidth must be positive, got {h}"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kernel: Kernel,
    pub bandwidth: Bandwidth,
}

impl KernelConfig {
    pub fn fixed(kernel: Kernel, bandwidth: f64) -> Self {
        KernelConfig {
            kernel,
            bandwidth: Bandwidth::Fixed(bandwidth),
        }
    }
}

/// Silverman-style rule of thumb, `1.06 * sd(age) * n^(-1/5)`.
pub fn rule_of_thumb_bandwidth(observations: &[Observation]) -> Result<f64> {
    let ages = collect_ages(observations)?;
    bandwidth_from_ages(&ages)
}

fn bandwidth_from_ages(ages: &[f64]) -> Result<f64> {
    let n = ages.len();
    if n < 2 {
        return Err(Error::DegenerateCovariate);
    }
    let mean = ages.iter().sum::<f64>() / n as f64;
    let var = ages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd <= 0.0 || !sd.is_finite() {
        return Err(Error::DegenerateCovariate);
    }
    Ok(1.06 * sd * (n as f64).powf(-0.2))
}

fn collect_ages(observations: &[Observation]) -> Result<Vec<f64>> {
    observations
        .iter()
        .enumerate()
        .map(|(i, o)| o.age.ok_or(Error::MissingAge(i)))
        .collect()
}

/// The sex stratum together with normalised kernel weights.
struct Weighted {
    stratum: Vec<Observation>,
    weights: Vec<f64>,
}

fn weigh(
    observations: &[Observation],
    query: &CovariateQuery,
    config: &KernelConfig,
) -> Result<Weighted> {
    if !query.age.is_finite() || query.age < 0.0 {
        return Err(Error::InvalidKernel(format!("query age {}", query.age)));
    }
    let stratum: Vec<Observation> = observations
        .iter()
        .copied()
        .filter(|o| query.sex.admits(o.sex))
        .collect();
    if stratum.len() < 2 {
        return Err(Error::EmptyStratum(format!(
            "{} observation(s) match sex filter {:?}; need at least 2",
            stratum.len(),
            query.sex
        )));
    }
    stratum.iter().try_for_each(Observation::validate)?;
    let ages = collect_ages(&stratum)?;
    let h = match config.bandwidth {
        Bandwidth::Fixed(h) if h.is_finite() && h > 0.0 => h,
        Bandwidth::Fixed(h) => {
            return Err(Error::InvalidKernel(format!(
                "bandwidth must be positive, got {h}"
            )))
        }
        Bandwidth::Auto => bandwidth_from_ages(&ages)?,
    };
    let raw: Vec<f64> = ages
        .iter()
        .map(|&a| config.kernel.eval((query.age - a) / h))
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::BandwidthTooSmall);
    }
    let weights = raw.iter().map(|k| k / total).collect();
    Ok(Weighted { stratum, weights })
}

/// Kernel-weighted product-limit estimate of `S(t | x)`.
///
/// At each ordered uncensored subject the curve is multiplied by
/// `1 - w_i / sum_{j >= i} w_j`. Known-cure flags are treated as plain
/// censoring.
pub fn beran_estimate(
    observations: &[Observation],
    query: &CovariateQuery,
    config: &KernelConfig,
) -> Result<SurvivalCurve> {
    let Weighted { stratum, weights } = weigh(observations, query, config)?;
    Ok(survival::product_limit(&stratum, Some(&weights), false))
}

/// Weighted analogue of the known-cure product-limit estimator: known cures
/// keep their weight in the risk set after their own time,
/// `1 - w_i / (sum_{j >= i} w_j + sum_{j <= i} x_j w_j)`.
pub fn npmcm_conditional_estimate(
    observations: &[Observation],
    query: &CovariateQuery,
    config: &KernelConfig,
) -> Result<SurvivalCurve> {
    let Weighted { stratum, weights } = weigh(observations, query, config)?;
    Ok(survival::product_limit(&stratum, Some(&weights), true))
}

pub fn conditional_event_probability(
    observations: &[Observation],
    query: &CovariateQuery,
    config: &KernelConfig,
) -> Result<f64> {
    let curve = npmcm_conditional_estimate(observations, query, config)?;
    Ok(survival::event_probability(&curve))
}

pub fn conditional_latency(
    observations: &[Observation],
    query: &CovariateQuery,
    config: &KernelConfig,
) -> Result<CureModelEstimate> {
    let curve = npmcm_conditional_estimate(observations, query, config)?;
    survival::latency(&curve)
}

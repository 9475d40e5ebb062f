use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma_ln_pdf, inv_gamma_ln_pdf, norm_ln_pdf};
use crate::stochastics::{sample_gamma, sample_inverse_gamma, RngStream};

/// Where a single parameter component may live.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Support {
    Real,
    Positive,
    Interval(f64, f64),
}

impl Support {
    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Support::Real => x.is_finite(),
            Support::Positive => x > 0.0 && x.is_finite(),
            Support::Interval(lo, hi) => x > lo && x < hi,
        }
    }
}

/// Prior density on one parameter component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Prior {
    Normal { mean: f64, sd: f64 },
    /// Mean `shape / rate`.
    Gamma { shape: f64, rate: f64 },
    /// Mode `scale / (shape + 1)`.
    InverseGamma { shape: f64, scale: f64 },
    Uniform { lower: f64, upper: f64 },
}

impl Prior {
    pub fn support(&self) -> Support {
        match *self {
            Prior::Normal { .. } => Support::Real,
            Prior::Gamma { .. } | Prior::InverseGamma { .. } => Support::Positive,
            Prior::Uniform { lower, upper } => Support::Interval(lower, upper),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Prior::Normal { mean, sd } => mean.is_finite() && sd > 0.0,
            Prior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
            Prior::InverseGamma { shape, scale } => shape > 0.0 && scale > 0.0,
            Prior::Uniform { lower, upper } => lower < upper,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid prior {self:?}")))
        }
    }

    /// Log density; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !self.support().contains(x) {
            return f64::NEG_INFINITY;
        }
        match *self {
            Prior::Normal { mean, sd } => norm_ln_pdf(x, mean, sd),
            Prior::Gamma { shape, rate } => gamma_ln_pdf(x, shape, rate),
            Prior::InverseGamma { shape, scale } => inv_gamma_ln_pdf(x, shape, scale),
            Prior::Uniform { lower, upper } => -(upper - lower).ln(),
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Prior::Normal { mean, sd } => mean + sd * rng.std_normal(),
            Prior::Gamma { shape, rate } => {
                sample_gamma(rng, shape, rate).expect("validated gamma prior")
            }
            Prior::InverseGamma { shape, scale } => {
                sample_inverse_gamma(rng, shape, scale).expect("validated inverse gamma prior")
            }
            Prior::Uniform { lower, upper } => lower + (upper - lower) * rng.open01(),
        }
    }
}

/// Model parameters with labels and per-component support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub values: Vec<f64>,
    pub names: Vec<String>,
    pub support: Vec<Support>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, names: Vec<String>, support: Vec<Support>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::usage("parameter vector must have at least one component"));
        }
        if values.len() != names.len() || values.len() != support.len() {
            return Err(Error::usage("parameter values, names and supports differ in length"));
        }
        for ((v, s), name) in values.iter().zip(&support).zip(&names) {
            if !s.contains(*v) {
                return Err(Error::domain(format!("parameter {name} = {v} outside {s:?}")));
            }
        }
        Ok(Self {
            values,
            names,
            support,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }
}

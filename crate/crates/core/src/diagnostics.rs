//! Trace diagnostics: autocorrelation, effective sample size, kernel density
//! estimates and summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::Trace;
use crate::special::LN_SQRT_2PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcfResult {
    /// `rho[k]` for lags `0..=max_lag`.
    pub rho: Vec<f64>,
    pub n: usize,
}

fn centred(series: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let c: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let c0 = c.iter().map(|x| x * x).sum::<f64>() / n;
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::domain("autocorrelation of a constant series is undefined"));
    }
    Ok((c, c0))
}

#[inline]
fn lag_cov(c: &[f64], k: usize) -> f64 {
    c[..c.len() - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / c.len() as f64
}

/// `rho(k) = c_k / c_0` with divisor `n` in every `c_k`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<AcfResult> {
    if max_lag < 1 || series.len() <= max_lag {
        return Err(Error::usage(format!(
            "need n > max_lag >= 1, got n = {}, max_lag = {max_lag}",
            series.len()
        )));
    }
    let (c, c0) = centred(series)?;
    let mut rho = Vec::with_capacity(max_lag + 1);
    rho.push(1.0);
    rho.extend((1..=max_lag).map(|k| (lag_cov(&c, k) / c0).clamp(-1.0, 1.0)));
    Ok(AcfResult {
        rho,
        n: series.len(),
    })
}

/// `n / (1 + 2 Σ rho(k))`, truncated by Geyer's initial positive sequence.
///
/// Capped at `n * max(1, log10 n)` so antithetic traces stay finite.
pub fn ess(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::usage("ESS needs at least two draws"));
    }
    let (c, c0) = centred(series)?;
    let n = series.len();
    let rho = |k: usize| if k < n { lag_cov(&c, k) / c0 } else { 0.0 };
    // tau = -1 + 2 Σ_m Γ_m, Γ_m = rho(2m) + rho(2m+1)
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m < n {
        let g = rho(2 * m) + rho(2 * m + 1);
        if g <= 0.0 {
            break;
        }
        tau += 2.0 * g;
        m += 1;
    }
    let nf = n as f64;
    let cap = nf * nf.log10().max(1.0);
    Ok(if tau > 0.0 { (nf / tau).min(cap) } else { cap })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    /// `0.9 min(sd, IQR / 1.34) n^{-1/5}`.
    Silverman,
    /// Fixed `h`; also permits a single sample.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v.sqrt())
}

pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::usage("Silverman's rule needs at least two samples"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let (_, sd) = mean_sd(&s);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(Error::domain("samples have no spread; pass a fixed bandwidth"));
    }
    Ok(0.9 * spread * (s.len() as f64).powf(-0.2))
}

/// Gaussian-kernel density estimate evaluated on `grid`.
pub fn kde(samples: &[f64], grid: &[f64], bandwidth: Bandwidth) -> Result<DensityEstimate> {
    let h = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(samples)?,
        Bandwidth::Fixed(h) => {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::domain(format!("bandwidth must be positive, got {h}")));
            }
            if samples.is_empty() {
                return Err(Error::usage("kde needs at least one sample"));
            }
            h
        }
    };
    let norm = -(h.ln() + LN_SQRT_2PI + (samples.len() as f64).ln());
    let density = grid
        .iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| {
                    let z = (x - s) / h;
                    (norm - 0.5 * z * z).exp()
                })
                .sum()
        })
        .collect();
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        density,
        bandwidth: h,
    })
}

/// Evenly spaced grid covering the samples with a margin of five bandwidths.
pub fn kde_grid(samples: &[f64], bandwidth: f64, points: usize) -> Vec<f64> {
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 5.0 * bandwidth;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 5.0 * bandwidth;
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    (0..points.max(2)).map(|k| lo + k as f64 * step).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    /// `None` for a constant trace.
    pub ess: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub acceptance_rate: f64,
    pub cap_events: usize,
    pub params: Vec<ParamSummary>,
}

pub fn summarize(trace: &Trace) -> Result<TraceSummary> {
    if trace.is_empty() {
        return Err(Error::usage("cannot summarise an empty trace"));
    }
    let params = trace
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut xs = trace.column(j);
            let (mean, sd) = mean_sd(&xs);
            let ess = ess(&xs).ok();
            xs.sort_by(f64::total_cmp);
            ParamSummary {
                name: name.clone(),
                mean,
                sd,
                q05: quantile_sorted(&xs, 0.05),
                q50: quantile_sorted(&xs, 0.5),
                q95: quantile_sorted(&xs, 0.95),
                ess,
            }
        })
        .collect();
    Ok(TraceSummary {
        iterations: trace.len(),
        acceptance_rate: trace.acceptance_rate(),
        cap_events: trace.cap_events,
        params,
    })
}

/// Monte Carlo standard error of the mean, `sd / sqrt(ESS)`.
pub fn mc_standard_error(series: &[f64]) -> Result<f64> {
    let (_, sd) = mean_sd(series);
    Ok(sd / ess(series)?.sqrt())
}

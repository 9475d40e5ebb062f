//! ABC particle filters for hidden Markov models and their normalizing-constant
//! estimates of `p^eps_theta(y_{1:n})`.
//!
//! * [`smc_abc_filter`]: multinomial resampling at every step, estimate
//!   `∏_t (1/N) Σ_j W_t^j / Vol`. Collapses to `-inf` when every weight vanishes.
//! * [`alive_smc_filter`]: keeps simulating until `N` particles have positive
//!   weight, keeps the first `N - 1` and uses the trial count `m_t`:
//!   `∏_t Σ_{kept} W_t^j / ((m_t - 1) Vol)`, which is `(N-1)/((m_t-1) Vol)` for
//!   indicator weights. It cannot collapse; it can only hit its trial cap.
//! * [`collapsed_smc_filter`]: the standard filter run on the driving noise of a
//!   [`CollapsedHmm`].

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::abc::AbcKernel;
use crate::error::{Error, Result};
use crate::models::{CollapsedHmm, HiddenMarkovModel, ObservationSeries};
use crate::stochastics::RngStream;

/// Particles at one time step, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSystem {
    /// `N x d_x`
    pub states: Vec<f64>,
    /// `N x d_y` pseudo-observations.
    pub aux: Vec<f64>,
    pub weights: Vec<f64>,
    pub state_dim: usize,
    pub obs_dim: usize,
    /// Zero-based time index.
    pub t: usize,
}

impl ParticleSystem {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.state_dim..(i + 1) * self.state_dim]
    }

    pub fn pseudo_obs(&self, i: usize) -> &[f64] {
        &self.aux[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_collapsed(&self) -> bool {
        !(self.weight_sum() > 0.0)
    }

    /// `(Σ W)² / Σ W²`.
    pub fn ess(&self) -> f64 {
        weight_ess(&self.weights)
    }
}

fn weight_ess(w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

/// Ancestor sampling scheme for the standard filter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resampling {
    #[default]
    Multinomial,
    /// Lower variance, but the unbiasedness tests are stated for multinomial.
    Systematic,
}

/// `N` ancestor indices drawn with probabilities `∝ weights`; `None` if all weights vanish.
pub fn resample_indices(weights: &[f64], scheme: Resampling, rng: &mut RngStream) -> Option<Vec<usize>> {
    let n = weights.len();
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cum.push(acc);
    }
    if !(acc > 0.0) {
        return None;
    }
    let pick = |u: f64| cum.partition_point(|&c| c <= u * acc).min(n - 1);
    Some(match scheme {
        Resampling::Multinomial => (0..n).map(|_| pick(rng.uniform())).collect(),
        Resampling::Systematic => {
            let u0 = rng.uniform();
            (0..n).map(|k| pick((k as f64 + u0) / n as f64)).collect()
        }
    })
}

/// Multinomial resampling with weights reset to one. `None` signals collapse.
pub fn resample_multinomial(ps: &ParticleSystem, rng: &mut RngStream) -> Option<ParticleSystem> {
    let idx = resample_indices(&ps.weights, Resampling::Multinomial, rng)?;
    let (dx, dy) = (ps.state_dim, ps.obs_dim);
    let mut out = ParticleSystem {
        states: Vec::with_capacity(idx.len() * dx),
        aux: Vec::with_capacity(idx.len() * dy),
        weights: vec![1.0; idx.len()],
        state_dim: dx,
        obs_dim: dy,
        t: ps.t,
    };
    for &i in &idx {
        out.states.extend_from_slice(ps.state(i));
        out.aux.extend_from_slice(ps.pseudo_obs(i));
    }
    Some(out)
}

/// Self-normalised `Σ_i W_i ξ(x_i, u_i) / Σ_j W_j`.
pub fn filter_expectation(ps: &ParticleSystem, xi: impl Fn(&[f64], &[f64]) -> f64) -> Result<f64> {
    let s = ps.weight_sum();
    if !(s > 0.0) {
        return Err(Error::usage("expectation under a collapsed particle system"));
    }
    Ok((0..ps.len())
        .filter(|&i| ps.weights[i] > 0.0)
        .map(|i| ps.weights[i] * xi(ps.state(i), ps.pseudo_obs(i)))
        .sum::<f64>()
        / s)
}

/// Importance proposal `q_theta(x_t | x_{t-1}, y_t)` for the latent state.
pub trait LatentProposal: Send + Sync {
    fn sample(&self, theta: &[f64], prev: Option<&[f64]>, y: &[f64], rng: &mut RngStream, out: &mut [f64]);
    fn log_density(&self, theta: &[f64], prev: Option<&[f64]>, y: &[f64], x: &[f64]) -> f64;
}

/// `x_t ~ N(c, sd²)` componentwise, with `c = x_{t-1}` or `start` at the first step.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianProposal {
    pub start: Vec<f64>,
    pub sd: f64,
}

impl LatentProposal for GaussianProposal {
    fn sample(&self, _theta: &[f64], prev: Option<&[f64]>, _y: &[f64], rng: &mut RngStream, out: &mut [f64]) {
        let c = prev.unwrap_or(&self.start);
        for (o, &m) in out.iter_mut().zip(c) {
            *o = m + self.sd * rng.std_normal();
        }
    }

    fn log_density(&self, _theta: &[f64], prev: Option<&[f64]>, _y: &[f64], x: &[f64]) -> f64 {
        let c = prev.unwrap_or(&self.start);
        x.iter()
            .zip(c)
            .map(|(&v, &m)| crate::special::norm_ln_pdf(v, m, self.sd))
            .sum()
    }
}

/// How particles move between steps.
#[derive(Clone, Copy, Default)]
pub enum Propagation<'a> {
    /// Latent transition as proposal; weights are plain indicators.
    #[default]
    Bootstrap,
    /// Custom `q_theta`; needs an evaluable transition density.
    Proposal(&'a dyn LatentProposal),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterOptions {
    pub resampling: Resampling,
    /// Alive filter: maximum attempts per time step.
    pub cap: u64,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            resampling: Resampling::Multinomial,
            cap: crate::mcmc::DEFAULT_CAP,
        }
    }
}

/// Normalizing-constant estimate `ln p^{eps,N}_theta(y_{1:n})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NcEstimate {
    /// Sum of the per-step factors; `-inf` after a collapse or cap failure.
    pub log_value: f64,
    pub per_step_log_factors: Vec<f64>,
    pub collapsed_at: Option<usize>,
    /// Alive filter only: attempts per step, including the `N`th success.
    pub trial_counts: Option<Vec<u64>>,
    /// Alive filter only: step at which the attempt cap was exhausted.
    pub capped_at: Option<usize>,
}

impl NcEstimate {
    pub fn is_finite(&self) -> bool {
        self.log_value.is_finite()
    }
}

/// One row of the filter history.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterStep {
    pub t: usize,
    pub log_nc_factor: f64,
    pub ess: f64,
    pub hits: usize,
    pub trials: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterResult {
    /// Particles after the last completed step (before any resampling).
    pub particles: ParticleSystem,
    pub nc: NcEstimate,
    pub history: Vec<FilterStep>,
    /// Number of (x, u) simulations performed.
    pub cost: u64,
}

/// CSV `t,log_nc_factor,ess,hits[,m_t]` with floats in `{:.16e}`.
pub fn write_filter_csv<W: Write>(history: &[FilterStep], mut w: W) -> Result<()> {
    let alive = history.iter().any(|s| s.trials.is_some());
    writeln!(w, "t,log_nc_factor,ess,hits{}", if alive { ",m_t" } else { "" })?;
    for s in history {
        write!(w, "{},{:.16e},{:.16e},{}", s.t + 1, s.log_nc_factor, s.ess, s.hits)?;
        if alive {
            write!(w, ",{}", s.trials.unwrap_or(0))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn check_inputs<M: HiddenMarkovModel + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &ObservationSeries,
    kernel: &AbcKernel,
    propagation: Propagation,
) -> Result<()> {
    model.check_theta(theta)?;
    if model.obs_dim() != data.dim() || kernel.dim() != data.dim() {
        return Err(Error::usage("model, kernel and data dimensions differ"));
    }
    if let Propagation::Proposal(_) = propagation {
        let z = vec![0.0; model.latent_dim()];
        let first = model.log_transition_density(theta, None, &z);
        let later = if data.len() > 1 {
            model.log_transition_density(theta, Some(&z), &z)
        } else {
            Some(0.0)
        };
        if first.is_none() || later.is_none() {
            return Err(Error::capability(
                "a custom proposal needs the transition density; use the bootstrap filter",
            ));
        }
    }
    Ok(())
}

/// Propagate one particle and return its weight.
#[allow(clippy::too_many_arguments)]
#[inline]
fn propagate<M: HiddenMarkovModel + ?Sized>(
    model: &M,
    theta: &[f64],
    prev: Option<&[f64]>,
    y: &[f64],
    kernel: &AbcKernel,
    propagation: Propagation,
    rng: &mut RngStream,
    x: &mut [f64],
    u: &mut [f64],
) -> f64 {
    match propagation {
        Propagation::Bootstrap => {
            model.sample_transition(theta, prev, rng, x);
            model.sample_observation(theta, x, rng, u);
            if kernel.hits(u, y) {
                1.0
            } else {
                0.0
            }
        }
        Propagation::Proposal(q) => {
            q.sample(theta, prev, y, rng, x);
            model.sample_observation(theta, x, rng, u);
            if !kernel.hits(u, y) {
                return 0.0;
            }
            let lp = model
                .log_transition_density(theta, prev, x)
                .unwrap_or(f64::NEG_INFINITY);
            (lp - q.log_density(theta, prev, y, x)).exp()
        }
    }
}

fn collapsed_result(
    ps: ParticleSystem,
    factors: Vec<f64>,
    history: Vec<FilterStep>,
    t: usize,
    cost: u64,
) -> FilterResult {
    FilterResult {
        particles: ps,
        nc: NcEstimate {
            log_value: f64::NEG_INFINITY,
            per_step_log_factors: factors,
            collapsed_at: Some(t),
            trial_counts: None,
            capped_at: None,
        },
        history,
        cost,
    }
}

/// Standard ABC particle filter with resampling at every step.
#[allow(clippy::too_many_arguments)]
pub fn smc_abc_filter<M: HiddenMarkovModel + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &ObservationSeries,
    kernel: &AbcKernel,
    n_particles: usize,
    propagation: Propagation,
    options: &FilterOptions,
    rng: &mut RngStream,
) -> Result<FilterResult> {
    if n_particles == 0 {
        return Err(Error::usage("need at least one particle"));
    }
    check_inputs(model, theta, data, kernel, propagation)?;
    let (dx, dy, n) = (model.latent_dim(), data.dim(), n_particles);
    let mut ps = ParticleSystem {
        states: vec![0.0; n * dx],
        aux: vec![0.0; n * dy],
        weights: vec![0.0; n],
        state_dim: dx,
        obs_dim: dy,
        t: 0,
    };
    let mut prev_states = vec![0.0; n * dx];
    let mut factors = Vec::with_capacity(data.len());
    let mut history = Vec::with_capacity(data.len());
    let mut cost = 0u64;
    for (t, y) in data.rows().enumerate() {
        let ancestors = if t == 0 {
            None
        } else {
            std::mem::swap(&mut prev_states, &mut ps.states);
            Some(resample_indices(&ps.weights, options.resampling, rng).expect("weights checked at previous step"))
        };
        let mut sum = 0.0;
        let mut hits = 0;
        for i in 0..n {
            let prev = ancestors.as_ref().map(|a| &prev_states[a[i] * dx..(a[i] + 1) * dx]);
            let w = propagate(
                model,
                theta,
                prev,
                y,
                kernel,
                propagation,
                rng,
                &mut ps.states[i * dx..(i + 1) * dx],
                &mut ps.aux[i * dy..(i + 1) * dy],
            );
            ps.weights[i] = w;
            sum += w;
            hits += (w > 0.0) as usize;
        }
        ps.t = t;
        cost += n as u64;
        let factor = (sum / n as f64).ln() - kernel.log_ball_volume();
        factors.push(factor);
        history.push(FilterStep {
            t,
            log_nc_factor: factor,
            ess: ps.ess(),
            hits,
            trials: None,
        });
        if !(sum > 0.0) {
            return Ok(collapsed_result(ps, factors, history, t, cost));
        }
    }
    Ok(FilterResult {
        particles: ps,
        nc: NcEstimate {
            log_value: factors.iter().sum(),
            per_step_log_factors: factors,
            collapsed_at: None,
            trial_counts: None,
            capped_at: None,
        },
        history,
        cost,
    })
}

/// Alive ABC particle filter. Returns `N - 1` particles per step.
#[allow(clippy::too_many_arguments)]
pub fn alive_smc_filter<M: HiddenMarkovModel + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &ObservationSeries,
    kernel: &AbcKernel,
    n_particles: usize,
    propagation: Propagation,
    options: &FilterOptions,
    rng: &mut RngStream,
) -> Result<FilterResult> {
    if n_particles < 2 {
        return Err(Error::usage("the alive filter needs N >= 2"));
    }
    check_inputs(model, theta, data, kernel, propagation)?;
    let (dx, dy, keep) = (model.latent_dim(), data.dim(), n_particles - 1);
    let mut ps = ParticleSystem {
        states: Vec::with_capacity(keep * dx),
        aux: Vec::with_capacity(keep * dy),
        weights: Vec::with_capacity(keep),
        state_dim: dx,
        obs_dim: dy,
        t: 0,
    };
    let mut prev = ps.clone();
    let mut cum = Vec::with_capacity(keep);
    let mut x = vec![0.0; dx];
    let mut u = vec![0.0; dy];
    let mut factors = Vec::with_capacity(data.len());
    let mut counts = Vec::with_capacity(data.len());
    let mut history = Vec::with_capacity(data.len());
    let mut cost = 0u64;
    for (t, y) in data.rows().enumerate() {
        std::mem::swap(&mut prev, &mut ps);
        ps.states.clear();
        ps.aux.clear();
        ps.weights.clear();
        ps.t = t;
        cum.clear();
        let mut acc = 0.0;
        for &w in &prev.weights {
            acc += w;
            cum.push(acc);
        }
        let mut successes = 0;
        let mut m = 0u64;
        let mut kept_sum = 0.0;
        while successes < n_particles {
            if m == options.cap {
                cost += m;
                history.push(FilterStep {
                    t,
                    log_nc_factor: f64::NEG_INFINITY,
                    ess: weight_ess(&ps.weights),
                    hits: successes,
                    trials: Some(m),
                });
                counts.push(m);
                return Ok(FilterResult {
                    particles: ps,
                    nc: NcEstimate {
                        log_value: f64::NEG_INFINITY,
                        per_step_log_factors: factors,
                        collapsed_at: None,
                        trial_counts: Some(counts),
                        capped_at: Some(t),
                    },
                    history,
                    cost,
                });
            }
            m += 1;
            let anc = if t == 0 {
                None
            } else {
                let v = rng.uniform() * acc;
                let k = cum.partition_point(|&c| c <= v).min(keep - 1);
                Some(prev.state(k))
            };
            let w = propagate(model, theta, anc, y, kernel, propagation, rng, &mut x, &mut u);
            if w > 0.0 {
                successes += 1;
                if successes < n_particles {
                    ps.states.extend_from_slice(&x);
                    ps.aux.extend_from_slice(&u);
                    ps.weights.push(w);
                    kept_sum += w;
                }
            }
        }
        cost += m;
        let factor = (kept_sum / (m - 1) as f64).ln() - kernel.log_ball_volume();
        factors.push(factor);
        counts.push(m);
        history.push(FilterStep {
            t,
            log_nc_factor: factor,
            ess: ps.ess(),
            hits: successes,
            trials: Some(m),
        });
    }
    Ok(FilterResult {
        particles: ps,
        nc: NcEstimate {
            log_value: factors.iter().sum(),
            per_step_log_factors: factors,
            collapsed_at: None,
            trial_counts: Some(counts),
            capped_at: None,
        },
        history,
        cost,
    })
}

/// How the collapsed filter draws one noise stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "kebab-case")]
pub enum NoiseStrategy {
    /// Draw from the model's own noise sampler.
    Sampler,
    /// Draw from `N(0, sd²)` and weight by `p(noise) / q(noise)`.
    Importance { sd: f64 },
}

impl NoiseStrategy {
    /// Sampler when available, otherwise importance sampling from `N(0, sd²)`.
    pub fn choose(access: crate::models::NoiseAccess, sd: f64, stream: &str) -> Result<Self> {
        if access.sampler {
            Ok(NoiseStrategy::Sampler)
        } else if access.density {
            Ok(NoiseStrategy::Importance { sd })
        } else {
            Err(Error::capability(format!(
                "the {stream} noise has neither a sampler nor a density"
            )))
        }
    }
}

#[inline]
fn draw_noise(
    strategy: NoiseStrategy,
    sample: impl FnOnce(&mut RngStream, &mut [f64]) -> Option<()>,
    density: impl FnOnce(&[f64]) -> Option<f64>,
    rng: &mut RngStream,
    out: &mut [f64],
) -> Result<f64> {
    match strategy {
        NoiseStrategy::Sampler => {
            sample(rng, out).ok_or_else(|| Error::capability("noise sampler unavailable"))?;
            Ok(0.0)
        }
        NoiseStrategy::Importance { sd } => {
            let mut lq = 0.0;
            for o in out.iter_mut() {
                *o = sd * rng.std_normal();
                lq += crate::special::norm_ln_pdf(*o, 0.0, sd);
            }
            let lp = density(out).ok_or_else(|| Error::capability("noise density unavailable"))?;
            Ok(lp - lq)
        }
    }
}

/// Standard ABC filter on the noise representation `(η_t, φ_t)` of a
/// collapsed HMM. Each noise stream is drawn by its own [`NoiseStrategy`].
#[allow(clippy::too_many_arguments)]
pub fn collapsed_smc_filter<M: CollapsedHmm + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &ObservationSeries,
    kernel: &AbcKernel,
    n_particles: usize,
    latent: NoiseStrategy,
    obs: NoiseStrategy,
    rng: &mut RngStream,
) -> Result<FilterResult> {
    if n_particles == 0 {
        return Err(Error::usage("need at least one particle"));
    }
    model.check_theta(theta)?;
    if model.obs_dim() != data.dim() || kernel.dim() != data.dim() {
        return Err(Error::usage("model, kernel and data dimensions differ"));
    }
    let needs = |s: NoiseStrategy, a: crate::models::NoiseAccess, name: &str| match s {
        NoiseStrategy::Sampler if !a.sampler => Err(Error::capability(format!("{name} noise has no sampler"))),
        NoiseStrategy::Importance { .. } if !a.density => {
            Err(Error::capability(format!("{name} noise has no density")))
        }
        _ => Ok(()),
    };
    needs(latent, model.latent_access(), "latent")?;
    needs(obs, model.obs_access(), "observation")?;

    let (dx, dy, n) = (model.latent_dim(), data.dim(), n_particles);
    let (de, dp) = (model.latent_noise_dim(), model.obs_noise_dim());
    let mut ps = ParticleSystem {
        states: vec![0.0; n * dx],
        aux: vec![0.0; n * dy],
        weights: vec![0.0; n],
        state_dim: dx,
        obs_dim: dy,
        t: 0,
    };
    let mut prev_states = vec![0.0; n * dx];
    let mut eta = vec![0.0; de];
    let mut phi = vec![0.0; dp];
    let mut factors = Vec::with_capacity(data.len());
    let mut history = Vec::with_capacity(data.len());
    let mut cost = 0u64;
    for (t, y) in data.rows().enumerate() {
        let ancestors = if t == 0 {
            None
        } else {
            std::mem::swap(&mut prev_states, &mut ps.states);
            Some(resample_indices(&ps.weights, Resampling::Multinomial, rng).expect("weights checked"))
        };
        let mut sum = 0.0;
        let mut hits = 0;
        for i in 0..n {
            let prev = ancestors.as_ref().map(|a| &prev_states[a[i] * dx..(a[i] + 1) * dx]);
            let lw_eta = draw_noise(
                latent,
                |r, o| model.sample_latent_noise(theta, r, o),
                |e| model.log_latent_noise_density(theta, e),
                rng,
                &mut eta,
            )?;
            let x = &mut ps.states[i * dx..(i + 1) * dx];
            model.latent_map(theta, prev, &eta, x);
            let lw_phi = draw_noise(
                obs,
                |r, o| model.sample_obs_noise(theta, r, o),
                |p| model.log_obs_noise_density(theta, p),
                rng,
                &mut phi,
            )?;
            let u = &mut ps.aux[i * dy..(i + 1) * dy];
            model.observation_map(theta, x, &phi, u);
            let w = if kernel.hits(u, y) {
                (lw_eta + lw_phi).exp()
            } else {
                0.0
            };
            ps.weights[i] = w;
            sum += w;
            hits += (w > 0.0) as usize;
        }
        ps.t = t;
        cost += n as u64;
        let factor = (sum / n as f64).ln() - kernel.log_ball_volume();
        factors.push(factor);
        history.push(FilterStep {
            t,
            log_nc_factor: factor,
            ess: ps.ess(),
            hits,
            trials: None,
        });
        if !(sum > 0.0) {
            return Ok(collapsed_result(ps, factors, history, t, cost));
        }
    }
    Ok(FilterResult {
        particles: ps,
        nc: NcEstimate {
            log_value: factors.iter().sum(),
            per_step_log_factors: factors,
            collapsed_at: None,
            trial_counts: None,
            capped_at: None,
        },
        history,
        cost,
    })
}

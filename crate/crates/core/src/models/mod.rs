//! Time-series models `Y_n = phi_theta(y_{1:n-1}, x_n, noise_n)`, their priors,
//! proposals and the noisy-ABC perturbation.
//!
//! Capabilities are split into traits so each sampler can ask for exactly what
//! it needs:
//!
//! * [`ModelSpec`]: parameter names, supports and priors (every model).
//! * [`DatumModel`]: simulate one observation given the past, for i.i.d. and
//!   observation-driven models.
//! * [`TractableDensity`]: pointwise observation density, oracle models only.
//! * [`CollapsedDatumModel`]: the noise-space form of a [`DatumModel`].
//! * [`HiddenMarkovModel`] and [`CollapsedHmm`]: latent Markov chain models.

mod garch;
mod normal;
mod params;
mod proposal;
mod series;
mod sv;
mod toy_hmm;

pub use garch::{simulate_odts_garch, GarchStable};
pub use normal::{GaussianScale, NormalLocation};
pub use params::{ParameterVector, Prior, Support};
pub use proposal::{Move, Proposal};
pub use series::{perturb_noisy, CollapsedState, LatentPath, ObservationSeries, SeriesKind};
pub use sv::{simulate_hmm_sv, StochasticVolatility};
pub use toy_hmm::GaussianToyHmm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastics::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Iid,
    Odts,
    Hmm,
}

/// Parameter space and prior shared by every model.
pub trait ModelSpec: Send + Sync {
    fn kind(&self) -> ModelKind;

    /// `d_y`
    fn obs_dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> Vec<String>;

    fn priors(&self) -> Vec<Prior>;

    fn supports(&self) -> Vec<Support> {
        self.priors().iter().map(Prior::support).collect()
    }

    fn dim(&self) -> usize {
        self.param_names().len()
    }

    /// `ln pi(theta)`, `-inf` outside the support.
    fn log_prior(&self, theta: &[f64]) -> f64 {
        let priors = self.priors();
        if theta.len() != priors.len() {
            return f64::NEG_INFINITY;
        }
        theta.iter().zip(&priors).map(|(&x, p)| p.ln_pdf(x)).sum()
    }

    fn sample_prior(&self, rng: &mut RngStream) -> Vec<f64> {
        self.priors().iter().map(|p| p.sample(rng)).collect()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        let supports = self.supports();
        if theta.len() != supports.len() {
            return Err(Error::usage(format!(
                "theta has {} components, model expects {}",
                theta.len(),
                supports.len()
            )));
        }
        for ((x, s), name) in theta.iter().zip(&supports).zip(self.param_names()) {
            if !s.contains(*x) {
                return Err(Error::domain(format!("{name} = {x} outside {s:?}")));
            }
        }
        Ok(())
    }

    fn parameters(&self, theta: &[f64]) -> Result<ParameterVector> {
        ParameterVector::new(theta.to_vec(), self.param_names(), self.supports())
    }
}

/// i.i.d. and observation-driven models: the law of `Y_i` given `theta` and the
/// observed past is simulable.
pub trait DatumModel: ModelSpec {
    /// The state conditioning each datum's law, derived from `theta` and the
    /// observed series (the volatility `x_{i-1}` of an observation-driven
    /// model). Empty for i.i.d. models.
    fn conditioning(&self, theta: &[f64], data: &ObservationSeries) -> Vec<f64>;

    /// Draw `u ~ p_theta(. | state)` into `out` (length `d_y`).
    fn sample_datum(&self, theta: &[f64], state: Option<f64>, rng: &mut RngStream, out: &mut [f64]);

    /// Synthetic series of length `n` with its latent path.
    fn simulate(
        &self,
        theta: &[f64],
        n: usize,
        rng: &mut RngStream,
    ) -> Result<(ObservationSeries, LatentPath)>;
}

/// Models whose observation density can be evaluated (d_y = 1). Used as oracles.
pub trait TractableDensity: DatumModel {
    fn log_density(&self, theta: &[f64], y: f64) -> f64;

    /// Closed-form `ln p^eps_theta(y)` when one exists.
    fn abc_log_density(&self, _theta: &[f64], _y: f64, _eps: f64) -> Option<f64> {
        None
    }
}

/// Noise-space form of a [`DatumModel`]: `Y_i = g_theta(state_i, phi_i)`.
pub trait CollapsedDatumModel: DatumModel {
    fn noise_dim(&self) -> usize;

    /// `ln p_theta(phi)`, or `None` when the noise density is unavailable.
    fn log_noise_density(&self, theta: &[f64], phi: &[f64]) -> Option<f64>;

    /// Draw `phi ~ p_theta`; `None` when the model cannot sample its noise.
    fn sample_noise(&self, theta: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Option<()>;

    fn observation_from_noise(&self, theta: &[f64], state: Option<f64>, phi: &[f64], out: &mut [f64]);

    /// Noise reproducing `y` exactly, for invertible maps.
    fn invert_observation(
        &self,
        _theta: &[f64],
        _state: Option<f64>,
        _y: &[f64],
        _phi: &mut [f64],
    ) -> Option<()> {
        None
    }
}

/// Hidden Markov model with `X_1 ~ p_theta(. | x_0)`, `X_n ~ p_theta(. | x_{n-1})`
/// and `Y_n ~ p_theta(. | x_n)`.
pub trait HiddenMarkovModel: ModelSpec {
    fn latent_dim(&self) -> usize {
        1
    }

    /// `prev = None` draws `X_1` from the fixed starting point.
    fn sample_transition(
        &self,
        theta: &[f64],
        prev: Option<&[f64]>,
        rng: &mut RngStream,
        out: &mut [f64],
    );

    /// `ln p_theta(next | prev)`, or `None` when the transition density is not evaluable.
    fn log_transition_density(
        &self,
        _theta: &[f64],
        _prev: Option<&[f64]>,
        _next: &[f64],
    ) -> Option<f64> {
        None
    }

    fn sample_observation(&self, theta: &[f64], x: &[f64], rng: &mut RngStream, out: &mut [f64]);

    fn simulate(
        &self,
        theta: &[f64],
        n: usize,
        rng: &mut RngStream,
    ) -> Result<(ObservationSeries, LatentPath)> {
        self.check_theta(theta)?;
        if n == 0 {
            return Err(Error::usage("series length must be at least 1"));
        }
        let dx = self.latent_dim();
        let dy = self.obs_dim();
        let mut xs = vec![0.0; n * dx];
        let mut ys = vec![0.0; n * dy];
        for t in 0..n {
            let (done, rest) = xs.split_at_mut(t * dx);
            let prev = if t == 0 { None } else { Some(&done[(t - 1) * dx..]) };
            let x = &mut rest[..dx];
            self.sample_transition(theta, prev, rng, x);
            self.sample_observation(theta, x, rng, &mut ys[t * dy..(t + 1) * dy]);
        }
        Ok((
            ObservationSeries::new(ys, dy, SeriesKind::Raw)?,
            LatentPath { states: xs, dim: dx },
        ))
    }
}

/// Which access a model grants to one of its noise streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseAccess {
    pub sampler: bool,
    pub density: bool,
}

/// Collapsed HMM: `X_n = rho_theta(x_{n-1}, eta_n)`, `Y_n = g_theta(x_n, phi_n)`.
///
/// Either noise stream may expose a sampler, a density, or both.
pub trait CollapsedHmm: ModelSpec {
    fn latent_dim(&self) -> usize {
        1
    }
    fn latent_noise_dim(&self) -> usize {
        1
    }
    fn obs_noise_dim(&self) -> usize {
        1
    }

    fn latent_access(&self) -> NoiseAccess;
    fn obs_access(&self) -> NoiseAccess;

    fn latent_map(&self, theta: &[f64], prev: Option<&[f64]>, eta: &[f64], out: &mut [f64]);
    fn observation_map(&self, theta: &[f64], x: &[f64], phi: &[f64], out: &mut [f64]);

    fn sample_latent_noise(&self, theta: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Option<()>;
    fn log_latent_noise_density(&self, theta: &[f64], eta: &[f64]) -> Option<f64>;
    fn sample_obs_noise(&self, theta: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Option<()>;
    fn log_obs_noise_density(&self, theta: &[f64], phi: &[f64]) -> Option<f64>;
}

/// `n` independent draws from an i.i.d. model.
pub fn simulate_iid<M: DatumModel + ?Sized>(
    model: &M,
    theta: &[f64],
    n: usize,
    rng: &mut RngStream,
) -> Result<ObservationSeries> {
    if model.kind() != ModelKind::Iid {
        return Err(Error::usage("simulate_iid needs an i.i.d. model"));
    }
    Ok(model.simulate(theta, n, rng)?.0)
}

/// Shared i.i.d. simulation loop.
pub(crate) fn simulate_independent<M: DatumModel + ?Sized>(
    model: &M,
    theta: &[f64],
    n: usize,
    rng: &mut RngStream,
) -> Result<(ObservationSeries, LatentPath)> {
    model.check_theta(theta)?;
    if n == 0 {
        return Err(Error::usage("series length must be at least 1"));
    }
    let d = model.obs_dim();
    let mut ys = vec![0.0; n * d];
    for row in ys.chunks_exact_mut(d) {
        model.sample_datum(theta, None, rng, row);
    }
    Ok((ObservationSeries::new(ys, d, SeriesKind::Raw)?, LatentPath::empty()))
}

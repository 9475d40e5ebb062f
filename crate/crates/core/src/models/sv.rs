//! Stochastic volatility with stable observation noise.
//!
//! ```text
//! Y_n = phi_n * beta * exp(X_n),   phi_n ~ S(alpha, skew, scale, 0)
//! X_n = a X_{n-1} + eta_n,         eta_n ~ N(0, c),  x_0 = 0
//! ```
//!
//! `theta = (beta, c, a)`. The autoregressive coefficient is called `a` here
//! so that `eps` stays reserved for the ABC tolerance. Its inverse-gamma prior
//! has support `(0, inf)`; stationarity (`a < 1`) is not enforced.

use crate::error::{Error, Result};
use crate::special::norm_ln_pdf;
use crate::stochastics::{sample_stable, RngStream, StableParams};

use super::{
    CollapsedHmm, HiddenMarkovModel, LatentPath, ModelKind, ModelSpec, NoiseAccess,
    ObservationSeries, Prior, SeriesKind,
};

#[derive(Clone, Debug, PartialEq)]
pub struct StochasticVolatility {
    /// Law of `phi_n`.
    pub noise: StableParams,
    pub beta_prior: Prior,
    pub c_prior: Prior,
    pub a_prior: Prior,
}

impl StochasticVolatility {
    /// Observation noise `S(alpha, skew, scale, 0)` with the reference priors
    /// `beta ~ N(0, 10)` (variance 10), `c ~ IG(2, 1/100)`, `a ~ IG(2, 1/50)`.
    pub fn new(scale: f64, alpha: f64, skew: f64) -> Result<Self> {
        Ok(Self {
            noise: StableParams::new(alpha, skew, scale, 0.0)?,
            beta_prior: Prior::Normal {
                mean: 0.0,
                sd: 10f64.sqrt(),
            },
            c_prior: Prior::InverseGamma {
                shape: 2.0,
                scale: 0.01,
            },
            a_prior: Prior::InverseGamma {
                shape: 2.0,
                scale: 0.02,
            },
        })
    }

    /// Unit scale, full skew, stability index `alpha`.
    pub fn reference(alpha: f64) -> Result<Self> {
        Self::new(1.0, alpha, 1.0)
    }
}

impl ModelSpec for StochasticVolatility {
    fn kind(&self) -> ModelKind {
        ModelKind::Hmm
    }

    fn param_names(&self) -> Vec<String> {
        ["beta", "c", "a"].map(String::from).to_vec()
    }

    fn priors(&self) -> Vec<Prior> {
        vec![self.beta_prior, self.c_prior, self.a_prior]
    }
}

impl HiddenMarkovModel for StochasticVolatility {
    #[inline]
    fn sample_transition(
        &self,
        theta: &[f64],
        prev: Option<&[f64]>,
        rng: &mut RngStream,
        out: &mut [f64],
    ) {
        let x_prev = prev.map_or(0.0, |p| p[0]);
        out[0] = theta[2] * x_prev + theta[1].sqrt() * rng.std_normal();
    }

    fn log_transition_density(&self, theta: &[f64], prev: Option<&[f64]>, next: &[f64]) -> Option<f64> {
        if !(theta[1] > 0.0) {
            return None;
        }
        let x_prev = prev.map_or(0.0, |p| p[0]);
        Some(norm_ln_pdf(next[0], theta[2] * x_prev, theta[1].sqrt()))
    }

    #[inline]
    fn sample_observation(&self, theta: &[f64], x: &[f64], rng: &mut RngStream, out: &mut [f64]) {
        out[0] = sample_stable(rng, &self.noise) * theta[0] * x[0].exp();
    }
}

impl CollapsedHmm for StochasticVolatility {
    fn latent_access(&self) -> NoiseAccess {
        NoiseAccess {
            sampler: true,
            density: true,
        }
    }

    fn obs_access(&self) -> NoiseAccess {
        NoiseAccess {
            sampler: true,
            density: false,
        }
    }

    fn latent_map(&self, theta: &[f64], prev: Option<&[f64]>, eta: &[f64], out: &mut [f64]) {
        out[0] = theta[2] * prev.map_or(0.0, |p| p[0]) + theta[1].sqrt() * eta[0];
    }

    fn observation_map(&self, theta: &[f64], x: &[f64], phi: &[f64], out: &mut [f64]) {
        out[0] = phi[0] * theta[0] * x[0].exp();
    }

    fn sample_latent_noise(&self, _theta: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Option<()> {
        out[0] = rng.std_normal();
        Some(())
    }

    fn log_latent_noise_density(&self, _theta: &[f64], eta: &[f64]) -> Option<f64> {
        Some(norm_ln_pdf(eta[0], 0.0, 1.0))
    }

    fn sample_obs_noise(&self, _theta: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Option<()> {
        out[0] = sample_stable(rng, &self.noise);
        Some(())
    }

    fn log_obs_noise_density(&self, _theta: &[f64], _phi: &[f64]) -> Option<f64> {
        None
    }
}

/// Simulate `n` steps of the stable SV model at `theta = (beta, c, a)` with
/// observation noise `S(alpha = s2, skew = s3, scale = s1)`.
///
/// Unlike inference, simulation accepts the boundary `c = 0` (a flat latent path).
pub fn simulate_hmm_sv(
    theta: [f64; 3],
    stable: (f64, f64, f64),
    n: usize,
    rng: &mut RngStream,
) -> Result<(ObservationSeries, LatentPath)> {
    let [beta, c, a] = theta;
    if !(c >= 0.0) {
        return Err(Error::domain(format!("latent variance c must be non-negative, got {c}")));
    }
    if !beta.is_finite() || !a.is_finite() {
        return Err(Error::domain("beta and a must be finite"));
    }
    if n == 0 {
        return Err(Error::usage("series length must be at least 1"));
    }
    let (s1, s2, s3) = stable;
    let model = StochasticVolatility::new(s1, s2, s3)?;
    let mut x = [0.0];
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut y = [0.0];
    for t in 0..n {
        let prev = x;
        model.sample_transition(&theta, if t == 0 { None } else { Some(&prev) }, rng, &mut x);
        model.sample_observation(&theta, &x, rng, &mut y);
        xs.push(x[0]);
        ys.push(y[0]);
    }
    Ok((ObservationSeries::new(ys, 1, SeriesKind::Raw)?, LatentPath::scalar(xs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{inv_gamma_ln_pdf, norm_cdf};

    #[test]
    fn flat_latent_gives_pure_noise() {
        let theta = [1.0, 0.0, 0.0];
        let (y, x) = simulate_hmm_sv(theta, (1.0, 1.75, 1.0), 50, &mut RngStream::new(1, 0)).unwrap();
        assert!(x.states.iter().all(|&v| v == 0.0));
        // replay the noise stream: y must equal the stable draws exactly
        let p = StableParams::new(1.75, 1.0, 1.0, 0.0).unwrap();
        let mut rng = RngStream::new(1, 0);
        for &obs in y.as_slice() {
            let _ = rng.std_normal();
            assert_eq!(obs, sample_stable(&mut rng, &p));
        }
    }

    #[test]
    fn gaussian_reduction_of_standardized_observations() {
        let theta = [0.7, 0.04, 0.5];
        let (y, x) = simulate_hmm_sv(theta, (1.0, 2.0, 0.0), 100_000, &mut RngStream::new(2, 0)).unwrap();
        let mut z: Vec<f64> = y
            .as_slice()
            .iter()
            .zip(&x.states)
            .map(|(y, x)| y / (theta[0] * x.exp()))
            .collect();
        z.sort_by(f64::total_cmp);
        let n = z.len() as f64;
        let d = z
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = norm_cdf(v / 2f64.sqrt());
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / n.sqrt(), "KS {d}");
    }

    #[test]
    fn reference_configuration_runs() {
        let theta = [0.5, 1.0 / 300.0, 1.0 / 150.0];
        let (y, _) = simulate_hmm_sv(theta, (1.0, 1.75, 1.0), 533, &mut RngStream::new(3, 0)).unwrap();
        assert_eq!(y.len(), 533);
        assert!(simulate_hmm_sv([1.0, -0.1, 0.5], (1.0, 1.75, 1.0), 5, &mut RngStream::new(3, 0)).is_err());
    }

    #[test]
    fn prior_is_sum_of_components() {
        let m = StochasticVolatility::reference(1.75).unwrap();
        let theta = [0.0, 1.0 / 300.0, 1.0 / 150.0];
        let expected = norm_ln_pdf(0.0, 0.0, 10f64.sqrt())
            + inv_gamma_ln_pdf(1.0 / 300.0, 2.0, 0.01)
            + inv_gamma_ln_pdf(1.0 / 150.0, 2.0, 0.02);
        let lp = m.log_prior(&theta);
        assert!(lp.is_finite());
        assert!((lp - expected).abs() < 1e-12);
        // independent evaluation of IG(2, 0.01) at its mode 1/300
        let b: f64 = 0.01;
        let x: f64 = 1.0 / 300.0;
        let direct = (b * b / x.powi(3) * (-b / x).exp()).ln();
        assert!((inv_gamma_ln_pdf(x, 2.0, b) - direct).abs() < 1e-12);
        assert_eq!(m.log_prior(&[0.0, -1.0, 0.1]), f64::NEG_INFINITY);
    }
}

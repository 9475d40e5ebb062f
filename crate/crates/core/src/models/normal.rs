//! Gaussian oracle models with closed-form ABC likelihoods.

use crate::abc::abc_loglik_gaussian;
use crate::error::Result;
use crate::special::norm_ln_pdf;
use crate::stochastics::RngStream;

use super::{
    simulate_independent, CollapsedDatumModel, DatumModel, LatentPath, ModelKind, ModelSpec,
    ObservationSeries, Prior, TractableDensity,
};

/// `Y = theta + obs_sd * phi`, `phi ~ N(0, 1)`, with a normal prior on `theta`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalLocation {
    pub obs_sd: f64,
    pub prior_mean: f64,
    pub prior_sd: f64,
}

impl Default for NormalLocation {
    fn default() -> Self {
        Self {
            obs_sd: 1.0,
            prior_mean: 0.0,
            prior_sd: 1.0,
        }
    }
}

impl NormalLocation {
    /// Exact conjugate posterior `(mean, variance)` of `theta` given `data`.
    pub fn exact_posterior(&self, data: &ObservationSeries) -> (f64, f64) {
        let n = data.len() as f64;
        let sum: f64 = data.rows().map(|r| r[0]).sum();
        let prior_prec = 1.0 / (self.prior_sd * self.prior_sd);
        let obs_prec = 1.0 / (self.obs_sd * self.obs_sd);
        let prec = prior_prec + n * obs_prec;
        ((self.prior_mean * prior_prec + sum * obs_prec) / prec, 1.0 / prec)
    }

    /// Exact log-likelihood `sum_i ln N(y_i; theta, obs_sd^2)`.
    pub fn log_likelihood(&self, theta: f64, data: &ObservationSeries) -> f64 {
        data.rows().map(|r| norm_ln_pdf(r[0], theta, self.obs_sd)).sum()
    }

    /// Closed-form `ln p^eps_theta(y_{1:n})`.
    pub fn abc_log_likelihood(&self, theta: f64, data: &ObservationSeries, eps: f64) -> f64 {
        data.rows()
            .map(|r| abc_loglik_gaussian(theta, self.obs_sd, r[0], eps))
            .sum()
    }
}

impl ModelSpec for NormalLocation {
    fn kind(&self) -> ModelKind {
        ModelKind::Iid
    }

    fn param_names(&self) -> Vec<String> {
        vec!["theta".into()]
    }

    fn priors(&self) -> Vec<Prior> {
        vec![Prior::Normal {
            mean: self.prior_mean,
            sd: self.prior_sd,
        }]
    }
}

impl DatumModel for NormalLocation {
    fn conditioning(&self, _theta: &[f64], _data: &ObservationSeries) -> Vec<f64> {
        Vec::new()
    }

    #[inline]
    fn sample_datum(&self, theta: &[f64], _state: Option<f64>, rng: &mut RngStream, out: &mut [f64]) {
        out[0] = theta[0] + self.obs_sd * rng.std_normal();
    }

    fn simulate(
        &self,
        theta: &[f64],
        n: usize,
        rng: &mut RngStream,
    ) -> Result<(ObservationSeries, LatentPath)> {
        simulate_independent(self, theta, n, rng)
    }
}

impl TractableDensity for NormalLocation {
    fn log_density(&self, theta: &[f64], y: f64) -> f64 {
        norm_ln_pdf(y, theta[0], self.obs_sd)
    }

    fn abc_log_density(&self, theta: &[f64], y: f64, eps: f64) -> Option<f64> {
        Some(abc_loglik_gaussian(theta[0], self.obs_sd, y, eps))
    }
}

impl CollapsedDatumModel for NormalLocation {
    fn noise_dim(&self) -> usize {
        1
    }

    fn log_noise_density(&self, _theta: &[f64], phi: &[f64]) -> Option<f64> {
        Some(norm_ln_pdf(phi[0], 0.0, 1.0))
    }

    fn sample_noise(&self, _theta: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Option<()> {
        out[0] = rng.std_normal();
        Some(())
    }

    #[inline]
    fn observation_from_noise(&self, theta: &[f64], _state: Option<f64>, phi: &[f64], out: &mut [f64]) {
        out[0] = theta[0] + self.obs_sd * phi[0];
    }

    fn invert_observation(
        &self,
        theta: &[f64],
        _state: Option<f64>,
        y: &[f64],
        phi: &mut [f64],
    ) -> Option<()> {
        phi[0] = (y[0] - theta[0]) / self.obs_sd;
        Some(())
    }
}

/// `Y = sigma * phi`, `phi ~ N(0, 1)`: the scale family used to exhibit the
/// standard-ABC bias.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianScale {
    pub prior: Prior,
}

impl Default for GaussianScale {
    fn default() -> Self {
        Self {
            prior: Prior::Gamma {
                shape: 2.0,
                rate: 2.0,
            },
        }
    }
}

impl ModelSpec for GaussianScale {
    fn kind(&self) -> ModelKind {
        ModelKind::Iid
    }

    fn param_names(&self) -> Vec<String> {
        vec!["sigma".into()]
    }

    fn priors(&self) -> Vec<Prior> {
        vec![self.prior]
    }
}

impl DatumModel for GaussianScale {
    fn conditioning(&self, _theta: &[f64], _data: &ObservationSeries) -> Vec<f64> {
        Vec::new()
    }

    fn sample_datum(&self, theta: &[f64], _state: Option<f64>, rng: &mut RngStream, out: &mut [f64]) {
        out[0] = theta[0] * rng.std_normal();
    }

    fn simulate(
        &self,
        theta: &[f64],
        n: usize,
        rng: &mut RngStream,
    ) -> Result<(ObservationSeries, LatentPath)> {
        simulate_independent(self, theta, n, rng)
    }
}

impl TractableDensity for GaussianScale {
    fn log_density(&self, theta: &[f64], y: f64) -> f64 {
        norm_ln_pdf(y, 0.0, theta[0])
    }

    fn abc_log_density(&self, theta: &[f64], y: f64, eps: f64) -> Option<f64> {
        Some(abc_loglik_gaussian(0.0, theta[0], y, eps))
    }
}

impl CollapsedDatumModel for GaussianScale {
    fn noise_dim(&self) -> usize {
        1
    }

    fn log_noise_density(&self, _theta: &[f64], phi: &[f64]) -> Option<f64> {
        Some(norm_ln_pdf(phi[0], 0.0, 1.0))
    }

    fn sample_noise(&self, _theta: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Option<()> {
        out[0] = rng.std_normal();
        Some(())
    }

    fn observation_from_noise(&self, theta: &[f64], _state: Option<f64>, phi: &[f64], out: &mut [f64]) {
        out[0] = theta[0] * phi[0];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::simulate_iid;
    use std::f64::consts::PI;

    #[test]
    fn simulation_shapes_and_clt_band() {
        let m = NormalLocation::default();
        let mut rng = RngStream::new(1, 0);
        let one = simulate_iid(&m, &[0.0], 1, &mut rng).unwrap();
        assert_eq!((one.len(), one.dim()), (1, 1));

        let n = 1000;
        let y = simulate_iid(&m, &[3.0], n, &mut rng).unwrap();
        let mean = y.first_column().iter().sum::<f64>() / n as f64;
        assert!((mean - 3.0).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn simulation_replays() {
        let m = NormalLocation::default();
        let a = simulate_iid(&m, &[0.5], 50, &mut RngStream::new(4, 2)).unwrap();
        let b = simulate_iid(&m, &[0.5], 50, &mut RngStream::new(4, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prior_at_zero() {
        let m = NormalLocation::default();
        assert!((m.log_prior(&[0.0]) + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn conjugate_posterior_and_likelihood() {
        let m = NormalLocation::default();
        let y = ObservationSeries::univariate(vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let (mean, var) = m.exact_posterior(&y);
        assert!((mean - 1.75 / 5.0).abs() < 1e-15);
        assert!((var - 0.2).abs() < 1e-15);

        let theta = 0.3;
        let direct: f64 = y
            .first_column()
            .iter()
            .map(|v| (-(v - theta) * (v - theta) / 2.0).exp() / (2.0 * PI).sqrt())
            .product::<f64>()
            .ln();
        assert!((m.log_likelihood(theta, &y) - direct).abs() < 1e-12);
    }

    #[test]
    fn collapsed_inversion_reproduces_data() {
        let m = NormalLocation::default();
        let mut phi = [0.0];
        let mut out = [0.0];
        m.invert_observation(&[1.5], None, &[0.2], &mut phi).unwrap();
        m.observation_from_noise(&[1.5], None, &phi, &mut out);
        assert!((out[0] - 0.2).abs() < 1e-15);
    }
}

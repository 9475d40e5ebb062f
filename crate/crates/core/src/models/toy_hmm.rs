//! Linear-Gaussian toy HMM with a location parameter.
//!
//! ```text
//! X_1 = mu + init_sd * eta_1
//! X_n = X_{n-1} + trans_sd * eta_n
//! Y_n = X_n + obs_sd * phi_n
//! ```
//!
//! With `trans_sd = 0` the latent state is constant after the first step and
//! the ABC likelihood reduces to a one-dimensional integral, which makes the
//! model a quadrature oracle for the particle filters.

use crate::abc::{log_integrate, QuadratureGrid, QuadratureRule};
use crate::error::{Error, Result};
use crate::special::{norm_interval, norm_ln_pdf};
use crate::stochastics::RngStream;

use super::{CollapsedHmm, HiddenMarkovModel, ModelKind, ModelSpec, NoiseAccess, ObservationSeries, Prior};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianToyHmm {
    pub init_sd: f64,
    pub trans_sd: f64,
    pub obs_sd: f64,
    pub prior: Prior,
}

impl GaussianToyHmm {
    /// Constant latent state (`trans_sd = 0`).
    pub fn constant_latent(init_sd: f64, obs_sd: f64, prior: Prior) -> Self {
        Self {
            init_sd,
            trans_sd: 0.0,
            obs_sd,
            prior,
        }
    }

    fn require_constant(&self) -> Result<()> {
        if self.trans_sd != 0.0 {
            return Err(Error::capability(
                "quadrature oracle needs a constant latent state (trans_sd = 0)",
            ));
        }
        Ok(())
    }

    fn log_integrand(&self, mu: f64, data: &ObservationSeries, eps: f64, x: f64) -> f64 {
        let ln_2eps = (2.0 * eps).ln();
        norm_ln_pdf(x, mu, self.init_sd)
            + data
                .rows()
                .map(|y| {
                    let lo = (y[0] - x - eps) / self.obs_sd;
                    let hi = (y[0] - x + eps) / self.obs_sd;
                    norm_interval(lo, hi).ln() - ln_2eps
                })
                .sum::<f64>()
    }

    fn latent_grid(&self, mu: f64, points: usize) -> QuadratureGrid {
        QuadratureGrid {
            lower: mu - 12.0 * self.init_sd,
            upper: mu + 12.0 * self.init_sd,
            points,
            rule: QuadratureRule::Simpson,
        }
    }

    /// `ln p^eps_mu(y_{1:n})` by quadrature over the constant latent state.
    pub fn abc_log_likelihood_quadrature(
        &self,
        mu: f64,
        data: &ObservationSeries,
        eps: f64,
        points: usize,
    ) -> Result<f64> {
        self.require_constant()?;
        log_integrate(
            |x| self.log_integrand(mu, data, eps, x),
            &self.latent_grid(mu, points),
        )
    }

    /// ABC filter mean `E[X_n | hits at 1..n]` by quadrature.
    pub fn filter_mean_quadrature(
        &self,
        mu: f64,
        data: &ObservationSeries,
        eps: f64,
        points: usize,
    ) -> Result<f64> {
        self.require_constant()?;
        let grid = self.latent_grid(mu, points);
        let log_z = log_integrate(|x| self.log_integrand(mu, data, eps, x), &grid)?;
        // shift the latent variable so the first moment stays positive
        let shift = grid.lower;
        let log_m = log_integrate(
            |x| self.log_integrand(mu, data, eps, x) + (x - shift).ln(),
            &grid,
        )?;
        Ok((log_m - log_z).exp() + shift)
    }
}

impl ModelSpec for GaussianToyHmm {
    fn kind(&self) -> ModelKind {
        ModelKind::Hmm
    }

    fn param_names(&self) -> Vec<String> {
        vec!["mu".into()]
    }

    fn priors(&self) -> Vec<Prior> {
        vec![self.prior]
    }
}

impl HiddenMarkovModel for GaussianToyHmm {
    #[inline]
    fn sample_transition(&self, theta: &[f64], prev: Option<&[f64]>, rng: &mut RngStream, out: &mut [f64]) {
        out[0] = match prev {
            None => theta[0] + self.init_sd * rng.std_normal(),
            Some(p) if self.trans_sd == 0.0 => p[0],
            Some(p) => p[0] + self.trans_sd * rng.std_normal(),
        };
    }

    fn log_transition_density(&self, theta: &[f64], prev: Option<&[f64]>, next: &[f64]) -> Option<f64> {
        match prev {
            None => Some(norm_ln_pdf(next[0], theta[0], self.init_sd)),
            Some(_) if self.trans_sd == 0.0 => None,
            Some(p) => Some(norm_ln_pdf(next[0], p[0], self.trans_sd)),
        }
    }

    #[inline]
    fn sample_observation(&self, _theta: &[f64], x: &[f64], rng: &mut RngStream, out: &mut [f64]) {
        out[0] = x[0] + self.obs_sd * rng.std_normal();
    }
}

impl CollapsedHmm for GaussianToyHmm {
    fn latent_access(&self) -> NoiseAccess {
        NoiseAccess {
            sampler: true,
            density: true,
        }
    }

    fn obs_access(&self) -> NoiseAccess {
        NoiseAccess {
            sampler: true,
            density: true,
        }
    }

    fn latent_map(&self, theta: &[f64], prev: Option<&[f64]>, eta: &[f64], out: &mut [f64]) {
        out[0] = match prev {
            None => theta[0] + self.init_sd * eta[0],
            Some(p) => p[0] + self.trans_sd * eta[0],
        };
    }

    fn observation_map(&self, _theta: &[f64], x: &[f64], phi: &[f64], out: &mut [f64]) {
        out[0] = x[0] + self.obs_sd * phi[0];
    }

    fn sample_latent_noise(&self, _theta: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Option<()> {
        out[0] = rng.std_normal();
        Some(())
    }

    fn log_latent_noise_density(&self, _theta: &[f64], eta: &[f64]) -> Option<f64> {
        Some(norm_ln_pdf(eta[0], 0.0, 1.0))
    }

    fn sample_obs_noise(&self, _theta: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Option<()> {
        out[0] = rng.std_normal();
        Some(())
    }

    fn log_obs_noise_density(&self, _theta: &[f64], phi: &[f64]) -> Option<f64> {
        Some(norm_ln_pdf(phi[0], 0.0, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> GaussianToyHmm {
        GaussianToyHmm::constant_latent(1.0, 1.0, Prior::Normal { mean: 0.0, sd: 1.0 })
    }

    #[test]
    fn constant_latent_path() {
        let (_, x) = toy().simulate(&[0.3], 20, &mut RngStream::new(1, 0)).unwrap();
        assert!(x.states.iter().all(|&v| v == x.states[0]));
    }

    #[test]
    fn single_datum_quadrature_matches_closed_form() {
        // n = 1: X + noise ~ N(mu, 2), so p^eps(y) is the smoothed N(mu, 2) density
        let m = toy();
        let y = ObservationSeries::univariate(vec![0.8]).unwrap();
        let q = m.abc_log_likelihood_quadrature(0.2, &y, 0.5, 4001).unwrap();
        let exact = crate::abc::abc_loglik_gaussian(0.2, 2f64.sqrt(), 0.8, 0.5);
        assert!((q - exact).abs() < 1e-9, "{q} vs {exact}");
    }

    #[test]
    fn huge_tolerance_gives_flat_likelihood() {
        let m = toy();
        let y = ObservationSeries::univariate(vec![0.1, -0.4]).unwrap();
        let q = m.abc_log_likelihood_quadrature(0.0, &y, 1000.0, 2001).unwrap();
        assert!((q + 2.0 * 2000f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn oracle_requires_constant_latent() {
        let mut m = toy();
        m.trans_sd = 0.1;
        let y = ObservationSeries::univariate(vec![0.1]).unwrap();
        assert!(m.abc_log_likelihood_quadrature(0.0, &y, 0.5, 101).is_err());
    }
}

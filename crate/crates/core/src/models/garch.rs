//! GARCH(1,1) with alpha-stable innovations: an observation-driven model whose
//! likelihood cannot be evaluated.
//!
//! ```text
//! Y_{n+1} ~ S(alpha, beta_skew, scale = X_n, location = 0)
//! X_{n+1} = beta0 + beta1 X_n + beta2 Y_{n+1}^2
//! ```
//!
//! The parameter block is `theta = (beta0, beta1, beta2, x0)`; the starting
//! volatility `x0` is inferred like any other positive parameter.

use crate::error::{Error, Result};
use crate::stochastics::{sample_stable, RngStream, StableParams};

use super::{
    DatumModel, LatentPath, ModelKind, ModelSpec, ObservationSeries, Prior, SeriesKind,
};

#[derive(Clone, Debug, PartialEq)]
pub struct GarchStable {
    /// Shape of the innovations; scale and location are overwritten per step.
    pub stable: StableParams,
    /// `x0 ~ Ga(a, b)` (mean `a / b`).
    pub x0_prior: Prior,
    /// `beta_j ~ Ga(c, d)`.
    pub beta_prior: Prior,
}

impl GarchStable {
    /// Innovations `S(alpha, beta_skew)`, priors `x0 ~ Ga(a, b)` and `beta_j ~ Ga(c, d)`.
    pub fn new(alpha: f64, beta_skew: f64, a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let stable = StableParams::new(alpha, beta_skew, 1.0, 0.0)?;
        let x0_prior = Prior::Gamma { shape: a, rate: b };
        let beta_prior = Prior::Gamma { shape: c, rate: d };
        x0_prior.validate()?;
        beta_prior.validate()?;
        Ok(Self {
            stable,
            x0_prior,
            beta_prior,
        })
    }

    /// Priors `a = c = 2`, `b = d = 1/8` and innovations `S(1.5, 0)`.
    pub fn reference() -> Self {
        Self::new(1.5, 0.0, 2.0, 0.125, 2.0, 0.125).expect("reference settings are valid")
    }
}

impl ModelSpec for GarchStable {
    fn kind(&self) -> ModelKind {
        ModelKind::Odts
    }

    fn param_names(&self) -> Vec<String> {
        ["beta0", "beta1", "beta2", "x0"].map(String::from).to_vec()
    }

    fn priors(&self) -> Vec<Prior> {
        vec![self.beta_prior, self.beta_prior, self.beta_prior, self.x0_prior]
    }
}

impl DatumModel for GarchStable {
    fn conditioning(&self, theta: &[f64], data: &ObservationSeries) -> Vec<f64> {
        let (b0, b1, b2) = (theta[0], theta[1], theta[2]);
        let mut x = theta[3];
        data.rows()
            .map(|y| {
                let scale = x;
                x = b0 + b1 * x + b2 * y[0] * y[0];
                scale
            })
            .collect()
    }

    #[inline]
    fn sample_datum(&self, _theta: &[f64], state: Option<f64>, rng: &mut RngStream, out: &mut [f64]) {
        let scale = state.expect("GARCH data are conditioned on the volatility");
        out[0] = sample_stable(rng, &self.stable.with_scale(scale, 0.0));
    }

    fn simulate(
        &self,
        theta: &[f64],
        n: usize,
        rng: &mut RngStream,
    ) -> Result<(ObservationSeries, LatentPath)> {
        self.check_theta(theta)?;
        simulate_odts_garch(
            [theta[0], theta[1], theta[2]],
            theta[3],
            self.stable.alpha,
            self.stable.beta_skew,
            n,
            rng,
        )
    }
}

/// Simulate `n` steps of the stable GARCH recursion. Returns `Y_{1:n}` and `X_{1:n}`.
///
/// `beta1` and `beta2` may be zero (the volatility is then constant at `beta0`);
/// `beta0` and `x0` must be positive. The volatility enters as a scale, so
/// `X` grows quadratically after a large innovation and long paths at
/// non-small `beta2` overflow; that surfaces as a domain error.
pub fn simulate_odts_garch(
    betas: [f64; 3],
    x0: f64,
    alpha: f64,
    beta_skew: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<(ObservationSeries, LatentPath)> {
    let [b0, b1, b2] = betas;
    if !(b0 > 0.0) || !(b1 >= 0.0) || !(b2 >= 0.0) {
        return Err(Error::domain(format!(
            "GARCH coefficients must satisfy beta0 > 0, beta1, beta2 >= 0; got {betas:?}"
        )));
    }
    if !(x0 > 0.0) {
        return Err(Error::domain(format!("initial volatility must be positive, got {x0}")));
    }
    if n == 0 {
        return Err(Error::usage("series length must be at least 1"));
    }
    let shape = StableParams::new(alpha, beta_skew, 1.0, 0.0)?;
    let mut x = x0;
    let mut ys = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    for _ in 0..n {
        let y = sample_stable(rng, &shape.with_scale(x, 0.0));
        x = b0 + b1 * x + b2 * y * y;
        ys.push(y);
        xs.push(x);
    }
    Ok((ObservationSeries::new(ys, 1, SeriesKind::Raw)?, LatentPath::scalar(xs)))
}

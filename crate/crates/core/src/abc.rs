//! The ε-ball kernel and oracle evaluations of the per-datum ABC likelihood
//!
//! ```text
//! p^eps_theta(y_i) = ∫_{|u - y_i| < eps} p_theta(u) du / Vol(B_eps)
//! ```
//!
//! Closed forms exist for Gaussian models; everything else goes through
//! one-dimensional quadrature accumulated on the log scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ObservationSeries, ParameterVector, TractableDensity};
use crate::special::{ln_unit_ball_volume, norm_interval};

/// Indicator kernel on the open Euclidean ball of radius `eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbcKernel {
    eps: f64,
    dim: usize,
    log_ball_volume: f64,
}

impl AbcKernel {
    pub fn new(eps: f64, dim: usize) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::domain(format!("eps must be positive and finite, got {eps}")));
        }
        if dim == 0 {
            return Err(Error::domain("observation dimension must be at least 1"));
        }
        Ok(Self {
            eps,
            dim,
            log_ball_volume: ln_unit_ball_volume(dim) + dim as f64 * eps.ln(),
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `ln Vol(B_eps)` in `R^dim`.
    pub fn log_ball_volume(&self) -> f64 {
        self.log_ball_volume
    }

    /// `d(u, y) < eps`.
    pub fn hit(&self, u: &[f64], y: &[f64]) -> Result<bool> {
        if u.len() != self.dim || y.len() != self.dim {
            return Err(Error::usage(format!(
                "hit test on dimensions {} and {}, kernel has {}",
                u.len(),
                y.len(),
                self.dim
            )));
        }
        Ok(self.hits(u, y))
    }

    /// [`hit`](Self::hit) without the dimension check, for inner loops.
    #[inline]
    pub fn hits(&self, u: &[f64], y: &[f64]) -> bool {
        if self.dim == 1 {
            return (u[0] - y[0]).abs() < self.eps;
        }
        let d2: f64 = u.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        d2 < self.eps * self.eps
    }
}

/// Lebesgue measure of the Euclidean ball of radius `eps` in `R^dim`.
pub fn ball_volume(dim: usize, eps: f64) -> f64 {
    (ln_unit_ball_volume(dim) + dim as f64 * eps.ln()).exp()
}

/// `ln [(Φ((y-θ+ε)/σ) - Φ((y-θ-ε)/σ)) / 2ε]` for `Y ~ N(location, sigma²)`.
pub fn abc_loglik_gaussian(location: f64, sigma: f64, y: f64, eps: f64) -> f64 {
    let d = y - location;
    norm_interval((d - eps) / sigma, (d + eps) / sigma).ln() - (2.0 * eps).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureRule {
    Midpoint,
    /// Composite Simpson; needs an odd number of points.
    Simpson,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureGrid {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
    pub rule: QuadratureRule,
}

impl QuadratureGrid {
    pub fn new(lower: f64, upper: f64, points: usize, rule: QuadratureRule) -> Result<Self> {
        let g = Self {
            lower,
            upper,
            points,
            rule,
        };
        g.validate()?;
        Ok(g)
    }

    /// Simpson grid, with `points` bumped to the next odd number.
    pub fn simpson(lower: f64, upper: f64, points: usize) -> Result<Self> {
        Self::new(lower, upper, points | 1, QuadratureRule::Simpson)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower < self.upper) || !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(Error::domain(format!(
                "quadrature bounds must satisfy lower < upper, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        if self.points < 2 {
            return Err(Error::domain("quadrature needs at least 2 points"));
        }
        if self.rule == QuadratureRule::Simpson && self.points.is_multiple_of(2) {
            return Err(Error::domain(format!(
                "Simpson's rule needs an odd number of points, got {}",
                self.points
            )));
        }
        Ok(())
    }

    /// Same rule and resolution on another interval.
    pub fn on(&self, lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            ..*self
        }
    }

    /// Nodes and weights.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.points;
        let (a, b) = (self.lower, self.upper);
        (0..n).map(move |k| match self.rule {
            QuadratureRule::Midpoint => {
                let h = (b - a) / n as f64;
                (a + (k as f64 + 0.5) * h, h)
            }
            QuadratureRule::Simpson => {
                let h = (b - a) / (n - 1) as f64;
                let w = if k == 0 || k == n - 1 {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                (a + k as f64 * h, w * h / 3.0)
            }
        })
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        self.validate()?;
        Ok(self.nodes().map(|(x, w)| w * f(x)).sum())
    }
}

/// `ln ∫ exp(log_f(x)) dx` over the grid without underflow.
pub fn log_integrate(log_f: impl Fn(f64) -> f64, grid: &QuadratureGrid) -> Result<f64> {
    grid.validate()?;
    let terms: Vec<(f64, f64)> = grid.nodes().map(|(x, w)| (log_f(x), w)).collect();
    let m = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Ok(m);
    }
    if m.is_nan() || m == f64::INFINITY {
        return Err(Error::domain("log-integrand is not finite"));
    }
    let s: f64 = terms.iter().map(|&(l, w)| w * (l - m).exp()).sum();
    Ok(m + s.ln())
}

/// Per-datum `ln p^eps_theta(y)` by quadrature of the model density over
/// `(y - eps, y + eps)`.
pub fn abc_log_density_quadrature<M: TractableDensity + ?Sized>(
    model: &M,
    theta: &[f64],
    y: f64,
    eps: f64,
    points: usize,
    rule: QuadratureRule,
) -> Result<f64> {
    let grid = QuadratureGrid::new(y - eps, y + eps, points, rule)?;
    Ok(log_integrate(|u| model.log_density(theta, u), &grid)? - (2.0 * eps).ln())
}

/// `Σ_i ln p^eps_theta(y_i)` by quadrature, for univariate oracle models.
///
/// The accuracy of the rule is the caller's responsibility.
pub fn abc_loglik_quadrature<M: TractableDensity + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &ObservationSeries,
    eps: f64,
    points: usize,
    rule: QuadratureRule,
) -> Result<f64> {
    check_oracle(model.obs_dim(), data.dim(), eps)?;
    data.rows()
        .map(|y| abc_log_density_quadrature(model, theta, y[0], eps, points, rule))
        .sum()
}

fn check_oracle(model_dim: usize, data_dim: usize, eps: f64) -> Result<()> {
    if model_dim != 1 || data_dim != 1 {
        return Err(Error::capability("quadrature oracles are univariate"));
    }
    if !(eps > 0.0) {
        return Err(Error::domain(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

/// Closed form when the model has one, Simpson quadrature otherwise.
fn abc_log_density_any<M: TractableDensity + ?Sized>(
    model: &M,
    theta: &[f64],
    y: f64,
    eps: f64,
    points: usize,
) -> Result<f64> {
    match model.abc_log_density(theta, y, eps) {
        Some(v) => Ok(v),
        None => abc_log_density_quadrature(model, theta, y, eps, points | 1, QuadratureRule::Simpson),
    }
}

/// Full-series ABC log-likelihood, closed form when available.
pub fn abc_loglik<M: TractableDensity + ?Sized>(
    model: &M,
    theta: &[f64],
    data: &ObservationSeries,
    eps: f64,
    points: usize,
) -> Result<f64> {
    check_oracle(model.obs_dim(), data.dim(), eps)?;
    data.rows()
        .map(|y| abc_log_density_any(model, theta, y[0], eps, points))
        .sum()
}

/// Result of a grid maximisation over a scalar parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct GridArgmax {
    pub value: ParameterVector,
    pub objective: f64,
    /// The maximiser sits on the first or last grid point.
    pub on_boundary: bool,
}

fn grid_argmax<M: TractableDensity + ?Sized>(
    model: &M,
    theta_grid: &[f64],
    objective: impl Fn(f64) -> Result<f64>,
) -> Result<GridArgmax> {
    if model.dim() != 1 {
        return Err(Error::capability("grid oracles need a scalar parameter"));
    }
    if theta_grid.is_empty() {
        return Err(Error::usage("empty parameter grid"));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (k, &t) in theta_grid.iter().enumerate() {
        let v = objective(t)?;
        if v > best.1 {
            best = (k, v);
        }
    }
    if best.1 == f64::NEG_INFINITY {
        return Err(Error::domain("objective is -inf on the whole grid"));
    }
    Ok(GridArgmax {
        value: model.parameters(&[theta_grid[best.0]])?,
        objective: best.1,
        on_boundary: best.0 == 0 || best.0 + 1 == theta_grid.len(),
    })
}

/// `argmax_theta ∫ ln p^eps_theta(y) p_{theta*}(y) dy` over `theta_grid`, with
/// the outer integral taken on `y_grid`.
pub fn theta_star_eps_oracle<M: TractableDensity + ?Sized>(
    model: &M,
    theta_star: &[f64],
    eps: f64,
    theta_grid: &[f64],
    y_grid: &QuadratureGrid,
    inner_points: usize,
) -> Result<GridArgmax> {
    check_oracle(model.obs_dim(), 1, eps)?;
    y_grid.validate()?;
    let outer: Vec<(f64, f64)> = y_grid
        .nodes()
        .map(|(y, w)| (y, w * model.log_density(theta_star, y).exp()))
        .filter(|&(_, w)| w > 0.0)
        .collect();
    grid_argmax(model, theta_grid, |t| {
        outer.iter().try_fold(0.0, |acc, &(y, w)| {
            Ok(acc + w * abc_log_density_any(model, &[t], y, eps, inner_points)?)
        })
    })
}

/// Grid maximiser of the ABC log-likelihood of `data`. Applied to perturbed
/// data this is the noisy-ABC MLE.
pub fn abc_mle_grid<M: TractableDensity + ?Sized>(
    model: &M,
    data: &ObservationSeries,
    eps: f64,
    theta_grid: &[f64],
    points: usize,
) -> Result<GridArgmax> {
    grid_argmax(model, theta_grid, |t| abc_loglik(model, &[t], data, eps, points))
}

/// Posterior mean and variance of a scalar `theta` under
/// `pi(theta) ∏ p^eps_theta(y_i)` by quadrature over `theta_grid`.
pub fn abc_posterior_moments<M: TractableDensity + ?Sized>(
    model: &M,
    data: &ObservationSeries,
    eps: f64,
    theta_grid: &QuadratureGrid,
    inner_points: usize,
) -> Result<(f64, f64)> {
    if model.dim() != 1 {
        return Err(Error::capability("posterior quadrature needs a scalar parameter"));
    }
    check_oracle(model.obs_dim(), data.dim(), eps)?;
    theta_grid.validate()?;
    let logs: Vec<(f64, f64, f64)> = theta_grid
        .nodes()
        .map(|(t, w)| {
            let lp = model.log_prior(&[t]);
            let ll = if lp == f64::NEG_INFINITY {
                Ok(0.0)
            } else {
                abc_loglik(model, &[t], data, eps, inner_points)
            };
            ll.map(|ll| (t, w, lp + ll))
        })
        .collect::<Result<_>>()?;
    let m = logs.iter().map(|l| l.2).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Err(Error::domain("posterior vanishes on the grid"));
    }
    let (mut z, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for &(t, w, l) in &logs {
        let p = w * (l - m).exp();
        z += p;
        s1 += p * t;
        s2 += p * t * t;
    }
    let mean = s1 / z;
    Ok((mean, (s2 / z - mean * mean).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GaussianScale, NormalLocation, Prior};
    use crate::special::{norm_cdf, LN_SQRT_2PI};
    use std::f64::consts::PI;

    #[test]
    fn ball_volume_examples() {
        assert!((ball_volume(1, 0.5) - 1.0).abs() < 1e-14);
        assert!((ball_volume(2, 1.0) - PI).abs() < 1e-14);
        assert!((ball_volume(3, 1.0) - 4.0 * PI / 3.0).abs() < 1e-13);
        let k = AbcKernel::new(0.25, 2).unwrap();
        assert!((k.log_ball_volume() - (PI * 0.0625).ln()).abs() < 1e-14);
        assert!(AbcKernel::new(0.0, 1).is_err());
        assert!(AbcKernel::new(-1.0, 1).is_err());
    }

    #[test]
    fn hit_examples() {
        let k1 = AbcKernel::new(10.0, 1).unwrap();
        assert!(k1.hit(&[3.0], &[3.0]).unwrap());
        assert!(!k1.hit(&[0.0], &[10.0]).unwrap());
        let k2 = AbcKernel::new(0.6, 2).unwrap();
        assert!(k2.hit(&[0.3, 0.4], &[0.0, 0.0]).unwrap());
        assert!(matches!(k2.hit(&[0.3], &[0.0, 0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn gaussian_closed_form_examples() {
        let v = abc_loglik_gaussian(0.0, 1.0, 0.0, 10.0);
        let oracle = ((2.0 * norm_cdf(10.0) - 1.0) / 20.0).ln();
        assert!((v - oracle).abs() < 1e-14);
        assert!((v - 0.05f64.ln()).abs() < 1e-12);

        let small = abc_loglik_gaussian(0.0, 1.0, 0.0, 1e-4);
        assert!((small + LN_SQRT_2PI).abs() < 1e-6);

        for &(t, y) in &[(0.3, -1.2), (2.0, 5.5), (-4.0, -3.9)] {
            let a = abc_loglik_gaussian(t, 1.3, y, 0.7);
            let b = abc_loglik_gaussian(y, 1.3, t, 0.7);
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn quadrature_agrees_with_closed_form() {
        let m = NormalLocation::default();
        let y = ObservationSeries::univariate(vec![0.4, -1.7, 2.9]).unwrap();
        for &eps in &[0.01, 0.5, 3.0] {
            let q = abc_loglik_quadrature(&m, &[0.2], &y, eps, 10_001, QuadratureRule::Simpson).unwrap();
            let exact = m.abc_log_likelihood(0.2, &y, eps);
            assert!((q - exact).abs() < 1e-8, "eps {eps}: {q} vs {exact}");
        }
    }

    #[test]
    fn quadrature_covering_all_mass_is_flat() {
        let m = NormalLocation::default();
        let y = ObservationSeries::univariate(vec![0.1]).unwrap();
        // ball (-999.9, 1000.1) holds the whole density; Simpson must resolve the
        // unit-width bump on a 2000-wide interval
        let v = abc_loglik_quadrature(&m, &[0.0], &y, 1000.0, 200_001, QuadratureRule::Simpson).unwrap();
        assert!((v + 2000f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn quadrature_factorises() {
        let m = GaussianScale::default();
        let both = ObservationSeries::univariate(vec![0.3, -2.0]).unwrap();
        let a = ObservationSeries::univariate(vec![0.3]).unwrap();
        let b = ObservationSeries::univariate(vec![-2.0]).unwrap();
        let f = |d: &ObservationSeries| abc_loglik_quadrature(&m, &[0.8], d, 0.4, 1001, QuadratureRule::Simpson).unwrap();
        assert_eq!(f(&both), f(&a) + f(&b));
    }

    #[test]
    fn smoothed_density_integrates_to_one() {
        let grid = QuadratureGrid::simpson(-15.0, 15.0, 30_001).unwrap();
        let total = grid.integrate(|y| abc_loglik_gaussian(0.5, 1.0, y, 0.8).exp()).unwrap();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn jensen_lower_bound() {
        let m = NormalLocation::default();
        for &(y, eps) in &[(0.0, 0.5), (2.5, 1.0), (-1.0, 3.0)] {
            let lhs = abc_loglik_gaussian(0.0, 1.0, y, eps);
            let g = QuadratureGrid::simpson(y - eps, y + eps, 2001).unwrap();
            let rhs = g.integrate(|u| m.log_density(&[0.0], u)).unwrap() / (2.0 * eps);
            assert!(lhs >= rhs, "{lhs} < {rhs}");
        }
    }

    #[test]
    fn midpoint_and_simpson_rules() {
        let g = QuadratureGrid::new(0.0, 1.0, 1000, QuadratureRule::Midpoint).unwrap();
        assert!((g.integrate(|x| x * x).unwrap() - 1.0 / 3.0).abs() < 1e-6);
        let s = QuadratureGrid::new(0.0, 1.0, 3, QuadratureRule::Simpson).unwrap();
        assert!((s.integrate(|x| x * x * x).unwrap() - 0.25).abs() < 1e-15);
        assert!(QuadratureGrid::new(0.0, 1.0, 4, QuadratureRule::Simpson).is_err());
        assert!(QuadratureGrid::new(1.0, 1.0, 5, QuadratureRule::Midpoint).is_err());
    }

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let k = ((hi - lo) / step).round() as usize;
        (0..=k).map(|i| lo + i as f64 * step).collect()
    }

    #[test]
    fn location_oracle_is_unbiased() {
        let m = NormalLocation::default();
        let yg = QuadratureGrid::simpson(-9.0, 11.0, 2001).unwrap();
        for &eps in &[0.1, 1.0, 3.0] {
            let r = theta_star_eps_oracle(&m, &[1.0], eps, &grid(0.5, 1.5, 0.01), &yg, 101).unwrap();
            assert!((r.value.values[0] - 1.0).abs() < 1e-9);
            assert!(!r.on_boundary);
        }
    }

    #[test]
    fn scale_oracle_shrinks_at_moderate_eps() {
        let m = GaussianScale::default();
        let yg = QuadratureGrid::simpson(-10.0, 10.0, 2001).unwrap();
        let r = theta_star_eps_oracle(&m, &[1.0], 0.5, &grid(0.8, 1.2, 0.002), &yg, 101).unwrap();
        assert!(r.value.values[0] < 1.0);
        assert!(!r.on_boundary);

        let step = 0.002;
        let r = theta_star_eps_oracle(&m, &[1.0], 1e-3, &grid(0.9, 1.1, step), &yg, 101).unwrap();
        assert!((r.value.values[0] - 1.0).abs() < step);
    }

    #[test]
    fn boundary_argmax_is_flagged() {
        let m = NormalLocation::default();
        let yg = QuadratureGrid::simpson(-9.0, 11.0, 501).unwrap();
        let r = theta_star_eps_oracle(&m, &[1.0], 0.5, &grid(2.0, 3.0, 0.1), &yg, 51).unwrap();
        assert!(r.on_boundary);
        assert!((r.value.values[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_moments_converge_to_conjugate() {
        let m = NormalLocation::default();
        let y = ObservationSeries::univariate(vec![0.3, 1.1, -0.4, 0.9, 1.6]).unwrap();
        let (exact_mean, exact_var) = m.exact_posterior(&y);
        let g = QuadratureGrid::simpson(-8.0, 8.0, 8001).unwrap();
        let (mean, var) = abc_posterior_moments(&m, &y, 1e-3, &g, 11).unwrap();
        assert!((mean - exact_mean).abs() < 1e-6);
        assert!((var - exact_var).abs() < 1e-6);

        let scale = GaussianScale {
            prior: Prior::Gamma { shape: 2.0, rate: 2.0 },
        };
        let g = QuadratureGrid::simpson(1e-6, 10.0, 2001).unwrap();
        let (mean, _) = abc_posterior_moments(&scale, &y, 0.2, &g, 11).unwrap();
        assert!(mean > 0.0 && mean.is_finite());
    }
}

//! Seedable random streams and the distributions every sampler draws from.
//!
//! All randomness flows through [`RngStream`]: a ChaCha8 generator keyed by a
//! 64-bit seed and a 64-bit stream index. ChaCha is counter-based, so distinct
//! stream indices under one seed give independent, non-overlapping sequences,
//! which is what lets chains and replicates own their own substreams. The
//! generator is pinned to `rand_chacha` 0.9 (`ChaCha8Rng`); replays are
//! bit-identical for a fixed crate version.
//!
//! The alpha-stable sampler uses the Chambers–Mallows–Stuck transform in the
//! "type 1" parameterization (Samorodnitsky–Taqqu `S(alpha, beta, scale,
//! location)`): for `alpha = 2, beta = 0` the law is `Normal(location,
//! 2 scale^2)` and for `alpha = 1, beta = 0` it is Cauchy with the given scale.
//! Stable densities are deliberately not provided.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, StandardNormal};

use crate::error::{Error, Result};

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Streams are plain values: clone one to replay it, move it to another
/// thread to use it there. A single stream must not be shared between threads.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream under the same seed; `(seed, id)` fully determines it.
    pub fn substream(&self, stream_id: u64) -> RngStream {
        RngStream::new(self.seed, stream_id)
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn open01(&mut self) -> f64 {
        Open01.sample(&mut self.inner)
    }

    /// Uniform draw on [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    #[inline]
    pub fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.inner)
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Parameters of an alpha-stable law in canonical `(alpha, beta_skew, scale, location)` order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StableParams {
    pub alpha: f64,
    pub beta_skew: f64,
    pub scale: f64,
    pub location: f64,
}

impl StableParams {
    pub fn new(alpha: f64, beta_skew: f64, scale: f64, location: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta_skew,
            scale,
            location,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::domain(format!(
                "stable alpha must lie in (0, 2], got {}",
                self.alpha
            )));
        }
        if !(self.beta_skew.abs() <= 1.0) {
            return Err(Error::domain(format!(
                "stable beta must lie in [-1, 1], got {}",
                self.beta_skew
            )));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::domain(format!(
                "stable scale must be positive, got {}",
                self.scale
            )));
        }
        if !self.location.is_finite() {
            return Err(Error::domain("stable location must be finite"));
        }
        Ok(())
    }

    /// Same shape with a different scale and location.
    pub fn with_scale(&self, scale: f64, location: f64) -> Self {
        Self {
            scale,
            location,
            ..*self
        }
    }
}

pub fn sample_gaussian(rng: &mut RngStream, mean: f64, sd: f64) -> Result<f64> {
    if !(sd > 0.0) {
        return Err(Error::domain(format!("normal sd must be positive, got {sd}")));
    }
    Ok(mean + sd * rng.std_normal())
}

/// Gamma draw with mean `shape / rate`.
///
/// Shapes below one are boosted: draw with `shape + 1` and multiply by
/// `U^(1/shape)` (this is what `rand_distr::Gamma` does internally).
pub fn sample_gamma(rng: &mut RngStream, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) {
        return Err(Error::domain(format!(
            "gamma shape and rate must be positive, got ({shape}, {rate})"
        )));
    }
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::domain(e.to_string()))?;
    Ok(g.sample(rng))
}

/// Inverse-gamma draw with mode `scale / (shape + 1)`: the reciprocal of a
/// Gamma(shape, rate = scale) variate. For `shape <= 2` the variance is infinite.
pub fn sample_inverse_gamma(rng: &mut RngStream, shape: f64, scale: f64) -> Result<f64> {
    if !(shape > 0.0) || !(scale > 0.0) {
        return Err(Error::domain(format!(
            "inverse gamma shape and scale must be positive, got ({shape}, {scale})"
        )));
    }
    Ok(1.0 / sample_gamma(rng, shape, scale)?)
}

/// Chambers–Mallows–Stuck draw from `S(alpha, beta, scale, location)` (type 1).
///
/// Consumes exactly one open uniform and one standard exponential.
pub fn sample_stable(rng: &mut RngStream, p: &StableParams) -> f64 {
    let v = PI * (rng.open01() - 0.5);
    let w = rng.exp1();
    p.scale * standard_stable(p.alpha, p.beta_skew, v, w) + stable_shift(p)
}

fn stable_shift(p: &StableParams) -> f64 {
    if p.alpha == 1.0 {
        p.location + 2.0 / PI * p.beta_skew * p.scale * p.scale.ln()
    } else {
        p.location
    }
}

fn standard_stable(alpha: f64, beta: f64, v: f64, w: f64) -> f64 {
    if alpha == 1.0 {
        let b = FRAC_PI_2 + beta * v;
        (b * v.tan() - beta * ((FRAC_PI_2 * w * v.cos()) / b).ln()) / FRAC_PI_2
    } else {
        let zeta = -beta * (FRAC_PI_2 * alpha).tan();
        let xi = (-zeta).atan() / alpha;
        let shifted = alpha * (v + xi);
        (1.0 + zeta * zeta).powf(0.5 / alpha) * shifted.sin() / v.cos().powf(1.0 / alpha)
            * ((v - shifted).cos() / w).powf((1.0 - alpha) / alpha)
    }
}

/// Uniform draw on the open Euclidean ball of radius `eps` around `center`.
///
/// `d = 1` draws `center + eps * (2U - 1)`; higher dimensions reject from the
/// bounding cube. Every draw is re-checked against the strict inequality so
/// floating-point rounding can never place a point on the boundary.
pub fn sample_uniform_ball(rng: &mut RngStream, center: &[f64], eps: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; center.len()];
    fill_uniform_ball(rng, center, eps, &mut out)?;
    Ok(out)
}

pub fn fill_uniform_ball(
    rng: &mut RngStream,
    center: &[f64],
    eps: f64,
    out: &mut [f64],
) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::domain(format!("ball radius must be positive, got {eps}")));
    }
    if center.is_empty() || out.len() != center.len() {
        return Err(Error::usage("ball center must be non-empty and match the output"));
    }
    loop {
        for (o, &c) in out.iter_mut().zip(center) {
            *o = c + eps * (2.0 * rng.open01() - 1.0);
        }
        let d2: f64 = out
            .iter()
            .zip(center)
            .map(|(o, c)| (o - c) * (o - c))
            .sum();
        if d2.sqrt() < eps {
            return Ok(());
        }
    }
}

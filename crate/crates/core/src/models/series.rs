use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastics::{fill_uniform_ball, RngStream};

/// Whether a series holds the observed data or its noisy-ABC perturbation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    Raw,
    Perturbed,
}

/// An `n x d_y` observation matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSeries {
    data: Vec<f64>,
    dim: usize,
    kind: SeriesKind,
}

impl ObservationSeries {
    pub fn new(data: Vec<f64>, dim: usize, kind: SeriesKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::usage("observation dimension must be at least 1"));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::usage(format!(
                "series of {} values cannot be split into rows of {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite observation at row {}",
                i / dim
            )));
        }
        Ok(Self { data, dim, kind })
    }

    /// Scalar series (`d_y = 1`).
    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::new(values, 1, SeriesKind::Raw)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// First coordinate of every row.
    pub fn first_column(&self) -> Vec<f64> {
        self.rows().map(|r| r[0]).collect()
    }
}

/// Noisy-ABC perturbation: every `z_i` uniform on the open eps-ball around `y_i`.
pub fn perturb_noisy(
    y: &ObservationSeries,
    eps: f64,
    rng: &mut RngStream,
) -> Result<ObservationSeries> {
    if y.kind == SeriesKind::Perturbed {
        return Err(Error::usage("series is already perturbed"));
    }
    let mut out = vec![0.0; y.data.len()];
    for (row, z) in y.rows().zip(out.chunks_exact_mut(y.dim)) {
        fill_uniform_ball(rng, row, eps, z)?;
    }
    ObservationSeries::new(out, y.dim, SeriesKind::Perturbed)
}

/// Latent states aligned with an observation series (`n x d_x`), empty for i.i.d. models.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LatentPath {
    pub states: Vec<f64>,
    pub dim: usize,
}

impl LatentPath {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn scalar(states: Vec<f64>) -> Self {
        Self { states, dim: 1 }
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.states.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Driving noise of the collapsed representation: `phi_{1:n}` and, for HMMs, `eta_{1:n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollapsedState {
    pub obs_noise: Vec<f64>,
    pub obs_noise_dim: usize,
    pub latent_noise: Vec<f64>,
    pub latent_noise_dim: usize,
}

impl CollapsedState {
    pub fn obs(&self, i: usize) -> &[f64] {
        &self.obs_noise[i * self.obs_noise_dim..(i + 1) * self.obs_noise_dim]
    }

    pub fn obs_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.obs_noise[i * self.obs_noise_dim..(i + 1) * self.obs_noise_dim]
    }

    pub fn len(&self) -> usize {
        self.obs_noise.len() / self.obs_noise_dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.obs_noise.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_series() {
        assert!(ObservationSeries::univariate(vec![]).is_err());
        assert!(ObservationSeries::univariate(vec![1.0, f64::NAN]).is_err());
        assert!(ObservationSeries::new(vec![1.0, 2.0, 3.0], 2, SeriesKind::Raw).is_err());
        let s = ObservationSeries::new(vec![1.0, 2.0, 3.0, 4.0], 2, SeriesKind::Raw).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn perturbation_stays_in_ball_and_cannot_repeat() {
        let y = ObservationSeries::univariate((0..500).map(|i| i as f64 * 0.1).collect()).unwrap();
        let mut rng = RngStream::new(11, 0);
        let z = perturb_noisy(&y, 0.3, &mut rng).unwrap();
        assert_eq!(z.kind(), SeriesKind::Perturbed);
        for (a, b) in y.rows().zip(z.rows()) {
            assert!((a[0] - b[0]).abs() < 0.3);
        }
        assert!(perturb_noisy(&z, 0.3, &mut rng).is_err());

        let tiny = perturb_noisy(&y, 1e-12, &mut rng).unwrap();
        for (a, b) in y.rows().zip(tiny.rows()) {
            assert!((a[0] - b[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn perturbation_is_centered() {
        let n = 30_000;
        let y = ObservationSeries::univariate(vec![2.0; n]).unwrap();
        let z = perturb_noisy(&y, 1.0, &mut RngStream::new(12, 0)).unwrap();
        let mean: f64 = z.rows().map(|r| r[0] - 2.0).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 / (3.0 * n as f64).sqrt(), "mean {mean}");
    }
}

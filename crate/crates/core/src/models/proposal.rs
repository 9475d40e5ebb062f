//! Random-walk style proposals on the parameter vector.

use serde::{Deserialize, Serialize};

use crate::special::gamma_ln_pdf;
use crate::stochastics::{sample_gamma, RngStream};

/// How one component of theta moves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "move", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Move {
    /// Symmetric normal random walk; log q-ratio is zero.
    RandomWalk { scale: f64 },
    /// Normal random walk on `ln(theta)`; contributes `ln(theta' / theta)`.
    LogRandomWalk { scale: f64 },
    /// Gamma proposal with mean equal to the current value and standard
    /// deviation `cv * current`.
    GammaMoment { cv: f64 },
}

impl Move {
    fn propose(&self, x: f64, rng: &mut RngStream) -> (f64, f64) {
        match *self {
            Move::RandomWalk { scale } => {
                if scale == 0.0 {
                    return (x, 0.0);
                }
                (x + scale * rng.std_normal(), 0.0)
            }
            Move::LogRandomWalk { scale } => {
                if scale == 0.0 {
                    return (x, 0.0);
                }
                let y = x * (scale * rng.std_normal()).exp();
                (y, y.ln() - x.ln())
            }
            Move::GammaMoment { cv } => {
                if cv == 0.0 {
                    return (x, 0.0);
                }
                let shape = 1.0 / (cv * cv);
                let y = sample_gamma(rng, shape, shape / x).expect("positive current value");
                let ratio = gamma_ln_pdf(x, shape, shape / y) - gamma_ln_pdf(y, shape, shape / x);
                (y, ratio)
            }
        }
    }

    /// Scale knob of this move, whatever its family.
    pub fn scale(&self) -> f64 {
        match *self {
            Move::RandomWalk { scale } | Move::LogRandomWalk { scale } => scale,
            Move::GammaMoment { cv } => cv,
        }
    }
}

/// Component-wise proposal `Q(. | theta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub moves: Vec<Move>,
}

impl Proposal {
    pub fn new(moves: Vec<Move>) -> Self {
        Self { moves }
    }

    pub fn random_walk(scales: &[f64]) -> Self {
        Self::new(scales.iter().map(|&scale| Move::RandomWalk { scale }).collect())
    }

    pub fn log_random_walk(scales: &[f64]) -> Self {
        Self::new(
            scales
                .iter()
                .map(|&scale| Move::LogRandomWalk { scale })
                .collect(),
        )
    }

    /// Draw `theta'` and return it with `ln q(theta | theta') - ln q(theta' | theta)`.
    ///
    /// Components with a zero scale stay put and consume no randomness.
    pub fn propose(&self, theta: &[f64], rng: &mut RngStream) -> (Vec<f64>, f64) {
        assert_eq!(theta.len(), self.moves.len(), "proposal/theta dimension mismatch");
        let mut log_q_ratio = 0.0;
        let next = theta
            .iter()
            .zip(&self.moves)
            .map(|(&x, m)| {
                let (y, r) = m.propose(x, rng);
                log_q_ratio += r;
                y
            })
            .collect();
        (next, log_q_ratio)
    }
}

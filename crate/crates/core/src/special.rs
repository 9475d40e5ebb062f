//! Normal-distribution helpers accurate in both tails.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::{erf, erfc};

pub use statrs::function::gamma::ln_gamma;

/// `0.5 * ln(2π)`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal upper tail `1 - Φ(x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// `Φ(b) - Φ(a)` for `a <= b`, evaluated on whichever tail keeps precision.
pub fn norm_interval(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        norm_sf(a) - norm_sf(b)
    } else if b <= 0.0 {
        norm_cdf(b) - norm_cdf(a)
    } else {
        0.5 * (erf(b / SQRT_2) + erf(-a / SQRT_2))
    }
}

pub fn norm_ln_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

pub fn norm_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    norm_ln_pdf(x, mean, sd).exp()
}

/// Log density of Gamma(shape, rate).
pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log density of InverseGamma(shape, scale); mode is `scale / (shape + 1)`.
pub fn inv_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Volume of the unit ball in `dim` dimensions, on the log scale.
pub fn ln_unit_ball_volume(dim: usize) -> f64 {
    let d = dim as f64;
    0.5 * d * PI.ln() - ln_gamma(0.5 * d + 1.0)
}

/// Numerically stable `ln(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_tails_are_accurate() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        // Φ(-10) = 7.61985302416052606...e-24
        let lo = norm_cdf(-10.0);
        assert!((lo / 7.619_853_024_160_526e-24 - 1.0).abs() < 1e-9);
        assert!((norm_sf(10.0) - lo).abs() < 1e-36);
    }

    #[test]
    fn interval_matches_direct_difference_in_the_body() {
        for &(a, b) in &[(-1.0, 1.0), (-3.0, -0.5), (0.2, 2.5), (-0.1, 0.1)] {
            let direct = norm_cdf(b) - norm_cdf(a);
            assert!((norm_interval(a, b) - direct).abs() < 1e-15);
        }
        // far tail keeps relative precision
        let tail = norm_interval(9.0, 9.5);
        assert!(tail > 0.0 && tail < norm_sf(9.0));
    }

    #[test]
    fn ball_volumes() {
        assert!((ln_unit_ball_volume(1) - 2f64.ln()).abs() < 1e-14);
        assert!((ln_unit_ball_volume(2) - PI.ln()).abs() < 1e-14);
        assert!((ln_unit_ball_volume(3) - (4.0 * PI / 3.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn log_add_exp_handles_neg_infinity() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 1.5), 1.5);
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
    }
}

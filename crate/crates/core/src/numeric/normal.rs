//! Univariate standard normal distribution functions.

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

pub const LOG_PROB_FLOOR: f64 = 1e-300;

pub(crate) const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF. NaN is rejected.
pub fn normal_cdf(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::domain("normal_cdf of NaN"));
    }
    Ok(phi_cdf(x))
}

/// Unchecked standard normal CDF for internal hot loops.
#[inline]
pub(crate) fn phi_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
    }
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn log_normal_pdf(x: f64) -> f64 {
    -LN_SQRT_2PI - 0.5 * x * x
}

/// `log(max(p, 1e-300))`.
#[inline]
pub fn floored_ln(p: f64) -> f64 {
    p.max(LOG_PROB_FLOOR).ln()
}

/// Floored `log Φ(x)`.
#[inline]
pub fn log_normal_cdf(x: f64) -> f64 {
    floored_ln(phi_cdf(x))
}

/// `φ(x)/Φ(x)`, the derivative of `log Φ(x)`, stable in the far left tail.
pub fn inverse_mills(x: f64) -> f64 {
    if x > -30.0 {
        return normal_pdf(x) / phi_cdf(x);
    }
    // Continued-fraction tail of Φ(x)/φ(x) for large negative x.
    let z = -x;
    let mut frac = 0.0;
    for k in (1..=40).rev() {
        frac = k as f64 / (z + frac);
    }
    z + frac
}

/// Standard normal quantile. Accurate in both tails.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::domain(format!("normal_quantile of {p}")));
    }
    Ok(quantile_unchecked(p))
}

#[inline]
pub(crate) fn quantile_unchecked(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
        if !x.is_finite() {
            return x;
        }
        // One Halley step against the accurate CDF.
        let pdf = normal_pdf(x);
        if pdf <= 0.0 {
            return x;
        }
        let r = (phi_cdf(x) - p) / pdf;
        x - r / (1.0 + 0.5 * x * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Φ by series for |x| small and by continued fraction in the tail.
    fn oracle_cdf(x: f64) -> f64 {
        if x.abs() < 3.0 {
            // Φ(x) = 1/2 + φ(x) Σ x^(2k+1)/(1·3·…·(2k+1))
            let mut term = x;
            let mut sum = x;
            for k in 1..200 {
                term *= x * x / (2 * k + 1) as f64;
                sum += term;
            }
            0.5 + normal_pdf(x) * sum
        } else {
            let z = x.abs();
            let mut frac = 0.0;
            for k in (1..=200).rev() {
                frac = k as f64 / (z + frac);
            }
            let tail = normal_pdf(z) / (z + frac);
            if x > 0.0 {
                1.0 - tail
            } else {
                tail
            }
        }
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(normal_cdf(0.0).unwrap(), 0.5);
        assert_eq!(normal_cdf(f64::NEG_INFINITY).unwrap(), 0.0);
        assert_eq!(normal_cdf(f64::INFINITY).unwrap(), 1.0);
        assert!((normal_cdf(1.96).unwrap() - 0.975_002_104_851_780).abs() < 1e-12);
        assert!(normal_cdf(f64::NAN).is_err());
    }

    #[test]
    fn cdf_matches_series_oracle() {
        let mut x = -8.0;
        while x <= 8.0 {
            let got = normal_cdf(x).unwrap();
            let want = oracle_cdf(x);
            assert!((got - want).abs() < 1e-12, "x={x}: {got} vs {want}");
            x += 0.173;
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-200, 1e-10, 0.01, 0.3, 0.5, 0.77, 0.999] {
            let x = normal_quantile(p).unwrap();
            let back = normal_cdf(x).unwrap();
            assert!(
                (back - p).abs() <= 1e-12 * p.max(1e-300) + 1e-15,
                "{p} -> {x} -> {back}"
            );
        }
    }

    #[test]
    fn mills_ratio_is_continuous_at_switch() {
        let a = inverse_mills(-29.999_999);
        let b = inverse_mills(-30.000_001);
        assert!((a - b).abs() < 1e-5);
        let h = 1e-6;
        let x = -2.3;
        let fd = (log_normal_cdf(x + h) - log_normal_cdf(x - h)) / (2.0 * h);
        assert!((fd - inverse_mills(x)).abs() < 1e-7);
    }
}

//! Distribution quantiles and tail probabilities used by the tests.
//!
//! Gamma, beta and error functions come from `statrs`; the inversions are
//! done here so their accuracy is under our control.

use crate::error::{Error, Result};
use statrs::function::{beta::beta_reg, erf::erfc, gamma};

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability { p })
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of the standard normal CDF.
///
/// Rational starting approximation (relative error ~1e-9) followed by one
/// Halley step against `erfc`. The result is limited by the accuracy of
/// `erfc`, about 1e-11.
pub fn normal_quantile(p: f64) -> Result<f64> {
    check_p(p)?;
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.38357751867269e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    };
    let x = if p < P_LOW {
        tail(p)
    } else if p > 1.0 - P_LOW {
        -tail(1.0 - p)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// CDF of the chi-square distribution.
pub fn chi2_cdf(dof: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma::gamma_lr(0.5 * dof, 0.5 * x)
    }
}

fn chi2_ln_pdf(dof: f64, x: f64) -> f64 {
    let k = 0.5 * dof;
    (k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - gamma::ln_gamma(k)
}

/// Inverse CDF of chi-square with `dof` degrees of freedom.
///
/// Wilson-Hilferty start, then Newton steps kept inside a shrinking bracket.
pub fn chi2_quantile(dof: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if !(dof > 0.0) || !dof.is_finite() {
        return Err(Error::InvalidDof { dof });
    }
    let z = normal_quantile(p)?;
    let c = 2.0 / (9.0 * dof);
    let mut x = dof * (1.0 - c + z * c.sqrt()).powi(3);
    if !(x > 0.0) {
        x = dof * 1e-3;
    }

    let mut lo = 0.0;
    let mut hi = x.max(1.0);
    while chi2_cdf(dof, hi) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let f = chi2_cdf(dof, x) - p;
        if f < 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let step = f / chi2_ln_pdf(dof, x).exp();
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-12 * next.max(1.0) || hi - lo <= 1e-14 * hi {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Two-sided tail probability of Student's t with `dof` degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> Result<f64> {
    if !(dof > 0.0) {
        return Err(Error::InvalidDof { dof });
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    Ok(beta_reg(0.5 * dof, 0.5, dof / (dof + t * t)))
}
